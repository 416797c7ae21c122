#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "csf/io.hpp"
#include "csf/torus.hpp"

using namespace csf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir =
      fs::temp_directory_path() / ("csflab_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(CSF_CLI_PATH);
  if (!args.empty()) cmd += " " + args;
  cmd += " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("curve json round-trips bitwise") {
  ClosedCurve orig = sample(TorusCurveParams{{1, 2}, 0.83}, 48);
  orig.metadata()["note"] = "line1\nline2 \"quoted\"";
  fs::path p = scratch("roundtrip") / "curve.json";
  write_curve(p, orig);
  ClosedCurve back = read_curve(p);
  REQUIRE(back.size() == orig.size());
  REQUIRE(back.dim() == orig.dim());
  REQUIRE((back.points() - orig.points()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.param_period() == orig.param_period());
  REQUIRE(back.metadata() == orig.metadata());

  // A second write of the re-read curve is byte-identical.
  fs::path p2 = p.parent_path() / "curve2.json";
  write_curve(p2, back);
  REQUIRE(read_file(p) == read_file(p2));
}

TEST_CASE("parse diagnostics carry line numbers and field paths") {
  auto code_and_msg = [](const std::string& text) {
    try {
      curve_from_json(text, "input.json");
      return std::pair<std::string, std::string>{"", ""};
    } catch (const Error& e) {
      return std::pair<std::string, std::string>{e.code, e.what()};
    }
  };

  auto [c1, m1] = code_and_msg("{\n  \"points\": [\n    [0, 1],\n    [1, oops]\n  ]\n}\n");
  REQUIRE(c1 == "parse-error");
  REQUIRE(m1.find("input.json") != std::string::npos);
  REQUIRE(m1.find("line 4") != std::string::npos);

  auto [c2, m2] = code_and_msg("{\"points\": [[0, 1], [1, \"x\"]]}");
  REQUIRE(c2 == "parse-error");
  REQUIRE(m2.find("points[1][1]") != std::string::npos);

  auto [c3, m3] = code_and_msg("{\"points\": [[0, 1]], \"param_period\": \"six\"}");
  REQUIRE(c3 == "parse-error");
  REQUIRE(m3.find("param_period") != std::string::npos);

  auto [c4, m4] =
      code_and_msg("{\"points\": [[0,1],[1,0],[0,-1],[-1,0],[0.7,0.7],[1,1],[0,2],[2,0]],"
                   " \"metadata\": {\"k\": 3}}");
  REQUIRE(c4 == "parse-error");
  REQUIRE(m4.find("metadata") != std::string::npos);

  REQUIRE_THROWS_AS(curve_from_json("{\"param_period\": 6.0}"), Error);
}

TEST_CASE("write_atomic creates parents and leaves no temp file") {
  fs::path dir = scratch("atomic");
  fs::path target = dir / "a" / "b" / "out.txt";
  write_atomic(target, "payload\n");
  REQUIRE(read_file(target) == "payload\n");
  REQUIRE_FALSE(fs::exists(target.string() + ".tmp"));
  // Overwrite in place.
  write_atomic(target, "second\n");
  REQUIRE(read_file(target) == "second\n");

  try {
    read_file(dir / "missing.json");
    FAIL("expected io-error");
  } catch (const Error& e) {
    REQUIRE(e.code == "io-error");
  }
}

TEST_CASE("verdict and suite serializations") {
  Verdict v;
  v.op = "rayleigh";
  v.inputs_digest = "00ff00ff00ff00ff";
  v.lhs = 1.0;
  v.rhs = 2.0;
  v.holds = true;
  v.tolerance = 0.5;
  std::string j = verdict_to_json(v);
  REQUIRE(j.find("\"op\": \"rayleigh\"") != std::string::npos);
  REQUIRE(j.find("\"inputs-digest\": \"00ff00ff00ff00ff\"") != std::string::npos);
  REQUIRE(j.find("\"holds\": true") != std::string::npos);
  REQUIRE(j.find("\"fit\"") == std::string::npos);
  REQUIRE(nlohmann::json::parse(j)["lhs"].get<double>() == 1.0);

  Verdict f;
  f.op = "growth";
  f.inputs_digest = "abc";
  f.fit = 0.25;
  std::string jf = verdict_to_json(f);
  REQUIRE(jf.find("\"fit\": 0.25") != std::string::npos);
  REQUIRE(jf.find("\"holds\"") == std::string::npos);

  std::string csv = suite_csv({v, f});
  auto ls = lines_of(csv);
  REQUIRE(ls.size() == 3);
  REQUIRE(ls[0] == "op,inputs-digest,lhs,rhs,holds,fit,tolerance");
  REQUIRE(ls[1].find("rayleigh,00ff00ff00ff00ff,") == 0);
  REQUIRE(ls[1].find(",true,,") != std::string::npos);
  REQUIRE(ls[2].find(",,0.25,") != std::string::npos);
}

TEST_CASE("spectrum csv groups repeated eigenvalues") {
  SpectrumResult s = spectrum(MultiCircle{2}, 4, 128);
  std::string csv = spectrum_to_csv(s);
  auto ls = lines_of(csv);
  REQUIRE(ls.size() == 6);  // header + 5 eigenvalues
  REQUIRE(ls[0] == "index,eigenvalue,multiplicity-group");
  auto group = [&](int i) { return ls[i + 1].back(); };
  REQUIRE(group(0) == '0');
  REQUIRE(group(1) == '1');
  REQUIRE(group(2) == '1');
  REQUIRE(group(3) == '2');
  REQUIRE(group(4) == '2');
}

TEST_CASE("trajectory directories contain per-sample curves and an index") {
  fs::path dir = scratch("traj");
  FlowTrajectory traj = torus_trajectory({1}, {-4.0, -1.0}, 32, {});
  write_trajectory(dir, traj, false);
  REQUIRE(fs::exists(dir / "curve_000000.json"));
  REQUIRE(fs::exists(dir / "curve_000001.json"));
  auto ls = lines_of(read_file(dir / "index.csv"));
  REQUIRE(ls.size() == 3);
  REQUIRE(ls[0] == "step,t,length,gaussian_measure");
  ClosedCurve c0 = read_curve(dir / "curve_000000.json");
  REQUIRE(std::abs(c0.points().row(0).norm() - std::sqrt(8.0)) <= 1e-12);

  fs::path dir2 = scratch("traj_ref");
  FlowTrajectory near = torus_trajectory({1}, {-1.125, -1.0}, 32, {});
  write_trajectory(dir2, near, false, MultiCircle{1});
  auto ls2 = lines_of(read_file(dir2 / "index.csv"));
  REQUIRE(ls2[0] == "step,t,length,gaussian_measure,eps_c0");
  // At t=-1 the curve is the reference shrinker: eps_c0 ends the line as ~0.
  double eps = std::stod(ls2[2].substr(ls2[2].rfind(',') + 1));
  REQUIRE(std::abs(eps) <= 1e-10);
}

TEST_CASE("cli: usage errors exit 2") {
  REQUIRE(run_cli("") == 2);
  REQUIRE(run_cli("frobnicate") == 2);
  REQUIRE(run_cli("torus") == 2);                       // missing --freqs
  REQUIRE(run_cli("torus --freqs 1 --grid 5") == 2);    // grid below range
  REQUIRE(run_cli("torus --freqs 0") == 2);             // invalid frequency list
  REQUIRE(run_cli("flow --t0 -1 --t1 -0.5") == 2);      // no initial curve chosen
}

TEST_CASE("cli: torus emits curve.json and radius.csv, deterministically") {
  fs::path a = scratch("cli_torus_a"), b = scratch("cli_torus_b");
  std::string args = "torus --freqs 1,2 --t -1 --grid 64 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);

  ClosedCurve c = read_curve(a / "curve.json");
  REQUIRE(c.size() == 64);
  REQUIRE(c.dim() == 4);
  for (int i = 0; i < c.size(); ++i)
    REQUIRE(std::abs(c.points().row(i).squaredNorm() - 2.0) <= 1e-10);
  REQUIRE(c.metadata().count("t") == 1);

  auto rl = lines_of(read_file(a / "radius.csv"));
  REQUIRE(rl[0] == "t,r");
  REQUIRE(rl.size() == 21);  // default sweep has 20 samples

  REQUIRE(read_file(a / "curve.json") == read_file(b / "curve.json"));
  REQUIRE(read_file(a / "radius.csv") == read_file(b / "radius.csv"));
}

TEST_CASE("cli: spectrum output matches the double-cover eigenvalues") {
  fs::path a = scratch("cli_spec_a"), b = scratch("cli_spec_b");
  std::string args = "spectrum --multiplicity 2 --count 6 --grid 256 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  auto ls = lines_of(read_file(a / "spectrum.csv"));
  REQUIRE(ls.size() == 8);  // header + 7
  const double expected[7] = {0.0, 0.125, 0.125, 0.5, 0.5, 1.125, 1.125};
  for (int i = 0; i < 7; ++i) {
    std::string row = ls[i + 1];
    auto c1 = row.find(','), c2 = row.rfind(',');
    double ev = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
    REQUIRE(std::abs(ev - expected[i]) <= 1e-3);
  }
  REQUIRE(read_file(a / "spectrum.csv") == read_file(b / "spectrum.csv"));
}

TEST_CASE("cli: verify subcommands set the exit code from the verdict") {
  fs::path ok = scratch("cli_rayleigh");
  REQUIRE(run_cli("verify rayleigh --mult 2 --seeds 3 --grid 128 --out " +
                  ok.string()) == 0);
  std::string verdict = read_file(ok / "verdict.json");
  REQUIRE(verdict.find("\"holds\": true") != std::string::npos);
  auto suite = lines_of(read_file(ok / "suite.csv"));
  REQUIRE(suite.size() == 5);  // header + 3 instances + aggregate
  REQUIRE(suite[0] == "op,inputs-digest,lhs,rhs,holds,fit,tolerance");

  fs::path bad = scratch("cli_growth_bad");
  REQUIRE(run_cli("verify growth --torus 1 --expect 0.9 --tol 0.01 --samples 9 "
                  "--grid 64 --out " +
                  bad.string()) == 1);
  REQUIRE(read_file(bad / "verdict.json").find("\"holds\": false") !=
          std::string::npos);

  fs::path good = scratch("cli_growth_good");
  REQUIRE(run_cli("verify growth --torus 1 --expect 1.0 --tol 0.02 --samples 9 "
                  "--grid 64 --out " +
                  good.string()) == 0);
  nlohmann::json gv = nlohmann::json::parse(read_file(good / "verdict.json"));
  REQUIRE(std::abs(gv["fit"].get<double>() - 1.0) <= 0.02);
}

TEST_CASE("cli: codim reports the rank transition") {
  fs::path full = scratch("cli_codim3");
  REQUIRE(run_cli("codim --torus 1,2 --grid 128 --out " + full.string()) == 0);
  nlohmann::json j = nlohmann::json::parse(read_file(full / "codim.json"));
  REQUIRE(j["codimension"].get<int>() == 3);
  REQUIRE(j["spatial_rank"].get<int>() == 4);
  REQUIRE(j["singular_values"].size() == 4);

  fs::path thin = scratch("cli_codim1");
  REQUIRE(run_cli("codim --torus 1,2 --t -5e-5 --r-from-t --grid 128 --out " +
                  thin.string()) == 0);
  nlohmann::json j2 = nlohmann::json::parse(read_file(thin / "codim.json"));
  REQUIRE(j2["codimension"].get<int>() == 1);
}

TEST_CASE("cli: entropy of the unit circle") {
  fs::path dir = scratch("cli_entropy");
  REQUIRE(run_cli("entropy --circle 1.0 --grid 64 --restarts 2 --out " +
                  dir.string()) == 0);
  nlohmann::json j = nlohmann::json::parse(read_file(dir / "entropy.json"));
  REQUIRE(std::abs(j["value"].get<double>() - 1.5203469010662807) <= 5e-3);
  REQUIRE(std::abs(j["s"].get<double>() - std::sqrt(2.0)) <= 5e-2);
}

TEST_CASE("cli: caloric mode tracks its closed-form amplitude") {
  fs::path dir = scratch("cli_caloric");
  REQUIRE(run_cli("caloric --r 1 --mode 1 --dt 1e-3 --grid 64 --out " +
                  dir.string()) == 0);
  auto ls = lines_of(read_file(dir / "caloric.csv"));
  REQUIRE(ls[0] == "step,t,radius,amplitude,expected");
  REQUIRE(ls.size() >= 3);
  std::string last = ls.back();
  std::vector<double> cols;
  std::size_t pos = 0;
  while (pos != std::string::npos) {
    std::size_t next = last.find(',', pos);
    cols.push_back(std::stod(last.substr(pos, next - pos)));
    pos = next == std::string::npos ? next : next + 1;
  }
  REQUIRE(cols.size() == 5);
  REQUIRE(std::abs(cols[4] - 0.5) <= 1e-12);        // (t1/t0)^{1/2} = 0.5
  REQUIRE(std::abs(cols[3] - cols[4]) <= 5e-3);     // tracked vs closed form
  REQUIRE(std::abs(cols[2] - 0.5) <= 2e-3);         // radius sqrt(-2 t1)
}

TEST_CASE("cli: flow writes a trajectory directory") {
  fs::path dir = scratch("cli_flow");
  REQUIRE(run_cli("flow --circle 1 --t0 -0.5 --t1 -0.45 --dt 1e-3 --grid 32 --out " +
                  dir.string()) == 0);
  REQUIRE(fs::exists(dir / "curve_000000.json"));
  auto ls = lines_of(read_file(dir / "index.csv"));
  REQUIRE(ls[0] == "step,t,length,gaussian_measure");
  REQUIRE(ls.size() == 52);  // 50 steps at cadence 1, first and last sampled
}

TEST_CASE("cli: json config supplies global and subcommand options") {
  fs::path dir = scratch("cli_config");
  write_atomic(dir / "cfg.json", "{\"grid\": 48, \"torus\": {\"t\": -4}}\n");
  REQUIRE(run_cli("torus --freqs 1 --config " + (dir / "cfg.json").string() +
                  " --out " + dir.string()) == 0);
  ClosedCurve c = read_curve(dir / "curve.json");
  REQUIRE(c.size() == 48);
  REQUIRE(std::abs(c.points().row(0).squaredNorm() - 8.0) <= 1e-10);

  write_atomic(dir / "bad.json", "{\"grid\": 48, \"bogus\": 1}\n");
  REQUIRE(run_cli("torus --freqs 1 --config " + (dir / "bad.json").string() +
                  " --out " + dir.string()) == 2);
  write_atomic(dir / "syntax.json", "{\"grid\": \n");
  REQUIRE(run_cli("torus --freqs 1 --config " + (dir / "syntax.json").string() +
                  " --out " + dir.string()) == 2);
}
