// csflab: command-line laboratory for the csf library. One binary, subcommand
// style; JSON config overridable by flags; deterministic given (config, seed).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csf/curve.hpp"
#include "csf/flow.hpp"
#include "csf/gaussian.hpp"
#include "csf/geometry.hpp"
#include "csf/io.hpp"
#include "csf/numerics.hpp"
#include "csf/spectrum.hpp"
#include "csf/torus.hpp"
#include "csf/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
  int grid = 512;
  std::string out = ".";
  unsigned long long seed = 0;
  bool quiet = false;
  bool check_failed = false;
};

Globals G;

void say(const std::string& line) {
  if (!G.quiet) std::cout << line << "\n";
}

fs::path outpath(const std::string& name) { return fs::path(G.out) / name; }

// Config files are JSON objects; one nesting level addresses subcommand
// options ({"grid":256, "torus":{"freqs":"1,2"}}). Unknown keys are rejected
// by the parser (config_extras_mode::error).
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::FileError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::FileError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    flatten({}, j, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
  static void flatten(std::vector<std::string> parents, const nlohmann::json& j,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, val] : j.items()) {
      if (val.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(std::move(p), val, items);
      } else {
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = key;
        if (val.is_array())
          for (const auto& e : val) item.inputs.push_back(scalar(e));
        else
          item.inputs.push_back(scalar(val));
        items.push_back(std::move(item));
      }
    }
  }
};

std::vector<int> parse_freqs(const std::string& s) {
  std::vector<int> freqs;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      int k = std::stoi(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      freqs.push_back(k);
    } catch (const std::exception&) {
      throw csf::Error("invalid-frequencies", "cannot parse frequency '" + tok + "'");
    }
  }
  if (freqs.empty()) throw csf::Error("invalid-frequencies", "empty frequency list");
  return freqs;
}

std::string freqs_label(const std::vector<int>& freqs) {
  std::string s;
  for (std::size_t i = 0; i < freqs.size(); ++i)
    s += (i ? "," : "") + std::to_string(freqs[i]);
  return s;
}

struct Range {
  double a = 0.0, b = 0.0;
  int n = 0;
};

Range parse_range(const std::string& s, int default_n) {
  Range r;
  r.n = default_n;
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  try {
    if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument(s);
    r.a = std::stod(parts[0]);
    r.b = std::stod(parts[1]);
    if (parts.size() == 3) r.n = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw csf::Error("invalid-argument", "cannot parse range '" + s + "' (want a:b[:n])");
  }
  if (r.n < 2) throw csf::Error("invalid-argument", "range needs at least 2 samples");
  return r;
}

// Log-spaced negative times from a to b (geometric in -t, order preserved).
std::vector<double> log_times(const Range& r) {
  if (!(r.a < 0.0) || !(r.b < 0.0))
    throw csf::Error("invalid-time", "time window must be negative");
  std::vector<double> ts(r.n);
  const double la = std::log(-r.a), lb = std::log(-r.b);
  for (int i = 0; i < r.n; ++i) {
    double f = static_cast<double>(i) / (r.n - 1);
    ts[i] = -std::exp(la + f * (lb - la));
  }
  return ts;
}

std::string digest(const std::string& canonical) {
  return csf::hex_digest(csf::fnv1a(canonical));
}

void emit_verdicts(const csf::Verdict& agg, const std::vector<csf::Verdict>& rows) {
  csf::write_atomic(outpath("verdict.json"), csf::verdict_to_json(agg));
  auto all = rows;
  all.push_back(agg);
  csf::write_atomic(outpath("suite.csv"), csf::suite_csv(all));
  say("wrote " + outpath("verdict.json").string() + " and " +
      outpath("suite.csv").string());
  std::ostringstream line;
  line << agg.op << ": lhs=" << csf::format17(agg.lhs)
       << " rhs=" << csf::format17(agg.rhs);
  if (agg.fit) line << " fit=" << csf::format17(*agg.fit);
  if (agg.holds) line << " holds=" << (*agg.holds ? "true" : "false");
  say(line.str());
  if (agg.holds && !*agg.holds) G.check_failed = true;
}

// Random trigonometric polynomial (parameter modes <= kmax) on an M-node grid.
Eigen::VectorXd random_trig(std::mt19937_64& rng, int m, double period, int kmax) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> a(kmax + 1), b(kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    a[k] = gauss(rng);
    b[k] = gauss(rng);
  }
  Eigen::VectorXd u(m);
  for (int i = 0; i < m; ++i) {
    double th = period * i / m, v = 0.0;
    for (int k = 0; k <= kmax; ++k)
      v += a[k] * std::cos(k * th) + b[k] * std::sin(k * th);
    u[i] = v;
  }
  return u;
}

std::mt19937_64 seeded_rng(unsigned long long instance) {
  std::seed_seq seq{static_cast<unsigned long long>(G.seed), instance};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------- torus ----

struct TorusArgs {
  std::string freqs_str = "1";
  double t = -1.0;
  double r = 0.0;  // 0 => solve from t
  std::string radius_sweep = "-100:-0.01:20";
  std::string entropy_sweep, distance_sweep, window = "-1e8:-1e4";
  int k_mult = 0;  // 0 => auto (k_m for -t >= 1, k_1 below)
  bool decay_report = false;
  int samples = 17;
};

void run_torus(const TorusArgs& a) {
  const auto freqs = parse_freqs(a.freqs_str);
  double r = a.r > 0.0 ? a.r : csf::solve_radius(freqs, a.t);
  csf::ClosedCurve curve = csf::sample({freqs, r}, G.grid);
  curve.metadata()["t"] = csf::format17(a.t);
  csf::write_curve(outpath("curve.json"), curve);
  say("wrote " + outpath("curve.json").string() + " (r=" + csf::format17(r) + ")");

  {
    Range rr = parse_range(a.radius_sweep, 20);
    std::string csv = "t,r\n";
    for (double t : log_times(rr))
      csv += csf::format17(t) + "," + csf::format17(csf::solve_radius(freqs, t)) + "\n";
    csf::write_atomic(outpath("radius.csv"), csv);
    say("wrote " + outpath("radius.csv").string());
  }

  if (!a.entropy_sweep.empty()) {
    Range er = parse_range(a.entropy_sweep, 9);
    std::string csv = "t,r,s,entropy\n";
    for (double t : log_times(er)) {
      double rt = csf::solve_radius(freqs, t);
      csf::EntropyOptions opts;
      opts.seed = static_cast<unsigned>(G.seed);
      csf::EntropyResult e = csf::entropy(csf::sample({freqs, rt}, G.grid), opts);
      csv += csf::format17(t) + "," + csf::format17(rt) + "," +
             csf::format17(e.argmax_scale) + "," + csf::format17(e.value) + "\n";
    }
    csf::write_atomic(outpath("entropy.csv"), csv);
    say("wrote " + outpath("entropy.csv").string());
  }

  if (!a.distance_sweep.empty()) {
    Range dr = parse_range(a.distance_sweep, 9);
    std::string csv = "t,k,distance\n";
    for (double t : log_times(dr)) {
      int k = a.k_mult > 0 ? a.k_mult : (-t >= 1.0 ? freqs.back() : freqs.front());
      double d = csf::rescaled_distance_to_circle(freqs, t, k, G.grid);
      csv += csf::format17(t) + "," + std::to_string(k) + "," + csf::format17(d) + "\n";
    }
    csf::write_atomic(outpath("distance.csv"), csv);
    say("wrote " + outpath("distance.csv").string());
  }

  if (a.decay_report) {
    Range w = parse_range(a.window, 17);
    csf::DecayFit fit =
        csf::graph_decay_exponent(freqs, w.a, w.b, a.samples, G.grid);
    std::string csv = "freqs,window,slope,stderr\n\"" + freqs_label(freqs) + "\"," +
                      csf::format17(w.a) + ":" + csf::format17(w.b) + "," +
                      csf::format17(fit.slope) + "," +
                      csf::format17(fit.stderr_slope) + "\n";
    csf::write_atomic(outpath("decay.csv"), csv);
    say("wrote " + outpath("decay.csv").string() +
        " (slope=" + csf::format17(fit.slope) + ")");
  }
}

// ------------------------------------------------------------- spectrum ----

struct SpectrumArgs {
  int multiplicity = 1;
  double radius = std::sqrt(2.0);
  int count = 8;
  bool eigenfunctions = false;
};

void run_spectrum(const SpectrumArgs& a) {
  csf::SpectrumResult s =
      csf::spectrum(csf::MultiCircle{a.multiplicity, a.radius}, a.count, G.grid);
  csf::write_atomic(outpath("spectrum.csv"), csf::spectrum_to_csv(s));
  say("wrote " + outpath("spectrum.csv").string());
  if (a.eigenfunctions) {
    csf::write_atomic(outpath("eigenfunctions.json"), csf::eigenfunctions_to_json(s));
    say("wrote " + outpath("eigenfunctions.json").string());
  }
}

// --------------------------------------------------------- flow/rescaled ----

struct FlowArgs {
  double circle = 0.0;  // radius, 0 => unset
  int mult = 1;
  std::string torus;  // freqs, empty => unset
  std::string in;     // curve file
  double t0 = -1.0, t1 = -0.5;
  double tau0 = 0.0, tau1 = 3.0;
  double dt = 1e-4, dtau = 1e-3;
  std::string scheme = "semi-implicit";
  int cadence = 0;  // 0 => aim for ~64 recorded samples
  bool attach = false;
  int reference_mult = 0;  // 0 => no reference column
  double reference_radius = std::sqrt(2.0);
};

csf::Scheme parse_scheme(const std::string& s) {
  if (s == "explicit") return csf::Scheme::explicit_euler;
  if (s == "semi-implicit") return csf::Scheme::semi_implicit;
  throw csf::Error("invalid-argument", "unknown scheme '" + s + "'");
}

csf::ClosedCurve flow_initial(const FlowArgs& a, bool rescaled) {
  int sources = (a.circle > 0.0) + !a.torus.empty() + !a.in.empty();
  if (sources != 1)
    throw csf::Error("invalid-argument",
                     "need exactly one of --circle, --torus, --in");
  if (a.circle > 0.0) return csf::sample(csf::MultiCircle{a.mult, a.circle}, G.grid);
  if (!a.in.empty()) return csf::read_curve(a.in);
  const auto freqs = parse_freqs(a.torus);
  if (!rescaled) return csf::sample({freqs, csf::solve_radius(freqs, a.t0)}, G.grid);
  // Rescaled runs start from the tau0 snapshot of the rescaled torus solution.
  const double t = -std::exp(-a.tau0);
  csf::ClosedCurve c = csf::sample({freqs, csf::solve_radius(freqs, t)}, G.grid);
  Eigen::MatrixXd pts = c.points() / std::sqrt(-t);
  return csf::ClosedCurve(std::move(pts), c.param_period(),
                          {{"family", "rescaled-torus"}});
}

void run_flow_cmd(const FlowArgs& a, bool rescaled) {
  csf::ClosedCurve initial = flow_initial(a, rescaled);
  csf::FlowOptions opts;
  opts.dt = rescaled ? a.dtau : a.dt;
  opts.scheme = parse_scheme(a.scheme);
  const double w0 = rescaled ? a.tau0 : a.t0, w1 = rescaled ? a.tau1 : a.t1;
  int nsteps = static_cast<int>(std::ceil((w1 - w0) / opts.dt - 1e-12));
  opts.cadence = a.cadence > 0 ? a.cadence : std::max(1, nsteps / 64);
  if (a.attach)
    for (int j = 0; j < initial.dim(); ++j)
      opts.fields["x" + std::to_string(j)] =
          csf::make_field(initial, initial.points().col(j));
  csf::FlowTrajectory traj = rescaled ? csf::run_rescaled(initial, w0, w1, opts)
                                      : csf::run_flow(initial, w0, w1, opts);
  std::optional<csf::MultiCircle> ref;
  if (a.reference_mult > 0)
    ref = csf::MultiCircle{a.reference_mult, a.reference_radius};
  csf::write_trajectory(fs::path(G.out), traj, rescaled, ref);
  say("wrote " + (fs::path(G.out) / "index.csv").string() + " (" +
      std::to_string(traj.samples.size()) + " samples)");
}

// -------------------------------------------------------------- caloric ----

struct CaloricArgs {
  double r = 1.0;
  int mult = 1;
  int mode = 1;
  double t1 = 0.0;  // 0 => t0/4
  double dt = 1e-4;
  std::string scheme = "semi-implicit";
  int cadence = 0;
};

void run_caloric(const CaloricArgs& a) {
  if (a.r <= 0.0) throw csf::Error("invalid-radius", "--r must be positive");
  if (a.mode < 0) throw csf::Error("invalid-argument", "--mode must be >= 0");
  const double t0 = -0.5 * a.r * a.r;
  const double t1 = a.t1 != 0.0 ? a.t1 : t0 / 4;
  csf::ClosedCurve c0 = csf::sample(csf::MultiCircle{a.mult, a.r}, G.grid);
  const int m = c0.size();
  Eigen::VectorXd u0(m);
  for (int i = 0; i < m; ++i) u0[i] = std::cos(a.mode * csf::two_pi * i / m);
  csf::FlowOptions opts;
  opts.dt = a.dt;
  opts.scheme = parse_scheme(a.scheme);
  int nsteps = static_cast<int>(std::ceil((t1 - t0) / a.dt - 1e-12));
  opts.cadence = a.cadence > 0 ? a.cadence : std::max(1, nsteps / 64);
  opts.fields["u"] = csf::make_field(c0, u0);
  csf::FlowTrajectory traj = csf::run_flow(c0, t0, t1, opts);

  // Mode amplitude by projection onto the initial parameter grid; the closed
  // form for the shrinking circle is a0 * (t/t0)^{k^2/(2 mult^2)}.
  const double expo = a.mode * a.mode / (2.0 * a.mult * a.mult);
  std::string csv = "step,t,radius,amplitude,expected\n";
  for (const auto& s : traj.samples) {
    const auto& u = s.fields.at("u").values;
    double amp = 0.0;
    for (int i = 0; i < m; ++i) amp += u[i] * std::cos(a.mode * csf::two_pi * i / m);
    amp *= (a.mode == 0 ? 1.0 : 2.0) / m;
    double radius = csf::arc_length(s.curve) / (csf::two_pi * a.mult);
    csv += std::to_string(s.step) + "," + csf::format17(s.t) + "," +
           csf::format17(radius) + "," + csf::format17(amp) + "," +
           csf::format17(std::pow(s.t / t0, expo)) + "\n";
  }
  csf::write_atomic(outpath("caloric.csv"), csv);
  say("wrote " + outpath("caloric.csv").string());
}

// ---------------------------------------------------------------- codim ----

struct CodimArgs {
  std::string torus = "1,2";
  double t = -1.0;
  double r = 0.0;  // 0 => default 1.0 unless --r-from-t
  bool r_from_t = false;
  double threshold = 1e-6;
};

void run_codim(const CodimArgs& a) {
  const auto freqs = parse_freqs(a.torus);
  if (a.r_from_t && a.r > 0.0)
    throw csf::Error("invalid-argument", "--r and --r-from-t are exclusive");
  double r = a.r_from_t ? csf::solve_radius(freqs, a.t) : (a.r > 0.0 ? a.r : 1.0);
  csf::ClosedCurve c = csf::sample({freqs, r}, G.grid);
  csf::CodimReport rep =
      csf::effective_codimension(c, csf::GaussianContext{a.t}, a.threshold);
  std::string json = "{\"codimension\": " + std::to_string(rep.codimension) +
                     ", \"spatial_rank\": " + std::to_string(rep.spatial_rank) +
                     ", \"threshold\": " + csf::format17(rep.rel_threshold) +
                     ", \"r\": " + csf::format17(r) + ", \"singular_values\": [";
  for (std::size_t i = 0; i < rep.singular_values.size(); ++i)
    json += (i ? ", " : "") + csf::format17(rep.singular_values[i]);
  json += "]}\n";
  csf::write_atomic(outpath("codim.json"), json);
  say("wrote " + outpath("codim.json").string());
  say("codimension " + std::to_string(rep.codimension) + " (rank " +
      std::to_string(rep.spatial_rank) + ", r=" + csf::format17(r) + ")");
}

// -------------------------------------------------------------- entropy ----

struct EntropyArgs {
  std::string in, torus;
  double circle = 0.0;
  int mult = 1;
  double t = -1.0;
  int restarts = 8;
};

void run_entropy(const EntropyArgs& a) {
  int sources = (a.circle > 0.0) + !a.torus.empty() + !a.in.empty();
  if (sources != 1)
    throw csf::Error("invalid-argument",
                     "need exactly one of --circle, --torus, --in");
  csf::ClosedCurve c = [&] {
    if (a.circle > 0.0) return csf::sample(csf::MultiCircle{a.mult, a.circle}, G.grid);
    if (!a.in.empty()) return csf::read_curve(a.in);
    const auto freqs = parse_freqs(a.torus);
    return csf::sample({freqs, csf::solve_radius(freqs, a.t)}, G.grid);
  }();
  csf::EntropyOptions opts;
  opts.restarts = a.restarts;
  opts.seed = static_cast<unsigned>(G.seed);
  csf::EntropyResult e = csf::entropy(c, opts);
  csf::write_atomic(outpath("entropy.json"), csf::entropy_to_json(e));
  say("wrote " + outpath("entropy.json").string() +
      " (value=" + csf::format17(e.value) + ")");
}

// --------------------------------------------------------------- verify ----

struct VerifyCommon {
  int seeds = 100;
  double expect = std::nan("");
  double tol = 0.0;  // 0 => per-check default
};

struct RayleighArgs : VerifyCommon {
  int mult = 2;
  int count = 8;
};

void run_verify_rayleigh(const RayleighArgs& a) {
  csf::SpectrumResult spec =
      csf::spectrum(csf::MultiCircle{a.mult}, a.count, G.grid);
  const csf::ClosedCurve& c = spec.carrier;
  std::vector<csf::Verdict> rows;
  bool all = true;
  csf::Verdict worst;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < a.seeds; ++k) {
    auto rng = seeded_rng(static_cast<unsigned long long>(k));
    std::uniform_int_distribution<int> pick_l(0, a.count - 1);
    int l = pick_l(rng);
    Eigen::VectorXd vals = random_trig(rng, c.size(), c.param_period(), 8);
    csf::CheckResult res =
        csf::rayleigh_check(csf::make_field(c, vals), spec, l);
    csf::Verdict v{"rayleigh",
                   digest("rayleigh|mult=" + std::to_string(a.mult) + "|grid=" +
                          std::to_string(G.grid) + "|l=" + std::to_string(l) +
                          "|seed=" + std::to_string(G.seed) + "/" + std::to_string(k)),
                   res.lhs,
                   res.rhs,
                   res.holds,
                   std::nullopt,
                   1e-6};
    all = all && res.holds;
    double margin = res.rhs - res.lhs;
    if (margin < worst_margin) {
      worst_margin = margin;
      worst = v;
    }
    rows.push_back(std::move(v));
  }
  csf::Verdict agg = worst;
  agg.inputs_digest = digest("rayleigh|suite|mult=" + std::to_string(a.mult) +
                             "|seeds=" + std::to_string(a.seeds) +
                             "|seed=" + std::to_string(G.seed));
  agg.holds = all;
  emit_verdicts(agg, rows);
}

struct PoincareArgs : VerifyCommon {
  int mult = 2;
  int level = 0;
  double mu = 0.1;
  double t = -1.0;
  int count = 8;
};

void run_verify_poincare(const PoincareArgs& a) {
  csf::SpectrumResult spec =
      csf::spectrum(csf::MultiCircle{a.mult}, a.count, G.grid);
  const csf::ClosedCurve& c = spec.carrier;
  const int m = c.size();
  csf::GaussianContext ctx{a.t};
  // Near-eigenfunctions for levels beyond 0: the exact continuum modes.
  std::vector<csf::ScalarField> psis;
  for (int k = 1; 2 * k - 1 <= a.level; ++k) {
    Eigen::VectorXd cs(m), sn(m);
    for (int i = 0; i < m; ++i) {
      double th = c.param_period() * i / m;
      cs[i] = std::cos(k * th);
      sn[i] = std::sin(k * th);
    }
    psis.push_back(csf::make_field(c, cs));
    if (2 * k <= a.level) psis.push_back(csf::make_field(c, sn));
  }
  csf::ScalarField one = csf::make_field(c, Eigen::VectorXd::Ones(m));
  std::vector<csf::Verdict> rows;
  bool all = true;
  csf::Verdict worst;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < a.seeds; ++k) {
    auto rng = seeded_rng(900 + static_cast<unsigned long long>(k));
    Eigen::VectorXd vals = random_trig(rng, m, c.param_period(), 8);
    csf::ScalarField u = csf::make_field(c, vals);
    // Enforce the orthogonality preconditions in the same discrete inner
    // product the verifier checks.
    auto project_off = [&](const csf::ScalarField& w) {
      double ww = csf::weighted_inner_product(w, w, c, ctx);
      double uw = csf::weighted_inner_product(u, w, c, ctx);
      u.values -= (uw / ww) * w.values;
    };
    project_off(one);
    for (const auto& p : psis) project_off(p);
    csf::CheckResult res = csf::poincare_verify(c, ctx, u, spec, a.level, a.mu, psis);
    csf::Verdict v{"poincare",
                   digest("poincare|mult=" + std::to_string(a.mult) + "|l=" +
                          std::to_string(a.level) + "|mu=" + csf::format17(a.mu) +
                          "|seed=" + std::to_string(G.seed) + "/" + std::to_string(k)),
                   res.lhs,
                   res.rhs,
                   res.holds,
                   std::nullopt,
                   1e-6};
    all = all && res.holds;
    double margin = res.rhs - res.lhs;
    if (margin < worst_margin) {
      worst_margin = margin;
      worst = v;
    }
    rows.push_back(std::move(v));
  }
  csf::Verdict agg = worst;
  agg.inputs_digest = digest("poincare|suite|l=" + std::to_string(a.level) +
                             "|seeds=" + std::to_string(a.seeds) +
                             "|seed=" + std::to_string(G.seed));
  agg.holds = all;
  emit_verdicts(agg, rows);
}

struct DriftArgs : VerifyCommon {
  std::string torus = "1,2";
  double t = -1.0;
};

void run_verify_drift(const DriftArgs& a) {
  const auto freqs = parse_freqs(a.torus);
  const double tol = a.tol > 0.0 ? a.tol : 0.2;
  const std::vector<int> grids{128, 256, 512};
  std::vector<csf::Verdict> rows;
  bool all = true;
  csf::Verdict worst;
  double worst_dev = -1.0;
  for (int k = 0; k < a.seeds; ++k) {
    auto rng = seeded_rng(1700 + static_cast<unsigned long long>(k));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> lh, lr;
    double rfin = 0.0;
    Eigen::VectorXd dir;
    for (int g : grids) {
      csf::ClosedCurve c = csf::sample({freqs, csf::solve_radius(freqs, a.t)}, g);
      if (dir.size() == 0) {
        dir.resize(c.dim());
        for (int j = 0; j < c.dim(); ++j) dir[j] = gauss(rng);
        dir.normalize();
      }
      double res = csf::drift_identity_check(csf::make_linear_caloric(c, dir), c, a.t);
      lh.push_back(std::log(csf::two_pi / g));
      lr.push_back(std::log(res));
      rfin = res;
    }
    csf::LineFit fit = csf::ols_fit(lh, lr);
    bool ok = std::abs(fit.slope - 2.0) <= tol;
    csf::Verdict v{"drift",
                   digest("drift|freqs=" + freqs_label(freqs) + "|t=" +
                          csf::format17(a.t) + "|seed=" + std::to_string(G.seed) +
                          "/" + std::to_string(k)),
                   rfin,
                   0.0,
                   ok,
                   fit.slope,
                   tol};
    all = all && ok;
    double dev = std::abs(fit.slope - 2.0);
    if (dev > worst_dev) {
      worst_dev = dev;
      worst = v;
    }
    rows.push_back(std::move(v));
  }
  csf::Verdict agg = worst;
  agg.inputs_digest = digest("drift|suite|freqs=" + freqs_label(freqs) +
                             "|seeds=" + std::to_string(a.seeds) +
                             "|seed=" + std::to_string(G.seed));
  agg.holds = all;
  emit_verdicts(agg, rows);
}

struct CarlemanArgs : VerifyCommon {
  CarlemanArgs() { seeds = 0; }  // default: the worked caloric-mode example
  int sigma_mult = 2;
  double alpha = 4.0;
  double delta = 1.0;
  int caloric_mode = 1;
  double t0 = -2.0, t1 = -1.0;
  int time_samples = 65;
};

void run_verify_carleman(const CarlemanArgs& a) {
  if (a.t0 >= a.t1) throw csf::Error("invalid-time", "need --t0 < --t1");
  csf::ClosedCurve sigma = csf::sample(csf::MultiCircle{a.sigma_mult}, G.grid);
  std::vector<double> times(a.time_samples);
  for (int i = 0; i < a.time_samples; ++i)
    times[i] = a.t0 + (a.t1 - a.t0) * i / (a.time_samples - 1);

  std::vector<csf::Verdict> rows;
  bool all = true;
  csf::Verdict worst;
  double worst_margin = std::numeric_limits<double>::infinity();
  auto run_one = [&](const std::string& tag,
                     const std::function<double(double, double)>& f) {
    csf::SpaceTimeField u = csf::sample_space_time(sigma, times, f);
    csf::CarlemanResult res = csf::carleman_verify(u, sigma, a.alpha, a.delta);
    csf::Verdict v{"carleman",
                   digest("carleman|mult=" + std::to_string(a.sigma_mult) +
                          "|alpha=" + csf::format17(a.alpha) + "|delta=" +
                          csf::format17(a.delta) + "|" + tag),
                   res.lhs,
                   res.rhs,
                   res.holds,
                   std::nullopt,
                   2 * res.est_error};
    all = all && res.holds;
    double margin = res.rhs - res.lhs;
    if (margin < worst_margin) {
      worst_margin = margin;
      worst = v;
    }
    rows.push_back(std::move(v));
  };

  if (a.seeds <= 0) {
    // Caloric mode on the static curve: u_t = laplacian u exactly.
    const double rate = a.caloric_mode * a.caloric_mode /
                        (2.0 * a.sigma_mult * a.sigma_mult);
    const int mode = a.caloric_mode;
    run_one("caloric-mode=" + std::to_string(mode), [=](double th, double t) {
      return std::exp(-rate * t) * std::cos(mode * th);
    });
  } else {
    for (int k = 0; k < a.seeds; ++k) {
      auto rng = seeded_rng(4100 + static_cast<unsigned long long>(k));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_int_distribution<int> pick_k(0, 4);
      std::uniform_real_distribution<double> pick_w(0.0, 3.0), phase(0.0, csf::two_pi);
      struct Term {
        double amp, w, p1, p2;
        int k;
      };
      std::vector<Term> terms(6);
      for (auto& tm : terms)
        tm = {gauss(rng), pick_w(rng), phase(rng), phase(rng), pick_k(rng)};
      run_one("seed=" + std::to_string(G.seed) + "/" + std::to_string(k),
              [terms](double th, double t) {
                double v = 0.0;
                for (const auto& tm : terms)
                  v += tm.amp * std::cos(tm.k * th + tm.p1) *
                       std::cos(tm.w * t + tm.p2);
                return v;
              });
    }
  }
  csf::Verdict agg = worst;
  agg.inputs_digest =
      digest("carleman|suite|alpha=" + csf::format17(a.alpha) + "|delta=" +
             csf::format17(a.delta) + "|seeds=" + std::to_string(a.seeds) +
             "|seed=" + std::to_string(G.seed));
  agg.holds = all;
  emit_verdicts(agg, rows);
}

struct GrowthArgs : VerifyCommon {
  std::string torus = "1,2";
  std::string window = "-1e8:-1e4";
  std::string field = "x0";
  int samples = 33;
};

void run_verify_growth(const GrowthArgs& a) {
  const auto freqs = parse_freqs(a.torus);
  Range w = parse_range(a.window, a.samples);
  std::vector<int> coords(2 * freqs.size());
  for (std::size_t j = 0; j < coords.size(); ++j) coords[j] = static_cast<int>(j);
  csf::FlowTrajectory traj =
      csf::torus_trajectory(freqs, log_times(w), G.grid, coords);
  csf::GrowthFit fit = csf::growth_fit(traj, a.field);
  const double tol = a.tol > 0.0 ? a.tol : 0.02;
  csf::Verdict v{"growth",
                 digest("growth|freqs=" + freqs_label(freqs) + "|field=" + a.field +
                        "|window=" + a.window),
                 fit.exponent_d,
                 fit.constant_C,
                 std::nullopt,
                 fit.exponent_d,
                 tol};
  if (!std::isnan(a.expect)) v.holds = std::abs(fit.exponent_d - a.expect) <= tol;
  emit_verdicts(v, {});
}

struct RigidityArgs : VerifyCommon {
  int mult = 1;
  int mode = 0;
  double amplitude = 0.01;
  double tau_end = 1.5;
  double dtau = 2e-3;
  int cadence = 25;
};

void run_verify_rigidity(const RigidityArgs& a) {
  csf::MultiCircle ref{a.mult};
  csf::ClosedCurve c0 = csf::sample(ref, G.grid);
  Eigen::VectorXd p(c0.size());
  for (int i = 0; i < c0.size(); ++i)
    p[i] = std::cos(a.mode * csf::two_pi * i / c0.size());
  csf::RigidityOptions opts;
  opts.dtau = a.dtau;
  opts.cadence = a.cadence;
  csf::RigidityResult res = csf::rigidity_experiment(
      ref, csf::make_field(c0, p), a.amplitude, a.tau_end, opts);
  const double tol = a.tol > 0.0 ? a.tol : 0.05;
  csf::Verdict v{"rigidity",
                 digest("rigidity|mult=" + std::to_string(a.mult) + "|mode=" +
                        std::to_string(a.mode) + "|amp=" + csf::format17(a.amplitude)),
                 res.stable_zero ? 0.0 : res.rate,
                 res.stderr_rate,
                 std::nullopt,
                 std::nullopt,
                 tol};
  if (!res.stable_zero) v.fit = res.rate;
  if (!std::isnan(a.expect))
    v.holds = !res.stable_zero && std::abs(res.rate - a.expect) <= tol;
  if (res.stable_zero) say("rigidity: stable-zero (perturbation never grew)");
  emit_verdicts(v, {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csflab: numerical laboratory for ancient curve shortening flows"};
  app.fallthrough();
  app.set_config("--config", "", "JSON config file");
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--grid", G.grid, "grid size (number of nodes)")
      ->check(CLI::Range(8, 1 << 20));
  app.add_option("--out", G.out, "output directory");
  app.add_option("--seed", G.seed, "seed for randomized suites");
  app.add_flag("--quiet", G.quiet, "suppress progress output");
  app.require_subcommand(1);

  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
    CLI::App* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };

  TorusArgs torus_args;
  {
    CLI::App* t = sub(&app, "torus", "sample torus curves and their diagnostics");
    t->add_option("--freqs", torus_args.freqs_str, "frequencies k1,k2,...")->required();
    t->add_option("--t", torus_args.t, "time for the emitted curve");
    t->add_option("--r", torus_args.r, "override radius parameter");
    t->add_option("--radius-sweep", torus_args.radius_sweep, "t0:t1[:n] radius table");
    t->add_option("--entropy-sweep", torus_args.entropy_sweep, "t0:t1[:n] entropy table");
    t->add_option("--distance-sweep", torus_args.distance_sweep,
                  "t0:t1[:n] rescaled distance to the tangent circle");
    t->add_option("--k", torus_args.k_mult, "circle multiplicity for --distance-sweep");
    t->add_flag("--decay-report", torus_args.decay_report, "fit graph decay exponent");
    t->add_option("--window", torus_args.window, "t0:t1 window for --decay-report");
    t->add_option("--samples", torus_args.samples, "sample count for --decay-report");
    t->callback([&] { run_torus(torus_args); });
  }

  SpectrumArgs spec_args;
  {
    CLI::App* s = sub(&app, "spectrum", "drift-Laplacian spectrum of a multi-circle");
    s->add_option("--multiplicity", spec_args.multiplicity, "cover multiplicity");
    s->add_option("--radius", spec_args.radius, "circle radius");
    s->add_option("--count", spec_args.count, "number of eigenvalues beyond the first");
    s->add_flag("--eigenfunctions", spec_args.eigenfunctions, "emit eigenfunctions.json");
    s->callback([&] { run_spectrum(spec_args); });
  }

  FlowArgs flow_args;
  auto add_flow_source = [&](CLI::App* f) {
    f->add_option("--circle", flow_args.circle, "start from a circle of this radius");
    f->add_option("--mult", flow_args.mult, "circle multiplicity");
    f->add_option("--torus", flow_args.torus, "start from torus curve k1,k2,...");
    f->add_option("--in", flow_args.in, "start from a curve JSON file");
    f->add_option("--scheme", flow_args.scheme, "explicit | semi-implicit");
    f->add_option("--cadence", flow_args.cadence, "record every k-th step");
    f->add_flag("--attach", flow_args.attach, "attach coordinate caloric fields");
    f->add_option("--reference-mult", flow_args.reference_mult,
                  "track graph distance to this multi-circle");
    f->add_option("--reference-radius", flow_args.reference_radius,
                  "reference circle radius");
  };
  {
    CLI::App* f = sub(&app, "flow", "run the curve shortening flow");
    add_flow_source(f);
    f->add_option("--t0", flow_args.t0, "start time (< 0)");
    f->add_option("--t1", flow_args.t1, "end time (< 0)");
    f->add_option("--dt", flow_args.dt, "time step");
    f->callback([&] { run_flow_cmd(flow_args, false); });
  }
  {
    CLI::App* f = sub(&app, "rescaled", "run the rescaled flow");
    add_flow_source(f);
    f->add_option("--tau0", flow_args.tau0, "start rescaled time");
    f->add_option("--tau1", flow_args.tau1, "end rescaled time");
    f->add_option("--dtau", flow_args.dtau, "rescaled time step");
    f->callback([&] { run_flow_cmd(flow_args, true); });
  }

  CaloricArgs cal_args;
  {
    CLI::App* c = sub(&app, "caloric", "track a caloric mode on a shrinking circle");
    c->add_option("--r", cal_args.r, "initial circle radius");
    c->add_option("--mult", cal_args.mult, "circle multiplicity");
    c->add_option("--mode", cal_args.mode, "parameter mode k of the initial field");
    c->add_option("--t1", cal_args.t1, "end time (default t0/4)");
    c->add_option("--dt", cal_args.dt, "time step");
    c->add_option("--scheme", cal_args.scheme, "explicit | semi-implicit");
    c->add_option("--cadence", cal_args.cadence, "record every k-th step");
    c->callback([&] { run_caloric(cal_args); });
  }

  CodimArgs codim_args;
  {
    CLI::App* c = sub(&app, "codim", "effective codimension of a torus curve");
    c->add_option("--torus", codim_args.torus, "frequencies k1,k2,...")->required();
    c->add_option("--t", codim_args.t, "Gaussian weight time");
    c->add_option("--r", codim_args.r, "radius parameter (default 1)");
    c->add_flag("--r-from-t", codim_args.r_from_t, "solve the radius from --t");
    c->add_option("--threshold", codim_args.threshold, "relative rank threshold");
    c->callback([&] { run_codim(codim_args); });
  }

  EntropyArgs ent_args;
  {
    CLI::App* e = sub(&app, "entropy", "Gaussian entropy of a curve");
    e->add_option("--in", ent_args.in, "curve JSON file");
    e->add_option("--circle", ent_args.circle, "circle radius");
    e->add_option("--mult", ent_args.mult, "circle multiplicity");
    e->add_option("--torus", ent_args.torus, "torus frequencies k1,k2,...");
    e->add_option("--t", ent_args.t, "torus time");
    e->add_option("--restarts", ent_args.restarts, "optimizer restarts");
    e->callback([&] { run_entropy(ent_args); });
  }

  {
    CLI::App* v = sub(&app, "verify", "inequality and identity verifiers");
    v->require_subcommand(1);

    static RayleighArgs ray;
    CLI::App* r = sub(v, "rayleigh", "Rayleigh quotient inequality suite");
    r->add_option("--mult", ray.mult, "circle multiplicity");
    r->add_option("--count", ray.count, "eigenpairs to compute");
    r->add_option("--seeds", ray.seeds, "number of randomized instances");
    r->callback([&] { run_verify_rayleigh(ray); });

    static PoincareArgs poi;
    CLI::App* p = sub(v, "poincare", "Gaussian Poincare inequality suite");
    p->add_option("--mult", poi.mult, "circle multiplicity");
    p->add_option("--level", poi.level, "orthogonality level l");
    p->add_option("--mu", poi.mu, "slack parameter");
    p->add_option("--t", poi.t, "Gaussian weight time");
    p->add_option("--count", poi.count, "eigenpairs to compute");
    p->add_option("--seeds", poi.seeds, "number of randomized instances");
    p->callback([&] { run_verify_poincare(poi); });

    static DriftArgs dri;
    CLI::App* d = sub(v, "drift", "drift identity refinement suite");
    d->add_option("--torus", dri.torus, "frequencies k1,k2,...");
    d->add_option("--t", dri.t, "time");
    d->add_option("--seeds", dri.seeds, "number of random directions");
    d->add_option("--tol", dri.tol, "slope tolerance");
    d->callback([&] { run_verify_drift(dri); });

    static CarlemanArgs car;
    CLI::App* c = sub(v, "carleman", "space-time Carleman inequality");
    c->add_option("--sigma-mult", car.sigma_mult, "multiplicity of the static circle");
    c->add_option("--alpha", car.alpha, "weight exponent");
    c->add_option("--delta", car.delta, "absorbing parameter");
    c->add_option("--caloric-mode", car.caloric_mode, "mode of the worked example");
    c->add_option("--t0", car.t0, "window start T1");
    c->add_option("--t1", car.t1, "window end T2");
    c->add_option("--time-samples", car.time_samples, "time grid size (odd)");
    c->add_option("--seeds", car.seeds, "randomized instances (0 => worked example)");
    c->callback([&] { run_verify_carleman(car); });

    static GrowthArgs gro;
    CLI::App* g = sub(v, "growth", "polynomial growth exponent fit");
    g->add_option("--torus", gro.torus, "frequencies k1,k2,...");
    g->add_option("--window", gro.window, "t0:t1 fit window");
    g->add_option("--samples", gro.samples, "trajectory samples");
    g->add_option("--field", gro.field, "attached field name (x0, x1, ...)");
    g->add_option("--expect", gro.expect, "expected exponent");
    g->add_option("--tol", gro.tol, "exponent tolerance");
    g->callback([&] { run_verify_growth(gro); });

    static RigidityArgs rig;
    CLI::App* q = sub(v, "rigidity", "rescaled-flow mode rate experiment");
    q->add_option("--mult", rig.mult, "circle multiplicity");
    q->add_option("--mode", rig.mode, "perturbation mode k");
    q->add_option("--amplitude", rig.amplitude, "perturbation amplitude");
    q->add_option("--tau-end", rig.tau_end, "rescaled time horizon");
    q->add_option("--dtau", rig.dtau, "rescaled time step");
    q->add_option("--cadence", rig.cadence, "projection cadence");
    q->add_option("--expect", rig.expect, "expected rate");
    q->add_option("--tol", rig.tol, "rate tolerance");
    q->callback([&] { run_verify_rigidity(rig); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const csf::Error& e) {
    std::cerr << "error: " << e.code << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return G.check_failed ? 1 : 0;
}
