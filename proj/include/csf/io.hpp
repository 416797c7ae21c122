#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csf/curve.hpp"
#include "csf/flow.hpp"
#include "csf/gaussian.hpp"
#include "csf/numerics.hpp"
#include "csf/spectrum.hpp"

namespace csf {

/// Write via a temp file and rename, so readers never observe partial output.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-error", "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw Error("io-error", "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out;
}

/// Hand-rolled emitters: stable key order and 17-significant-digit floats, so
/// identical inputs give byte-identical files.
inline std::string curve_to_json(const ClosedCurve& c) {
  std::string out = "{\n  \"param_period\": " + format17(c.param_period()) +
                    ",\n  \"points\": [\n";
  for (int i = 0; i < c.size(); ++i) {
    out += "    [";
    for (int j = 0; j < c.dim(); ++j) {
      if (j) out += ", ";
      out += format17(c.points()(i, j));
    }
    out += i + 1 < c.size() ? "],\n" : "]\n";
  }
  out += "  ],\n  \"metadata\": {";
  bool first = true;
  for (const auto& [k, v] : c.metadata()) {
    out += first ? "" : ", ";
    out += "\"" + json_escape(k) + "\": \"" + json_escape(v) + "\"";
    first = false;
  }
  out += "}\n}\n";
  return out;
}

namespace detail {

inline int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("parse-error", origin + ": line " +
                                   std::to_string(line_of_byte(text, e.byte)) + ": " +
                                   e.what());
  }
}

}  // namespace detail

inline ClosedCurve curve_from_json(const std::string& text,
                                   const std::string& origin = "<string>") {
  nlohmann::json j = detail::parse_json(text, origin);
  if (!j.is_object()) throw Error("parse-error", origin + ": top level must be an object");
  if (!j.contains("points") || !j["points"].is_array())
    throw Error("parse-error", origin + ": field 'points' missing or not an array");
  double period = two_pi;
  if (j.contains("param_period")) {
    if (!j["param_period"].is_number())
      throw Error("parse-error", origin + ": field 'param_period' must be a number");
    period = j["param_period"].get<double>();
  }
  const auto& pts = j["points"];
  const int m = static_cast<int>(pts.size());
  int n = -1;
  Eigen::MatrixXd mat;
  for (int i = 0; i < m; ++i) {
    const auto& row = pts[i];
    if (!row.is_array())
      throw Error("parse-error", origin + ": points[" + std::to_string(i) +
                                     "] must be an array");
    if (n < 0) {
      n = static_cast<int>(row.size());
      mat.resize(m, n);
    }
    if (static_cast<int>(row.size()) != n)
      throw Error("parse-error", origin + ": points[" + std::to_string(i) +
                                     "] has inconsistent length");
    for (int k = 0; k < n; ++k) {
      if (!row[k].is_number())
        throw Error("parse-error", origin + ": points[" + std::to_string(i) + "][" +
                                       std::to_string(k) + "] must be a number");
      mat(i, k) = row[k].get<double>();
    }
  }
  ClosedCurve::Metadata meta;
  if (j.contains("metadata")) {
    if (!j["metadata"].is_object())
      throw Error("parse-error", origin + ": field 'metadata' must be an object");
    for (const auto& [k, v] : j["metadata"].items()) {
      if (!v.is_string())
        throw Error("parse-error", origin + ": metadata '" + k + "' must be a string");
      meta[k] = v.get<std::string>();
    }
  }
  return ClosedCurve(std::move(mat), period, std::move(meta));
}

inline ClosedCurve read_curve(const std::filesystem::path& path) {
  return curve_from_json(read_file(path), path.string());
}

inline void write_curve(const std::filesystem::path& path, const ClosedCurve& c) {
  write_atomic(path, curve_to_json(c));
}

inline std::string entropy_to_json(const EntropyResult& r) {
  std::string out = "{\"value\": " + format17(r.value) +
                    ", \"s\": " + format17(r.argmax_scale) + ", \"y\": [";
  for (int i = 0; i < r.argmax_shift.size(); ++i) {
    if (i) out += ", ";
    out += format17(r.argmax_shift[i]);
  }
  out += "], \"trace_len\": " + std::to_string(r.trace.size()) + "}\n";
  return out;
}

/// One verifier outcome; `fit` is used by the regression-style checks, `holds`
/// by the inequality checks.
struct Verdict {
  std::string op;
  std::string inputs_digest;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<bool> holds;
  std::optional<double> fit;
  double tolerance = 0.0;
};

inline std::string verdict_to_json(const Verdict& v) {
  std::string out = "{\"op\": \"" + json_escape(v.op) + "\", \"inputs-digest\": \"" +
                    v.inputs_digest + "\", \"lhs\": " + format17(v.lhs) +
                    ", \"rhs\": " + format17(v.rhs);
  if (v.holds) out += std::string(", \"holds\": ") + (*v.holds ? "true" : "false");
  if (v.fit) out += ", \"fit\": " + format17(*v.fit);
  out += ", \"tolerance\": " + format17(v.tolerance) + "}\n";
  return out;
}

inline std::string suite_csv(const std::vector<Verdict>& rows) {
  std::string out = "op,inputs-digest,lhs,rhs,holds,fit,tolerance\n";
  for (const auto& v : rows) {
    out += v.op + "," + v.inputs_digest + "," + format17(v.lhs) + "," +
           format17(v.rhs) + ",";
    out += v.holds ? (*v.holds ? "true" : "false") : "";
    out += ",";
    out += v.fit ? format17(*v.fit) : "";
    out += "," + format17(v.tolerance) + "\n";
  }
  return out;
}

inline std::string spectrum_to_csv(const SpectrumResult& s) {
  std::string out = "index,eigenvalue,multiplicity-group\n";
  int group = 0, left = s.multiplicities.empty() ? 0 : s.multiplicities[0];
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    while (left == 0 && group + 1 < static_cast<int>(s.multiplicities.size()))
      left = s.multiplicities[++group];
    out += std::to_string(i) + "," + format17(s.eigenvalues[i]) + "," +
           std::to_string(group) + "\n";
    --left;
  }
  return out;
}

inline std::string eigenfunctions_to_json(const SpectrumResult& s) {
  std::string out = "{\"curve_digest\": \"" + hex_digest(s.carrier.content_id()) +
                    "\", \"eigenfunctions\": [\n";
  for (std::size_t k = 0; k < s.eigenfunctions.size(); ++k) {
    out += "  {\"eigenvalue\": " + format17(s.eigenvalues[k]) + ", \"values\": [";
    const auto& v = s.eigenfunctions[k].values;
    for (int i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += format17(v[i]);
    }
    out += k + 1 < s.eigenfunctions.size() ? "]},\n" : "]}\n";
  }
  out += "]}\n";
  return out;
}

/// Trajectory directory: one curve file per sample plus an index CSV. The
/// measure column holds J_t(1,1) for physical-time runs and the unit-scale
/// Gaussian integral for rescaled runs; eps_c0 is filled when a reference
/// circle is given.
inline void write_trajectory(const std::filesystem::path& dir,
                             const FlowTrajectory& traj, bool rescaled_time,
                             const std::optional<MultiCircle>& reference = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::string index = "step,t,length,gaussian_measure";
  if (reference) index += ",eps_c0";
  index += "\n";
  for (const auto& s : traj.samples) {
    char name[32];
    std::snprintf(name, sizeof(name), "curve_%06d.json", s.step);
    write_curve(dir / name, s.curve);
    double measure = rescaled_time || !(s.t < 0.0)
                         ? f_functional(s.curve, 1.0)
                         : gaussian_measure(s.curve, GaussianContext{s.t});
    index += std::to_string(s.step) + "," + format17(s.t) + "," +
             format17(arc_length(s.curve)) + "," + format17(measure);
    if (reference) {
      GraphDecomposition g = graph_projection(s.curve, *reference);
      index += "," + format17(g.eps_c0);
    }
    index += "\n";
  }
  write_atomic(dir / "index.csv", index);
}

}  // namespace csf
