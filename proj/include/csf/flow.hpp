#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csf/curve.hpp"
#include "csf/gaussian.hpp"
#include "csf/geometry.hpp"
#include "csf/numerics.hpp"
#include "csf/spectrum.hpp"
#include "csf/torus.hpp"

namespace csf {

enum class Scheme { explicit_euler, semi_implicit };

inline std::string scheme_name(Scheme s) {
  return s == Scheme::explicit_euler ? "explicit" : "semi-implicit";
}

/// Largest explicit-Euler step the 3-point Laplacian tolerates on this grid.
inline double cfl_bound(const ClosedCurve& c) {
  const double d = chord_lengths(c).minCoeff();
  return 0.4 * d * d;
}

namespace detail {

struct LaplacianCoeffs {
  Eigen::VectorXd sub;   // couples node i with i-1
  Eigen::VectorXd sup;   // couples node i with i+1
};

inline LaplacianCoeffs laplacian_coeffs(const ClosedCurve& c) {
  const int m = c.size();
  Eigen::VectorXd d = chord_lengths(c);
  LaplacianCoeffs lc;
  lc.sub.resize(m);
  lc.sup.resize(m);
  for (int i = 0; i < m; ++i) {
    const double dp = d[i], dm = d[(i + m - 1) % m];
    lc.sub[i] = 2.0 / (dm * (dm + dp));
    lc.sup[i] = 2.0 / (dp * (dm + dp));
  }
  return lc;
}

/// Solve (w·I − dt·L) x = rhs column-by-column with L frozen on `metric`.
inline Eigen::MatrixXd implicit_heat_solve(const ClosedCurve& metric,
                                           const Eigen::MatrixXd& rhs, double dt,
                                           double w = 1.0) {
  const int m = metric.size();
  LaplacianCoeffs lc = laplacian_coeffs(metric);
  Eigen::VectorXd a(m), b(m), c(m);
  for (int i = 0; i < m; ++i) {
    a[i] = -dt * lc.sub[i];
    c[i] = -dt * lc.sup[i];
    b[i] = w + dt * (lc.sub[i] + lc.sup[i]);
  }
  Eigen::MatrixXd out(m, rhs.cols());
  for (int col = 0; col < rhs.cols(); ++col)
    out.col(col) = cyclic_tridiag_solve(a, b, c, rhs.col(col));
  return out;
}

inline void require_step(const ClosedCurve& c, double dt, Scheme scheme,
                         double min_length) {
  if (!(dt > 0.0)) throw Error("invalid-time", "step size must be positive");
  if (arc_length(c) < min_length)
    throw Error("extinct", "curve length " + format17(arc_length(c)) +
                               " below extinction threshold");
  if (scheme == Scheme::explicit_euler) {
    const double bound = cfl_bound(c);
    if (dt > bound)
      throw Error("cfl-violation", "explicit step " + format17(dt) +
                                       " exceeds stability bound " + format17(bound));
  } else if (dt >= 1.0) {
    throw Error("cfl-violation", "semi-implicit step must stay below 1");
  }
}

/// One flow step without tangential redistribution (nodes keep their labels).
inline ClosedCurve raw_mcf_step(const ClosedCurve& c, double dt, Scheme scheme,
                                double min_length) {
  require_step(c, dt, scheme, min_length);
  Eigen::MatrixXd pts;
  if (scheme == Scheme::explicit_euler)
    pts = c.points() + dt * position_laplacian(c).vectors;
  else
    pts = implicit_heat_solve(c, c.points(), dt);
  return ClosedCurve(std::move(pts), c.param_period(), c.metadata());
}

/// One rescaled-flow step (∂_τ x = Δx + x/2), same conventions.
inline ClosedCurve raw_rescaled_step(const ClosedCurve& c, double dtau, Scheme scheme,
                                     double min_length) {
  require_step(c, dtau, scheme, min_length);
  Eigen::MatrixXd pts;
  if (scheme == Scheme::explicit_euler)
    pts = c.points() + dtau * (position_laplacian(c).vectors + 0.5 * c.points());
  else
    pts = implicit_heat_solve(c, c.points(), dtau, 1.0 - 0.5 * dtau);
  return ClosedCurve(std::move(pts), c.param_period(), c.metadata());
}

}  // namespace detail

/// One flow step followed by constant-speed redistribution.
inline ClosedCurve mcf_step(const ClosedCurve& c, double dt, Scheme scheme,
                            double min_length = 1e-6) {
  return resample_smooth(detail::raw_mcf_step(c, dt, scheme, min_length), c.size());
}

inline ClosedCurve rescaled_step(const ClosedCurve& c, double dtau,
                                 Scheme scheme = Scheme::semi_implicit,
                                 double min_length = 1e-6) {
  return resample_smooth(detail::raw_rescaled_step(c, dtau, scheme, min_length),
                         c.size());
}

/// One implicit heat step for u with the metric of the updated curve;
/// conserves constants exactly (unit row sums).
inline ScalarField caloric_step(const ScalarField& u, const ClosedCurve& before,
                                const ClosedCurve& after, double dt) {
  require_aligned(before, u, "u");
  if (before.size() != after.size())
    throw Error("grid-mismatch", "consecutive samples have different grids");
  if (!(dt > 0.0)) throw Error("invalid-time", "step size must be positive");
  Eigen::MatrixXd rhs = u.values;
  Eigen::VectorXd out = detail::implicit_heat_solve(after, rhs, dt).col(0);
  return ScalarField{std::move(out), after.content_id()};
}

/// Deviation from self-similarity: Φ = H + x^⊥/(2t) with H = −Δx.
struct PhiField {
  VectorField vectors;
  double t = -1.0;
};

inline PhiField phi_field(const ClosedCurve& c, double t) {
  require_negative_time(t);
  VectorField lap = position_laplacian(c);
  VectorField pos{c.points(), c.content_id()};
  auto split = normal_tangential_split(c, pos);
  Eigen::MatrixXd v = -lap.vectors + split.first.vectors / (2.0 * t);
  return PhiField{VectorField{std::move(v), c.content_id()}, t};
}

inline ScalarField phi_magnitude(const ClosedCurve& c, double t) {
  PhiField phi = phi_field(c, t);
  Eigen::VectorXd mag(c.size());
  for (int i = 0; i < c.size(); ++i) mag[i] = phi.vectors.vectors.row(i).norm();
  return ScalarField{std::move(mag), c.content_id()};
}

/// Normal graph decomposition of a curve over a multi-covered circle.
struct GraphDecomposition {
  ScalarField phi;      // radial height on the reference grid
  double eps_c0 = 0.0;  // sup of the full deviation (radial + out-of-plane)
  double eps_c1 = 0.0;  // eps_c0 plus sup of the deviation's arc derivative
  int winding = 0;
  MultiCircle reference;
};

/// Height function over the reference circle by continuous angular lifting:
/// the winding is tracked along the parameter, so multi-covers (which are not
/// embedded) project consistently.
inline GraphDecomposition graph_projection(const ClosedCurve& c,
                                           const MultiCircle& ref) {
  const int m = c.size();
  const int mult = ref.multiplicity;
  const double R = ref.radius;
  const auto plane = dominant_plane(c);
  const int turn = turning_number(c, plane);  // may throw singular-projection
  if (turn != mult)
    throw Error("no-graph-correspondence",
                "turning number " + std::to_string(turn) +
                    " does not match reference multiplicity " + std::to_string(mult));

  const Eigen::MatrixXd& p = c.points();
  Eigen::VectorXd beta(m + 1);
  double prev = std::atan2(p(0, plane.second), p(0, plane.first));
  beta[0] = prev;
  for (int i = 1; i <= m; ++i) {
    const int j = i % m;
    const double rho = std::hypot(p(j, plane.first), p(j, plane.second));
    if (rho <= 1e-12 * R)
      throw Error("not-a-graph", "curve passes through the reference axis");
    const double raw = std::atan2(p(j, plane.second), p(j, plane.first));
    beta[i] = beta[i - 1] + std::remainder(raw - prev, two_pi);
    prev = raw;
  }
  const int w = static_cast<int>(std::lround((beta[m] - beta[0]) / two_pi));
  if (w != mult)
    throw Error("no-graph-correspondence",
                "position winding " + std::to_string(w) +
                    " does not match reference multiplicity " + std::to_string(mult));
  for (int i = 0; i < m; ++i)
    if (!(beta[i + 1] > beta[i]))
      throw Error("not-a-graph",
                  "angular lift is not monotone at node " + std::to_string(i));

  for (int i = 0; i < m; ++i) {
    double off = std::pow(std::hypot(p(i, plane.first), p(i, plane.second)) - R, 2);
    for (int col = 0; col < c.dim(); ++col)
      if (col != plane.first && col != plane.second) off += p(i, col) * p(i, col);
    if (std::sqrt(off) > 0.5 * R)
      throw Error("not-a-graph", "deviation exceeds half the reference radius");
  }

  // invert the lift at each reference node's angle
  const double window = two_pi * mult;
  const double h = c.param_step();
  const int nout = c.dim() - 2;
  Eigen::VectorXd phi(m);
  Eigen::MatrixXd dev(m, 1 + nout);
  for (int j = 0; j < m; ++j) {
    const double alpha = window * j / m;
    double rep = alpha + window * std::ceil((beta[0] - alpha) / window);
    rep = std::min(rep, beta[m]);
    const double* lo = std::upper_bound(beta.data(), beta.data() + m + 1, rep);
    int seg = std::clamp(static_cast<int>(lo - beta.data()) - 1, 0, m - 1);
    const double f = (rep - beta[seg]) / (beta[seg + 1] - beta[seg]);
    const double theta = h * (seg + f);
    double rho_in = 0.0;
    int outk = 1;
    for (int col = 0; col < c.dim(); ++col) {
      const double v = periodic_cubic_eval(p.col(col), c.param_period(), theta);
      if (col == plane.first || col == plane.second)
        rho_in += v * v;
      else
        dev(j, outk++) = v;
    }
    phi[j] = std::sqrt(rho_in) - R;
    dev(j, 0) = phi[j];
  }

  GraphDecomposition g;
  g.reference = ref;
  g.winding = mult;
  g.phi = ScalarField{phi, sample(ref, m).content_id()};
  double c0 = 0.0, c1 = 0.0;
  const double ds = window * R / m;
  for (int j = 0; j < m; ++j) {
    c0 = std::max(c0, dev.row(j).norm());
    const int jp = (j + 1) % m, jm = (j + m - 1) % m;
    c1 = std::max(c1, (dev.row(jp) - dev.row(jm)).norm() / (2.0 * ds));
  }
  g.eps_c0 = c0;
  g.eps_c1 = c0 + c1;
  return g;
}

/// Rebuild the in-plane curve x + φ·n from a graph decomposition.
inline ClosedCurve reconstruct_graph(const GraphDecomposition& g) {
  const int m = static_cast<int>(g.phi.values.size());
  Eigen::MatrixXd pts(m, 2);
  for (int j = 0; j < m; ++j) {
    const double a = g.reference.multiplicity * two_pi * j / m;
    const double rho = g.reference.radius + g.phi.values[j];
    pts(j, 0) = rho * std::cos(a);
    pts(j, 1) = rho * std::sin(a);
  }
  return ClosedCurve(std::move(pts));
}

struct FlowSample {
  int step = 0;
  double t = 0.0;
  ClosedCurve curve;
  std::map<std::string, ScalarField> fields;
};

struct StepStat {
  int step = 0;
  double t = 0.0;     // time after the step
  double dt = 0.0;
  double length = 0.0;
  double max_move = 0.0;
};

struct FlowTrajectory {
  std::vector<FlowSample> samples;
  std::string scheme;
  std::vector<StepStat> step_stats;
};

struct FlowOptions {
  double dt = 1e-4;
  Scheme scheme = Scheme::semi_implicit;
  int cadence = 1;  // record every k-th step (first and last always kept)
  double extinction_length = 1e-6;
  std::map<std::string, ScalarField> fields;  // caloric fields on the initial curve
};

namespace detail {

inline FlowTrajectory run_driver(bool rescaled, const ClosedCurve& initial,
                                 double t0, double t1, const FlowOptions& opts) {
  if (!(t0 < t1)) throw Error("invalid-time", "need t0 < t1");
  if (!rescaled && !(t1 < 0.0))
    throw Error("invalid-time", "flow window must end before the extinction time 0");
  if (opts.cadence < 1) throw Error("invalid-argument", "cadence must be >= 1");
  for (const auto& [name, f] : opts.fields) require_aligned(initial, f, name.c_str());

  FlowTrajectory traj;
  traj.scheme = scheme_name(opts.scheme);
  ClosedCurve curve = initial;
  std::map<std::string, ScalarField> fields = opts.fields;
  const int m = initial.size();
  const int nsteps =
      std::max(1, static_cast<int>(std::ceil((t1 - t0) / opts.dt - 1e-12)));
  traj.samples.push_back({0, t0, curve, fields});

  double t = t0;
  for (int k = 0; k < nsteps; ++k) {
    const double dt = std::min(opts.dt, t1 - t);
    try {
      ClosedCurve raw = rescaled
                            ? raw_rescaled_step(curve, dt, opts.scheme,
                                                opts.extinction_length)
                            : raw_mcf_step(curve, dt, opts.scheme,
                                           opts.extinction_length);
      for (auto& [name, f] : fields) f = caloric_step(f, curve, raw, dt);
      Eigen::VectorXd theta = constant_speed_params(raw, m);
      ClosedCurve next(periodic_cubic_eval(raw.points(), raw.param_period(), theta),
                       raw.param_period(), raw.metadata());
      for (auto& [name, f] : fields) {
        Eigen::VectorXd vals(m);
        for (int j = 0; j < m; ++j)
          vals[j] = periodic_cubic_eval(f.values, raw.param_period(), theta[j]);
        f = ScalarField{std::move(vals), next.content_id()};
      }
      StepStat st;
      st.step = k + 1;
      st.dt = dt;
      st.t = t + dt;
      st.length = arc_length(next);
      st.max_move = (next.points() - curve.points()).rowwise().norm().maxCoeff();
      traj.step_stats.push_back(st);
      curve = std::move(next);
    } catch (const Error& e) {
      throw Error(e.code, std::string(e.what()) + " (while stepping from t=" +
                              format17(t) + ")");
    }
    t = (k + 1 == nsteps) ? t1 : t0 + (k + 1) * opts.dt;
    if ((k + 1) % opts.cadence == 0 || k + 1 == nsteps)
      traj.samples.push_back({k + 1, t, curve, fields});
  }
  return traj;
}

}  // namespace detail

inline FlowTrajectory run_flow(const ClosedCurve& initial, double t0, double t1,
                               const FlowOptions& opts = {}) {
  return detail::run_driver(false, initial, t0, t1, opts);
}

inline FlowTrajectory run_rescaled(const ClosedCurve& initial, double tau0,
                                   double tau1, const FlowOptions& opts = {}) {
  return detail::run_driver(true, initial, tau0, tau1, opts);
}

/// Exactly sampled torus-curve trajectory (no integration error); optionally
/// attaches ambient coordinates as caloric fields named "x<i>".
inline FlowTrajectory torus_trajectory(const std::vector<int>& freqs,
                                       const std::vector<double>& times, int grid,
                                       const std::vector<int>& coord_fields = {}) {
  if (times.size() < 2) throw Error("invalid-time", "need at least two sample times");
  FlowTrajectory traj;
  traj.scheme = "exact-torus";
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i] > times[i - 1]))
      throw Error("invalid-time", "sample times must be strictly increasing");
    TorusCurveParams p{freqs, solve_radius(freqs, times[i])};
    ClosedCurve c = sample(p, grid);
    std::map<std::string, ScalarField> fields;
    for (int col : coord_fields) {
      if (col < 0 || col >= c.dim())
        throw Error("invalid-argument", "coordinate index out of range");
      fields["x" + std::to_string(col)] =
          ScalarField{c.points().col(col), c.content_id()};
    }
    traj.samples.push_back(
        {static_cast<int>(i), times[i], std::move(c), std::move(fields)});
  }
  return traj;
}

}  // namespace csf
