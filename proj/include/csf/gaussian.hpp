#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "csf/curve.hpp"
#include "csf/geometry.hpp"
#include "csf/numerics.hpp"

namespace csf {

/// Flow time for the backward-Gaussian weight; curves are 1-dimensional.
struct GaussianContext {
  double t;
  int n = 1;
};

/// (−4πt)^{−1/2} ∮ e^{|x|²/(4t)} ds
inline double gaussian_measure(const ClosedCurve& c, const GaussianContext& ctx) {
  require_negative_time(ctx.t);
  Eigen::VectorXd w = quadrature_weights(c);
  const double inv4t = 1.0 / (4.0 * ctx.t);
  Eigen::VectorXd integrand(c.size());
  for (int i = 0; i < c.size(); ++i)
    integrand[i] = w[i] * std::exp(c.points().row(i).squaredNorm() * inv4t);
  return pairwise_sum(integrand) / std::sqrt(-4.0 * pi * ctx.t);
}

/// J_t(u,v) = (−4πt)^{−1/2} ∮ u v e^{|x|²/(4t)} ds ; I_u(t) := J_t(u,u).
inline double weighted_inner_product(const ScalarField& u, const ScalarField& v,
                                     const ClosedCurve& c, const GaussianContext& ctx) {
  require_negative_time(ctx.t);
  require_aligned(c, u, "u");
  require_aligned(c, v, "v");
  Eigen::VectorXd w = quadrature_weights(c);
  const double inv4t = 1.0 / (4.0 * ctx.t);
  Eigen::VectorXd integrand(c.size());
  for (int i = 0; i < c.size(); ++i)
    integrand[i] = w[i] * u.values[i] * v.values[i] *
                   std::exp(c.points().row(i).squaredNorm() * inv4t);
  return pairwise_sum(integrand) / std::sqrt(-4.0 * pi * ctx.t);
}

inline double gaussian_norm_sq(const ScalarField& u, const ClosedCurve& c,
                               const GaussianContext& ctx) {
  return weighted_inner_product(u, u, c, ctx);
}

/// (4π)^{−1/2} ∮_{sC+y} e^{−|x|²/4} ds — the Gaussian area of the dilated,
/// shifted curve.
inline double f_functional(const ClosedCurve& c, double s, const Eigen::VectorXd& y) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw Error("invalid-scale", "dilation scale must be positive, got " + format17(s));
  if (y.size() != c.dim())
    throw Error("grid-mismatch", "shift vector dimension " + std::to_string(y.size()) +
                                     " vs ambient dimension " + std::to_string(c.dim()));
  Eigen::VectorXd w = quadrature_weights(c);
  Eigen::VectorXd integrand(c.size());
  for (int i = 0; i < c.size(); ++i) {
    const double q = (s * c.points().row(i).transpose() + y).squaredNorm();
    integrand[i] = s * w[i] * std::exp(-0.25 * q);
  }
  return pairwise_sum(integrand) / std::sqrt(4.0 * pi);
}

inline double f_functional(const ClosedCurve& c, double s) {
  return f_functional(c, s, Eigen::VectorXd::Zero(c.dim()));
}

struct EntropyCandidate {
  double s;
  Eigen::VectorXd y;
  double value;
};

struct EntropyResult {
  double value = 0.0;
  double argmax_scale = 1.0;
  Eigen::VectorXd argmax_shift;
  std::vector<EntropyCandidate> trace;
};

struct EntropyOptions {
  double s_lo = 1e-3;          // absolute scale bracket (log grid)
  double s_hi = 1e3;
  int per_decade = 25;
  int restarts = 8;
  long max_evals = 40000;
  unsigned seed = 0;
  double shift_margin = 4.0;   // shift search confined to |y| <= margin + diameter
};

struct OptimizerError : Error {
  EntropyResult best;
  OptimizerError(const std::string& msg, EntropyResult b)
      : Error("optimizer-no-convergence", msg), best(std::move(b)) {}
};

/// Entropy sup_{s,y} F(sC + y): log-grid scan over s at y=0 (absolute bracket
/// plus a window around the curve's natural scale √2/rms-radius),
/// golden-section refinement, then seeded Nelder–Mead restarts over (log s, y).
inline EntropyResult entropy(const ClosedCurve& c, const EntropyOptions& opts = {}) {
  const int dim = c.dim();
  Eigen::VectorXd w = quadrature_weights(c);
  double wsum = pairwise_sum(w), msq = 0.0;
  for (int i = 0; i < c.size(); ++i)
    msq += w[i] * c.points().row(i).squaredNorm();
  const double rms_radius = std::sqrt(msq / wsum);
  const double s_natural = std::sqrt(2.0) / std::max(rms_radius, 1e-300);
  Eigen::VectorXd bbox = c.points().colwise().maxCoeff() - c.points().colwise().minCoeff();
  const double diameter = bbox.norm();
  const double shift_cap = opts.shift_margin + diameter;

  EntropyResult result;
  result.argmax_shift = Eigen::VectorXd::Zero(dim);
  long used = 0;
  auto probe = [&](double s, const Eigen::VectorXd& y) {
    if (!(s > 0.0) || y.norm() > shift_cap) return 0.0;
    ++used;
    const double v = f_functional(c, s, y);
    result.trace.push_back({s, y, v});
    if (v > result.value) {
      result.value = v;
      result.argmax_scale = s;
      result.argmax_shift = y;
    }
    return v;
  };
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(dim);

  // stage 1: log-spaced scan at y = 0
  std::vector<double> ls_grid;
  auto add_log_window = [&](double lo, double hi) {
    const int n = std::max(2, static_cast<int>(std::ceil(std::log10(hi / lo) * opts.per_decade)));
    for (int i = 0; i <= n; ++i)
      ls_grid.push_back(std::log(lo) + (std::log(hi) - std::log(lo)) * i / n);
  };
  add_log_window(opts.s_lo, opts.s_hi);
  add_log_window(s_natural * 1e-2, s_natural * 1e2);
  ls_grid.push_back(std::log(s_natural));
  std::sort(ls_grid.begin(), ls_grid.end());
  double best_ls = ls_grid.front(), best_val = -1.0;
  for (double ls : ls_grid) {
    const double v = probe(std::exp(ls), y0);
    if (v > best_val) {
      best_val = v;
      best_ls = ls;
    }
  }
  const double dls = std::log(10.0) / opts.per_decade;
  best_ls = golden_section_max(
      [&](double ls) { return probe(std::exp(ls), y0); }, best_ls - 2.0 * dls,
      best_ls + 2.0 * dls, 1e-12, 200);

  // stage 2: simplex refinement over (log s, y) from seeded restarts
  std::mt19937 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto objective = [&](const Eigen::VectorXd& x) {
    return probe(std::exp(x[0]), x.segment(1, dim));
  };
  const double y_scale = 0.25 * std::min(shift_cap, 1.0 + 0.25 * diameter);
  for (int r = 0; r < opts.restarts; ++r) {
    if (used >= opts.max_evals)
      throw OptimizerError("entropy optimizer budget exhausted after " +
                               std::to_string(used) + " evaluations (restart " +
                               std::to_string(r) + " of " +
                               std::to_string(opts.restarts) + ")",
                           result);
    Eigen::VectorXd start(1 + dim);
    start[0] = best_ls;
    start.segment(1, dim).setZero();
    double scale = 0.35;
    if (r > 0) {
      start[0] += 0.5 * unit(rng);
      for (int k = 0; k < dim; ++k) start[1 + k] = y_scale * unit(rng);
      scale = 0.2 + 0.2 * std::abs(unit(rng));
    }
    const long cap = std::min<long>(opts.max_evals - used, 200L * (dim + 2));
    nelder_mead_max(objective, start, scale, cap, nullptr);  // probe() counts evals
  }
  return result;
}

}  // namespace csf
