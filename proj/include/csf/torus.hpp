#pragma once

#include <cmath>
#include <vector>

#include "csf/curve.hpp"
#include "csf/geometry.hpp"
#include "csf/numerics.hpp"

namespace csf {

/// Frequency list (k_1 < … < k_m) and radius parameter of the exact ancient
/// torus-curve solutions; coordinate pair j is r^{k_j²}(cos k_jθ, sin k_jθ).
struct TorusCurveParams {
  std::vector<int> freqs;
  double r = 1.0;
};

inline void validate_freqs(const std::vector<int>& freqs) {
  if (freqs.empty())
    throw Error("invalid-frequencies", "frequency list must be non-empty");
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    if (freqs[j] <= 0)
      throw Error("invalid-frequencies", "freqs[" + std::to_string(j) +
                                             "]: must be a positive integer");
    if (j > 0 && freqs[j] <= freqs[j - 1])
      throw Error("invalid-frequencies",
                  "freqs[" + std::to_string(j) + "]: must be strictly increasing");
  }
}

/// dr/dt = −r / Σ_j k_j² r^{2k_j²}
inline double radius_ode_rhs(double r, const std::vector<int>& freqs) {
  validate_freqs(freqs);
  if (!(r > 0.0) || !std::isfinite(r))
    throw Error("invalid-radius", "radius must be positive, got " + format17(r));
  double q = 0.0;
  for (int k : freqs) q += double(k) * k * std::pow(r, 2.0 * k * k);
  return -r / q;
}

/// Unique r > 0 with Σ_j r^{2k_j²} = −2t (extinction normalized to t = 0).
/// Bracketed bisection, then Newton polish.
inline double solve_radius(const std::vector<int>& freqs, double t) {
  validate_freqs(freqs);
  require_negative_time(t);
  auto g = [&](double r) {
    double s = 2.0 * t;
    for (int k : freqs) s += std::pow(r, 2.0 * k * k);
    return s;
  };
  auto gp = [&](double r) {
    double s = 0.0;
    for (int k : freqs) s += 2.0 * k * k * std::pow(r, 2.0 * k * k - 1.0);
    return s;
  };
  double hi = 1.0;
  int guard = 0;
  while (g(hi) < 0.0) {
    hi *= 2.0;
    if (++guard > 2048) throw Error("invalid-time", "radius bracket overflow");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  double r = 0.5 * (lo + hi);
  for (int it = 0; it < 2; ++it) r -= g(r) / gp(r);
  return r;
}

/// Curve in R^{2m} on the uniform θ-grid.
inline ClosedCurve sample(const TorusCurveParams& p, int grid) {
  validate_freqs(p.freqs);
  if (!(p.r > 0.0)) throw Error("invalid-radius", "radius must be positive");
  const int m = static_cast<int>(p.freqs.size());
  Eigen::MatrixXd pts(grid, 2 * m);
  for (int i = 0; i < grid; ++i) {
    const double theta = two_pi * i / grid;
    for (int j = 0; j < m; ++j) {
      const double amp = std::pow(p.r, double(p.freqs[j]) * p.freqs[j]);
      pts(i, 2 * j) = amp * std::cos(p.freqs[j] * theta);
      pts(i, 2 * j + 1) = amp * std::sin(p.freqs[j] * theta);
    }
  }
  ClosedCurve c(std::move(pts));
  c.metadata()["family"] = "torus-curve";
  return c;
}

/// Max-norm of ∂_tγ − γ_ss for the exact solution at time t; pure
/// discretization error, O(grid⁻²).
inline double flow_residual(const std::vector<int>& freqs, double t, int grid) {
  const double r = solve_radius(freqs, t);
  const double rdot = radius_ode_rhs(r, freqs);
  ClosedCurve c = sample({freqs, r}, grid);
  VectorField lap = position_laplacian(c);
  const int m = static_cast<int>(freqs.size());
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double theta = two_pi * i / grid;
    Eigen::RowVectorXd dgdt(2 * m);
    for (int j = 0; j < m; ++j) {
      const double k2 = double(freqs[j]) * freqs[j];
      const double damp = k2 * std::pow(r, k2 - 1.0) * rdot;
      dgdt[2 * j] = damp * std::cos(freqs[j] * theta);
      dgdt[2 * j + 1] = damp * std::sin(freqs[j] * theta);
    }
    worst = std::max(worst, (dgdt - lap.vectors.row(i)).norm());
  }
  return worst;
}

/// sup over the grid of |γ_t(θ)/√(−t) − ref(θ)| where ref is the k-covered
/// circle of radius √2 in the matching coordinate pair, matched phase.
inline double rescaled_distance_to_circle(const std::vector<int>& freqs, double t,
                                          int k, int grid = 512) {
  validate_freqs(freqs);
  require_negative_time(t);
  int pair = -1;
  for (std::size_t j = 0; j < freqs.size(); ++j)
    if (freqs[j] == k) pair = static_cast<int>(j);
  if (pair < 0)
    throw Error("invalid-multiplicity",
                "frequency " + std::to_string(k) + " not in the frequency list");
  const double r = solve_radius(freqs, t);
  const double scale = 1.0 / std::sqrt(-t);
  ClosedCurve c = sample({freqs, r}, grid);
  const double root2 = std::sqrt(2.0);
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double theta = two_pi * i / grid;
    Eigen::RowVectorXd ref = Eigen::RowVectorXd::Zero(c.dim());
    ref[2 * pair] = root2 * std::cos(k * theta);
    ref[2 * pair + 1] = root2 * std::sin(k * theta);
    worst = std::max(worst, (scale * c.points().row(i) - ref).norm());
  }
  return worst;
}

struct DecayFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  double t_min = 0.0, t_max = 0.0;
  int samples = 0;
};

/// Least-squares slope of log ε(t) vs log(−t), with ε(t) the C⁰ height of
/// γ_t/√(−t) over the k_m-covered circle of radius √2.
inline DecayFit graph_decay_exponent(const std::vector<int>& freqs,
                                     double t_min = -1e8, double t_max = -1e4,
                                     int samples = 17, int grid = 512) {
  validate_freqs(freqs);
  if (freqs.size() < 2)
    throw Error("no-graph-deviation",
                "single-frequency solutions are exact circles; no graph height to fit");
  require_negative_time(t_min);
  require_negative_time(t_max);
  const int km = freqs.back();
  std::vector<double> lx(samples), ly(samples);
  for (int i = 0; i < samples; ++i) {
    const double lt = std::log(-t_min) +
                      (std::log(-t_max) - std::log(-t_min)) * i / (samples - 1);
    const double t = -std::exp(lt);
    lx[i] = lt;
    ly[i] = std::log(rescaled_distance_to_circle(freqs, t, km, grid));
  }
  LineFit f = ols_fit(lx, ly);
  return DecayFit{f.slope, f.stderr_slope, f.intercept, t_min, t_max, samples};
}

}  // namespace csf
