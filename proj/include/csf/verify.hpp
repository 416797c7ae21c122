#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "csf/curve.hpp"
#include "csf/flow.hpp"
#include "csf/gaussian.hpp"
#include "csf/geometry.hpp"
#include "csf/numerics.hpp"
#include "csf/spectrum.hpp"

namespace csf {

/// u = <x, U> for a constant direction U; caloric along any flow.
struct LinearCaloric {
  Eigen::VectorXd direction;
  ScalarField field;
};

inline LinearCaloric make_linear_caloric(const ClosedCurve& c,
                                         const Eigen::VectorXd& direction) {
  if (direction.size() != c.dim())
    throw Error("invalid-argument", "direction dimension does not match the curve");
  Eigen::VectorXd vals = c.points() * direction;
  return LinearCaloric{direction, ScalarField{std::move(vals), c.content_id()}};
}

/// Sup-norm residual of the linear-function identity for the time-t drift
/// operator: u_ss + <x,T>/(2t)·u_s − u/(2t) + <Phi, U>.
///
/// The Laplace–Beltrami and drift terms are discretized in the curve
/// parameter (central differences with the first-fundamental-form factor)
/// rather than with the chord stencil used for Phi, so the residual reflects
/// the second-order truncation of the identity instead of collapsing to the
/// algebraic cancellation of one shared stencil.
inline double drift_identity_check(const LinearCaloric& lin, const ClosedCurve& c,
                                   double t) {
  require_negative_time(t);
  require_aligned(c, lin.field, "linear field");
  if (lin.direction.size() != c.dim())
    throw Error("grid-mismatch", "direction dimension does not match the curve");
  const Eigen::VectorXd& u = lin.field.values;
  const Eigen::MatrixXd& x = c.points();
  const int m = c.size();
  const double h = c.param_step();
  PhiField phi = phi_field(c, t);
  double sup = 0.0;
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m, im = (i + m - 1) % m;
    const double ut = (u[ip] - u[im]) / (2.0 * h);
    const double utt = (u[ip] - 2.0 * u[i] + u[im]) / (h * h);
    Eigen::RowVectorXd gt = (x.row(ip) - x.row(im)) / (2.0 * h);
    Eigen::RowVectorXd gtt = (x.row(ip) - 2.0 * x.row(i) + x.row(im)) / (h * h);
    const double q = gt.squaredNorm();
    if (!(q > 0.0))
      throw Error("degenerate-curve",
                  "vanishing parametric speed at node " + std::to_string(i));
    const double uss = (utt - ut * gt.dot(gtt) / q) / q;
    const double drift = x.row(i).dot(gt) * ut / q;
    const double resid = uss + drift / (2.0 * t) - u[i] / (2.0 * t) +
                         phi.vectors.vectors.row(i).dot(lin.direction);
    sup = std::max(sup, std::abs(resid));
  }
  return sup;
}

/// Fitted envelope I_u(t) <= C·(1-t)^d over a trajectory window.
struct GrowthFit {
  double exponent_d = 0.0;
  double constant_C = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double residual = 0.0;
  double stderr_d = 0.0;
};

inline GrowthFit growth_fit(const FlowTrajectory& traj, const std::string& field_name) {
  std::vector<double> lx, ly, ts, is;
  for (const auto& s : traj.samples) {
    auto it = s.fields.find(field_name);
    if (it == s.fields.end())
      throw Error("invalid-argument", "trajectory has no field named " + field_name);
    require_negative_time(s.t);
    const double iu =
        weighted_inner_product(it->second, it->second, s.curve, GaussianContext{s.t});
    if (!(iu > 0.0))
      throw Error("invalid-field", "I_u vanishes at t=" + format17(s.t));
    ts.push_back(s.t);
    is.push_back(iu);
    lx.push_back(std::log(1.0 - s.t));
    ly.push_back(std::log(iu));
  }
  if (ts.size() < 8)
    throw Error("too-few-samples", "growth fit needs at least 8 samples, got " +
                                       std::to_string(ts.size()));
  if (std::log10((1.0 - ts.front()) / (1.0 - ts.back())) < 2.0)
    throw Error("invalid-window", "trajectory must span at least two decades");
  LineFit fit = ols_fit(lx, ly);
  GrowthFit g;
  g.exponent_d = fit.slope;
  g.stderr_d = fit.stderr_slope;
  g.t_min = ts.front();
  g.t_max = ts.back();
  g.residual = fit.rms_residual;
  double c = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    c = std::max(c, is[i] / std::pow(1.0 - ts[i], fit.slope));
  g.constant_C = c;
  return g;
}

/// Rank of the Gaussian-weighted coordinate span.
struct CodimReport {
  std::vector<double> singular_values;  // of the centered second-moment matrix
  int spatial_rank = 0;
  int codimension = 0;
  double rel_threshold = 1e-6;
};

inline CodimReport effective_codimension(const ClosedCurve& c,
                                         const GaussianContext& ctx,
                                         double rel_threshold = 1e-6) {
  require_negative_time(ctx.t);
  const int m = c.size(), n = c.dim();
  Eigen::VectorXd w = quadrature_weights(c);
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i)
    g[i] = w[i] * std::exp(c.points().row(i).squaredNorm() / (4.0 * ctx.t));
  g /= pairwise_sum(g);
  Eigen::RowVectorXd mean = g.transpose() * c.points();
  Eigen::MatrixXd b(m, n);
  for (int i = 0; i < m; ++i)
    b.row(i) = std::sqrt(g[i]) * (c.points().row(i) - mean);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
  CodimReport rep;
  rep.rel_threshold = rel_threshold;
  const auto& sv = svd.singularValues();
  for (int i = 0; i < sv.size(); ++i)
    rep.singular_values.push_back(sv[i] * sv[i]);  // second-moment eigenvalues
  const double top = rep.singular_values.empty() ? 0.0 : rep.singular_values[0];
  for (double s : rep.singular_values)
    if (top > 0.0 && s / top >= rel_threshold) ++rep.spatial_rank;
  rep.codimension = std::max(0, rep.spatial_rank - 1);
  return rep;
}

/// J_t-orthonormalization; coefficients[j][i] reproduces
/// w_i = u_i − Σ_j coefficients(j,i)·u_j for j < i.
struct GramSchmidtResult {
  std::vector<ScalarField> orthonormal;
  Eigen::MatrixXd coefficients;
};

inline GramSchmidtResult gram_schmidt_at(const std::vector<ScalarField>& fields,
                                         const ClosedCurve& c,
                                         const GaussianContext& ctx) {
  const int k = static_cast<int>(fields.size());
  for (const auto& f : fields) require_aligned(c, f, "input field");
  GramSchmidtResult res;
  res.coefficients = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd expand = Eigen::MatrixXd::Zero(k, k);  // v_j = Σ_p expand(p,j)·u_p
  auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return weighted_inner_product(ScalarField{a, c.content_id()},
                                  ScalarField{b, c.content_id()}, c, ctx);
  };
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd w = fields[i].values;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
    for (int j = 0; j < i; ++j) {
      alpha[j] = inner(res.orthonormal[j].values, w);
      w -= alpha[j] * res.orthonormal[j].values;
    }
    for (int p = 0; p < i; ++p) {
      double lam = 0.0;
      for (int j = 0; j < i; ++j) lam += alpha[j] * expand(p, j);
      res.coefficients(p, i) = lam;
    }
    const double iw = inner(w, w);
    const double iu = inner(fields[i].values, fields[i].values);
    if (!(iw > 1e-12 * std::max(iu, 1e-300)))
      throw Error("rank-deficient",
                  "input " + std::to_string(i) + " depends on its predecessors");
    const double nrm = std::sqrt(iw);
    expand(i, i) = 1.0 / nrm;
    for (int p = 0; p < i; ++p) expand(p, i) = -res.coefficients(p, i) / nrm;
    res.orthonormal.push_back(ScalarField{w / nrm, c.content_id()});
  }
  return res;
}

/// Weighted Poincaré inequality at time t:
///   (1-mu)·I_u <= (−t/λ_{l+1})·I_{|∇u|}
/// for u J_t-orthogonal to constants and, for l > 0, to the supplied ψ_i.
inline CheckResult poincare_verify(const ClosedCurve& curve, const GaussianContext& ctx,
                                   const ScalarField& u, const SpectrumResult& spec,
                                   int l, double mu,
                                   const std::vector<ScalarField>& psis = {}) {
  require_negative_time(ctx.t);
  require_aligned(curve, u, "u");
  if (l < 0 || l + 1 >= static_cast<int>(spec.eigenvalues.size()))
    throw Error("invalid-level", "level " + std::to_string(l) +
                                     " needs eigenvalue " + std::to_string(l + 1) +
                                     " of the reference spectrum");
  if (static_cast<int>(psis.size()) < l)
    throw Error("invalid-argument",
                "level " + std::to_string(l) + " needs " + std::to_string(l) +
                    " near-eigenfunctions, got " + std::to_string(psis.size()));
  const double iu = weighted_inner_product(u, u, curve, ctx);
  std::string resid;
  auto check_orth = [&](const ScalarField& psi, const std::string& name) {
    const double ipsi = weighted_inner_product(psi, psi, curve, ctx);
    const double r = weighted_inner_product(u, psi, curve, ctx);
    const double scale = std::sqrt(std::max(iu * ipsi, 1e-300));
    if (std::abs(r) > 1e-8 * scale)
      resid += (resid.empty() ? "" : ", ") + name + "=" + format17(r / scale);
  };
  ScalarField one{Eigen::VectorXd::Ones(curve.size()), curve.content_id()};
  check_orth(one, "J(u,1)");
  for (int i = 0; i < l; ++i) {
    require_aligned(curve, psis[i], "psi");
    check_orth(psis[i], "J(u,psi_" + std::to_string(i + 1) + ")");
  }
  if (!resid.empty())
    throw Error("orthogonality-violated", "relative residuals: " + resid);
  Eigen::VectorXd us = scalar_derivative(curve, u.values);
  ScalarField grad{us.cwiseAbs(), curve.content_id()};
  CheckResult r;
  r.lhs = (1.0 - mu) * iu;
  r.rhs = (-ctx.t / spec.eigenvalues[l + 1]) *
          weighted_inner_product(grad, grad, curve, ctx);
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-6) + 1e-14;
  return r;
}

/// Function samples on Σ × {times}; rows are time slices.
struct SpaceTimeField {
  Eigen::MatrixXd values;  // S × M
  Eigen::VectorXd times;   // strictly increasing, negative
};

inline SpaceTimeField sample_space_time(
    const ClosedCurve& sigma, const std::vector<double>& times,
    const std::function<double(double, double)>& f) {
  SpaceTimeField st;
  st.times = Eigen::Map<const Eigen::VectorXd>(times.data(),
                                               static_cast<long>(times.size()));
  st.values.resize(static_cast<long>(times.size()), sigma.size());
  for (long k = 0; k < st.times.size(); ++k)
    for (int i = 0; i < sigma.size(); ++i)
      st.values(k, i) = f(sigma.param_step() * i, st.times[k]);
  return st;
}

struct CarlemanResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double est_error = 0.0;
};

/// Space-time Carleman inequality
///   ∫((α−1/δ)u² + 2u_s²)e^{−αt} ≤ ∫δ(u_t−Δu)²e^{−αt} + ∮u(·,T1)²e^{−αT1},
/// both sides by trapezoid quadrature with an internal coarse-grid refinement
/// estimate. Unconditional in α, δ > 0.
inline CarlemanResult carleman_verify(const SpaceTimeField& u, const ClosedCurve& sigma,
                                      double alpha, double delta) {
  const int s = static_cast<int>(u.times.size());
  const int m = sigma.size();
  if (u.values.rows() != s || u.values.cols() != m)
    throw Error("grid-mismatch", "space-time field shape does not match grid");
  if (!(alpha > 0.0) || !(delta > 0.0))
    throw Error("invalid-argument", "alpha and delta must be positive");
  if (s < 5 || s % 2 == 0 || m % 2 != 0 || m < 16)
    throw Error("invalid-argument",
                "refinement check needs an odd number (>=5) of time rows and an "
                "even space grid (>=16)");
  for (int k = 0; k < s; ++k) {
    if (!(u.times[k] < 0.0)) throw Error("invalid-time", "times must be negative");
    if (k > 0 && !(u.times[k] > u.times[k - 1]))
      throw Error("invalid-time", "times must be strictly increasing");
  }

  auto quadrature = [&](int stride) {
    const int ms = m / stride;
    Eigen::MatrixXd pts(ms, sigma.dim());
    for (int i = 0; i < ms; ++i) pts.row(i) = sigma.points().row(i * stride);
    ClosedCurve sub(std::move(pts), sigma.param_period());
    Eigen::VectorXd w = quadrature_weights(sub);
    const int ss = (s - 1) / stride + 1;
    std::vector<int> rows(ss);
    for (int k = 0; k < ss; ++k) rows[k] = k * stride;
    auto slice = [&](int k) {
      Eigen::VectorXd v(ms);
      for (int i = 0; i < ms; ++i) v[i] = u.values(rows[k], i * stride);
      return v;
    };
    double lhs_t = 0.0, rhs_t = 0.0;
    std::vector<double> lhs_rows(ss), rhs_rows(ss);
    for (int k = 0; k < ss; ++k) {
      Eigen::VectorXd uk = slice(k);
      Eigen::VectorXd lap = scalar_laplacian(sub, uk);
      Eigen::VectorXd der = scalar_derivative(sub, uk);
      Eigen::VectorXd ut(ms);
      const int kp = std::min(k + 1, ss - 1), km = std::max(k - 1, 0);
      Eigen::VectorXd up = slice(kp), um = slice(km);
      const double dt_c = u.times[rows[kp]] - u.times[rows[km]];
      for (int i = 0; i < ms; ++i) ut[i] = (up[i] - um[i]) / dt_c;
      const double wt = std::exp(-alpha * u.times[rows[k]]);
      Eigen::VectorXd li(ms), ri(ms);
      for (int i = 0; i < ms; ++i) {
        li[i] = w[i] * ((alpha - 1.0 / delta) * uk[i] * uk[i] + 2.0 * der[i] * der[i]);
        const double defect = ut[i] - lap[i];
        ri[i] = w[i] * delta * defect * defect;
      }
      lhs_rows[k] = wt * pairwise_sum(li);
      rhs_rows[k] = wt * pairwise_sum(ri);
    }
    for (int k = 0; k + 1 < ss; ++k) {
      const double dt = u.times[rows[k + 1]] - u.times[rows[k]];
      lhs_t += 0.5 * dt * (lhs_rows[k] + lhs_rows[k + 1]);
      rhs_t += 0.5 * dt * (rhs_rows[k] + rhs_rows[k + 1]);
    }
    Eigen::VectorXd u0 = slice(0), bi(ms);
    for (int i = 0; i < ms; ++i) bi[i] = w[i] * u0[i] * u0[i];
    rhs_t += std::exp(-alpha * u.times[0]) * pairwise_sum(bi);
    return std::make_pair(lhs_t, rhs_t);
  };

  auto [lhs_f, rhs_f] = quadrature(1);
  auto [lhs_c, rhs_c] = quadrature(2);
  CarlemanResult res;
  res.lhs = lhs_f;
  res.rhs = rhs_f;
  res.est_error = std::abs(lhs_f - lhs_c) + std::abs(rhs_f - rhs_c);
  const double scale = std::max({std::abs(lhs_f), std::abs(rhs_f), 1e-300});
  if (res.est_error > 0.1 * scale)
    throw Error("under-resolved", "coarse/fine quadrature disagreement " +
                                      format17(res.est_error / scale) +
                                      " exceeds 10%");
  res.holds = res.lhs <= res.rhs + 2.0 * res.est_error + 1e-14 * scale;
  return res;
}

/// Fitted growth/decay rate of a radial perturbation mode under the rescaled
/// flow, tracked through the graph over the reference circle.
struct RigidityResult {
  double rate = 0.0;
  double stderr_rate = 0.0;
  bool stable_zero = false;
  std::vector<std::pair<double, double>> trace;  // (tau, amplitude)
};

struct RigidityOptions {
  double dtau = 2e-3;
  int cadence = 25;
  Scheme scheme = Scheme::semi_implicit;
};

inline RigidityResult rigidity_experiment(const MultiCircle& ref,
                                          const ScalarField& perturbation,
                                          double amplitude, double tau_end,
                                          const RigidityOptions& opts = {}) {
  const int m = static_cast<int>(perturbation.values.size());
  if (m < 16) throw Error("grid-too-coarse", "need at least 16 grid points");
  if (!(amplitude >= 0.0) || amplitude > 0.05 * ref.radius)
    throw Error("invalid-amplitude",
                "perturbation amplitude must lie in [0, 0.05·radius]");
  if (!(tau_end > 0.0)) throw Error("invalid-time", "tau window must be positive");
  ClosedCurve base = sample(ref, m);
  if (perturbation.curve_id != base.content_id())
    throw Error("grid-mismatch", "perturbation is not sampled on the reference grid");

  Eigen::MatrixXd pts(m, 2);
  for (int i = 0; i < m; ++i) {
    const double a = ref.multiplicity * two_pi * i / m;
    const double rho = ref.radius + amplitude * perturbation.values[i];
    pts(i, 0) = rho * std::cos(a);
    pts(i, 1) = rho * std::sin(a);
  }
  ClosedCurve cur(std::move(pts));

  const Eigen::VectorXd& p = perturbation.values;
  const double pp = p.squaredNorm() / m;
  RigidityResult res;
  double tau = 0.0, last_valid = 0.0;
  const int nsteps = std::max(1, static_cast<int>(std::ceil(tau_end / opts.dtau - 1e-12)));
  auto record = [&]() {
    GraphDecomposition g;
    try {
      g = graph_projection(cur, ref);
    } catch (const Error& e) {
      throw Error(e.code, std::string(e.what()) + "; last valid tau=" +
                              format17(last_valid));
    }
    const double a = pp > 0.0
                         ? std::abs(p.dot(g.phi.values) / m / pp)
                         : g.phi.values.cwiseAbs().maxCoeff();
    res.trace.emplace_back(tau, a);
    last_valid = tau;
  };
  record();
  for (int k = 0; k < nsteps; ++k) {
    const double dtau = std::min(opts.dtau, tau_end - tau);
    cur = rescaled_step(cur, dtau, opts.scheme);
    tau = (k + 1 == nsteps) ? tau_end : (k + 1) * opts.dtau;
    if ((k + 1) % opts.cadence == 0 || k + 1 == nsteps) record();
  }

  double peak = 0.0;
  for (const auto& [tk, ak] : res.trace) peak = std::max(peak, ak);
  if (peak < 1e-8) {
    res.stable_zero = true;
    return res;
  }
  std::vector<double> xs, ys;
  for (const auto& [tk, ak] : res.trace)
    if (ak > 0.0) {
      xs.push_back(tk);
      ys.push_back(std::log(ak));
    }
  if (xs.size() < 3)
    throw Error("too-few-samples", "not enough positive amplitudes to fit a rate");
  LineFit fit = ols_fit(xs, ys);
  res.rate = fit.slope;
  res.stderr_rate = fit.stderr_slope;
  return res;
}

}  // namespace csf
