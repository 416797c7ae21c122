#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "csf/curve.hpp"
#include "csf/gaussian.hpp"
#include "csf/geometry.hpp"

namespace csf {

/// Circle of the given radius traversed `multiplicity` times; radius √2 is
/// the shrinker.
struct MultiCircle {
  int multiplicity = 1;
  double radius = std::sqrt(2.0);
  bool is_shrinker() const { return std::abs(radius - std::sqrt(2.0)) <= 1e-12; }
};

inline ClosedCurve sample(const MultiCircle& mc, int grid) {
  if (mc.multiplicity < 1)
    throw Error("invalid-multiplicity", "multiplicity must be >= 1");
  if (!(mc.radius > 0.0)) throw Error("invalid-radius", "radius must be positive");
  Eigen::MatrixXd pts(grid, 2);
  for (int i = 0; i < grid; ++i) {
    const double a = mc.multiplicity * two_pi * i / grid;
    pts(i, 0) = mc.radius * std::cos(a);
    pts(i, 1) = mc.radius * std::sin(a);
  }
  ClosedCurve c(std::move(pts));
  c.metadata()["family"] = "multi-circle";
  c.metadata()["multiplicity"] = std::to_string(mc.multiplicity);
  return c;
}

/// Weighted Dirichlet and L² forms of the drift operator, with the e^{−|x|²/4}
/// weight and the (4π)^{−1/2} normalization. Stiffness is P1 on the periodic
/// grid; mass is the trapezoid-consistent lumped form, so discrete
/// eigenfunctions are orthonormal in the documented Gaussian quadrature.
struct DriftForms {
  Eigen::VectorXd stiff_diag;   // S_ii
  Eigen::VectorXd stiff_off;    // S_{i,i+1} (cyclic)
  Eigen::VectorXd mass;         // lumped diagonal

  double stiffness_quad(const Eigen::VectorXd& u) const {
    const int m = static_cast<int>(mass.size());
    Eigen::VectorXd terms(m);
    for (int i = 0; i < m; ++i) {
      const double du = u[(i + 1) % m] - u[i];
      terms[i] = -stiff_off[i] * du * du;  // off entries are negative
    }
    return pairwise_sum(terms);
  }
  double mass_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    const int m = static_cast<int>(mass.size());
    Eigen::VectorXd terms(m);
    for (int i = 0; i < m; ++i) terms[i] = mass[i] * u[i] * v[i];
    return pairwise_sum(terms);
  }
  Eigen::MatrixXd stiffness_dense() const {
    const int m = static_cast<int>(mass.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      s(i, i) = stiff_diag[i];
      s(i, (i + 1) % m) = stiff_off[i];
      s((i + 1) % m, i) = stiff_off[i];
    }
    return s;
  }
  Eigen::MatrixXd mass_dense() const {
    return mass.asDiagonal();
  }
};

inline DriftForms drift_forms(const ClosedCurve& sigma) {
  const int m = sigma.size();
  if (m < 16) throw Error("grid-too-coarse", "drift forms need at least 16 grid points");
  const double norm = 1.0 / std::sqrt(4.0 * pi);
  Eigen::VectorXd d = chord_lengths(sigma);
  Eigen::VectorXd w(m);
  for (int i = 0; i < m; ++i)
    w[i] = std::exp(-0.25 * sigma.points().row(i).squaredNorm());
  DriftForms f;
  f.stiff_diag = Eigen::VectorXd::Zero(m);
  f.stiff_off = Eigen::VectorXd::Zero(m);
  f.mass = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m;
    const double we = 0.5 * (w[i] + w[ip]);       // element weight
    const double coeff = norm * we / d[i];        // ∫_e u_s v_s w ds
    f.stiff_off[i] = -coeff;
    f.stiff_diag[i] += coeff;
    f.stiff_diag[ip] += coeff;
    f.mass[i] = norm * w[i] * 0.5 * (d[i] + d[(i + m - 1) % m]);
  }
  return f;
}

/// Eigenvalues (of −𝓛, non-decreasing), Gaussian-orthonormal eigenfunctions,
/// and run-length multiplicity groups.
struct SpectrumResult {
  std::vector<double> eigenvalues;
  std::vector<ScalarField> eigenfunctions;
  std::vector<int> multiplicities;
  ClosedCurve carrier;
};

inline SpectrumResult spectrum(const ClosedCurve& sigma, int count) {
  const int m = sigma.size();
  if (count < 0 || count > m / 4)
    throw Error("invalid-count", "requested eigenpair count must satisfy K <= M/4");
  DriftForms forms = drift_forms(sigma);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      forms.stiffness_dense(), forms.mass_dense());
  if (solver.info() != Eigen::Success)
    throw Error("eigensolver-failure", "generalized eigensolve did not converge");
  SpectrumResult out{{}, {}, {}, sigma};
  const double lam_max = solver.eigenvalues()[m - 1];
  for (int i = 0; i <= count; ++i) {
    double lam = solver.eigenvalues()[i];
    if (lam < -1e-9 * std::max(1.0, lam_max))
      throw Error("eigensolver-failure",
                  "negative eigenvalue beyond roundoff: " + format17(lam));
    if (lam < 0.0) lam = 0.0;
    Eigen::VectorXd v = solver.eigenvectors().col(i);
    int imax = 0;
    for (int j = 1; j < m; ++j)
      if (std::abs(v[j]) > std::abs(v[imax])) imax = j;
    if (v[imax] < 0.0) v = -v;
    out.eigenvalues.push_back(lam);
    out.eigenfunctions.push_back(ScalarField{v, sigma.content_id()});
  }
  for (std::size_t i = 0; i < out.eigenvalues.size(); ++i) {
    if (i > 0 && std::abs(out.eigenvalues[i] - out.eigenvalues[i - 1]) <=
                     1e-6 * (1.0 + out.eigenvalues[i]))
      ++out.multiplicities.back();
    else
      out.multiplicities.push_back(1);
  }
  return out;
}

inline SpectrumResult spectrum(const MultiCircle& mc, int count, int grid) {
  return spectrum(sample(mc, grid), count);
}

struct CheckResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Rayleigh inequality ∮ū² ≤ (1/λ_{l+1})∮|∇ū|² for ū orthogonal to the
/// eigenfunctions 0..l; both sides in the assembled Gaussian forms.
inline CheckResult rayleigh_check(const ScalarField& u, const SpectrumResult& spec,
                                  int l) {
  if (l < 0 || l + 1 >= static_cast<int>(spec.eigenvalues.size()))
    throw Error("invalid-level",
                "level " + std::to_string(l) + " needs eigenvalue " +
                    std::to_string(l + 1) + " which was not computed");
  require_aligned(spec.carrier, u, "u");
  DriftForms forms = drift_forms(spec.carrier);
  Eigen::VectorXd ubar = u.values;
  for (int i = 0; i <= l; ++i) {
    const Eigen::VectorXd& phi = spec.eigenfunctions[i].values;
    ubar -= forms.mass_inner(ubar, phi) / forms.mass_inner(phi, phi) * phi;
  }
  CheckResult res;
  res.lhs = forms.mass_inner(ubar, ubar);
  res.rhs = forms.stiffness_quad(ubar) / spec.eigenvalues[l + 1];
  res.holds = res.lhs <= res.rhs * (1.0 + 1e-6) + 1e-14;
  return res;
}

/// Coordinate pair (2j, 2j+1) with the largest projected RMS radius.
inline std::pair<int, int> dominant_plane(const ClosedCurve& c) {
  int best = 0;
  double best_r = -1.0;
  for (int j = 0; 2 * j + 1 < c.dim(); ++j) {
    const double r = c.points().col(2 * j).squaredNorm() +
                     c.points().col(2 * j + 1).squaredNorm();
    if (r > best_r) {
      best_r = r;
      best = j;
    }
  }
  return {2 * best, 2 * best + 1};
}

/// Carry a field along the parameter correspondence between two curves of the
/// same period and compatible winding (periodic cubic interpolation).
inline ScalarField transplant(const ScalarField& field, const ClosedCurve& from,
                              const ClosedCurve& to) {
  require_aligned(from, field, "field");
  if (std::abs(from.param_period() - to.param_period()) >
      1e-12 * from.param_period())
    throw Error("no-graph-correspondence", "parameter periods differ");
  const int w_from = turning_number(from, dominant_plane(from));
  const int w_to = turning_number(to, dominant_plane(to));
  if (w_from != w_to)
    throw Error("no-graph-correspondence",
                "winding " + std::to_string(w_from) + " vs " + std::to_string(w_to));
  const int m2 = to.size();
  Eigen::VectorXd vals(m2);
  for (int j = 0; j < m2; ++j) {
    const double theta = to.param_period() * j / m2;
    vals[j] = periodic_cubic_eval(field.values, from.param_period(), theta);
  }
  return ScalarField{std::move(vals), to.content_id()};
}

}  // namespace csf
