#pragma once

#include <cmath>
#include <utility>

#include "csf/curve.hpp"
#include "csf/numerics.hpp"

namespace csf {

/// Length of segment i -> i+1 for every i (cyclic).
inline Eigen::VectorXd chord_lengths(const ClosedCurve& c) {
  const int m = c.size();
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i)
    d[i] = (c.points().row((i + 1) % m) - c.points().row(i)).norm();
  return d;
}

inline double arc_length(const ClosedCurve& c) {
  Eigen::VectorXd d = chord_lengths(c);
  return pairwise_sum(d);
}

/// Trapezoid quadrature weights in arc length: w_i = (d_{i-1}+d_i)/2.
inline Eigen::VectorXd quadrature_weights(const ClosedCurve& c) {
  const int m = c.size();
  Eigen::VectorXd d = chord_lengths(c), w(m);
  for (int i = 0; i < m; ++i) w[i] = 0.5 * (d[(i + m - 1) % m] + d[i]);
  return w;
}

/// Parameters θ*_j (j=0..M2-1) at which the polygonal arc length equals
/// j·L/M2; the input's node parameters are taken as uniform.
inline Eigen::VectorXd constant_speed_params(const ClosedCurve& c, int m2) {
  const int m = c.size();
  const double h = c.param_step();
  Eigen::VectorXd d = chord_lengths(c);
  Eigen::VectorXd cum(m + 1);
  cum[0] = 0.0;
  for (int i = 0; i < m; ++i) cum[i + 1] = cum[i] + d[i];
  const double total = cum[m];
  if (!(total > 0.0)) throw Error("degenerate-curve", "curve has zero total length");
  Eigen::VectorXd theta(m2);
  int seg = 0;
  for (int j = 0; j < m2; ++j) {
    const double target = total * j / m2;
    while (seg + 1 < m && cum[seg + 1] < target) ++seg;
    const double f = (target - cum[seg]) / d[seg];
    theta[j] = h * (seg + f);
  }
  return theta;
}

/// Equal-arclength resampling along the polygon (linear interpolation on the
/// chords); preserves total length to roundoff and is idempotent.
inline ClosedCurve resample_constant_speed(const ClosedCurve& c, int m2) {
  if (m2 < 8) throw Error("invalid-curve", "resample target grid must be >= 8");
  const int m = c.size();
  Eigen::VectorXd theta = constant_speed_params(c, m2);
  const double h = c.param_step();
  Eigen::MatrixXd out(m2, c.dim());
  for (int j = 0; j < m2; ++j) {
    const double u = theta[j] / h;
    int i0 = static_cast<int>(std::floor(u));
    double f = u - i0;
    i0 %= m;
    out.row(j) = (1.0 - f) * c.points().row(i0) + f * c.points().row((i0 + 1) % m);
  }
  return ClosedCurve(std::move(out), c.param_period(), c.metadata());
}

/// Smooth (periodic-cubic) equal-arclength resampling; used by the flow
/// drivers where repeated polygonal resampling would bias the geometry.
inline ClosedCurve resample_smooth(const ClosedCurve& c, int m2) {
  Eigen::VectorXd theta = constant_speed_params(c, m2);
  Eigen::MatrixXd out = periodic_cubic_eval(c.points(), c.param_period(), theta);
  return ClosedCurve(std::move(out), c.param_period(), c.metadata());
}

/// Discrete second derivative in arc length (3-point stencil with chord
/// spacings); second order on (near-)constant-speed grids, exact on circles.
/// Equals minus the mean curvature vector for curves.
inline VectorField position_laplacian(const ClosedCurve& c) {
  const int m = c.size();
  const Eigen::MatrixXd& p = c.points();
  Eigen::VectorXd d = chord_lengths(c);
  Eigen::MatrixXd lap(m, c.dim());
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m, im = (i + m - 1) % m;
    const double dp = d[i], dm = d[im];
    lap.row(i) =
        2.0 / (dp + dm) * ((p.row(ip) - p.row(i)) / dp - (p.row(i) - p.row(im)) / dm);
  }
  return VectorField{std::move(lap), c.content_id()};
}

/// Scalar version of the arc-length second derivative, same stencil.
inline Eigen::VectorXd scalar_laplacian(const ClosedCurve& c, const Eigen::VectorXd& u) {
  const int m = c.size();
  Eigen::VectorXd d = chord_lengths(c), out(m);
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m, im = (i + m - 1) % m;
    out[i] = 2.0 / (d[i] + d[im]) * ((u[ip] - u[i]) / d[i] - (u[i] - u[im]) / d[im]);
  }
  return out;
}

/// Central-difference derivative in arc length.
inline Eigen::VectorXd scalar_derivative(const ClosedCurve& c, const Eigen::VectorXd& u) {
  const int m = c.size();
  Eigen::VectorXd d = chord_lengths(c), out(m);
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m, im = (i + m - 1) % m;
    out[i] = (u[ip] - u[im]) / (d[i] + d[im]);
  }
  return out;
}

/// Unit tangents by central differences.
inline VectorField unit_tangents(const ClosedCurve& c) {
  const int m = c.size();
  Eigen::MatrixXd t(m, c.dim());
  for (int i = 0; i < m; ++i) {
    Eigen::RowVectorXd v = c.points().row((i + 1) % m) - c.points().row((i + m - 1) % m);
    const double n = v.norm();
    if (n == 0.0) throw Error("degenerate-curve", "vanishing central tangent at node " +
                                                      std::to_string(i));
    t.row(i) = v / n;
  }
  return VectorField{std::move(t), c.content_id()};
}

/// Split a field into parts normal and tangential to the curve;
/// normal + tangential reconstructs the input exactly.
inline std::pair<VectorField, VectorField> normal_tangential_split(
    const ClosedCurve& c, const VectorField& f) {
  require_aligned(c, f);
  VectorField tan = unit_tangents(c);
  const int m = c.size();
  Eigen::MatrixXd tpart(m, c.dim()), npart(m, c.dim());
  for (int i = 0; i < m; ++i) {
    const double a = f.vectors.row(i).dot(tan.vectors.row(i));
    tpart.row(i) = a * tan.vectors.row(i);
    npart.row(i) = f.vectors.row(i) - tpart.row(i);
  }
  return {VectorField{std::move(npart), f.curve_id},
          VectorField{std::move(tpart), f.curve_id}};
}

/// Winding count of the projected tangent direction in the given coordinate
/// plane (the rotation index of the projection).
inline int turning_number(const ClosedCurve& c, std::pair<int, int> plane) {
  const int m = c.size();
  const int a = plane.first, b = plane.second;
  if (a < 0 || b < 0 || a >= c.dim() || b >= c.dim() || a == b)
    throw Error("invalid-curve", "projection plane axes out of range");
  double scale = 0.0;
  for (int i = 0; i < m; ++i)
    scale = std::max(scale, std::hypot(c.points()(i, a), c.points()(i, b)));
  double total = 0.0;
  double prev_x = 0, prev_y = 0;
  for (int i = 0; i <= m; ++i) {
    const int j = i % m, k = (i + 1) % m;
    const double tx = c.points()(k, a) - c.points()(j, a);
    const double ty = c.points()(k, b) - c.points()(j, b);
    if (std::hypot(tx, ty) <= 1e-14 * (scale > 0 ? scale : 1.0))
      throw Error("singular-projection",
                  "projected tangent vanishes at node " + std::to_string(j));
    if (i > 0) {
      const double cross = prev_x * ty - prev_y * tx;
      const double dot = prev_x * tx + prev_y * ty;
      total += std::atan2(cross, dot);
    }
    prev_x = tx;
    prev_y = ty;
  }
  return static_cast<int>(std::lround(total / two_pi));
}

}  // namespace csf
