#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "csf/curve.hpp"

namespace csf {

/// Pairwise (cascade) summation: deterministic and O(eps·log n) error.
inline double pairwise_sum(const double* x, std::ptrdiff_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::ptrdiff_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const Eigen::VectorXd& x) {
  return pairwise_sum(x.data(), x.size());
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), static_cast<std::ptrdiff_t>(x.size()));
}

/// Periodic 4-point Lagrange (cubic) interpolation of samples on a uniform
/// grid of the given period. Exact at the nodes.
inline double periodic_cubic_eval(const Eigen::VectorXd& samples, double period,
                                  double q) {
  const int m = static_cast<int>(samples.size());
  const double h = period / m;
  double u = q / h;
  u -= std::floor(u / m) * m;  // into [0, m)
  int i0 = static_cast<int>(std::floor(u));
  if (i0 >= m) i0 -= m;
  const double f = u - i0;
  auto at = [&](int k) {
    int j = (i0 + k) % m;
    if (j < 0) j += m;
    return samples[j];
  };
  const double ym1 = at(-1), y0 = at(0), y1 = at(1), y2 = at(2);
  // Lagrange basis on offsets {-1,0,1,2}
  const double a = -f * (f - 1.0) * (f - 2.0) / 6.0;
  const double b = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
  const double c = -f * (f + 1.0) * (f - 2.0) / 2.0;
  const double d = f * (f + 1.0) * (f - 1.0) / 6.0;
  return a * ym1 + b * y0 + c * y1 + d * y2;
}

/// Column-wise periodic cubic interpolation; rows are grid samples.
inline Eigen::MatrixXd periodic_cubic_eval(const Eigen::MatrixXd& samples,
                                           double period,
                                           const Eigen::VectorXd& queries) {
  Eigen::MatrixXd out(queries.size(), samples.cols());
  for (int c = 0; c < samples.cols(); ++c) {
    Eigen::VectorXd col = samples.col(c);
    for (int i = 0; i < queries.size(); ++i)
      out(i, c) = periodic_cubic_eval(col, period, queries[i]);
  }
  return out;
}

/// Solve a cyclic tridiagonal system:
///   a[i]*x[i-1] + b[i]*x[i] + c[i]*x[i+1] = r[i]  (indices mod n)
/// via the Thomas algorithm with a Sherman–Morrison corner correction.
/// Requires b strictly diagonally dominant (the implicit heat steps are).
inline Eigen::VectorXd cyclic_tridiag_solve(const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& b,
                                            const Eigen::VectorXd& c,
                                            const Eigen::VectorXd& r) {
  const int n = static_cast<int>(b.size());
  auto thomas = [&](const Eigen::VectorXd& diag, const Eigen::VectorXd& rhs) {
    Eigen::VectorXd cp(n), dp(n), x(n);
    cp[0] = c[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (int i = 1; i < n; ++i) {
      const double m = diag[i] - a[i] * cp[i - 1];
      cp[i] = c[i] / m;
      dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
    }
    x[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
  };
  const double gamma = -b[0];
  Eigen::VectorXd bb = b;
  bb[0] -= gamma;
  bb[n - 1] -= a[0] * c[n - 1] / gamma;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  u[0] = gamma;
  u[n - 1] = c[n - 1];
  Eigen::VectorXd y = thomas(bb, r);
  Eigen::VectorXd z = thomas(bb, u);
  const double fact =
      (y[0] + a[0] * y[n - 1] / gamma) / (1.0 + z[0] + a[0] * z[n - 1] / gamma);
  return y - fact * z;
}

/// Golden-section search for the maximum of f on [lo, hi].
inline double golden_section_max(const std::function<double(double)>& f,
                                 double lo, double hi, double tol,
                                 int max_iter = 200) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? x1 : x2;
}

/// Nelder–Mead maximization. Returns best point found; `evals` is advanced by
/// the number of objective calls. Deterministic for fixed inputs.
inline Eigen::VectorXd nelder_mead_max(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& start, double scale, int max_evals, long* evals) {
  const int n = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> pts(n + 1, start);
  std::vector<double> val(n + 1);
  for (int i = 1; i <= n; ++i) pts[i][i - 1] += scale;
  long used = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++used;
    return f(x);
  };
  for (int i = 0; i <= n; ++i) val[i] = eval(pts[i]);
  auto order = [&]() {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return val[a] > val[b]; });
    std::vector<Eigen::VectorXd> p2(n + 1);
    std::vector<double> v2(n + 1);
    for (int i = 0; i <= n; ++i) {
      p2[i] = pts[idx[i]];
      v2[i] = val[idx[i]];
    }
    pts.swap(p2);
    val.swap(v2);
  };
  while (used < max_evals) {
    order();
    double spread = val[0] - val[n];
    double size = 0.0;
    for (int i = 1; i <= n; ++i) size = std::max(size, (pts[i] - pts[0]).norm());
    if (spread < 1e-13 * (1.0 + std::abs(val[0])) && size < 1e-10) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;
    Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    double fr = eval(xr);
    if (fr > val[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      double fe = eval(xe);
      if (fe > fr) {
        pts[n] = xe;
        val[n] = fe;
      } else {
        pts[n] = xr;
        val[n] = fr;
      }
    } else if (fr > val[n - 1]) {
      pts[n] = xr;
      val[n] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (pts[n] - centroid);
      double fc = eval(xc);
      if (fc > val[n]) {
        pts[n] = xc;
        val[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          val[i] = eval(pts[i]);
        }
      }
    }
  }
  order();
  if (evals) *evals += used;
  return pts[0];
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double rms_residual = 0.0;
};

/// Ordinary least squares y ≈ slope·x + intercept with the usual slope
/// standard error.
inline LineFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  LineFit fit;
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - fit.slope * x[i] - fit.intercept;
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  if (n > 2) fit.stderr_slope = std::sqrt(ss / (n - 2) / sxx);
  return fit;
}

/// Shortest-17-significant-digit decimal form; stable across runs.
inline std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void require_negative_time(double t) {
  if (!(t < 0.0) || !std::isfinite(t))
    throw Error("invalid-time", "flow time must be negative and finite, got " +
                                    format17(t));
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_digest(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace csf
