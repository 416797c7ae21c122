#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace csf {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// Error with a stable machine-readable code ("invalid-time", "grid-mismatch", ...).
struct Error : std::runtime_error {
  std::string code;
  Error(std::string c, const std::string& msg)
      : std::runtime_error(msg), code(std::move(c)) {}
};

/// Closed polygonal curve in R^N sampled on a uniform periodic parameter grid.
/// Point M wraps to point 0. Immutable after construction.
class ClosedCurve {
 public:
  using Metadata = std::map<std::string, std::string>;

  ClosedCurve(Eigen::MatrixXd points, double param_period = two_pi,
              Metadata metadata = {})
      : pts_(std::move(points)),
        period_(param_period),
        meta_(std::move(metadata)) {
    validate();
  }

  int size() const { return static_cast<int>(pts_.rows()); }
  int dim() const { return static_cast<int>(pts_.cols()); }
  const Eigen::MatrixXd& points() const { return pts_; }
  Eigen::RowVectorXd point(int i) const { return pts_.row(wrap(i)); }
  double param_period() const { return period_; }
  double param_step() const { return period_ / size(); }
  const Metadata& metadata() const { return meta_; }
  Metadata& metadata() { return meta_; }

  int wrap(int i) const {
    const int m = size();
    int r = i % m;
    return r < 0 ? r + m : r;
  }

  /// FNV-1a over the raw coordinates and period; identifies the grid a field
  /// was sampled on.
  std::uint64_t content_id() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    mix(pts_.data(), sizeof(double) * pts_.size());
    mix(&period_, sizeof(period_));
    return h;
  }

 private:
  void validate() const {
    if (pts_.rows() < 8)
      throw Error("invalid-curve", "points: need at least 8 samples, got " +
                                       std::to_string(pts_.rows()));
    if (pts_.cols() < 2)
      throw Error("invalid-curve", "points: ambient dimension must be >= 2, got " +
                                       std::to_string(pts_.cols()));
    if (!(period_ > 0.0) || !std::isfinite(period_))
      throw Error("invalid-curve", "param_period: must be positive and finite");
    for (int i = 0; i < pts_.rows(); ++i)
      for (int j = 0; j < pts_.cols(); ++j)
        if (!std::isfinite(pts_(i, j)))
          throw Error("invalid-curve", "points[" + std::to_string(i) + "][" +
                                           std::to_string(j) + "]: non-finite coordinate");
    for (int i = 0; i < pts_.rows(); ++i) {
      const int j = (i + 1) % static_cast<int>(pts_.rows());
      if ((pts_.row(i) - pts_.row(j)).norm() == 0.0)
        throw Error("invalid-curve", "points[" + std::to_string(i) +
                                         "]: coincides with its successor");
    }
  }

  Eigen::MatrixXd pts_;
  double period_;
  Metadata meta_;
};

/// Real-valued samples aligned with a carrier curve's grid.
struct ScalarField {
  Eigen::VectorXd values;
  std::uint64_t curve_id = 0;
};

/// R^N-valued samples aligned with a carrier curve's grid.
struct VectorField {
  Eigen::MatrixXd vectors;
  std::uint64_t curve_id = 0;
};

inline ScalarField make_field(const ClosedCurve& c, Eigen::VectorXd v) {
  if (v.size() != c.size())
    throw Error("grid-mismatch", "field length " + std::to_string(v.size()) +
                                     " vs curve grid " + std::to_string(c.size()));
  for (int i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw Error("invalid-field", "values[" + std::to_string(i) + "]: non-finite");
  return ScalarField{std::move(v), c.content_id()};
}

inline VectorField make_vector_field(const ClosedCurve& c, Eigen::MatrixXd v) {
  if (v.rows() != c.size() || v.cols() != c.dim())
    throw Error("grid-mismatch", "vector field shape mismatch with carrier curve");
  return VectorField{std::move(v), c.content_id()};
}

inline void require_aligned(const ClosedCurve& c, const ScalarField& f,
                            const char* what = "field") {
  if (f.values.size() != c.size())
    throw Error("grid-mismatch", std::string(what) + ": length " +
                                     std::to_string(f.values.size()) +
                                     " does not match curve grid " +
                                     std::to_string(c.size()));
}

inline void require_aligned(const ClosedCurve& c, const VectorField& f,
                            const char* what = "vector field") {
  if (f.vectors.rows() != c.size() || f.vectors.cols() != c.dim())
    throw Error("grid-mismatch", std::string(what) + ": shape does not match carrier");
}

}  // namespace csf
