#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "csf/flow.hpp"
#include "csf/spectrum.hpp"
#include "csf/torus.hpp"
#include "csf/verify.hpp"

using namespace csf;

TEST_CASE("drift identity residual vanishes at second order") {
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4);
  e1[0] = 1.0;
  auto residual = [&](int grid) {
    ClosedCurve c = sample(TorusCurveParams{{1, 2}, 1.0}, grid);
    return drift_identity_check(make_linear_caloric(c, e1), c, -1.0);
  };
  double r128 = residual(128), r256 = residual(256);
  REQUIRE(r128 / r256 > 3.0);
  REQUIRE(r128 / r256 < 5.0);

  // On the shrinking circle every term has a closed form and Phi = 0.
  Eigen::VectorXd e(2);
  e << 1.0, 0.0;
  ClosedCurve circ = sample(MultiCircle{1, std::sqrt(2.0)}, 256);
  REQUIRE(drift_identity_check(make_linear_caloric(circ, e), circ, -1.0) <= 1e-3);

  // U = 0 makes every term vanish identically.
  REQUIRE(drift_identity_check(make_linear_caloric(circ, Eigen::VectorXd::Zero(2)),
                               circ, -1.0) == 0.0);
}

TEST_CASE("growth exponents match the closed forms") {
  auto times = [](double a, double b, int n) {
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i)
      ts[i] = -std::exp(std::log(-a) + (std::log(-b) - std::log(-a)) * i / (n - 1));
    return ts;
  };
  // Shrinking circle: I_{x0}(t) = (-t) sqrt(2 pi / e).
  FlowTrajectory circ = torus_trajectory({1}, times(-1e6, -1e2, 17), 256, {0});
  GrowthFit d1 = growth_fit(circ, "x0");
  REQUIRE(std::abs(d1.exponent_d - 1.0) <= 0.02);
  REQUIRE(std::abs(d1.constant_C - std::sqrt(two_pi / std::exp(1.0))) <=
          0.05 * d1.constant_C);

  // Torus (1,2) low pair: I ~ r^2 ~ (-2t)^{1/4}.
  FlowTrajectory tor = torus_trajectory({1, 2}, times(-1e8, -1e4, 17), 256, {0});
  GrowthFit d14 = growth_fit(tor, "x0");
  REQUIRE(std::abs(d14.exponent_d - 0.25) <= 0.02);

  REQUIRE_THROWS_AS(growth_fit(tor, "nope"), Error);
  FlowTrajectory few = torus_trajectory({1}, times(-1e6, -1e2, 4), 64, {0});
  REQUIRE_THROWS_AS(growth_fit(few, "x0"), Error);
  FlowTrajectory narrow = torus_trajectory({1}, times(-2.0, -1.0, 9), 64, {0});
  REQUIRE_THROWS_AS(growth_fit(narrow, "x0"), Error);
}

TEST_CASE("effective_codimension flags the rank transition, against a Gram oracle") {
  auto oracle = [](const ClosedCurve& c, double t) {
    Eigen::VectorXd w = quadrature_weights(c);
    Eigen::VectorXd g(c.size());
    for (int i = 0; i < c.size(); ++i)
      g[i] = w[i] * std::exp(c.points().row(i).squaredNorm() / (4.0 * t));
    g /= pairwise_sum(g);
    Eigen::RowVectorXd mean = g.transpose() * c.points();
    Eigen::MatrixXd centered = c.points().rowwise() - mean;
    Eigen::MatrixXd gram =
        centered.transpose() * g.asDiagonal() * centered;  // second moments
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::VectorXd ev = es.eigenvalues().reverse();
    return ev;
  };

  ClosedCurve full = sample(TorusCurveParams{{1, 2}, 1.0}, 512);
  CodimReport rep = effective_codimension(full, GaussianContext{-1.0});
  REQUIRE(rep.spatial_rank == 4);
  REQUIRE(rep.codimension == 3);
  Eigen::VectorXd ev = oracle(full, -1.0);
  REQUIRE(rep.singular_values.size() == 4);
  for (int i = 0; i < 4; ++i)
    REQUIRE(std::abs(rep.singular_values[i] - ev[i]) <= 1e-10 * ev[0]);

  double t_small = -5e-5;
  ClosedCurve thin =
      sample(TorusCurveParams{{1, 2}, solve_radius({1, 2}, t_small)}, 512);
  CodimReport rep2 = effective_codimension(thin, GaussianContext{t_small});
  REQUIRE(rep2.spatial_rank == 2);
  REQUIRE(rep2.codimension == 1);

  // Invariance under a rigid rotation of the ambient space.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = gauss(rng);
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  ClosedCurve rotated(full.points() * q, full.param_period());
  CodimReport rep3 = effective_codimension(rotated, GaussianContext{-1.0});
  REQUIRE(rep3.spatial_rank == rep.spatial_rank);
  for (int i = 0; i < 4; ++i)
    REQUIRE(std::abs(rep3.singular_values[i] - rep.singular_values[i]) <=
            1e-10 * rep.singular_values[0]);
}

TEST_CASE("gram_schmidt_at orthonormalizes in the Gaussian inner product") {
  ClosedCurve c = sample(MultiCircle{1, 1.0}, 256);
  GaussianContext ctx{-1.0};
  const int m = c.size();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(m), cs(m), sn(m);
  for (int i = 0; i < m; ++i) {
    cs[i] = std::cos(two_pi * i / m);
    sn[i] = std::sin(two_pi * i / m);
  }
  auto F = [&](const Eigen::VectorXd& v) { return make_field(c, v); };

  GramSchmidtResult res = gram_schmidt_at({F(ones), F(cs), F(sn)}, c, ctx);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) {
      double g = weighted_inner_product(res.orthonormal[i], res.orthonormal[j], c, ctx);
      REQUIRE(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
  // Parity: the inputs were already orthogonal, so no mixing happened.
  REQUIRE(std::abs(res.coefficients(0, 1)) <= 1e-12);
  REQUIRE(std::abs(res.coefficients(0, 2)) <= 1e-12);
  REQUIRE(std::abs(res.coefficients(1, 2)) <= 1e-12);

  // {1, 1 + cos} strips the constant with unit coefficient.
  GramSchmidtResult mix = gram_schmidt_at({F(ones), F(ones + cs)}, c, ctx);
  REQUIRE(std::abs(mix.coefficients(0, 1) - 1.0) <= 1e-12);

  // Torus coordinates at t = -1 are orthogonal to constants and each other.
  ClosedCurve tc = sample(TorusCurveParams{{1, 2}, 1.0}, 512);
  std::vector<ScalarField> basis{
      make_field(tc, Eigen::VectorXd::Ones(tc.size())),
      make_field(tc, tc.points().col(0)), make_field(tc, tc.points().col(1))};
  GramSchmidtResult tres = gram_schmidt_at(basis, tc, GaussianContext{-1.0});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < i; ++j)
      REQUIRE(std::abs(tres.coefficients(j, i)) <= 1e-10);

  try {
    gram_schmidt_at({F(ones), F(2.0 * ones)}, c, ctx);
    FAIL("expected rank-deficient");
  } catch (const Error& e) {
    REQUIRE(e.code == "rank-deficient");
  }

  // Property: 50 random trig bases come out orthonormal to 1e-10.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScalarField> fields;
    for (int f = 0; f < 3; ++f) {
      Eigen::VectorXd v(m);
      for (int i = 0; i < m; ++i) {
        double th = two_pi * i / m;
        v[i] = gauss(rng) + gauss(rng) * std::cos(th) + gauss(rng) * std::sin(th) +
               gauss(rng) * std::cos(2 * th);
      }
      fields.push_back(F(v));
    }
    GramSchmidtResult r = gram_schmidt_at(fields, c, ctx);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j)
        REQUIRE(std::abs(weighted_inner_product(r.orthonormal[i], r.orthonormal[j], c,
                                                ctx) -
                         (i == j ? 1.0 : 0.0)) <= 1e-10);
  }
}

TEST_CASE("poincare_verify saturates on eigenmodes and verifies the graph instance") {
  SpectrumResult spec = spectrum(MultiCircle{2}, 6, 512);
  const ClosedCurve& c = spec.carrier;
  const int m = c.size();
  GaussianContext ctx{-1.0};
  Eigen::VectorXd mode1(m), mode2(m), psi_c(m), psi_s(m);
  for (int i = 0; i < m; ++i) {
    double th = two_pi * i / m;
    mode1[i] = std::cos(th);      // lowest pair on the double cover
    mode2[i] = std::cos(2 * th);  // eigenvalue 1/2 group
    psi_c[i] = std::cos(th);
    psi_s[i] = std::sin(th);
  }

  CheckResult sat = poincare_verify(c, ctx, make_field(c, mode1), spec, 0, 0.0);
  REQUIRE(std::abs(sat.lhs / sat.rhs - 1.0) <= 2e-3);
  REQUIRE(poincare_verify(c, ctx, make_field(c, mode1), spec, 0, 0.1).holds);

  std::vector<ScalarField> psis{make_field(c, psi_c), make_field(c, psi_s)};
  CheckResult sat2 = poincare_verify(c, ctx, make_field(c, mode2), spec, 2, 0.0, psis);
  REQUIRE(std::abs(sat2.lhs / sat2.rhs - 1.0) <= 2e-3);

  // Orthogonality precondition is enforced.
  try {
    Eigen::VectorXd shifted = mode1.array() + 1.0;
    poincare_verify(c, ctx, make_field(c, shifted), spec, 0, 0.1);
    FAIL("expected orthogonality-violated");
  } catch (const Error& e) {
    REQUIRE(e.code == "orthogonality-violated");
  }

  // epsilon-graph instance: rescaled torus over the double cover at t = -1e6.
  double t = -1e6;
  ClosedCurve tor = sample(TorusCurveParams{{1, 2}, solve_radius({1, 2}, t)}, m);
  ClosedCurve rescaled(tor.points() / std::sqrt(-t), tor.param_period());
  ScalarField u = transplant(make_field(c, psi_c), c, rescaled);
  ScalarField one = make_field(rescaled, Eigen::VectorXd::Ones(m));
  GaussianContext rctx{-1.0};
  double mean = weighted_inner_product(u, one, rescaled, rctx) /
                weighted_inner_product(one, one, rescaled, rctx);
  u.values.array() -= mean;
  REQUIRE(poincare_verify(rescaled, rctx, u, spec, 0, 0.1).holds);
}

TEST_CASE("carleman_verify: worked instance, trivial instance, and resolution guard") {
  ClosedCurve sigma = sample(MultiCircle{2}, 256);
  std::vector<double> times(65);
  for (int i = 0; i < 65; ++i) times[i] = -2.0 + i / 64.0;

  SpaceTimeField zero =
      sample_space_time(sigma, times, [](double, double) { return 0.0; });
  CarlemanResult z = carleman_verify(zero, sigma, 4.0, 1.0);
  REQUIRE(z.holds);
  REQUIRE(z.lhs == 0.0);
  REQUIRE(z.rhs == 0.0);

  SpaceTimeField caloric = sample_space_time(sigma, times, [](double th, double t) {
    return std::exp(-t / 8.0) * std::cos(th);
  });
  CarlemanResult w = carleman_verify(caloric, sigma, 4.0, 1.0);
  REQUIRE(w.holds);
  REQUIRE(w.lhs < w.rhs);
  REQUIRE(w.lhs > 0.0);

  std::vector<double> coarse{-2.0, -1.75, -1.5, -1.25, -1.0};
  SpaceTimeField wiggly = sample_space_time(sigma, coarse, [](double th, double t) {
    return std::cos(th) * std::cos(8.0 * t);
  });
  try {
    carleman_verify(wiggly, sigma, 4.0, 1.0);
    FAIL("expected under-resolved");
  } catch (const Error& e) {
    REQUIRE(e.code == "under-resolved");
  }

  REQUIRE_THROWS_AS(carleman_verify(caloric, sigma, -1.0, 1.0), Error);
}

TEST_CASE("rigidity_experiment recovers the linearized mode rates") {
  RigidityOptions opts;
  opts.dtau = 2e-3;

  auto rate_of = [&](int mult, int mode, double tau_end) {
    MultiCircle ref{mult};
    ClosedCurve c0 = sample(ref, 256);
    Eigen::VectorXd p(c0.size());
    for (int i = 0; i < c0.size(); ++i)
      p[i] = std::cos(mode * two_pi * i / c0.size());
    return rigidity_experiment(ref, make_field(c0, p), 0.01, tau_end, opts);
  };

  RigidityResult dilation = rate_of(1, 0, 1.2);
  REQUIRE_FALSE(dilation.stable_zero);
  REQUIRE(std::abs(dilation.rate - 1.0) <= 0.05);

  RigidityResult stable = rate_of(1, 2, 1.5);
  REQUIRE(std::abs(stable.rate - (-1.0)) <= 0.05);

  RigidityResult unstable = rate_of(2, 1, 1.5);
  REQUIRE(std::abs(unstable.rate - 0.875) <= 0.05);

  // Zero perturbation never grows.
  MultiCircle ref{1};
  ClosedCurve c0 = sample(ref, 64);
  RigidityResult zero = rigidity_experiment(
      ref, make_field(c0, Eigen::VectorXd::Zero(64)), 0.0, 0.5, opts);
  REQUIRE(zero.stable_zero);

  try {
    rigidity_experiment(ref, make_field(c0, Eigen::VectorXd::Ones(64)), 0.5, 0.5,
                        opts);
    FAIL("expected invalid-amplitude");
  } catch (const Error& e) {
    REQUIRE(e.code == "invalid-amplitude");
  }
}
