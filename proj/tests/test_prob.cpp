#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "entlab/prob.hpp"

using namespace entlab;

namespace {

constexpr double kPi = std::numbers::pi;

ProbMeasure bernoulli_measure(double p) {
  const auto mu = ReferenceMeasure::counting(2);
  return make_prob(mu, densities::bernoulli(mu, p));
}

}  // namespace

TEST_CASE("make_prob: validation and residual bookkeeping") {
  const auto mu = ReferenceMeasure::counting(4);
  const ProbMeasure rho = make_prob(mu, densities::uniform(mu));
  CHECK(rho.normalization_residual() <= 1e-15);

  const auto annulus = ReferenceMeasure::annulus(1.0, 2.0);
  const ProbMeasure au = make_prob(annulus, densities::uniform(annulus));
  CHECK(au.normalization_residual() <= 1e-6);

  CHECK_THROWS_AS(
      make_prob(mu, Density("half", [](std::span<const double>) { return 0.5; },
                            0.5)),
      NormalizationError);
  CHECK_THROWS_AS(
      make_prob(mu, Density("neg",
                            [](std::span<const double> x) {
                              return x[0] == 0.0 ? -0.5 : 0.5;
                            },
                            0.5)),
      NegativeDensityError);
}

TEST_CASE("entropy: exact discrete values") {
  const auto mu8 = ReferenceMeasure::counting(8);
  const EntropyValue e = entropy(make_prob(mu8, densities::uniform(mu8)));
  CHECK(e.method == EntropyValue::Method::ExactSum);
  CHECK(e.error_estimate == 0.0);
  CHECK(std::fabs(e.value - std::log(8.0)) <= 1e-12);

  // two-term oracle computed directly
  const double expected = -(0.3 * std::log(0.3) + 0.7 * std::log(0.7));
  CHECK(std::fabs(entropy(bernoulli_measure(0.3)).value - expected) <= 1e-15);
  CHECK(expected == doctest::Approx(0.6108643020548935).epsilon(1e-12));
}

TEST_CASE("entropy: uniform density on the annulus is log of its area") {
  const auto mu = ReferenceMeasure::annulus(1.0, 2.0);
  const EntropyValue e = entropy(make_prob(mu, densities::uniform(mu)));
  CHECK(e.method == EntropyValue::Method::Quadrature);
  CHECK(std::fabs(e.value - std::log(3.0 * kPi)) <= 1e-6);
}

TEST_CASE("entropy: zero-density regions contribute exactly zero") {
  const auto mu = ReferenceMeasure::counting(4);
  Eigen::VectorXd p(4);
  p << 0.5, 0.5, 0.0, 0.0;
  const EntropyValue e = entropy(make_prob(mu, densities::pmf(mu, p)));
  CHECK(std::fabs(e.value - std::log(2.0)) <= 1e-15);
}

TEST_CASE("entropy: divergence guard trips on huge integrands") {
  const auto mu = ReferenceMeasure::interval(0.0, 1.0);
  // Deliberately unnormalized: a legitimate make_prob would reject it.
  const ProbMeasure broken = make_prob_unchecked(
      mu, Density("huge", [](std::span<const double>) { return 1e300; }, 1e300));
  CHECK_THROWS_AS(entropy(broken), DivergenceError);
}

TEST_CASE("kl_divergence: identity, point mass, absolute continuity") {
  const auto mu = ReferenceMeasure::counting(2);
  const ProbMeasure uni = make_prob(mu, densities::uniform(mu));
  CHECK(std::fabs(kl_divergence(uni, uni)) <= 1e-15);

  Eigen::VectorXd point(2), half(2);
  point << 1.0, 0.0;
  half << 0.5, 0.5;
  const ProbMeasure delta = make_prob(mu, densities::pmf(mu, point));
  const ProbMeasure flat = make_prob(mu, densities::pmf(mu, half));
  CHECK(std::fabs(kl_divergence(delta, flat) - std::log(2.0)) <= 1e-15);
  CHECK_THROWS_AS(kl_divergence(flat, delta), AbsoluteContinuityError);

  const auto other = ReferenceMeasure::counting(3);
  CHECK_THROWS_AS(
      kl_divergence(flat, make_prob(other, densities::uniform(other))), Error);
}

TEST_CASE("kl_divergence: positivity over seeded random pairs") {
  const auto mu = ReferenceMeasure::counting(16);
  Rng rng(0xA11CE);
  auto random_pmf = [&]() {
    Eigen::VectorXd p(16);
    for (int i = 0; i < 16; ++i) p[i] = 0.05 + rng.uniform();
    return (p / p.sum()).eval();
  };
  double min_kl = 1.0;
  for (int k = 0; k < 1000; ++k) {
    const ProbMeasure a = make_prob(mu, densities::pmf(mu, random_pmf()));
    const ProbMeasure b = make_prob(mu, densities::pmf(mu, random_pmf()));
    min_kl = std::min(min_kl, kl_divergence(a, b));
  }
  CHECK(min_kl >= -1e-12);
}

TEST_CASE("entropy is bounded by the log of the reference mass") {
  Rng rng(0xBEEF);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    Eigen::VectorXd w(n), p(n);
    for (int i = 0; i < n; ++i) {
      w[i] = 0.2 + rng.uniform(0.0, 2.0);
      p[i] = 0.01 + rng.uniform();
    }
    const auto mu =
        ReferenceMeasure::discrete(w).scaled(0.5 + rng.uniform(0.0, 3.0));
    const ProbMeasure rho = make_prob(mu, densities::pmf(mu, (p / p.sum()).eval()));
    CHECK(entropy(rho).value <= std::log(total_mass(mu)) + 1e-9);
  }
  // equality case: the uniform density on the annulus
  const auto an = ReferenceMeasure::annulus(1.0, 2.0);
  CHECK(entropy(make_prob(an, densities::uniform(an))).value <=
        std::log(total_mass(an)) + 1e-9);
}

TEST_CASE("rescale_reference: shift is ln(alpha) and round-trips") {
  const auto mu4 = ReferenceMeasure::counting(4);
  const ProbMeasure uni = make_prob(mu4, densities::uniform(mu4));
  const RescaleResult doubled = rescale_reference(uni, 2.0);
  CHECK(doubled.entropy_shift == doctest::Approx(std::log(2.0)));
  CHECK(std::fabs(entropy(doubled.prob).value - std::log(8.0)) <= 1e-12);

  const ProbMeasure bern = bernoulli_measure(0.3);
  const double s0 = entropy(bern).value;
  const RescaleResult up = rescale_reference(bern, 10.0);
  CHECK(std::fabs(entropy(up.prob).value - (s0 + std::log(10.0))) <= 1e-12);
  const RescaleResult back = rescale_reference(up.prob, 0.1);
  CHECK(std::fabs(entropy(back.prob).value - s0) <= 1e-12);

  const RescaleResult same = rescale_reference(bern, 1.0);
  CHECK(entropy(same.prob).value == s0);
}

TEST_CASE("affine_pushforward: 1-D doubling shifts entropy by ln 2") {
  const auto line = ReferenceMeasure::interval(0.0, 1.0);
  const ProbMeasure rho = make_prob(line, densities::uniform(line));
  Eigen::MatrixXd a(1, 1);
  a << 2.0;
  const AffineResult res = affine_pushforward(rho, a, Eigen::VectorXd::Zero(1));
  CHECK(res.log_abs_det == doctest::Approx(std::log(2.0)));
  const double shift = entropy(res.prob).value - entropy(rho).value;
  CHECK(std::fabs(shift - std::log(2.0)) <= 1e-6);
}

TEST_CASE("affine_pushforward: identity map changes nothing") {
  const auto line = ReferenceMeasure::interval(0.0, 1.0);
  const ProbMeasure rho = make_prob(
      line, densities::truncated_gaussian(line, Eigen::VectorXd::Constant(1, 0.4),
                                          Eigen::VectorXd::Constant(1, 0.3)));
  const AffineResult res = affine_pushforward(rho, Eigen::MatrixXd::Identity(1, 1),
                                              Eigen::VectorXd::Zero(1));
  CHECK(res.log_abs_det == 0.0);
  CHECK(std::fabs(entropy(res.prob).value - entropy(rho).value) <= 1e-9);
}

TEST_CASE("affine_pushforward: measure-preserving diagonal in 2-D") {
  const auto box =
      ReferenceMeasure::box(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  const ProbMeasure rho = make_prob(
      box, densities::truncated_gaussian(box, Eigen::Vector2d(0.5, 0.3),
                                         Eigen::Vector2d(0.4, 0.5)));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0 / 3.0;
  const AffineResult res = affine_pushforward(rho, a, Eigen::Vector2d(1.0, -2.0));
  CHECK(std::fabs(res.log_abs_det) <= 1e-15);
  CHECK(std::fabs(entropy(res.prob).value - entropy(rho).value) <= 1e-5);
}

TEST_CASE("affine_pushforward: singular and non-diagonal maps are rejected") {
  const auto box =
      ReferenceMeasure::box(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  const ProbMeasure rho = make_prob(box, densities::uniform(box));
  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(
      affine_pushforward(rho, singular, Eigen::VectorXd::Zero(2)), LinAlgError);
  Eigen::MatrixXd shear = Eigen::MatrixXd::Identity(2, 2);
  shear(0, 1) = 0.5;
  CHECK_THROWS_AS(affine_pushforward(rho, shear, Eigen::VectorXd::Zero(2)),
                  LinAlgError);
}

TEST_CASE("sample: determinism and discrete fast path") {
  const ProbMeasure bern = bernoulli_measure(0.3);
  const Eigen::MatrixXd a = sample(bern, 5000, 1234);
  const Eigen::MatrixXd b = sample(bern, 5000, 1234);
  CHECK(a == b);
  const Eigen::MatrixXd c = sample(bern, 5000, 1235);
  CHECK(a != c);

  const Eigen::MatrixXd big = sample(bern, 100000, 42);
  const double freq = big.col(0).sum() / 100000.0;
  CHECK(std::fabs(freq - 0.3) <= 3.0 * std::sqrt(0.21 / 100000.0));

  const auto mu = ReferenceMeasure::counting(2);
  Eigen::VectorXd point(2);
  point << 1.0, 0.0;
  const Eigen::MatrixXd all0 =
      sample(make_prob(mu, densities::pmf(mu, point)), 1000, 7);
  CHECK(all0.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample: uniform annulus mean radius matches the moment integral") {
  const auto mu = ReferenceMeasure::annulus(1.0, 2.0);
  const ProbMeasure rho = make_prob(mu, densities::uniform(mu));
  const int n = 100000;
  const Eigen::MatrixXd pts = sample(rho, n, 9001);
  Eigen::VectorXd radii(n);
  for (int i = 0; i < n; ++i) radii[i] = std::hypot(pts(i, 0), pts(i, 1));
  const double mean = radii.mean();
  const double sd = std::sqrt((radii.array() - mean).square().sum() / (n - 1));
  // E[R] = integral of r (2r/3) dr over [1,2] = 14/9
  CHECK(std::fabs(mean - 14.0 / 9.0) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("sample: rejection matches quadrature moments for a gaussian") {
  const auto line = ReferenceMeasure::interval(-4.0, 4.0);
  const ProbMeasure rho = make_prob(
      line, densities::truncated_gaussian(line, Eigen::VectorXd::Constant(1, 0.5),
                                          Eigen::VectorXd::Ones(1)));
  const int n = 100000;
  const Eigen::MatrixXd pts = sample(rho, n, 31337);
  const double mean = pts.col(0).mean();
  const double sd =
      std::sqrt((pts.col(0).array() - mean).square().sum() / (n - 1));
  const double expected = integrate(line, [&](std::span<const double> x) {
                            return x[0] * rho.density()(x);
                          }).value;
  CHECK(std::fabs(mean - expected) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("sample: collapsed rejection efficiency aborts with diagnostics") {
  const auto line = ReferenceMeasure::interval(0.0, 1.0);
  // Valid uniform density with a uselessly loose bound: acceptance 1e-5.
  const ProbMeasure rho = make_prob_unchecked(
      line, Density("loose", [](std::span<const double>) { return 1.0; }, 1e5));
  CHECK_THROWS_AS(sample(rho, 100, 5), RejectionError);
}
