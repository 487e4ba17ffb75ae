#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "entlab/disintegration.hpp"

using namespace entlab;

namespace {

constexpr double kPi = std::numbers::pi;

double shannon(std::initializer_list<double> ps) {
  double s = 0.0;
  for (double p : ps) {
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

ProbMeasure uniform_annulus() {
  const auto mu = ReferenceMeasure::annulus(1.0, 2.0);
  return make_prob(mu, densities::uniform(mu));
}

// Coarser grids keep the continuous validation batteries fast; Simpson at
// this resolution is still far below the 1e-4 tolerance for these
// integrands.
QuadratureOptions coarse() {
  QuadratureOptions o;
  o.panels = 512;
  o.annulus_panels = 1024;
  return o;
}

}  // namespace

TEST_CASE("validate_disintegration: exact variants regroup finite sums") {
  const auto mu = ReferenceMeasure::counting(6);
  const Disintegration dm = Disintegration::discrete_map(
      mu, {0, 0, 1, 1, 2, 2}, ReferenceMeasure::counting(3));
  CHECK(validate_disintegration(dm) <= 1e-12);

  const Disintegration gq =
      Disintegration::group_quotient(FiniteGroup::cyclic(6), {0, 3}, 1.0, 1.0);
  CHECK(validate_disintegration(gq) <= 1e-12);

  const auto prod = ReferenceMeasure::product(ReferenceMeasure::counting(2),
                                              ReferenceMeasure::counting(3));
  CHECK(validate_disintegration(Disintegration::product_projection(prod)) <=
        1e-12);
}

TEST_CASE("validate_disintegration: continuous variants at quadrature accuracy") {
  const Disintegration polar =
      Disintegration::polar(ReferenceMeasure::annulus(1.0, 2.0));
  CHECK(validate_disintegration(polar, kDefaultBatterySeed, coarse()) <= 1e-4);

  const auto prod =
      ReferenceMeasure::product(ReferenceMeasure::interval(0.0, 1.0),
                                ReferenceMeasure::interval(-1.0, 1.0));
  CHECK(validate_disintegration(Disintegration::product_projection(prod),
                                kDefaultBatterySeed, coarse()) <= 1e-4);
}

TEST_CASE("validate_disintegration: polar mass identity at default resolution") {
  // integral over the annulus of 1 equals integral over r of 2 pi r dr
  const Disintegration polar =
      Disintegration::polar(ReferenceMeasure::annulus(1.0, 2.0));
  const double lhs =
      integrate(polar.total(), [](std::span<const double>) { return 1.0; }).value;
  const double rhs = integrate(polar.base(), [&](std::span<const double> t) {
                       return integrate(polar.fiber(t).measure,
                                        [](std::span<const double>) {
                                          return 1.0;
                                        })
                           .value;
                     }).value;
  CHECK(std::fabs(lhs - 3.0 * kPi) <= 1e-8);
  CHECK(std::fabs(lhs - rhs) <= 1e-8);
}

TEST_CASE("validate_disintegration: quotient indicator mass is exact") {
  // f = indicator of element {1}: both sides of the defining identity are
  // the single atom's mass.
  const Disintegration gq =
      Disintegration::group_quotient(FiniteGroup::cyclic(6), {0, 3}, 1.0, 1.0);
  auto ind = [](std::span<const double> x) {
    return std::lround(x[0]) == 1 ? 1.0 : 0.0;
  };
  const double lhs = integrate(gq.total(), ind).value;
  const double rhs = integrate(gq.base(), [&](std::span<const double> t) {
                       FiberView fv = gq.fiber(t);
                       return integrate(fv.measure, on_fiber(fv, 1, ind)).value;
                     }).value;
  CHECK(lhs == 1.0);
  CHECK(rhs == 1.0);
}

TEST_CASE("fibers are concentrated on their level sets") {
  const auto mu = ReferenceMeasure::counting(6);
  const std::vector<int> map{0, 0, 1, 1, 2, 2};
  const Disintegration dm =
      Disintegration::discrete_map(mu, map, ReferenceMeasure::counting(3));
  for (int t = 0; t < 3; ++t) {
    const double tc = t;
    FiberView fv = dm.fiber(std::span<const double>(&tc, 1));
    const double off_mass =
        integrate(fv.measure, on_fiber(fv, 1, [&](std::span<const double> x) {
                    return map[static_cast<size_t>(std::lround(x[0]))] == t
                               ? 0.0
                               : 1.0;
                  })).value;
    CHECK(off_mass == 0.0);
  }
}

TEST_CASE("pushforward: polar radial density of the uniform annulus is 2r/3") {
  const ProbMeasure rho = uniform_annulus();
  const Disintegration polar = Disintegration::polar(rho.reference());
  const ProbMeasure marg = pushforward(rho, polar, coarse());
  for (double r : {1.0, 1.25, 1.5, 1.75, 2.0}) {
    CHECK(marg.density()(std::span<const double>(&r, 1)) ==
          doctest::Approx(2.0 * r / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("pushforward: separable product density marginalizes exactly") {
  const auto prod =
      ReferenceMeasure::product(ReferenceMeasure::interval(0.0, 1.0),
                                ReferenceMeasure::interval(0.0, 1.0));
  const ProbMeasure rho = make_prob(
      prod, densities::truncated_gaussian(prod, Eigen::Vector2d(0.3, 0.6),
                                          Eigen::Vector2d(0.4, 0.3)),
      coarse());
  const ProbMeasure marg =
      pushforward(rho, Disintegration::product_projection(prod), coarse());
  const auto left = ReferenceMeasure::interval(0.0, 1.0);
  const Density g = densities::truncated_gaussian(
      left, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 0.4));
  for (double t : {0.1, 0.4, 0.9}) {
    const std::span<const double> ts(&t, 1);
    CHECK(marg.density()(ts) == doctest::Approx(g(ts)).epsilon(1e-9));
  }
}

TEST_CASE("pushforward: Z/6 quotient masses are the coset sums") {
  const FiniteGroup z6 = FiniteGroup::cyclic(6);
  const auto mu = ReferenceMeasure::group_haar(z6, 1.0);
  Eigen::VectorXd p(6);
  p << 0.05, 0.10, 0.15, 0.20, 0.25, 0.25;
  const ProbMeasure rho = make_prob(mu, densities::pmf(mu, p));
  const Disintegration q = Disintegration::group_quotient(z6, {0, 3}, 1.0, 1.0);
  const ProbMeasure marg = pushforward(rho, q);
  const double expected[3] = {0.25, 0.35, 0.40};  // .05+.20, .10+.25, .15+.25
  for (int t = 0; t < 3; ++t) {
    const double tc = t;
    CHECK(marg.density()(std::span<const double>(&tc, 1)) ==
          doctest::Approx(expected[t]).epsilon(1e-14));
  }
}

TEST_CASE("fiber_conditional: uniform annulus conditions to uniform circles") {
  const ProbMeasure rho = uniform_annulus();
  const Disintegration polar = Disintegration::polar(rho.reference());
  const double r = 1.5;
  const FiberConditional fc =
      fiber_conditional(rho, polar, std::span<const double>(&r, 1), coarse());
  // pushforward density 2r/3 = 1 at r = 1.5
  CHECK(fc.base_density == doctest::Approx(1.0).epsilon(1e-9));
  for (double theta : {0.0, 1.0, 3.0, 6.0}) {
    const std::span<const double> ts(&theta, 1);
    CHECK(fc.conditional.density()(ts) ==
          doctest::Approx(1.0 / (2.0 * kPi * r)).epsilon(1e-9));
    CHECK(fc.unnormalized_density(ts) ==
          doctest::Approx(1.0 / (3.0 * kPi)).epsilon(1e-12));
  }
  CHECK(entropy(fc.conditional, coarse()).value ==
        doctest::Approx(std::log(2.0 * kPi * r)).epsilon(1e-9));

  // every positive-mass fiber conditions to a valid probability measure
  // (make_prob inside fiber_conditional checks the mass)
  for (double rr : {1.1, 1.5, 1.9}) {
    const FiberConditional other =
        fiber_conditional(rho, polar, std::span<const double>(&rr, 1), coarse());
    CHECK(other.base_density == doctest::Approx(2.0 * rr / 3.0).epsilon(1e-9));
    CHECK(other.conditional.normalization_residual() <= 1e-6);
  }
}

TEST_CASE("fiber_conditional: discrete conditionals reconstruct the law") {
  // P(B) = sum_t P(T=t) P_t(B), checked on every subset of a 6-atom space.
  const auto mu = ReferenceMeasure::counting(6);
  Eigen::VectorXd p(6);
  p << 0.05, 0.10, 0.15, 0.20, 0.25, 0.25;
  const ProbMeasure rho = make_prob(mu, densities::pmf(mu, p));
  const std::vector<int> map{0, 1, 0, 1, 0, 1};
  const Disintegration dm =
      Disintegration::discrete_map(mu, map, ReferenceMeasure::counting(2));
  const ProbMeasure marg = pushforward(rho, dm);

  for (int mask = 0; mask < 64; ++mask) {
    double direct = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (mask & (1 << i)) direct += p[i];
    }
    double recon = 0.0;
    for (int t = 0; t < 2; ++t) {
      const double tc = t;
      const std::span<const double> ts(&tc, 1);
      const FiberConditional fc = fiber_conditional(rho, dm, ts);
      const auto& w = std::get<Discrete>(fc.fiber.measure.data()).weights;
      double cond = 0.0;
      for (int k = 0; k < w.size(); ++k) {
        const double kc = k;
        double global = 0.0;
        fc.fiber.embed(std::span<const double>(&kc, 1),
                       std::span<double>(&global, 1));
        if (mask & (1 << static_cast<int>(std::lround(global)))) {
          cond += w[k] * fc.conditional.density()(std::span<const double>(&kc, 1));
        }
      }
      recon += marg.density()(ts) * cond;
    }
    CHECK(std::fabs(direct - recon) <= 1e-14);
  }
}

TEST_CASE("fiber_conditional: zero-mass fibers are undefined") {
  const auto mu = ReferenceMeasure::counting(4);
  Eigen::VectorXd p(4);
  p << 0.5, 0.5, 0.0, 0.0;
  const ProbMeasure rho = make_prob(mu, densities::pmf(mu, p));
  const Disintegration dm = Disintegration::discrete_map(
      mu, {0, 0, 1, 1}, ReferenceMeasure::counting(2));
  const double t1 = 1.0;
  CHECK_THROWS_AS(fiber_conditional(rho, dm, std::span<const double>(&t1, 1)),
                  ZeroMassFiberError);
  // chain rule still works: the dead fiber carries no pushforward mass
  const ChainRuleReport rep = chain_rule_report(rho, dm);
  CHECK(rep.discrepancy <= 1e-12);
  CHECK(std::fabs(rep.marginal) <= 1e-15);
  CHECK(std::fabs(rep.conditional - std::log(2.0)) <= 1e-14);
}

TEST_CASE("chain_rule_report: independent uniform on a 2x2 product") {
  const auto mu = ReferenceMeasure::product(ReferenceMeasure::counting(2),
                                            ReferenceMeasure::counting(2));
  const ProbMeasure rho = make_prob(mu, densities::uniform(mu));
  const ChainRuleReport rep =
      chain_rule_report(rho, Disintegration::product_projection(mu));
  CHECK(std::fabs(rep.total - std::log(4.0)) <= 1e-12);
  CHECK(std::fabs(rep.marginal - std::log(2.0)) <= 1e-12);
  CHECK(std::fabs(rep.conditional - std::log(2.0)) <= 1e-12);
  CHECK(rep.discrepancy <= 1e-12);
  CHECK(rep.tolerance == 1e-12);
  REQUIRE(rep.fibers.size() == 2);
  CHECK(rep.fibers[0].pushforward_density == doctest::Approx(0.5));
}

TEST_CASE("chain_rule_report: Z/6 against the exhaustive six-term oracle") {
  const FiniteGroup z6 = FiniteGroup::cyclic(6);
  const auto mu = ReferenceMeasure::group_haar(z6, 1.0);
  Eigen::VectorXd p(6);
  p << 0.05, 0.10, 0.15, 0.20, 0.25, 0.25;
  const ProbMeasure rho = make_prob(mu, densities::pmf(mu, p));
  const ChainRuleReport rep = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 3}, 1.0, 1.0));

  const double total = shannon({0.05, 0.10, 0.15, 0.20, 0.25, 0.25});
  const double marginal = shannon({0.25, 0.35, 0.40});
  const double conditional = 0.25 * shannon({0.05 / 0.25, 0.20 / 0.25}) +
                             0.35 * shannon({0.10 / 0.35, 0.25 / 0.35}) +
                             0.40 * shannon({0.15 / 0.40, 0.25 / 0.40});
  CHECK(std::fabs(rep.total - total) <= 1e-12);
  CHECK(std::fabs(rep.marginal - marginal) <= 1e-12);
  CHECK(std::fabs(rep.conditional - conditional) <= 1e-12);
  CHECK(rep.discrepancy <= 1e-12);
  REQUIRE(rep.fibers.size() == 3);
  CHECK(rep.fibers[1].pushforward_density == doctest::Approx(0.35));
}

TEST_CASE("chain_rule_report: representative choice does not matter") {
  const FiniteGroup z6 = FiniteGroup::cyclic(6);
  const auto mu = ReferenceMeasure::group_haar(z6, 1.0);
  Eigen::VectorXd p(6);
  p << 0.05, 0.10, 0.15, 0.20, 0.25, 0.25;
  const ProbMeasure rho = make_prob(mu, densities::pmf(mu, p));
  const ChainRuleReport a = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 3}, 1.0, 1.0));
  const ChainRuleReport b = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 3}, 1.0, 1.0, std::nullopt,
                                          std::vector<int>{3, 1, 5}));
  CHECK(std::fabs(a.total - b.total) <= 1e-12);
  CHECK(std::fabs(a.marginal - b.marginal) <= 1e-12);
  CHECK(std::fabs(a.conditional - b.conditional) <= 1e-12);
  // a bogus section is rejected
  CHECK_THROWS_AS(
      Disintegration::group_quotient(z6, {0, 3}, 1.0, 1.0, std::nullopt,
                                     std::vector<int>{1, 0, 2}),
      Error);
}

TEST_CASE("group_quotient: degenerate subgroups and scale coherence") {
  const FiniteGroup z6 = FiniteGroup::cyclic(6);
  const auto mu2 = ReferenceMeasure::group_haar(z6, 2.0);
  Eigen::VectorXd p(6);
  p << 0.05, 0.10, 0.15, 0.20, 0.25, 0.25;
  const ProbMeasure rho = make_prob(mu2, densities::pmf(mu2, p));

  // H = {e}: fibers are points, so the marginal carries everything.
  const ChainRuleReport triv = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0}, 2.0, 2.0));
  CHECK(std::fabs(triv.total - triv.marginal) <= 1e-13);
  CHECK(triv.conditional == 0.0);

  // H = G: one coset, so the conditional carries everything.
  const ChainRuleReport full = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 1, 2, 3, 4, 5}, 2.0, 1.0));
  CHECK(std::fabs(full.marginal) <= 1e-13);
  CHECK(std::fabs(full.conditional - full.total) <= 1e-13);

  // moving scale between base and fiber shifts the two terms oppositely
  const double c = 3.0;
  const ChainRuleReport base_line = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 3}, 2.0, 1.0));
  const ChainRuleReport shifted = chain_rule_report(
      rho, Disintegration::group_quotient(z6, {0, 3}, 2.0, 1.0 / c));
  CHECK(std::fabs(shifted.total - base_line.total) <= 1e-12);
  CHECK(std::fabs(shifted.marginal - (base_line.marginal - std::log(c))) <=
        1e-12);
  CHECK(std::fabs(shifted.conditional - (base_line.conditional + std::log(c))) <=
        1e-12);

  // the canonical relation is enforced when all three scales are given
  CHECK_THROWS_AS(
      Disintegration::group_quotient(z6, {0, 3}, 2.0, 1.0, 3.0), Error);
}

TEST_CASE("chain_rule_report: continuous product at quadrature tolerance") {
  const auto prod =
      ReferenceMeasure::product(ReferenceMeasure::interval(0.0, 1.0),
                                ReferenceMeasure::interval(0.0, 2.0));
  const ProbMeasure rho = make_prob(
      prod, densities::truncated_gaussian(prod, Eigen::Vector2d(0.4, 1.2),
                                          Eigen::Vector2d(0.5, 0.7)),
      coarse());
  const ChainRuleReport rep =
      chain_rule_report(rho, Disintegration::product_projection(prod), coarse());
  CHECK(rep.tolerance == 1e-4);
  CHECK(rep.discrepancy <= 1e-4);
  // independent factors: conditional term equals the right factor's entropy
  const auto right = ReferenceMeasure::interval(0.0, 2.0);
  const double s_right =
      entropy(make_prob(right,
                        densities::truncated_gaussian(
                            right, Eigen::VectorXd::Constant(1, 1.2),
                            Eigen::VectorXd::Constant(1, 0.7)),
                        coarse()),
              coarse())
          .value;
  CHECK(std::fabs(rep.conditional - s_right) <= 1e-6);
}

TEST_CASE("deformed comparison: uniform annulus against closed forms") {
  // E[ln R] = integral of ln(r) (2r/3) dr over [1,2] = (4 ln 2)/3 - 1/2,
  // and the flat-reference entropy is ln(3 pi) minus that.
  const DeformedPolarReport rep =
      deformed_chain_rule_comparison(uniform_annulus(), coarse());
  const double mean_log_r = 4.0 * std::log(2.0) / 3.0 - 0.5;
  CHECK(rep.mean_log_radius == doctest::Approx(mean_log_r).epsilon(1e-8));
  CHECK(rep.flat_total ==
        doctest::Approx(std::log(3.0 * kPi) - mean_log_r).epsilon(1e-8));
  CHECK(rep.flat_identity_residual <= 1e-3);
  CHECK(rep.conditional_identity_residual <= 1e-3);
}

TEST_CASE("deformed comparison: radial gaussian satisfies both identities") {
  const auto mu = ReferenceMeasure::annulus(1.0, 2.0);
  const ProbMeasure rho =
      make_prob(mu, densities::annulus_radial_gaussian(mu, 1.3, 0.2), coarse());
  const DeformedPolarReport rep = deformed_chain_rule_comparison(rho, coarse());
  CHECK(rep.polar.discrepancy <= 1e-4);
  CHECK(rep.flat_identity_residual <= 1e-3);
  CHECK(rep.conditional_identity_residual <= 1e-3);
}

TEST_CASE("deformed comparison: narrowing radial spikes pin E[ln R]") {
  const auto mu = ReferenceMeasure::annulus(1.0, 2.0);
  const double r0 = 1.5;
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double sigma : {0.2, 0.1, 0.05}) {
    const ProbMeasure rho = make_prob(
        mu, densities::annulus_radial_gaussian(mu, r0, sigma), coarse());
    const double mean_log_r =
        integrate(mu,
                  [&](std::span<const double> x) {
                    const double f = rho.density()(x);
                    return f > 0.0 ? f * std::log(std::hypot(x[0], x[1])) : 0.0;
                  },
                  coarse())
            .value;
    const double gap = std::fabs(mean_log_r - std::log(r0));
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 2e-3);
}

TEST_CASE("disintegration constructors reject mismatched inputs") {
  const auto mu = ReferenceMeasure::counting(4);
  CHECK_THROWS_AS(Disintegration::discrete_map(mu, {0, 0, 1},
                                               ReferenceMeasure::counting(2)),
                  Error);
  // empty fiber: base atom 2 has no preimage
  CHECK_THROWS_AS(Disintegration::discrete_map(mu, {0, 0, 1, 1},
                                               ReferenceMeasure::counting(3)),
                  Error);
  CHECK_THROWS_AS(Disintegration::polar(mu), Error);
  CHECK_THROWS_AS(Disintegration::product_projection(mu), Error);
  const ProbMeasure rho = make_prob(mu, densities::uniform(mu));
  const auto other = ReferenceMeasure::counting(6);
  const Disintegration dm = Disintegration::discrete_map(
      other, {0, 0, 0, 1, 1, 1}, ReferenceMeasure::counting(2));
  CHECK_THROWS_AS(pushforward(rho, dm), Error);
}
