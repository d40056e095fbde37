#include "doctest.h"
#include "mams/gaussian.hpp"
#include "mams/design.hpp"

#include <cmath>

using namespace mams;

TEST_CASE("upper orthant probability: exact low dimensions") {
  // P(max > 0) for an exchangeable pair with rho = 1/2 is 2/3 (arcsine law)
  CorrelationMatrix r2(2);
  r2.set(0, 1, 0.5);
  CHECK(upper_orthant_prob({0.0, 0.0}, r2) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  // one dimension reduces to the survival function
  CorrelationMatrix r1(1);
  CHECK(upper_orthant_prob({1.96}, r1) == doctest::Approx(1.0 - norm_cdf(1.96)).epsilon(1e-9));
  // exchangeable triple with rho = 1/2: P(all <= 0) = 1/4
  CorrelationMatrix r3(3);
  r3.set(0, 1, 0.5);
  r3.set(0, 2, 0.5);
  r3.set(1, 2, 0.5);
  CHECK(upper_orthant_prob({0.0, 0.0, 0.0}, r3) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("dunnett correlation from allocation ratios") {
  auto r = dunnett_correlation({1.0, 1.0}, 1.0);
  CHECK(r(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  auto r2 = dunnett_correlation({1.0, 3.0}, 1.0);
  // rho = sqrt(r1/(r1+r0)) * sqrt(r2/(r2+r0)) = sqrt(1/2) * sqrt(3/4)
  CHECK(r2(0, 1) == doctest::Approx(std::sqrt(0.5 * 0.75)).epsilon(1e-12));
  CHECK_THROWS_AS((void)dunnett_correlation({0.0}, 1.0), std::domain_error);
}

TEST_CASE("joint trial law: correlation structure of the reference design") {
  auto plan = equal_allocation_plan(3, 2, 10.0, 1.0);
  auto law = make_law(plan, {0.0, 0.0});
  auto corr = law.correlation();
  // shared control at equal stage: 1/2; same arm across stages: sqrt(t_j / t_j')
  // layout is arm-major: index = k * stages + j
  CHECK(corr(0, 3) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(corr(0, 1) == doctest::Approx(std::sqrt(1.0 / 2.0)).epsilon(1e-12));
  CHECK(corr(0, 2) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
  // cross arm, cross stage: rho_shared * sqrt(t/t')
  CHECK(corr(0, 4) == doctest::Approx(0.5 * std::sqrt(1.0 / 2.0)).epsilon(1e-12));
}

TEST_CASE("joint trial law: mean is theta * sqrt(information)") {
  auto plan = equal_allocation_plan(3, 2, 10.0, 1.0);
  const double dm = norm_quantile(0.75) * std::sqrt(2.0);
  auto law = make_law(plan, {dm, 0.0});
  CHECK(information_level(plan, 1, 1) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(information_level(plan, 1, 3) == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(law.mean(0, 0) == doctest::Approx(dm * std::sqrt(5.0)).epsilon(1e-12));
  CHECK(law.mean(0, 2) == doctest::Approx(dm * std::sqrt(15.0)).epsilon(1e-12));
  CHECK(law.mean(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("crossing probability: single analysis reduces to a tail area") {
  auto plan = equal_allocation_plan(1, 1, 10.0, 1.0);
  auto law = make_law(plan, {0.0});
  CrossingOptions o;
  o.nsim = 400000;
  o.seed = 1234;
  const double p =
      crossing_probability(law, {1.96}, {-100.0}, StopRule::EfficacyStopsTrial, o);
  CHECK(p == doctest::Approx(0.025).epsilon(0.05));
}

TEST_CASE("crossing probability is deterministic for a fixed seed") {
  auto plan = equal_allocation_plan(3, 2, 10.0, 1.0);
  auto law = make_law(plan, {0.0, 0.0});
  CrossingOptions o;
  o.nsim = 50000;
  o.seed = 77;
  std::vector<double> u = {2.4, 2.2, 2.1}, l = {0.0, 1.3, 2.1};
  CHECK(crossing_probability(law, u, l, StopRule::EfficacyStopsTrial, o) ==
        crossing_probability(law, u, l, StopRule::EfficacyStopsTrial, o));
}

TEST_CASE("crossing probability validates bounds") {
  auto plan = equal_allocation_plan(2, 1, 10.0, 1.0);
  auto law = make_law(plan, {0.0});
  CHECK_THROWS_AS((void)crossing_probability(law, {2.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)crossing_probability(law, {2.0, 1.0}, {0.0, 1.5}),
                  std::invalid_argument);
}
