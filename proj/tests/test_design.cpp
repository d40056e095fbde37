#include "doctest.h"
#include "mams/design.hpp"

#include <cmath>

using namespace mams;

namespace {
ClosedTest& reference_test() {
  // calibrated once and shared across cases (single-threaded test binary)
  static ClosedTest test = [] {
    CalibrationOptions o;
    o.nsim = 400000;
    o.seed = 0x5eed;
    auto plan = equal_allocation_plan(3, 2, 10.0, 1.0);
    return build_closed_test(plan, BoundaryShape::Triangular, 0.05, o);
  }();
  return test;
}
}  // namespace

TEST_CASE("recruitment plan validation") {
  CHECK_THROWS_AS(equal_allocation_plan(0, 2, 10.0, 1.0).validate(), std::domain_error);
  CHECK_THROWS_AS(equal_allocation_plan(3, 2, -1.0, 1.0).validate(), std::domain_error);
  RecruitmentPlan p = equal_allocation_plan(3, 2, 10.0, 1.0);
  p.ratios[1][2] = 1.0;  // decreasing cumulative recruitment
  CHECK_THROWS_AS(p.validate(), std::domain_error);
}

TEST_CASE("boundary shape factors are exact at integer stage fractions") {
  // triangular with t = j/3: u ~ (1+t)/sqrt(t), l ~ -(1-3t)/sqrt(t)
  CHECK(upper_shape_factor(BoundaryShape::Triangular, 1, 3) ==
        doctest::Approx(4.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(lower_shape_factor(BoundaryShape::Triangular, 1, 3) == 0.0);
  CHECK(upper_shape_factor(BoundaryShape::Triangular, 3, 3) ==
        doctest::Approx(6.0 / 3.0).epsilon(1e-15));
  // final-stage upper equals final-stage lower (closed continuation region)
  CHECK(upper_shape_factor(BoundaryShape::Triangular, 3, 3) ==
        lower_shape_factor(BoundaryShape::Triangular, 3, 3));
  CHECK(upper_shape_factor(BoundaryShape::Pocock, 2, 3) == 1.0);
  CHECK(upper_shape_factor(BoundaryShape::OBrienFleming, 1, 3) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(shape_from_name("triangular") == BoundaryShape::Triangular);
  CHECK_THROWS_AS((void)shape_from_name("nope"), std::domain_error);
}

TEST_CASE("reference design: calibrated boundaries") {
  const auto& test = reference_test();
  const auto& full = test.family.at(test.full_set());
  // stage-1 futility bound is exactly zero under the triangular shape
  CHECK(test.futility[0] == 0.0);
  CHECK(!std::signbit(test.futility[0]));
  // full-intersection bounds match the published design
  CHECK(full.upper[0] == doctest::Approx(2.433).epsilon(0.01));
  CHECK(full.upper[1] == doctest::Approx(2.150).epsilon(0.01));
  CHECK(full.upper[2] == doctest::Approx(2.107).epsilon(0.01));
  CHECK(test.futility[1] == doctest::Approx(1.290).epsilon(0.01));
  // continuation region closes at the last analysis
  CHECK(test.futility[2] == doctest::Approx(full.upper[2]).epsilon(1e-12));
  // single-hypothesis bounds (calibrated against the shared futility)
  const auto& u1 = test.family.at(1).upper;
  CHECK(u1[0] == doctest::Approx(2.103).epsilon(0.01));
  CHECK(u1[1] == doctest::Approx(1.859).epsilon(0.01));
  CHECK(u1[2] == doctest::Approx(1.821).epsilon(0.01));
  // exchangeable hypotheses calibrate to bit-identical bounds
  CHECK(test.family.at(1).upper == test.family.at(2).upper);
  CHECK(test.family.at(1).scale == test.family.at(2).scale);
}

TEST_CASE("reference design: attained familywise level") {
  const auto& test = reference_test();
  auto law = make_law(test.plan, {0.0, 0.0});
  CrossingOptions o;
  o.nsim = 400000;
  o.seed = 0xabcdef;  // independent of the calibration stream
  const auto& full = test.family.at(test.full_set());
  const double p =
      crossing_probability(law, full.upper, test.futility, StopRule::EfficacyStopsTrial, o);
  CHECK(p == doctest::Approx(0.05).epsilon(0.04));
}

TEST_CASE("calibration rejects degenerate levels") {
  auto plan = equal_allocation_plan(3, 2, 10.0, 1.0);
  CalibrationOptions o;
  o.nsim = 1000;
  CHECK_THROWS_AS(
      (void)calibrate_boundaries(plan, 3u, BoundaryShape::Triangular, 1e-4, nullptr, o),
      std::domain_error);
}

TEST_CASE("single hypothesis, single stage calibrates to the normal quantile") {
  auto plan = equal_allocation_plan(1, 1, 10.0, 1.0);
  CalibrationOptions o;
  o.nsim = 10000;
  auto test = build_closed_test(plan, BoundaryShape::Pocock, 0.025, o);
  CHECK(test.family.at(1).upper[0] ==
        doctest::Approx(norm_quantile(0.975)).epsilon(1e-10));
}

TEST_CASE("trial conduct on crafted paths") {
  const auto& test = reference_test();
  SUBCASE("immediate efficacy stop") {
    TrialOutcome o = evaluate_trial(test, {{10.0, 0.0, 0.0}, {0.1, 0.0, 0.0}});
    CHECK(o.reject_global[0]);
    CHECK_FALSE(o.reject_global[1]);
    CHECK(o.stop_stage == 1);
    CHECK(o.stopped_for_efficacy);
    CHECK(o.patients == doctest::Approx(30.0));
  }
  SUBCASE("both arms futile at the first analysis") {
    TrialOutcome o = evaluate_trial(test, {{-0.5, 0.0, 0.0}, {-1.0, 0.0, 0.0}});
    CHECK_FALSE(o.reject_global[0]);
    CHECK(o.dropped[0]);
    CHECK(o.dropped[1]);
    CHECK(o.stop_stage == 1);
    CHECK(o.patients == doctest::Approx(30.0));
  }
  SUBCASE("one arm dropped, the other rejected later through all its sets") {
    // arm 2 dropped at stage 1; arm 1 must cross both u{1} and u{1,2}
    TrialOutcome o = evaluate_trial(test, {{1.0, 10.0, 0.0}, {-1.0, 0.0, 0.0}});
    CHECK(o.reject_global[0]);
    CHECK(o.dropped[1]);
    CHECK(o.stop_stage == 2);
    // stage 1 recruits 3 groups of 10, stage 2 only arm 1 and control
    CHECK(o.patients == doctest::Approx(50.0));
  }
  SUBCASE("local singleton rejection alone does not reject globally") {
    // between u{1} (~2.10) and u{1,2} (~2.43) at stage 1, then futile
    TrialOutcome o = evaluate_trial(test, {{2.2, -5.0, 0.0}, {-1.0, 0.0, 0.0}});
    CHECK_FALSE(o.reject_global[0]);
  }
}

TEST_CASE("design document round trip is lossless") {
  const auto& test = reference_test();
  const std::string doc = serialize_closed_test(test);
  auto back = parse_closed_test(doc);
  CHECK(serialize_closed_test(back) == doc);
  CHECK(back.plan.stages == test.plan.stages);
  CHECK(back.family.at(3).upper == test.family.at(3).upper);
  CHECK(back.futility == test.futility);
  CHECK_THROWS_AS((void)parse_closed_test("not a document"), std::runtime_error);
}
