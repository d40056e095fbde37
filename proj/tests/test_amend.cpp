// Adding arms mid-trial: interim bookkeeping, split weights, residual
// boundaries, conditional error rates, and the recalibrated closure.
#include <cmath>

#include "doctest.h"
#include "mams/amend.hpp"

using namespace mams;

namespace {

// the worked three-stage two-arm design, calibrated once per binary
const ClosedTest& base_test() {
  static const ClosedTest t = [] {
    CalibrationOptions o;
    o.nsim = 400000;
    return build_closed_test(equal_allocation_plan(3, 2, 10.0, 1.0), BoundaryShape::Triangular,
                             0.05, o);
  }();
  return t;
}

InterimState interim_at(double z1, double z2) {
  return observe_interim(base_test(), {{z1}, {z2}}, 1);
}

}  // namespace

TEST_CASE("split weights follow the cumulative patient counts") {
  const auto w = split_weights(equal_allocation_plan(3, 2, 10.0, 1.0), 1);
  // by stage 2 an arm+control pair has 40 of which 20 were seen; by stage 3, 60
  CHECK(w.w1[0][0] == doctest::Approx(std::sqrt(20.0 / 40.0)).epsilon(1e-14));
  CHECK(w.w1[0][1] == doctest::Approx(std::sqrt(20.0 / 60.0)).epsilon(1e-14));
  CHECK(w.w2[0][0] == doctest::Approx(std::sqrt(1.0 - 20.0 / 40.0)).epsilon(1e-14));
  CHECK(w.w1[1][1] == w.w1[0][1]);  // exchangeable arms
  CHECK_THROWS_AS(split_weights(equal_allocation_plan(3, 2, 10.0, 1.0), 3), std::domain_error);
  // the reconstruction identity w1 z + w2 z* at z* = 0 returns the scaled interim
  CHECK(reconstruct_z(2.0, 0.0, w.w1[0][0], w.w2[0][0]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("interim observation records rejections, drops, and stops") {
  SUBCASE("plain continuation") {
    const auto st = interim_at(2.0, 1.5);
    CHECK(!st.stopped);
    CHECK(st.dropped[0] == 0);
    CHECK(st.dropped[1] == 0);
    for (const auto& [m, r] : st.local_rejected) CHECK(r == 0);
  }
  SUBCASE("local rejection without a global stop") {
    // 2.2 clears the singleton stage-1 bound (~2.10) but not the full set (~2.43)
    const auto st = interim_at(2.2, 1.5);
    CHECK(!st.stopped);
    CHECK(st.local_rejected.at(HypothesisSet{1}) == 1);
    CHECK(st.local_rejected.at(HypothesisSet{3}) == 0);
  }
  SUBCASE("futility drop") {
    const auto st = interim_at(-0.5, 1.5);
    CHECK(!st.stopped);
    CHECK(st.dropped[0] == 1);
    CHECK(st.dropped[1] == 0);
  }
  SUBCASE("all arms futile concludes the trial") {
    const auto st = interim_at(-1.0, -1.0);
    CHECK(st.stopped);
    CHECK(!st.stopped_for_efficacy);
  }
  SUBCASE("global rejection concludes the trial") {
    const auto st = interim_at(2.6, 2.5);
    CHECK(st.stopped);
    CHECK(st.stopped_for_efficacy);
  }
  CHECK_THROWS_AS(observe_interim(base_test(), {{2.0}, {1.5}}, 3), std::domain_error);
  CHECK_THROWS_AS(observe_interim(base_test(), {{2.0}}, 1), std::invalid_argument);
}

TEST_CASE("residual boundaries rewrite the bounds on the post-interim scale") {
  const auto& t = base_test();
  const auto st = interim_at(2.0, 1.5);
  const auto w = split_weights(t.plan, 1);
  const auto rb = residual_boundaries(t, st, w);
  const auto& u = t.family.at(t.full_set()).upper;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j) {
      const double expect = (u[1 + j] - w.w1[k][j] * st.z[k]) / w.w2[k][j];
      CHECK(rb.upper.at(t.full_set())[k][j] == doctest::Approx(expect).epsilon(1e-12));
      const double lf = (t.futility[1 + j] - w.w1[k][j] * st.z[k]) / w.w2[k][j];
      CHECK(rb.futility[k][j] == doctest::Approx(lf).epsilon(1e-12));
    }
  CHECK_THROWS_AS(residual_boundaries(t, interim_at(2.6, 2.5), w), std::domain_error);
}

TEST_CASE("conditional error rates match an independent evaluation") {
  CalibrationOptions o;
  o.nsim = 400000;
  const auto B = conditional_errors_all(base_test(), interim_at(2.0, 1.5), o);
  // frozen from a separate residual-law integration of the same design
  CHECK(B.at(HypothesisSet{1}) == doctest::Approx(0.313).epsilon(0.06));
  CHECK(B.at(HypothesisSet{2}) == doctest::Approx(0.159).epsilon(0.09));
  CHECK(B.at(HypothesisSet{3}) == doctest::Approx(0.243).epsilon(0.07));
  // monotone: the set with the stronger interim carries more budget
  CHECK(B.at(HypothesisSet{1}) > B.at(HypothesisSet{2}));
  // a locally rejected set carries full budget
  const auto B2 = conditional_errors_all(base_test(), interim_at(2.2, 1.5), o);
  CHECK(B2.at(HypothesisSet{1}) == 1.0);
  // a dropped arm's own hypothesis carries none
  const auto B3 = conditional_errors_all(base_test(), interim_at(-0.5, 1.5), o);
  CHECK(B3.at(HypothesisSet{1}) == 0.0);
  CHECK_THROWS_AS(conditional_errors_all(base_test(), interim_at(-1.0, -1.0), o),
                  std::domain_error);
}

TEST_CASE("amendment recalibrates the enlarged closure") {
  CalibrationOptions o;
  o.nsim = 200000;
  const auto& t = base_test();
  const auto st = interim_at(2.0, 1.5);
  const auto plan_post = equal_allocation_plan(2, 4, 10.0, 1.0);
  const auto d = amend_design(t, st, 2, plan_post, t.shape, o);

  CHECK(d.total_arms() == 4);
  CHECK(d.family_post.size() == 15u);
  // shared futility over the two remaining analyses, frozen reference
  REQUIRE(d.futility_post.size() == 2u);
  CHECK(d.futility_post[0] == doctest::Approx(0.742).epsilon(0.03));
  CHECK(d.futility_post[1] == doctest::Approx(2.099).epsilon(0.03));
  // sets of new arms only are tested at the full nominal level, exactly
  for (HypothesisSet m : {HypothesisSet{4}, HypothesisSet{8}, HypothesisSet{12}})
    CHECK(d.family_post.at(m).level == t.alpha);
  // sets touching an existing arm inherit its conditional error
  CHECK(d.family_post.at(HypothesisSet{1}).level == d.cond_error.at(HypothesisSet{1}));
  CHECK(d.family_post.at(HypothesisSet{5}).level == d.cond_error.at(HypothesisSet{1}));
  CHECK(d.family_post.at(HypothesisSet{15}).level == d.cond_error.at(HypothesisSet{3}));
  // exchangeable new arms agree up to shared-path Monte Carlo error
  CHECK(d.family_post.at(HypothesisSet{4}).upper[0] ==
        doctest::Approx(d.family_post.at(HypothesisSet{8}).upper[0]).epsilon(0.01));
  // stricter budget means a higher bound
  CHECK(d.family_post.at(HypothesisSet{2}).upper[0] > d.family_post.at(HypothesisSet{1}).upper[0]);

  CHECK_THROWS_AS(amend_design(t, interim_at(2.6, 2.5), 2, plan_post, t.shape, o),
                  std::domain_error);
}

TEST_CASE("a hypothesis dropped at the interim leaves the closure") {
  CalibrationOptions o;
  o.nsim = 200000;
  const auto& t = base_test();
  const auto st = interim_at(-0.5, 1.5);  // arm 1 futile
  const auto d = amend_design(t, st, 2, equal_allocation_plan(2, 4, 10.0, 1.0), t.shape, o);
  // intersections whose existing part was entirely dropped revert to alpha
  CHECK(d.family_post.at(HypothesisSet{5}).level == t.alpha);   // {1,3}
  CHECK(d.family_post.at(HypothesisSet{13}).level == t.alpha);  // {1,3,4}
  // the dropped singleton itself can never be rejected
  CHECK(d.family_post.at(HypothesisSet{1}).vacuous);
  // a partially dropped intersection keeps its conditional budget
  CHECK(d.family_post.at(HypothesisSet{3}).level == d.cond_error.at(HypothesisSet{3}));
  // and on a path with overwhelming data, the dropped arm still cannot fall
  std::vector<std::vector<double>> s(4, std::vector<double>(2, 5.0));
  const auto out = evaluate_amended(d, s, StopRule::ContinueRemaining);
  CHECK(out.reject_global[0] == 0);
  CHECK(out.reject_global[1] == 1);
  CHECK(out.reject_global[2] == 1);
}

TEST_CASE("amended conduct walks the closure stage by stage") {
  CalibrationOptions o;
  o.nsim = 200000;
  const auto& t = base_test();
  const auto st = interim_at(2.0, 1.5);
  const auto d = amend_design(t, st, 2, equal_allocation_plan(2, 4, 10.0, 1.0), t.shape, o);

  SUBCASE("overwhelming first post-interim analysis stops the trial") {
    const auto out = evaluate_amended(d, {{5.0, 0.0}, {5.0, 0.0}, {5.0, 0.0}, {5.0, 0.0}});
    CHECK(out.stopped_for_efficacy);
    CHECK(out.stop_stage == 1);
    CHECK(out.patients == doctest::Approx(50.0));  // five cohorts of ten
  }
  SUBCASE("universal futility ends recruitment without rejections") {
    const auto out = evaluate_amended(d, {{-3.0, 0.0}, {-3.0, 0.0}, {-3.0, 0.0}, {-3.0, 0.0}});
    CHECK(!out.stopped_for_efficacy);
    CHECK(out.stop_stage == 1);
    for (char r : out.reject_global) CHECK(r == 0);
  }
  SUBCASE("a drop shrinks later cohorts") {
    const auto out = evaluate_amended(d, {{1.0, 1.0}, {-3.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}});
    CHECK(out.stop_stage == 2);
    CHECK(out.dropped[1] == 1);
    CHECK(out.patients == doctest::Approx(90.0));  // 50 then 40 after one drop
  }
  CHECK_THROWS_AS(evaluate_amended(d, {{0.0}, {0.0}}), std::invalid_argument);
}

TEST_CASE("amended documents survive a serialization round trip") {
  CalibrationOptions o;
  o.nsim = 50000;
  const auto& t = base_test();
  const auto d = amend_design(t, interim_at(2.0, 1.5), 2,
                              equal_allocation_plan(2, 4, 10.0, 1.0), t.shape, o);
  const std::string text = serialize_amended_design(d);
  const auto back = parse_amended_design(text);
  CHECK(serialize_amended_design(back) == text);
  CHECK(back.cond_error == d.cond_error);
  CHECK(back.futility_post == d.futility_post);
  CHECK(back.interim.jprime == d.interim.jprime);
}
