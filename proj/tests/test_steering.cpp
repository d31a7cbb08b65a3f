#include <gtest/gtest.h>

#include "csteer/steering.hpp"
#include "test_support.hpp"

using namespace csteer;
using csteer::testing::random_conceptor;
using csteer::testing::random_matrix;

namespace {

Vectord vec(std::initializer_list<double> values) {
  Vectord v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST(Steering, SteeringVectorIsRowMean) {
  Matrixd x(2, 3);
  x << 1, 2, 3, 3, 4, 5;
  const auto v = build_steering_vector(ActivationSetd(x), "t");
  EXPECT_EQ(v.vector(), vec({2, 3, 4}));
  EXPECT_FALSE(v.mean_centered());
  EXPECT_EQ(v.task_label(), "t");
}

TEST(Steering, AdditiveAddsScaledVector) {
  const SteeringVectord v(vec({1, -1}), false, "t");
  EXPECT_EQ(additive_steer(vec({0.5, 0.5}), v, 2.0), vec({2.5, -1.5}));
}

TEST(Steering, ConceptorReplacesActivation) {
  Matrixd m(2, 2);
  m << 0.5, 0, 0, 0.25;
  const auto c = Conceptord::from_matrix(m, {});
  EXPECT_EQ(conceptor_steer(vec({2, 4}), c, 2.0), vec({2, 2}));
}

TEST(Steering, MeanCenteredConceptorShiftsAroundBaselineMean) {
  Matrixd m(2, 2);
  m << 0.5, 0, 0, 0.5;
  const auto c = Conceptord::from_matrix(m, {ConceptorOrigin::mean_centered, true, {}});
  const MeanCenteringContextd ctx(vec({1, 1}), 4);
  // β·C(h − μ) + μ = 2·0.5·(2, 0) + (1, 1)
  EXPECT_EQ(mean_centered_conceptor_steer(vec({3, 1}), c, ctx, 2.0), vec({3, 1}));
  const auto plain = Conceptord::from_matrix(m, {});
  EXPECT_THROW(mean_centered_conceptor_steer(vec({3, 1}), plain, ctx, 2.0), UsageError);
}

TEST(Steering, MeanCenteringSubtractsBaseline) {
  Matrixd baseline(2, 2);
  baseline << 0, 2, 2, 0;
  const auto ctx = MeanCenteringContextd::from_baseline(ActivationSetd(baseline));
  EXPECT_EQ(ctx.mu_train(), vec({1, 1}));
  EXPECT_EQ(ctx.source_count(), 2);
  const auto v = mean_center_vector(SteeringVectord(vec({3, 0}), false, "t"), ctx);
  EXPECT_EQ(v.vector(), vec({2, -1}));
  EXPECT_TRUE(v.mean_centered());
  EXPECT_THROW(mean_center_vector(v, ctx), UsageError);
}

TEST(Steering, MeanCenteredConceptorUsesShiftedData) {
  Matrixd x(2, 2);
  x << 2, 1, 0, 1;
  const MeanCenteringContextd ctx(vec({1, 1}), 1);
  // Shifted rows are (1,0) and (−1,0): R = diag(1, 0).
  const auto c = mean_centered_conceptor(ActivationSetd(x), ctx, Aperture(1.0));
  EXPECT_NEAR(c.matrix()(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(c.matrix()(1, 1), 0.0, 1e-15);
  EXPECT_TRUE(c.mean_centered());
}

TEST(Steering, CombinedVectorIsMidpoint) {
  const auto v = combine_vectors_mean(SteeringVectord(vec({2, 0}), false, "a"),
                                      SteeringVectord(vec({0, 4}), false, "b"));
  EXPECT_EQ(v.vector(), vec({1, 2}));
  EXPECT_EQ(v.task_label(), "a+b");
  EXPECT_THROW(combine_vectors_mean(SteeringVectord(vec({2, 0}), true, "a"),
                                    SteeringVectord(vec({0, 4}), false, "b")),
               UsageError);
}

TEST(Steering, FusionMatchesSequentialApplication) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrixd w = random_matrix(rng, 7, 5);
    const auto c = random_conceptor(rng, 5, 0.0, 1.0);
    const Vectord h = rng.normal_vector(5);
    const Vectord fused = fuse_conceptor(w, c) * h;
    const Vectord sequential = w * (c.matrix() * h);
    EXPECT_LE((fused - sequential).norm(), 1e-10 * w.norm() * h.norm());
  }
}

TEST(Steering, BetaMustBePositive) {
  const SteeringVectord v(vec({1, 1}), false, "t");
  EXPECT_THROW(additive_steer(vec({0, 0}), v, 0.0), DomainError);
  EXPECT_THROW(additive_steer(vec({0, 0}), v, -1.0), DomainError);
  EXPECT_THROW(SteeringMechanismd::additive(v, std::nan("")), DomainError);
}

TEST(Steering, DimensionMismatchThrows) {
  const SteeringVectord v(vec({1, 1}), false, "t");
  EXPECT_THROW(additive_steer(vec({0, 0, 0}), v, 1.0), DimensionError);
  const auto c = Conceptord::from_matrix(Matrixd::Identity(2, 2) * 0.5, {});
  EXPECT_THROW(conceptor_steer(vec({1}), c, 1.0), DimensionError);
}

TEST(Steering, MechanismRowsMatchSingleVectors) {
  Rng rng(22);
  const Matrixd h = random_matrix(rng, 6, 4);
  Matrixd base = random_matrix(rng, 30, 4);
  const auto ctx = MeanCenteringContextd::from_baseline(ActivationSetd(base));
  const ActivationSetd task(random_matrix(rng, 30, 4));
  const auto v = build_steering_vector(task, "t");
  const std::vector<SteeringMechanismd> mechanisms{
      SteeringMechanismd::none(),
      SteeringMechanismd::additive(v, 1.5),
      SteeringMechanismd::additive_mc(mean_center_vector(v, ctx), ctx, 1.5),
      SteeringMechanismd::conceptor(conceptor_from_activations(task, Aperture(0.5)), 2.0),
      SteeringMechanismd::conceptor_mc(mean_centered_conceptor(task, ctx, Aperture(0.5)), ctx, 2.0),
  };
  for (const auto& m : mechanisms) {
    const Matrixd rows = m.apply_rows(h);
    for (Index i = 0; i < h.rows(); ++i) {
      EXPECT_LT((rows.row(i).transpose() - m.apply(h.row(i).transpose())).norm(), 1e-12) << to_string(m.kind());
    }
  }
}

TEST(Steering, MechanismFactoriesCheckCentering) {
  const MeanCenteringContextd ctx(vec({0, 0}), 1);
  EXPECT_THROW(SteeringMechanismd::additive(SteeringVectord(vec({1, 1}), true, "t"), 1.0), UsageError);
  EXPECT_THROW(SteeringMechanismd::additive_mc(SteeringVectord(vec({1, 1}), false, "t"), ctx, 1.0), UsageError);
  const auto plain = Conceptord::from_matrix(Matrixd::Identity(2, 2) * 0.5, {});
  EXPECT_THROW(SteeringMechanismd::conceptor_mc(plain, ctx, 1.0), UsageError);
}

TEST(Steering, NoneLeavesActivationsAlone) {
  const Vectord h = vec({1, 2, 3});
  EXPECT_EQ(SteeringMechanismd::none().apply(h), h);
}

TEST(Steering, MechanismKindNamesRoundTrip) {
  for (auto k : {MechanismKind::none, MechanismKind::additive, MechanismKind::additive_mc, MechanismKind::conceptor,
                 MechanismKind::conceptor_mc}) {
    EXPECT_EQ(parse_mechanism_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_mechanism_kind("conceptor_or"));
}

TEST(Steering, DefaultGrids) {
  EXPECT_EQ(default_alpha_grid(), (std::vector<double>{0.001, 0.0125, 0.05, 0.1}));
  EXPECT_EQ(default_beta_c_grid(), (std::vector<double>{0.5, 1, 2, 3, 4, 5}));
  EXPECT_EQ(default_beta_add_grid(), (std::vector<double>{0.5, 1, 1.5, 2, 2.5, 3, 4, 5}));
}
