#include <gtest/gtest.h>

#include <cmath>

#include "csteer/conceptor.hpp"
#include "test_support.hpp"

using namespace csteer;
using csteer::testing::random_correlation;
using csteer::testing::random_matrix;

namespace {

double objective(const Matrixd& x, const Matrixd& c, double alpha, bool per_sample) {
  const double fit = (x - x * c).squaredNorm();
  return (per_sample ? fit / static_cast<double>(x.rows()) : fit) + c.squaredNorm() / (alpha * alpha);
}

}  // namespace

TEST(Conceptor, DiagonalCorrelationMapsEachEigenvalue) {
  Matrixd r = Matrixd::Zero(2, 2);
  r(0, 0) = 4.0;
  r(1, 1) = 1.0;
  const auto c = conceptor_from_correlation(CorrelationMatrixd(r, 10), Aperture(1.0));
  EXPECT_NEAR(c.matrix()(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(c.matrix()(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(c.matrix()(0, 1), 0.0, 1e-15);
}

TEST(Conceptor, RotatedCorrelationMatchesHandComputation) {
  // R = [[2,1],[1,2]] has eigenvalues 3 and 1, so C = U diag(3/4, 1/2) Uᵀ.
  Matrixd r(2, 2);
  r << 2, 1, 1, 2;
  const auto c = conceptor_from_correlation(CorrelationMatrixd(r, 4), Aperture(1.0));
  EXPECT_NEAR(c.matrix()(0, 0), 0.625, 1e-14);
  EXPECT_NEAR(c.matrix()(0, 1), 0.125, 1e-14);
  EXPECT_NEAR(c.matrix()(1, 0), 0.125, 1e-14);
  EXPECT_NEAR(c.matrix()(1, 1), 0.625, 1e-14);
}

TEST(Conceptor, MatchesDirectInverseFormula) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_correlation(rng, 5, 0.01, 3.0);
    const double alpha = 0.3 + rng.uniform();
    const auto c = conceptor_from_correlation(r, Aperture(alpha));
    const Matrixd reg = r.data() + Matrixd::Identity(5, 5) / (alpha * alpha);
    const Matrixd direct = r.data() * reg.inverse();
    EXPECT_LT((c.matrix() - direct).norm(), 1e-12);
  }
}

TEST(Conceptor, FromActivationsUsesSampleAverage) {
  Matrixd x(2, 2);
  x << 2, 0, 0, 2;
  // R = XᵀX / 2 = 2I; α = 1 gives 2/3 on the diagonal.
  const auto c = conceptor_from_activations(ActivationSetd(x), Aperture(1.0));
  EXPECT_NEAR(c.matrix()(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.matrix()(1, 1), 2.0 / 3.0, 1e-15);
}

TEST(Conceptor, MinimizesPerSampleObjective) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrixd x = random_matrix(rng, 20, 3);
    const double alpha = 0.5 + rng.uniform();
    const auto c = conceptor_from_activations(ActivationSetd(x), Aperture(alpha));
    const double best = objective(x, c.matrix(), alpha, true);
    for (int k = 0; k < 50; ++k) {
      Matrixd delta = random_matrix(rng, 3, 3);
      delta *= 1e-3 / delta.norm();
      EXPECT_GE(objective(x, c.matrix() + delta, alpha, true), best - 1e-12);
    }
  }
}

TEST(Conceptor, SummedObjectiveIsMinimizedAtScaledAperture) {
  // Without the 1/n factor the minimizer is nR(nR + α⁻²I)⁻¹ = C(R, α√n).
  Rng rng(3);
  const Matrixd x = random_matrix(rng, 20, 3);
  const double alpha = 0.7;
  const auto scaled = conceptor_from_activations(ActivationSetd(x), Aperture(alpha * std::sqrt(20.0)));
  const double best = objective(x, scaled.matrix(), alpha, false);
  for (int k = 0; k < 100; ++k) {
    Matrixd delta = random_matrix(rng, 3, 3);
    delta *= 1e-3 / delta.norm();
    EXPECT_GE(objective(x, scaled.matrix() + delta, alpha, false), best - 1e-12);
  }
  const auto plain = conceptor_from_activations(ActivationSetd(x), Aperture(alpha));
  EXPECT_GT(objective(x, plain.matrix(), alpha, false), best);
}

TEST(Conceptor, SpectrumStaysInUnitInterval) {
  Rng rng(4);
  for (double alpha : {1e-3, 0.0125, 0.05, 0.1, 1.0, 10.0}) {
    for (int trial = 0; trial < 30; ++trial) {
      const auto c = conceptor_from_activations(ActivationSetd(random_matrix(rng, 12, 6)), Aperture(alpha));
      const Vectord ev = c.eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-10);
      EXPECT_LE(ev.maxCoeff(), 1.0 + 1e-10);
    }
  }
}

TEST(Conceptor, SpectrumGrowsWithAperture) {
  Rng rng(5);
  const auto r = correlation_matrix(ActivationSetd(random_matrix(rng, 30, 4)));
  Vectord previous = Vectord::Zero(4);
  for (double alpha : {0.01, 0.1, 1.0, 10.0}) {
    const Vectord ev = conceptor_from_correlation(r, Aperture(alpha)).eigenvalues();
    for (Index i = 0; i < 4; ++i) EXPECT_GE(ev(i), previous(i) - 1e-12);
    previous = ev;
  }
}

TEST(Conceptor, SharesEigenvectorsWithCorrelation) {
  Rng rng(6);
  const auto r = random_correlation(rng, 6, 0.1, 2.0);
  const auto c = conceptor_from_correlation(r, Aperture(0.8));
  EXPECT_LT((c.matrix() * r.data() - r.data() * c.matrix()).norm(), 1e-12);
}

TEST(Conceptor, LargeApertureApproachesIdentity) {
  Rng rng(7);
  const auto r = random_correlation(rng, 4, 0.5, 2.0);
  const auto c = conceptor_from_correlation(r, Aperture(1e6));
  EXPECT_LE((c.matrix() - Matrixd::Identity(4, 4)).norm(), 1e-3 * 2.0);
}

TEST(Conceptor, SmallApertureApproachesZero) {
  Rng rng(8);
  const auto r = random_correlation(rng, 4, 0.5, 2.0);
  const auto c = conceptor_from_correlation(r, Aperture(1e-6));
  EXPECT_LE(c.matrix().norm(), 1e-9 * 4 * r.data().norm());
}

TEST(Conceptor, RankDeficientCorrelationKeepsNullSpace) {
  Matrixd x(3, 3);
  x << 1, 0, 0, 2, 0, 0, 3, 0, 0;
  const auto c = conceptor_from_activations(ActivationSetd(x), Aperture(1.0));
  EXPECT_NEAR(c.matrix()(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(c.matrix()(2, 2), 0.0, 1e-15);
  EXPECT_NEAR(c.matrix()(0, 0), (14.0 / 3.0) / (14.0 / 3.0 + 1.0), 1e-14);
}

TEST(Conceptor, SpectrumMapLimits) {
  EXPECT_DOUBLE_EQ(spectrum_map(1.0, ApertureLimit::zero), 1.0);
  EXPECT_DOUBLE_EQ(spectrum_map(0.5, ApertureLimit::zero), 0.0);
  EXPECT_DOUBLE_EQ(spectrum_map(0.0, ApertureLimit::infinity), 0.0);
  EXPECT_DOUBLE_EQ(spectrum_map(0.3, ApertureLimit::infinity), 1.0);
  EXPECT_DOUBLE_EQ(spectrum_map(3.0, Aperture(1.0)), 0.75);
  EXPECT_THROW(spectrum_map(-0.1, Aperture(1.0)), DomainError);
}

TEST(Conceptor, RejectsBadInputs) {
  EXPECT_THROW(Aperture(0.0), DomainError);
  EXPECT_THROW(Aperture(-1.0), DomainError);
  EXPECT_THROW(Aperture(std::nan("")), DomainError);
  Matrixd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(CorrelationMatrixd(asym, 1), ValidationError);
  Matrixd indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  EXPECT_THROW(CorrelationMatrixd(indefinite, 1), ValidationError);
  EXPECT_THROW(CorrelationMatrixd(Matrixd::Identity(2, 3), 1), DimensionError);
  Matrixd too_big = Matrixd::Identity(2, 2) * 1.5;
  EXPECT_THROW(Conceptord::from_matrix(too_big, {}), ValidationError);
  Matrixd nan_row(1, 2);
  nan_row << 1.0, std::nan("");
  EXPECT_THROW(ActivationSetd{nan_row}, ValidationError);
  EXPECT_THROW(ActivationSetd{Matrixd(0, 3)}, ValidationError);
}

TEST(Conceptor, IllConditionedRegularizerThrows) {
  Matrixd r = Matrixd::Zero(2, 2);
  r(0, 0) = 1e20;
  EXPECT_THROW(conceptor_from_correlation(CorrelationMatrixd(r, 1), Aperture(1.0)), NumericalError);
}

TEST(Conceptor, CarriesProvenance) {
  Rng rng(9);
  const auto c = conceptor_from_correlation(random_correlation(rng, 3, 0.1, 1.0), Aperture(0.25));
  EXPECT_EQ(c.provenance().origin, ConceptorOrigin::correlation);
  EXPECT_FALSE(c.mean_centered());
  ASSERT_TRUE(c.aperture());
  EXPECT_DOUBLE_EQ(c.aperture()->value(), 0.25);
  EXPECT_EQ(c.leaf_apertures(), std::vector<double>{0.25});
}

TEST(Conceptor, FloatMatchesDouble) {
  Rng rng(10);
  const Matrixd x = random_matrix(rng, 40, 5);
  const auto cd = conceptor_from_activations(ActivationSetd(x), Aperture(0.5));
  const auto cf = conceptor_from_activations(ActivationSetd(x).cast<float>(), Aperture(0.5));
  EXPECT_LT((cf.matrix().cast<double>() - cd.matrix()).norm(), 1e-5);
}
