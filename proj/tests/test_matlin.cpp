#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lqrflow/matlin.hpp"

namespace lqrflow {
namespace {

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  return MatrixXd::NullaryExpr(rows, cols, [&]() { return normal(rng); });
}

TEST(Kron, IdentityOfOrderOneIsNeutral) {
  std::mt19937_64 rng(1);
  const MatrixXd a = random_matrix(3, 2, rng);
  EXPECT_EQ(kron(MatrixXd::Identity(1, 1), a), a);
}

TEST(Kron, BlockExpansionAgainstIdentity) {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  MatrixXd expected(4, 4);
  expected << 1, 0, 2, 0,
              0, 1, 0, 2,
              3, 0, 4, 0,
              0, 3, 0, 4;
  EXPECT_EQ(kron(a, MatrixXd::Identity(2, 2)), expected);
}

TEST(Kron, ZeroFactorGivesZeroOfProductShape) {
  std::mt19937_64 rng(2);
  const MatrixXd b = random_matrix(3, 4, rng);
  const MatrixXd out = kron(MatrixXd::Zero(2, 2), b);
  EXPECT_EQ(out.rows(), 6);
  EXPECT_EQ(out.cols(), 8);
  EXPECT_TRUE(out.isZero(0));
}

TEST(Vec, StacksColumns) {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  VectorXd expected(4);
  expected << 1, 3, 2, 4;
  EXPECT_EQ(vec(a), expected);
  VectorXd eye(4);
  eye << 1, 0, 0, 1;
  EXPECT_EQ(vec(MatrixXd::Identity(2, 2)), eye);
}

TEST(Vec, UnvecRejectsWrongLength) {
  EXPECT_THROW(unvec(VectorXd::Zero(5), 2, 2), Error);
}

TEST(Vec, RoundTripIsExactForAllShapes) {
  std::mt19937_64 rng(3);
  for (int rows = 1; rows <= 5; ++rows) {
    for (int cols = 1; cols <= 5; ++cols) {
      const MatrixXd a = random_matrix(rows, cols, rng);
      EXPECT_EQ(unvec(vec(a), rows, cols), a);
    }
  }
}

TEST(Vec, KroneckerIdentityForTripleProducts) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = dim(rng), q = dim(rng), r = dim(rng), s = dim(rng);
    const MatrixXd a = random_matrix(p, q, rng);
    const MatrixXd b = random_matrix(q, r, rng);
    const MatrixXd c = random_matrix(r, s, rng);
    const VectorXd lhs = vec(a * b * c);
    const VectorXd rhs = kron(c.transpose(), a) * vec(b);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, lhs.norm()));
  }
}

TEST(SolveLinear, IdentityAndDiagonal) {
  VectorXd b(3);
  b << 1, -2, 3;
  EXPECT_EQ(solve_linear(MatrixXd::Identity(3, 3), b), MatrixXd(b));

  MatrixXd d(2, 2);
  d << 2, 0, 0, 4;
  VectorXd rhs(2);
  rhs << 2, 8;
  const MatrixXd x = solve_linear(d, rhs);
  EXPECT_DOUBLE_EQ(x(0), 1.0);
  EXPECT_DOUBLE_EQ(x(1), 2.0);
}

TEST(SolveLinear, SingularMatrixIsReported) {
  MatrixXd m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  try {
    solve_linear(m, VectorXd::Ones(3));
    FAIL() << "expected SingularMatrix";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularMatrix);
  }
}

TEST(SolveLinear, ShapeChecks) {
  EXPECT_THROW(solve_linear(MatrixXd::Identity(2, 3), VectorXd::Ones(2)), Error);
  EXPECT_THROW(solve_linear(MatrixXd::Identity(2, 2), VectorXd::Ones(3)), Error);
}

TEST(SolveLinear, BackwardErrorOnRandomSystems) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd m = random_matrix(8, 8, rng);
    const MatrixXd rhs = random_matrix(8, 2, rng);
    const MatrixXd x = solve_linear(m, rhs);
    EXPECT_LE((m * x - rhs).norm(), 1e-12 * m.norm() * x.norm() + 1e-12 * rhs.norm());
  }
}

TEST(Spectrum, DiagonalMatrix) {
  MatrixXd a(2, 2);
  a << -2, 0, 0, -1;
  const auto s = spectrum(a);
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  std::vector<double> re{s.eigenvalues[0].real(), s.eigenvalues[1].real()};
  std::sort(re.begin(), re.end());
  EXPECT_DOUBLE_EQ(re[0], -2.0);
  EXPECT_DOUBLE_EQ(re[1], -1.0);
  EXPECT_DOUBLE_EQ(s.abscissa, -1.0);
}

TEST(Spectrum, RotationHasImaginaryPair) {
  // characteristic polynomial λ² + 1
  MatrixXd a(2, 2);
  a << 0, 1, -1, 0;
  const auto s = spectrum(a);
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  for (const auto& l : s.eigenvalues) {
    EXPECT_NEAR(l.real(), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(l.imag()), 1.0, 1e-15);
  }
  EXPECT_NEAR(s.eigenvalues[0].imag() + s.eigenvalues[1].imag(), 0.0, 1e-15);
  EXPECT_NEAR(s.abscissa, 0.0, 1e-15);
}

TEST(Spectrum, TraceDeterminantAndConjugatePairs) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 2;
    const MatrixXd a = random_matrix(n, n, rng);
    const auto s = spectrum(a);
    std::complex<double> sum = 0, prod = 1;
    double abscissa = -1e300;
    for (const auto& l : s.eigenvalues) {
      sum += l;
      prod *= l;
      abscissa = std::max(abscissa, l.real());
      // every non-real eigenvalue has its conjugate in the list
      if (std::abs(l.imag()) > 1e-9) {
        const bool paired = std::any_of(s.eigenvalues.begin(), s.eigenvalues.end(), [&](auto o) {
          return std::abs(o - std::conj(l)) <= 1e-9 * (1 + std::abs(l));
        });
        EXPECT_TRUE(paired);
      }
    }
    EXPECT_NEAR(sum.real(), a.trace(), 1e-9 * (1 + std::abs(a.trace())));
    EXPECT_NEAR(sum.imag(), 0.0, 1e-9);
    const double det = a.determinant();
    EXPECT_NEAR(prod.real(), det, 1e-9 * (1 + std::abs(det)));
    EXPECT_EQ(s.abscissa, abscissa);
  }
}

TEST(Spectrum, DeterministicForFixedInput) {
  std::mt19937_64 rng(7);
  const MatrixXd a = random_matrix(6, 6, rng);
  const auto s1 = spectrum(a);
  const auto s2 = spectrum(a);
  EXPECT_EQ(s1.eigenvalues, s2.eigenvalues);
}

TEST(Spectrum, RejectsNonSquareAndNonFinite) {
  EXPECT_THROW(spectrum(MatrixXd::Zero(2, 3)), Error);
  MatrixXd a = MatrixXd::Zero(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(spectrum(a), Error);
}

TEST(Symmetric, SymPartAndDefiniteness) {
  MatrixXd a(2, 2);
  a << 0, 2, 0, 0;
  MatrixXd expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_EQ(sym_part(a), expected);
  EXPECT_TRUE(is_psd(MatrixXd::Identity(2, 2), 0.0));
  MatrixXd d(2, 2);
  d << 1, 0, 0, -1;
  EXPECT_FALSE(is_psd(d, 1e-8));
  EXPECT_DOUBLE_EQ(min_eig_sym(d), -1.0);
}

TEST(Symmetric, SymPartIsIdempotentAndKeepsTrace) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd a = random_matrix(4, 4, rng);
    const MatrixXd s = sym_part(a);
    EXPECT_EQ(sym_part(s), s);
    EXPECT_NEAR(s.trace(), a.trace(), 1e-14 * (1 + std::abs(a.trace())));
  }
}

TEST(Symmetric, AsymmetricInputIsRejected) {
  MatrixXd a(2, 2);
  a << 1, 1, 0, 1;
  try {
    min_eig_sym(a);
    FAIL() << "expected NotSymmetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
  }
}

TEST(Symmetric, PsdSqrtAndPowers) {
  MatrixXd q(2, 2);
  q << 4, 0, 0, 9;
  MatrixXd root(2, 2);
  root << 2, 0, 0, 3;
  EXPECT_TRUE(psd_sqrt(q).isApprox(root, 1e-14));
  EXPECT_TRUE(spd_power(q, -1.0).isApprox(q.inverse(), 1e-14));
  // round-off negative eigenvalue is clipped
  MatrixXd near(2, 2);
  near << 1, 0, 0, -1e-14;
  EXPECT_NEAR(psd_sqrt(near)(1, 1), 0.0, 0.0);
  EXPECT_THROW(spd_power(near, 0.5), Error);
}

TEST(Rank, ThresholdedSingularValues) {
  MatrixXd a(2, 3);
  a << 1, 2, 3, 2, 4, 6;
  EXPECT_EQ(numerical_rank(a, 1e-9), 1);
  EXPECT_EQ(numerical_rank(MatrixXd::Identity(3, 3), 1e-9), 3);
  EXPECT_EQ(numerical_rank(MatrixXd::Zero(2, 2), 1e-9), 0);
}

}  // namespace
}  // namespace lqrflow
