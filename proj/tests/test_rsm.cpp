#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "stirkit/error.hpp"
#include "stirkit/rsm.hpp"

using namespace stirkit;
using stirkit::testing::random_matrix;

namespace {

// Double-centered entries written out as row/column/grand means.
double hsic_double_sum(const Matrix& k, const Matrix& l) {
    const std::size_t n = k.rows();
    auto centered = [n](const Matrix& g) {
        std::vector<double> row(n, 0.0), col(n, 0.0);
        double all = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                row[i] += g(i, j) / n;
                col[j] += g(i, j) / n;
                all += g(i, j) / (n * n);
            }
        Matrix c(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = g(i, j) - row[i] - col[j] + all;
        return c;
    };
    const Matrix kc = centered(k), lc = centered(l);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s += kc(i, j) * lc(i, j);
    return s / ((n - 1.0) * (n - 1.0));
}

double cka_frobenius(const Matrix& x, const Matrix& y) {
    const Matrix xc = center_columns(x), yc = center_columns(y);
    const double cross = frobenius_norm(matmul_tn(yc, xc));
    return cross * cross / (frobenius_norm(matmul_tn(xc, xc)) * frobenius_norm(matmul_tn(yc, yc)));
}

Matrix random_orthogonal(std::size_t d, std::uint64_t seed) {
    return svd_thin(random_matrix(d, d, seed)).u;
}

}  // namespace

TEST(Cka, SelfSimilarityIsOne) {
    for (std::uint64_t s = 0; s < 10; ++s) EXPECT_NEAR(linear_cka(random_matrix(30, 6, s), random_matrix(30, 6, s)), 1.0, 1e-10);
}

TEST(Cka, InvariantToOrthogonalTransformAndIsotropicScaling) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix x = random_matrix(40, 5, s);
        const Matrix y = random_matrix(40, 7, s + 50);
        const double base = linear_cka(x, y);
        EXPECT_NEAR(linear_cka(matmul(x, random_orthogonal(5, s + 99)), y), base, 1e-9);
        EXPECT_NEAR(linear_cka(x, scale(y, 3.7)), base, 1e-9);
        EXPECT_NEAR(linear_cka(scale(x, 1e-3), y), base, 1e-9);
    }
}

TEST(Cka, InvariantToColumnTranslation) {
    const Matrix x = random_matrix(25, 4, 1);
    Matrix shifted = x;
    for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, 2) += 5.0;
    const Matrix y = random_matrix(25, 3, 2);
    EXPECT_NEAR(linear_cka(shifted, y), linear_cka(x, y), 1e-10);
}

TEST(Cka, NotInvariantToGeneralInvertibleMaps) {
    const Matrix x = random_matrix(50, 4, 3);
    Matrix a = Matrix::identity(4);
    a(0, 0) = 25.0;
    a(1, 0) = 3.0;
    EXPECT_GT(std::abs(linear_cka(x, matmul(x, a)) - 1.0), 0.01);
}

TEST(Cka, SymmetricAndBounded) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Matrix x = random_matrix(15, 3, s);
        const Matrix y = random_matrix(15, 8, s + 1000);
        const double c = linear_cka(x, y);
        EXPECT_NEAR(c, linear_cka(y, x), 1e-12);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0 + 1e-12);
    }
}

TEST(Cka, MatchesFrobeniusOracle) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const std::size_t n = 5 + s % 30, dx = 1 + s % 7, dy = 1 + (s * 3) % 11;
        const Matrix x = random_matrix(n, dx, s, -2.0, 3.0);
        const Matrix y = random_matrix(n, dy, s + 7777);
        EXPECT_NEAR(linear_cka(x, y), cka_frobenius(x, y), 1e-9);
    }
}

TEST(Hsic, MatchesDoubleSum) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Matrix x = random_matrix(12, 3, s), y = random_matrix(12, 5, s + 1);
        const Matrix k = matmul_nt(x, x), l = matmul_nt(y, y);
        EXPECT_NEAR(hsic(k, l), hsic_double_sum(k, l), 1e-12);
    }
}

TEST(Hsic, Errors) {
    EXPECT_THROW(hsic(Matrix(3, 2), Matrix(3, 3)), DimensionError);
    EXPECT_THROW(hsic(Matrix(3, 3), Matrix(4, 4)), DimensionError);
    EXPECT_THROW(hsic(Matrix(1, 1), Matrix(1, 1)), InvalidArgument);
}

TEST(Cka, Errors) {
    EXPECT_THROW(linear_cka(Matrix(5, 2, 1.0), random_matrix(5, 2, 1)), NumericalError);
    EXPECT_THROW(linear_cka(random_matrix(5, 2, 1), random_matrix(6, 2, 1)), DimensionError);
    EXPECT_THROW(linear_cka(random_matrix(1, 2, 1), random_matrix(1, 2, 1)), InvalidArgument);
}

TEST(Cca, CanonicalCorrelationsOfInvertibleMapAreOne) {
    const Matrix x = random_matrix(60, 4, 11);
    const Matrix a = random_matrix(4, 4, 12);
    const CcaResult r = cca(x, matmul(x, a));
    ASSERT_EQ(r.rhos.size(), 4u);
    for (double rho : r.rhos) EXPECT_NEAR(rho, 1.0, 1e-9);
    EXPECT_LT(stirkit::testing::max_abs_diff(matmul_tn(r.x_variates, r.x_variates), Matrix::identity(4)), 1e-9);
}

TEST(Cca, RhosDescendingInUnitInterval) {
    const CcaResult r = cca(random_matrix(50, 5, 1), random_matrix(50, 3, 2));
    ASSERT_EQ(r.rhos.size(), 3u);
    for (std::size_t i = 0; i < r.rhos.size(); ++i) {
        EXPECT_GE(r.rhos[i], 0.0);
        EXPECT_LE(r.rhos[i], 1.0);
        if (i > 0) EXPECT_LE(r.rhos[i], r.rhos[i - 1]);
    }
}

TEST(Cca, RankDropsDuplicatedColumns) {
    Matrix x = random_matrix(30, 3, 5);
    Matrix dup(30, 4);
    for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t j = 0; j < 3; ++j) dup(i, j) = x(i, j);
        dup(i, 3) = x(i, 0) + x(i, 1);
    }
    EXPECT_EQ(cca(dup, random_matrix(30, 5, 6)).rhos.size(), 3u);
}

TEST(Cca, DegenerateThrows) {
    EXPECT_THROW(cca(Matrix(10, 3, 0.5), random_matrix(10, 3, 1)), NumericalError);
}

TEST(SvccaPwcca, SelfSimilarityAndLinearInvariance) {
    const Matrix x = random_matrix(80, 5, 21);
    EXPECT_NEAR(svcca(x, x), 1.0, 1e-9);
    EXPECT_NEAR(pwcca(x, x), 1.0, 1e-9);
    const Matrix q = random_orthogonal(5, 22);
    EXPECT_NEAR(svcca(x, matmul(x, scale(q, 2.0))), 1.0, 1e-9);
    EXPECT_NEAR(pwcca(x, matmul(x, random_matrix(5, 5, 23))), 1.0, 1e-9);
}

TEST(SvccaPwcca, UnrelatedRepresentationsScoreBelowOne) {
    const Matrix x = random_matrix(40, 3, 31), y = random_matrix(40, 3, 32);
    for (RsmKind k : {RsmKind::linear_cka, RsmKind::svcca, RsmKind::pwcca}) {
        const double s = similarity(k, x, y);
        EXPECT_GE(s, 0.0);
        EXPECT_LT(s, 0.9);
    }
}

TEST(Rsm, ParseAndPrint) {
    EXPECT_EQ(parse_rsm_kind("cka"), RsmKind::linear_cka);
    EXPECT_EQ(parse_rsm_kind("linear_cka"), RsmKind::linear_cka);
    EXPECT_EQ(parse_rsm_kind("svcca"), RsmKind::svcca);
    EXPECT_EQ(parse_rsm_kind("pwcca"), RsmKind::pwcca);
    for (RsmKind k : {RsmKind::linear_cka, RsmKind::svcca, RsmKind::pwcca})
        EXPECT_EQ(parse_rsm_kind(to_string(k)), k);
    EXPECT_THROW(parse_rsm_kind("rbf"), InvalidArgument);
}
