#include "nonlocal/coeff.hpp"
#include "nonlocal/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace nonlocal;

namespace {

const double kSqrt3 = std::sqrt(3.0);

SpdMatrix rotated_a() {
    return SpdMatrix(2, {31.0 / 4.0, -9.0 * kSqrt3 / 4.0, -9.0 * kSqrt3 / 4.0, 13.0 / 4.0});
}

// Plain 2x2 / 3x3 products for multiply-back checks.
RawMatrix product(int d, const RawMatrix& a, const RawMatrix& b) {
    RawMatrix c{};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                c[i * kMaxDim + j] += a[i * kMaxDim + k] * b[k * kMaxDim + j];
    return c;
}

void expect_identity(int d, const RawMatrix& m, double tol) {
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            EXPECT_NEAR(m[i * kMaxDim + j], i == j ? 1.0 : 0.0, tol) << i << "," << j;
}

} // namespace

TEST(SpdMatrix, RejectsAsymmetricAndIndefinite) {
    EXPECT_THROW(SpdMatrix(2, {1.0, 0.5, 0.4, 1.0}), NotSpd);
    EXPECT_THROW(SpdMatrix(2, {1.0, 2.0, 2.0, 1.0}), NotSpd);
    EXPECT_THROW(SpdMatrix(2, {0.0, 0.0, 0.0, 0.0}), NotSpd);
    EXPECT_THROW(SpdMatrix(2, {-1.0, 0.0, 0.0, 1.0}), NotSpd);
    EXPECT_THROW(SpdMatrix(2, {1.0, 0.0, 0.0, NAN}), NotSpd);
    EXPECT_THROW(SpdMatrix::diagonal({1.0, 1.0, 1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(SpdMatrix(3, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0}), NotSpd);
}

TEST(SpdMatrix, ConjugatedMatchesClosedForm) {
    const SpdMatrix a = fields::rotated_anisotropic();
    const SpdMatrix want = rotated_a();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(a(i, j), want(i, j), 1e-13);
}

TEST(SpdDet, Examples) {
    EXPECT_DOUBLE_EQ(spd_det(SpdMatrix::identity(2)), 1.0);
    EXPECT_DOUBLE_EQ(spd_det(SpdMatrix::diagonal({10.0, 1.0})), 10.0);
    // (31/4)(13/4) - (9 sqrt3 / 4)^2 = 160 / 16
    EXPECT_NEAR(spd_det(rotated_a()), 10.0, 1e-13);
    EXPECT_NEAR(spd_det(fields::rotated_3d()), 4.0, 1e-13);
}

TEST(SpdInverse, Examples) {
    const SpdMatrix id = spd_inverse(SpdMatrix::identity(2));
    EXPECT_EQ(id, SpdMatrix::identity(2));

    const SpdMatrix d = spd_inverse(SpdMatrix::diagonal({10.0, 1.0}));
    EXPECT_DOUBLE_EQ(d(0, 0), 0.1);
    EXPECT_DOUBLE_EQ(d(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(d(0, 1), 0.0);

    // Adjugate over det = 10.
    const SpdMatrix inv = spd_inverse(rotated_a());
    EXPECT_NEAR(inv(0, 0), 13.0 / 40.0, 1e-14);
    EXPECT_NEAR(inv(1, 1), 31.0 / 40.0, 1e-14);
    EXPECT_NEAR(inv(0, 1), 9.0 * kSqrt3 / 40.0, 1e-14);
    expect_identity(2, product(2, rotated_a().raw(), inv.raw()), 1e-13);
}

TEST(SpdInverse, ThreeDimensionalMultipliesBack) {
    const SpdMatrix a(3, {4.0, 1.0, 0.5, 1.0, 3.0, -0.25, 0.5, -0.25, 2.0});
    expect_identity(3, product(3, a.raw(), spd_inverse(a).raw()), 1e-14);
    const SpdMatrix r = fields::rotated_3d();
    expect_identity(3, product(3, r.raw(), spd_inverse(r).raw()), 1e-14);
}

TEST(QuadraticForm, Examples) {
    EXPECT_EQ(quadratic_form(rotated_a(), Vec{0.0, 0.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(quadratic_form(SpdMatrix::identity(2), Vec{3.0, 4.0, 0.0}), 25.0);
    const double delta = 0.025;
    const SpdMatrix inv = spd_inverse(SpdMatrix::diagonal({10.0, 1.0}));
    const double z = 6.0 * std::sqrt(10.0) * delta;
    EXPECT_NEAR(quadratic_form(inv, Vec{z, 0.0, 0.0}), 36.0 * delta * delta, 1e-15);
}

TEST(EllipsoidAxisExtents, Examples) {
    const double delta = 0.1;
    const Vec e1 = ellipsoid_axis_extents(SpdMatrix::identity(2), delta, 36.0);
    EXPECT_NEAR(e1[0], 6.0 * delta, 1e-15);
    EXPECT_NEAR(e1[1], 6.0 * delta, 1e-15);

    const Vec e2 = ellipsoid_axis_extents(SpdMatrix::diagonal({10.0, 1.0}), delta, 36.0);
    EXPECT_NEAR(e2[0], 6.0 * std::sqrt(10.0) * delta, 1e-14);
    EXPECT_NEAR(e2[1], 6.0 * delta, 1e-15);

    const Vec e3 = ellipsoid_axis_extents(rotated_a(), delta, 36.0);
    EXPECT_NEAR(e3[0], 3.0 * std::sqrt(31.0) * delta, 1e-14);
    EXPECT_NEAR(e3[1], 3.0 * std::sqrt(13.0) * delta, 1e-14);

    EXPECT_THROW(ellipsoid_axis_extents(rotated_a(), 0.0, 36.0), InvalidArgument);
}

TEST(EllipsoidAxisExtents, MatchesDenseBoundarySampling) {
    // Boundary of z^T A^{-1} z = r^2 is z = r L (cos t, sin t).
    const double delta = 0.1, r = 6.0 * delta;
    const SpdMatrix a = rotated_a();
    const RawMatrix l = cholesky_lower(a);
    double mx = 0.0, my = 0.0;
    const int samples = 200000;
    for (int s = 0; s < samples; ++s) {
        const double t = 2.0 * std::numbers::pi * s / samples;
        const double c = std::cos(t), sn = std::sin(t);
        mx = std::max(mx, r * (l[0] * c));
        my = std::max(my, r * (l[3] * c + l[4] * sn));
    }
    const Vec e = ellipsoid_axis_extents(a, delta, 36.0);
    EXPECT_NEAR(mx, e[0], 1e-9);
    EXPECT_NEAR(my, e[1], 1e-9);
}

TEST(CholeskyLower, Reconstructs) {
    const SpdMatrix a(3, {4.0, 1.0, 0.5, 1.0, 3.0, -0.25, 0.5, -0.25, 2.0});
    const RawMatrix l = cholesky_lower(a);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                s += l[i * kMaxDim + k] * l[j * kMaxDim + k];
            EXPECT_NEAR(s, a(i, j), 1e-14);
        }
}

TEST(SpectralBounds, TwoAndThreeDimensions) {
    auto [lo, hi] = spectral_bounds(rotated_a());
    EXPECT_NEAR(lo, 1.0, 1e-13);
    EXPECT_NEAR(hi, 10.0, 1e-13);
    std::tie(lo, hi) = spectral_bounds(fields::rotated_3d());
    EXPECT_NEAR(lo, 1.0, 1e-13);
    EXPECT_NEAR(hi, 4.0, 1e-13);
    std::tie(lo, hi) = spectral_bounds(SpdMatrix::diagonal({2.0, 5.0, 3.0}));
    EXPECT_DOUBLE_EQ(lo, 2.0);
    EXPECT_DOUBLE_EQ(hi, 5.0);
}

TEST(CoefficientField, ConstantIdentityEverywhere) {
    const auto f = CoefficientField::constant(SpdMatrix::identity(2));
    EXPECT_TRUE(f.is_constant());
    EXPECT_EQ(eval_coeff(f, Vec{0.3, -7.0, 0.0}), SpdMatrix::identity(2));
    EXPECT_EQ(f.axis_bound(0), 1.0);
}

TEST(CoefficientField, VariableDiagonalPlugIn) {
    const auto f = fields::variable_diagonal();
    EXPECT_FALSE(f.is_constant());
    const SpdMatrix at_one = f(Vec{1.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(at_one(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(at_one(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(at_one(0, 1), 0.0);
    const SpdMatrix at_zero = f(Vec{0.0, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(at_zero(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(at_zero(1, 1), 4.0);
    EXPECT_THROW(f.constant_value(), NonConstantCoefficient);
    EXPECT_EQ(f.axis_bound(0), 4.0);
}

TEST(CoefficientField, AnalyticRejectsBadPoints) {
    const auto f = fields::variable_diagonal();
    // k1(2, 0) = 4 - 8 < 0.
    EXPECT_THROW(f(Vec{2.0, 0.0, 0.0}), NotSpd);
    EXPECT_THROW(CoefficientField::analytic(2, nullptr, 0.0, 1.0), InvalidArgument);
}

TEST(CoefficientField, EllipticityOnSampleGrid) {
    std::vector<Vec> pts;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j)
            pts.push_back({i / 49.0, j / 49.0, 0.0});
    EXPECT_TRUE(ellipticity_holds(fields::variable_diagonal(), pts));
    EXPECT_TRUE(ellipticity_holds(fields::variable_rotated(), pts));
    EXPECT_TRUE(ellipticity_holds(CoefficientField::constant(rotated_a()), pts));
    const auto too_tight = CoefficientField::analytic(
        2, [](const Vec& x) { return fields::variable_diagonal()(x).raw(); }, 1.5, 4.0);
    EXPECT_FALSE(ellipticity_holds(too_tight, pts));
}
