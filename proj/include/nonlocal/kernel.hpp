#pragma once

// Truncated multivariate-Gaussian kernel
//
//   gamma(x, y) = 2/delta^2 * p(y - x; 0, delta^2 A(x)),
//
// restricted to the ellipsoid (y - x)^T A(x)^{-1} (y - x) <= delta^2 chi2.

#include "nonlocal/coeff.hpp"
#include "nonlocal/quadrature.hpp"

#include <cfloat>
#include <cmath>
#include <numbers>

namespace nonlocal {

/// Upper-tail probability of the chi-square distribution with dim degrees of
/// freedom, i.e. the Gaussian mass discarded by truncating at chi2.
inline double alpha_of_chi2(double chi2, int dim) {
    require_dim(dim);
    if (!(chi2 > 0.0))
        throw InvalidArgument("chi2 must be positive");
    if (dim == 2)
        return std::exp(-0.5 * chi2);
    return std::erfc(std::sqrt(0.5 * chi2)) +
           std::sqrt(2.0 * chi2 / std::numbers::pi) * std::exp(-0.5 * chi2);
}

struct KernelParams {
    double delta = 0.025;
    double chi2 = 36.0;
    int dim = 2;

    void validate() const {
        require_dim(dim);
        if (!(delta > 0.0))
            throw InvalidArgument("delta must be positive");
        if (!(chi2 > 0.0))
            throw InvalidArgument("chi2 must be positive");
    }

    double alpha() const { return alpha_of_chi2(chi2, dim); }
};

/// Membership tolerance: lattice offsets that sit exactly on the ellipsoid
/// (e.g. (6h, 0) with delta = h) must not flip on the last ulp.
inline constexpr double kBoundarySlack = 1e-12;

/// Normal density with covariance sigma; falls back to log-space when |sigma|
/// underflows.
inline double gaussian_density(const Vec& z, const SpdMatrix& sigma) {
    const int d = sigma.dim();
    const double q = quadratic_form(spd_inverse(sigma), z);
    const double det = spd_det(sigma);
    if (det > DBL_MIN * 1e4)
        return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, d) * det);
    const RawMatrix l = cholesky_lower(sigma);
    double log_det = 0.0;
    for (int k = 0; k < d; ++k)
        log_det += 2.0 * std::log(l[k * kMaxDim + k]);
    return std::exp(-0.5 * q - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det);
}

/// gamma_alpha(x, .) with A(x) frozen; argument is the offset z = y - x.
class FrozenKernel {
public:
    FrozenKernel(const KernelParams& params, const SpdMatrix& a)
        : delta_(params.delta), dim_(a.dim()), a_inv_(spd_inverse(a)),
          extents_(ellipsoid_axis_extents(a, params.delta, params.chi2)) {
        params.validate();
        if (a.dim() != params.dim)
            throw DimensionMismatch("coefficient dimension differs from kernel dimension");
        limit_ = params.delta * params.delta * params.chi2 * (1.0 + kBoundarySlack);
        inv_two_delta2_ = 0.5 / (params.delta * params.delta);
        // 2/delta^2 (2 pi)^{-d/2} |delta^2 A|^{-1/2}, accumulated in logs.
        const double log_norm = std::log(2.0) - 2.0 * std::log(params.delta) -
                                0.5 * dim_ * std::log(2.0 * std::numbers::pi) -
                                dim_ * std::log(params.delta) - 0.5 * std::log(spd_det(a));
        norm_ = std::exp(log_norm);
    }

    /// z^T A^{-1} z.
    double quadratic(const Vec& z) const noexcept { return quadratic_form(a_inv_, z); }

    bool contains(const Vec& z) const noexcept { return quadratic(z) <= limit_; }

    double operator()(const Vec& z) const noexcept {
        const double q = quadratic(z);
        return q <= limit_ ? norm_ * std::exp(-q * inv_two_delta2_) : 0.0;
    }

    double untruncated(const Vec& z) const noexcept {
        return norm_ * std::exp(-quadratic(z) * inv_two_delta2_);
    }

    /// Half-widths of the bounding box of the influence region.
    const Vec& extents() const noexcept { return extents_; }
    int dim() const noexcept { return dim_; }
    double delta() const noexcept { return delta_; }

private:
    double delta_;
    int dim_;
    SpdMatrix a_inv_;
    Vec extents_;
    double limit_ = 0.0;
    double inv_two_delta2_ = 0.0;
    double norm_ = 0.0;
};

inline Vec offset(const Vec& x, const Vec& y) noexcept {
    return {y[0] - x[0], y[1] - x[1], y[2] - x[2]};
}

inline double kernel_eval(const KernelParams& params, const CoefficientField& field, const Vec& x,
                          const Vec& y) {
    return FrozenKernel(params, field(x))(offset(x, y));
}

/// Boundary-inclusive test y in B_{delta, A, alpha}(x).
inline bool in_influence(const KernelParams& params, const SpdMatrix& a_at_x, const Vec& x,
                         const Vec& y) {
    params.validate();
    const double q = quadratic_form(spd_inverse(a_at_x), offset(x, y));
    return q <= params.delta * params.delta * params.chi2 * (1.0 + kBoundarySlack);
}

struct Moments {
    double zeroth = 0.0;
    Vec first{};
    RawMatrix second{};
};

/// Zeroth, first and (halved) second moments of the truncated kernel at a
/// frozen A. Integrates in whitened coordinates z = delta L w (L L^T = A),
/// where the region is the ball |w| <= sqrt(chi2): Gauss-Legendre in the
/// radius (and polar cosine in 3D) and the periodic trapezoid rule in angle.
inline Moments moment_diagnostics(const KernelParams& params, const SpdMatrix& a,
                                  std::size_t radial_points = 64,
                                  std::size_t angular_points = 128) {
    params.validate();
    if (a.dim() != params.dim)
        throw DimensionMismatch("coefficient dimension differs from kernel dimension");
    const int d = params.dim;
    const double r = std::sqrt(params.chi2);
    const QuadratureRule radial = gauss_legendre(radial_points);
    const double two_pi = 2.0 * std::numbers::pi;
    const double density_norm = std::pow(two_pi, -0.5 * d);

    double s0 = 0.0;
    Vec s1{};
    RawMatrix s2{};
    auto accumulate = [&](const Vec& w, double weight) {
        s0 += weight;
        for (int i = 0; i < d; ++i) {
            s1[i] += weight * w[i];
            for (int j = 0; j < d; ++j)
                s2[i * kMaxDim + j] += weight * w[i] * w[j];
        }
    };

    for (std::size_t ir = 0; ir < radial.size(); ++ir) {
        const double rho = 0.5 * r * (radial.nodes[ir] + 1.0);
        const double wr = 0.5 * r * radial.weights[ir] * density_norm * std::exp(-0.5 * rho * rho);
        if (d == 2) {
            for (std::size_t k = 0; k < angular_points; ++k) {
                const double theta = two_pi * static_cast<double>(k) / angular_points;
                accumulate({rho * std::cos(theta), rho * std::sin(theta), 0.0},
                           wr * rho * two_pi / angular_points);
            }
        } else {
            const QuadratureRule polar = gauss_legendre(radial_points / 2 + 1);
            for (std::size_t ip = 0; ip < polar.size(); ++ip) {
                const double mu = polar.nodes[ip];
                const double sin_t = std::sqrt(1.0 - mu * mu);
                for (std::size_t k = 0; k < angular_points; ++k) {
                    const double phi = two_pi * static_cast<double>(k) / angular_points;
                    accumulate({rho * sin_t * std::cos(phi), rho * sin_t * std::sin(phi), rho * mu},
                               wr * rho * rho * polar.weights[ip] * two_pi / angular_points);
                }
            }
        }
    }

    // Map back: gamma dz = (2/delta^2) phi(w) dw.
    const RawMatrix l = cholesky_lower(a);
    const double delta = params.delta;
    Moments m;
    m.zeroth = 2.0 / (delta * delta) * s0;
    for (int i = 0; i < d; ++i) {
        double v = 0.0;
        for (int k = 0; k < d; ++k)
            v += l[i * kMaxDim + k] * s1[k];
        m.first[i] = 2.0 / delta * v;
    }
    // (1/2) int z z^T gamma = L S2 L^T.
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double v = 0.0;
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q)
                    v += l[i * kMaxDim + p] * s2[p * kMaxDim + q] * l[j * kMaxDim + q];
            m.second[i * kMaxDim + j] = v;
        }
    return m;
}

} // namespace nonlocal
