#pragma once

// Small symmetric positive-definite matrices (d = 2 or 3) and coefficient
// fields x -> A(x).

#include "nonlocal/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>

namespace nonlocal {

inline constexpr int kMaxDim = 3;

/// Point or vector in R^d; components beyond dim are ignored (kept at zero).
using Vec = std::array<double, kMaxDim>;

/// Row-major 3x3 storage; only the leading dim x dim block is meaningful.
using RawMatrix = std::array<double, kMaxDim * kMaxDim>;

inline void require_dim(int dim) {
    if (dim != 2 && dim != 3)
        throw InvalidArgument("dimension must be 2 or 3, got " + std::to_string(dim));
}

class SpdMatrix {
public:
    /// 2x2 identity.
    SpdMatrix() = default;

    /// Validating constructor; row_major holds dim*dim entries.
    SpdMatrix(int dim, std::initializer_list<double> row_major) : dim_(dim) {
        require_dim(dim);
        if (row_major.size() != static_cast<std::size_t>(dim * dim))
            throw InvalidArgument("expected " + std::to_string(dim * dim) + " entries");
        RawMatrix raw{};
        auto it = row_major.begin();
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                raw[i * kMaxDim + j] = *it++;
        assign_checked(raw);
    }

    /// Validates symmetry and positive definiteness of a raw 3x3-strided block.
    static SpdMatrix from_raw(int dim, const RawMatrix& raw) {
        require_dim(dim);
        SpdMatrix m;
        m.dim_ = dim;
        m.assign_checked(raw);
        return m;
    }

    static SpdMatrix identity(int dim) {
        require_dim(dim);
        RawMatrix raw{};
        for (int i = 0; i < dim; ++i)
            raw[i * kMaxDim + i] = 1.0;
        return from_raw(dim, raw);
    }

    static SpdMatrix diagonal(std::span<const double> d) {
        const int dim = static_cast<int>(d.size());
        require_dim(dim);
        RawMatrix raw{};
        for (int i = 0; i < dim; ++i)
            raw[i * kMaxDim + i] = d[i];
        return from_raw(dim, raw);
    }

    static SpdMatrix diagonal(std::initializer_list<double> d) {
        return diagonal(std::span<const double>(d.begin(), d.size()));
    }

    /// R * diag(d) * R^T for a dim x dim rotation R (row-major, 3-strided).
    static SpdMatrix conjugated(int dim, const RawMatrix& rotation, std::span<const double> d) {
        require_dim(dim);
        require_same_size(d.size(), static_cast<std::size_t>(dim), "diagonal length");
        RawMatrix raw{};
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                double s = 0.0;
                for (int k = 0; k < dim; ++k)
                    s += rotation[i * kMaxDim + k] * d[k] * rotation[j * kMaxDim + k];
                raw[i * kMaxDim + j] = s;
            }
        return from_raw(dim, raw);
    }

    int dim() const noexcept { return dim_; }
    double operator()(int i, int j) const noexcept { return a_[i * kMaxDim + j]; }
    const RawMatrix& raw() const noexcept { return a_; }

    double max_abs_entry() const noexcept {
        double m = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }

    friend bool operator==(const SpdMatrix&, const SpdMatrix&) = default;

private:
    void assign_checked(const RawMatrix& raw);

    int dim_ = 2;
    RawMatrix a_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
};

namespace detail {

inline double det2(const RawMatrix& a) { return a[0] * a[4] - a[1] * a[3]; }

inline double det3(const RawMatrix& a) {
    return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
}

inline double raw_det(int dim, const RawMatrix& a) { return dim == 2 ? det2(a) : det3(a); }

} // namespace detail

inline void SpdMatrix::assign_checked(const RawMatrix& raw) {
    double scale = 0.0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) {
            const double v = raw[i * kMaxDim + j];
            if (!std::isfinite(v))
                throw NotSpd("non-finite entry");
            scale = std::max(scale, std::abs(v));
        }
    if (scale == 0.0)
        throw NotSpd("zero matrix");
    const double tol = 1e-12 * scale;
    a_ = RawMatrix{};
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) {
            const double aij = raw[i * kMaxDim + j];
            const double aji = raw[j * kMaxDim + i];
            if (std::abs(aij - aji) > tol)
                throw NotSpd("not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            a_[i * kMaxDim + j] = 0.5 * (aij + aji);
        }
    // Leading principal minors, each compared against the matching power of the scale.
    const double m1 = a_[0];
    const double m2 = detail::det2(a_);
    if (m1 <= tol || m2 <= 1e-12 * scale * scale)
        throw NotSpd("leading principal minor not positive");
    if (dim_ == 3 && detail::det3(a_) <= 1e-12 * scale * scale * scale)
        throw NotSpd("leading principal minor not positive");
}

inline double spd_det(const SpdMatrix& m) {
    const double d = detail::raw_det(m.dim(), m.raw());
    if (!(d > 0.0))
        throw NotSpd("non-positive determinant");
    return d;
}

/// Closed-form adjugate inverse.
inline SpdMatrix spd_inverse(const SpdMatrix& m) {
    const double det = spd_det(m);
    const auto& a = m.raw();
    RawMatrix inv{};
    if (m.dim() == 2) {
        inv[0] = a[4] / det;
        inv[1] = -a[1] / det;
        inv[3] = -a[3] / det;
        inv[4] = a[0] / det;
    } else {
        inv[0] = (a[4] * a[8] - a[5] * a[7]) / det;
        inv[1] = (a[2] * a[7] - a[1] * a[8]) / det;
        inv[2] = (a[1] * a[5] - a[2] * a[4]) / det;
        inv[3] = inv[1];
        inv[4] = (a[0] * a[8] - a[2] * a[6]) / det;
        inv[5] = (a[2] * a[3] - a[0] * a[5]) / det;
        inv[6] = inv[2];
        inv[7] = inv[5];
        inv[8] = (a[0] * a[4] - a[1] * a[3]) / det;
    }
    return SpdMatrix::from_raw(m.dim(), inv);
}

/// z^T M z, clamped at zero against roundoff.
inline double quadratic_form(const SpdMatrix& m, const Vec& z) noexcept {
    const int d = m.dim();
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j)
            row += m(i, j) * z[j];
        s += z[i] * row;
    }
    return std::max(0.0, s);
}

/// Half-widths of the axis-aligned box enclosing {z : z^T A^{-1} z <= delta^2 chi2}.
/// Maximizing z_k over the ellipsoid gives delta * sqrt(chi2 * A_kk).
inline Vec ellipsoid_axis_extents(const SpdMatrix& a, double delta, double chi2) {
    if (!(delta > 0.0) || !(chi2 > 0.0))
        throw InvalidArgument("delta and chi2 must be positive");
    Vec e{};
    for (int k = 0; k < a.dim(); ++k)
        e[k] = delta * std::sqrt(chi2 * a(k, k));
    return e;
}

/// Lower-triangular L with L L^T = A.
inline RawMatrix cholesky_lower(const SpdMatrix& a) {
    const int d = a.dim();
    RawMatrix l{};
    for (int j = 0; j < d; ++j) {
        double s = a(j, j);
        for (int k = 0; k < j; ++k)
            s -= l[j * kMaxDim + k] * l[j * kMaxDim + k];
        if (!(s > 0.0))
            throw NotSpd("Cholesky pivot not positive");
        const double ljj = std::sqrt(s);
        l[j * kMaxDim + j] = ljj;
        for (int i = j + 1; i < d; ++i) {
            double t = a(i, j);
            for (int k = 0; k < j; ++k)
                t -= l[i * kMaxDim + k] * l[j * kMaxDim + k];
            l[i * kMaxDim + j] = t / ljj;
        }
    }
    return l;
}

/// Smallest and largest eigenvalue (closed form for d <= 3).
inline std::pair<double, double> spectral_bounds(const SpdMatrix& a) {
    if (a.dim() == 2) {
        const double m = 0.5 * (a(0, 0) + a(1, 1));
        const double r = std::hypot(0.5 * (a(0, 0) - a(1, 1)), a(0, 1));
        return {m - r, m + r};
    }
    // Trigonometric solution of the symmetric 3x3 characteristic cubic.
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    if (p1 == 0.0) {
        const auto [lo, hi] = std::minmax({a(0, 0), a(1, 1), a(2, 2)});
        return {lo, hi};
    }
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    RawMatrix b{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            b[i * kMaxDim + j] = (a(i, j) - (i == j ? q : 0.0)) / p;
    const double r = std::clamp(detail::det3(b) / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    return {lo, hi};
}

/// Rotation by angle theta in the (x1, x2) plane, embedded in dim dimensions.
inline RawMatrix plane_rotation(int dim, double theta) {
    require_dim(dim);
    RawMatrix r{};
    r[0] = std::cos(theta);
    r[1] = -std::sin(theta);
    r[3] = std::sin(theta);
    r[4] = std::cos(theta);
    if (dim == 3)
        r[8] = 1.0;
    return r;
}

/// The map x -> A(x): either a constant matrix or an analytic evaluator with
/// caller-supplied ellipticity bounds.
class CoefficientField {
public:
    using Evaluator = std::function<RawMatrix(const Vec&)>;

    static CoefficientField constant(const SpdMatrix& a) {
        CoefficientField f;
        f.dim_ = a.dim();
        f.constant_ = a;
        f.is_constant_ = true;
        std::tie(f.lambda_min_, f.lambda_max_) = spectral_bounds(a);
        for (int k = 0; k < a.dim(); ++k)
            f.axis_bound_[k] = a(k, k);
        return f;
    }

    /// lambda_max also bounds every diagonal entry A_kk(x), which is what the
    /// grid collar sizing relies on.
    static CoefficientField analytic(int dim, Evaluator eval, double lambda_min, double lambda_max) {
        require_dim(dim);
        if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min))
            throw InvalidArgument("ellipticity bounds must satisfy 0 < lambda <= Lambda");
        CoefficientField f;
        f.dim_ = dim;
        f.eval_ = std::move(eval);
        f.lambda_min_ = lambda_min;
        f.lambda_max_ = lambda_max;
        f.axis_bound_.fill(lambda_max);
        return f;
    }

    int dim() const noexcept { return dim_; }
    bool is_constant() const noexcept { return is_constant_; }
    double lambda_min() const noexcept { return lambda_min_; }
    double lambda_max() const noexcept { return lambda_max_; }

    /// Upper bound of A_kk(x) over the domain.
    double axis_bound(int k) const noexcept { return axis_bound_[k]; }

    const SpdMatrix& constant_value() const {
        if (!is_constant_)
            throw NonConstantCoefficient("field is not constant");
        return constant_;
    }

    SpdMatrix operator()(const Vec& x) const {
        if (is_constant_)
            return constant_;
        const RawMatrix raw = eval_(x);
        try {
            return SpdMatrix::from_raw(dim_, raw);
        } catch (const NotSpd& e) {
            throw NotSpd(std::string(e.what()) + " at x = (" + std::to_string(x[0]) + ", " +
                         std::to_string(x[1]) + (dim_ == 3 ? ", " + std::to_string(x[2]) : "") + ")");
        }
    }

private:
    CoefficientField() = default;

    int dim_ = 2;
    bool is_constant_ = false;
    SpdMatrix constant_;
    Evaluator eval_;
    double lambda_min_ = 1.0;
    double lambda_max_ = 1.0;
    Vec axis_bound_{1.0, 1.0, 1.0};
};

inline SpdMatrix eval_coeff(const CoefficientField& field, const Vec& x) { return field(x); }

/// Spot check of lambda |xi|^2 <= xi^T A(x) xi <= Lambda |xi|^2 at the given
/// points, with relative slack tol.
inline bool ellipticity_holds(const CoefficientField& field, std::span<const Vec> points,
                              double tol = 1e-12) {
    for (const Vec& x : points) {
        const auto [lo, hi] = spectral_bounds(field(x));
        if (lo < field.lambda_min() * (1.0 - tol) || hi > field.lambda_max() * (1.0 + tol))
            return false;
    }
    return true;
}

} // namespace nonlocal
