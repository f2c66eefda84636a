#pragma once

// Manufactured test cases and their source terms.

#include "nonlocal/coeff.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/quadrature.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nonlocal {

using ScalarFunction = std::function<double(const Vec&)>;

struct ExactSolution {
    ScalarFunction value;
    std::function<Vec(const Vec&)> gradient;
    std::function<RawMatrix(const Vec&)> hessian;
};

enum class SourceMode {
    /// f = -sum a_ij d_ij u (delta-convergence tests against the PDE solution).
    local_analytic,
    /// f = -int (u(y) - u(x)) gamma(x, y) dy with the untruncated kernel.
    nonlocal_quadrature,
    /// f given directly by ManufacturedCase::source.
    prescribed,
};

inline const char* to_string(SourceMode m) {
    switch (m) {
    case SourceMode::local_analytic:
        return "local";
    case SourceMode::nonlocal_quadrature:
        return "nonlocal";
    case SourceMode::prescribed:
        return "prescribed";
    }
    return "?";
}

struct ManufacturedCase {
    std::string name;
    std::string description;
    int example = 0;
    int dim = 2;
    CoefficientField field;
    SourceMode mode = SourceMode::local_analytic;
    Box domain;
    std::optional<ExactSolution> exact;
    /// Dirichlet data on the collar; defaults to the exact solution.
    ScalarFunction boundary;
    /// Source for SourceMode::prescribed.
    ScalarFunction source;
    /// Known bounds of the solution, when the case guarantees them.
    std::optional<std::pair<double, double>> solution_range;
    /// Default horizon when the case fixes it (otherwise delta follows h).
    std::optional<double> fixed_delta;

    double boundary_value(const Vec& x) const {
        if (boundary)
            return boundary(x);
        if (exact)
            return exact->value(x);
        throw InvalidArgument("case '" + name + "' has no boundary data");
    }
};

inline double local_rhs(const ManufacturedCase& c, const Vec& x) {
    if (c.mode == SourceMode::prescribed)
        return c.source(x);
    if (!c.exact)
        throw InvalidArgument("case '" + c.name + "' has no exact solution");
    const SpdMatrix a = c.field(x);
    const RawMatrix h = c.exact->hessian(x);
    double f = 0.0;
    for (int i = 0; i < c.dim; ++i)
        for (int j = 0; j < c.dim; ++j)
            f -= a(i, j) * h[i * kMaxDim + j];
    return f;
}

namespace detail {

inline const QuadratureRule& cached_hermite(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, QuadratureRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, gauss_hermite(n)).first;
    return it->second;
}

/// Tensor Gauss-Hermite estimate of the untruncated nonlocal operator at x:
/// 2/delta^2 pi^{-d/2} sum w (u(x) - u(x + sqrt2 delta L xi)).
inline double hermite_operator(const ScalarFunction& u, const Vec& x, const RawMatrix& l, int dim,
                               double delta, std::size_t n) {
    const QuadratureRule& gh = cached_hermite(n);
    const double ux = u(x);
    const double scale = std::sqrt(2.0) * delta;
    double sum = 0.0;
    std::array<std::size_t, kMaxDim> idx{};
    std::size_t total = 1;
    for (int k = 0; k < dim; ++k)
        total *= n;
    for (std::size_t p = 0; p < total; ++p) {
        std::size_t rem = p;
        double w = 1.0;
        Vec xi{};
        for (int k = dim - 1; k >= 0; --k) {
            idx[k] = rem % n;
            rem /= n;
            xi[k] = gh.nodes[idx[k]];
            w *= gh.weights[idx[k]];
        }
        Vec y = x;
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k <= i; ++k)
                y[i] += scale * l[i * kMaxDim + k] * xi[k];
        sum += w * (ux - u(y));
    }
    return 2.0 / (delta * delta) * std::pow(std::numbers::pi, -0.5 * dim) * sum;
}

} // namespace detail

/// Source of the untruncated nonlocal problem at x. The Gauss-Hermite order
/// starts at 40 per axis and doubles until two successive values agree to
/// 1e-12 relative.
inline double nonlocal_rhs(const ManufacturedCase& c, const Vec& x, const KernelParams& params) {
    params.validate();
    if (!c.exact)
        throw InvalidArgument("case '" + c.name + "' has no exact solution");
    const RawMatrix l = cholesky_lower(c.field(x));
    const std::size_t max_points = c.dim == 2 ? 320 : 80;
    double prev = detail::hermite_operator(c.exact->value, x, l, c.dim, params.delta, 40);
    for (std::size_t n = 80; n <= max_points; n *= 2) {
        const double next = detail::hermite_operator(c.exact->value, x, l, c.dim, params.delta, n);
        if (std::abs(next - prev) < 1e-12 * std::max(1.0, std::abs(next)))
            return next;
        prev = next;
    }
    throw QuadratureNotConverged("nonlocal source for '" + c.name + "' did not settle by " +
                                 std::to_string(max_points) + " points per axis");
}

/// Source value for the case's mode.
inline double source_value(const ManufacturedCase& c, const Vec& x, const KernelParams& params) {
    switch (c.mode) {
    case SourceMode::local_analytic:
        return local_rhs(c, x);
    case SourceMode::nonlocal_quadrature:
        return nonlocal_rhs(c, x, params);
    case SourceMode::prescribed:
        return c.source(x);
    }
    return 0.0;
}

namespace solutions {

/// x1 * x2^5
inline ExactSolution monomial() {
    return {[](const Vec& x) { return x[0] * std::pow(x[1], 5); },
            [](const Vec& x) {
                return Vec{std::pow(x[1], 5), 5.0 * x[0] * std::pow(x[1], 4), 0.0};
            },
            [](const Vec& x) {
                RawMatrix h{};
                h[1] = h[3] = 5.0 * std::pow(x[1], 4);
                h[4] = 20.0 * x[0] * std::pow(x[1], 3);
                return h;
            }};
}

/// exp(x1 x2)
inline ExactSolution exponential() {
    return {[](const Vec& x) { return std::exp(x[0] * x[1]); },
            [](const Vec& x) {
                const double e = std::exp(x[0] * x[1]);
                return Vec{x[1] * e, x[0] * e, 0.0};
            },
            [](const Vec& x) {
                const double e = std::exp(x[0] * x[1]);
                RawMatrix h{};
                h[0] = x[1] * x[1] * e;
                h[1] = h[3] = (1.0 + x[0] * x[1]) * e;
                h[4] = x[0] * x[0] * e;
                return h;
            }};
}

/// sin(|x|^2) in dim dimensions.
inline ExactSolution radial_sine(int dim) {
    auto r2 = [dim](const Vec& x) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k)
            s += x[k] * x[k];
        return s;
    };
    return {[r2](const Vec& x) { return std::sin(r2(x)); },
            [r2, dim](const Vec& x) {
                Vec g{};
                const double c = std::cos(r2(x));
                for (int k = 0; k < dim; ++k)
                    g[k] = 2.0 * x[k] * c;
                return g;
            },
            [r2, dim](const Vec& x) {
                RawMatrix h{};
                const double s = r2(x);
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j)
                        h[i * kMaxDim + j] =
                            (i == j ? 2.0 * std::cos(s) : 0.0) - 4.0 * x[i] * x[j] * std::sin(s);
                return h;
            }};
}

} // namespace solutions

namespace fields {

/// R diag(d) R^T with R = [[c, s], [-s, c]].
inline SpdMatrix rotated_2d(double theta, double d0, double d1) {
    const double c = std::cos(theta), s = std::sin(theta);
    RawMatrix r{};
    r[0] = c;
    r[1] = s;
    r[3] = -s;
    r[4] = c;
    const double d[2] = {d0, d1};
    return SpdMatrix::conjugated(2, r, d);
}

inline SpdMatrix anisotropic() { return SpdMatrix::diagonal({10.0, 1.0}); }
inline SpdMatrix rotated_anisotropic() { return rotated_2d(std::numbers::pi / 6.0, 10.0, 1.0); }

/// R diag(4, 1, 1) R^T with R rotating the x1-x2 plane by pi/4.
inline SpdMatrix rotated_3d() {
    const double c = std::cos(std::numbers::pi / 4.0), s = std::sin(std::numbers::pi / 4.0);
    RawMatrix r{};
    r[0] = c;
    r[1] = -s;
    r[3] = s;
    r[4] = c;
    r[8] = 1.0;
    const double d[3] = {4.0, 1.0, 1.0};
    return SpdMatrix::conjugated(3, r, d);
}

inline double k1(const Vec& x) { return 4.0 - 2.0 * x[0] * x[0] - x[1] * x[1]; }
inline double k2(const Vec& x) { return 4.0 - x[0] * x[0] - 2.0 * x[1] * x[1]; }

/// diag(k1, k2); eigenvalues lie in [1, 4] on the unit square.
inline CoefficientField variable_diagonal() {
    return CoefficientField::analytic(
        2,
        [](const Vec& x) {
            RawMatrix a{};
            a[0] = k1(x);
            a[4] = k2(x);
            return a;
        },
        1.0, 4.0);
}

/// diag(k1, k2) conjugated by the 5 pi / 12 rotation.
inline CoefficientField variable_rotated() {
    return CoefficientField::analytic(
        2,
        [](const Vec& x) {
            const double t = 5.0 * std::numbers::pi / 12.0;
            const double c = std::cos(t), s = std::sin(t);
            const double a = k1(x), b = k2(x);
            RawMatrix m{};
            m[0] = c * c * a + s * s * b;
            m[1] = m[3] = -c * s * a + s * c * b;
            m[4] = s * s * a + c * c * b;
            return m;
        },
        1.0, 4.0);
}

} // namespace fields

inline std::vector<ManufacturedCase> catalog() {
    std::vector<ManufacturedCase> out;
    const Box unit2 = Box::unit(2);
    const Box unit3 = Box::unit(3);
    const auto identity2 = CoefficientField::constant(SpdMatrix::identity(2));

    auto add = [&](std::string name, std::string description, int example, int dim,
                   CoefficientField field, SourceMode mode, std::optional<ExactSolution> exact) {
        ManufacturedCase c{std::move(name), std::move(description), example, dim, std::move(field),
                           mode, dim == 2 ? unit2 : unit3, std::move(exact), {}, {}, {}, {}};
        out.push_back(std::move(c));
        return &out.back();
    };

    add("ex1_poly", "u = x1 x2^5, A = I, nonlocal source", 1, 2, identity2,
        SourceMode::nonlocal_quadrature, solutions::monomial())
        ->fixed_delta = 1.0 / 40.0;
    add("ex1_exp", "u = exp(x1 x2), A = I, nonlocal source", 1, 2, identity2,
        SourceMode::nonlocal_quadrature, solutions::exponential())
        ->fixed_delta = 1.0 / 40.0;
    add("ex1_sin", "u = sin(x1^2 + x2^2), A = I, nonlocal source", 1, 2, identity2,
        SourceMode::nonlocal_quadrature, solutions::radial_sine(2))
        ->fixed_delta = 1.0 / 40.0;

    add("ex2_A1", "u = sin(|x|^2), A = I", 2, 2, identity2, SourceMode::local_analytic,
        solutions::radial_sine(2));
    add("ex2_A2", "u = sin(|x|^2), A = diag(10, 1)", 2, 2,
        CoefficientField::constant(fields::anisotropic()), SourceMode::local_analytic,
        solutions::radial_sine(2));
    add("ex2_A3", "u = sin(|x|^2), A = diag(10, 1) rotated by pi/6", 2, 2,
        CoefficientField::constant(fields::rotated_anisotropic()), SourceMode::local_analytic,
        solutions::radial_sine(2));

    add("ex3_A1", "3D, u = sin(|x|^2), A = I", 3, 3,
        CoefficientField::constant(SpdMatrix::identity(3)), SourceMode::local_analytic,
        solutions::radial_sine(3));
    add("ex3_A2", "3D, u = sin(|x|^2), A = diag(4, 1, 1)", 3, 3,
        CoefficientField::constant(SpdMatrix::diagonal({4.0, 1.0, 1.0})),
        SourceMode::local_analytic, solutions::radial_sine(3));
    add("ex3_A3", "3D, u = sin(|x|^2), A = diag(4, 1, 1) rotated by pi/4 about x3", 3, 3,
        CoefficientField::constant(fields::rotated_3d()), SourceMode::local_analytic,
        solutions::radial_sine(3));

    add("ex4_A1", "u = sin(|x|^2), A = diag(k1, k2)", 4, 2, fields::variable_diagonal(),
        SourceMode::local_analytic, solutions::radial_sine(2));
    add("ex4_A2", "u = sin(|x|^2), A = diag(k1, k2) rotated by 5 pi/12", 4, 2,
        fields::variable_rotated(), SourceMode::local_analytic, solutions::radial_sine(2));

    const ScalarFunction corner = [](const Vec& x) {
        return x[0] <= 0.0 || x[1] <= 0.0 ? 1.0 : 0.0;
    };
    const ScalarFunction zero = [](const Vec&) { return 0.0; };
    const std::pair<std::string, CoefficientField> ex5[] = {
        {"diag(10, 1)", CoefficientField::constant(fields::anisotropic())},
        {"diag(10, 1) rotated by pi/6", CoefficientField::constant(fields::rotated_anisotropic())},
        {"diag(k1, k2)", fields::variable_diagonal()},
        {"diag(k1, k2) rotated by 5 pi/12", fields::variable_rotated()},
    };
    for (int m = 0; m < 4; ++m) {
        ManufacturedCase* c = add("ex5_A" + std::to_string(m + 1),
                                  "g = 1 on x1 <= 0 or x2 <= 0, f = 0, A = " + ex5[m].first, 5, 2,
                                  ex5[m].second, SourceMode::prescribed, std::nullopt);
        c->boundary = corner;
        c->source = zero;
        c->solution_range = std::make_pair(0.0, 1.0);
        c->fixed_delta = 1.0 / 40.0;
    }
    return out;
}

inline ManufacturedCase find_case(const std::string& name) {
    for (auto& c : catalog())
        if (c.name == name)
            return c;
    throw InvalidArgument("unknown case '" + name + "'");
}

} // namespace nonlocal
