#pragma once

// Krylov solvers for the nonsymmetric M-matrix systems produced by assembly.

#include "nonlocal/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

namespace nonlocal {

template <class Op>
concept LinearOperator = requires(const Op& a, std::span<const double> x, std::span<double> y) {
    { a.size() } -> std::convertible_to<std::size_t>;
    a.apply(x, y);
    { a.diagonal() } -> std::convertible_to<std::vector<double>>;
    { a.norm_inf() } -> std::convertible_to<double>;
};

struct SolveOptions {
    double tol = 1e-12;
    std::size_t max_iterations = 20000;
    /// True residual is recomputed at least this often.
    std::size_t check_interval = 50;
    std::size_t gmres_restart = 60;
    bool allow_fallback = true;
};

struct SolveResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double residual = 0.0;
    double threshold = 0.0;
    std::string method;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

inline std::vector<double> jacobi(const std::vector<double>& diag) {
    std::vector<double> inv(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i)
        inv[i] = diag[i] != 0.0 ? 1.0 / diag[i] : 1.0;
    return inv;
}

/// Tracks ||b - A x||_inf against tol (||b||_inf + ||A||_inf ||x||_inf).
template <LinearOperator Op>
struct ResidualCheck {
    const Op& a;
    std::span<const double> b;
    double tol;
    double b_norm;
    double a_norm;
    std::vector<double> scratch;

    ResidualCheck(const Op& op, std::span<const double> rhs, double t)
        : a(op), b(rhs), tol(t), b_norm(norm_inf(rhs)), a_norm(op.norm_inf()),
          scratch(rhs.size()) {}

    double threshold(std::span<const double> x) const { return tol * (b_norm + a_norm * norm_inf(x)); }

    /// Writes b - A x into r and returns its max norm.
    double residual(std::span<const double> x, std::span<double> r) {
        a.apply(x, scratch);
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = b[i] - scratch[i];
        return norm_inf(r);
    }
};

} // namespace detail

/// Restarted GMRES with right Jacobi preconditioning, continuing from x.
template <LinearOperator Op>
SolveResult gmres(const Op& a, std::span<const double> b, std::vector<double> x,
                  const SolveOptions& opt = {}, std::size_t used_iterations = 0) {
    const std::size_t n = a.size();
    require_same_size(b.size(), n, "right-hand side vs operator size");
    require_same_size(x.size(), n, "initial guess vs operator size");
    const std::size_t m = std::max<std::size_t>(1, opt.gmres_restart);
    const std::vector<double> minv = detail::jacobi(a.diagonal());
    detail::ResidualCheck<Op> check(a, b, opt.tol);

    std::vector<std::vector<double>> v(m + 1, std::vector<double>(n));
    std::vector<std::vector<double>> h(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1), w(n), z(n), r(n);
    std::size_t it = used_iterations;

    for (;;) {
        const double res = check.residual(x, r);
        const double thr = check.threshold(x);
        if (res <= thr)
            return {std::move(x), it, res, thr, "gmres"};
        if (it >= opt.max_iterations)
            throw NotConverged("GMRES reached " + std::to_string(it) + " iterations (residual " +
                               std::to_string(res) + ", target " + std::to_string(thr) + ")");
        const double beta = detail::norm2(r);
        for (std::size_t i = 0; i < n; ++i)
            v[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        std::size_t k = 0;
        for (; k < m && it < opt.max_iterations; ++k, ++it) {
            for (std::size_t i = 0; i < n; ++i)
                z[i] = minv[i] * v[k][i];
            a.apply(z, w);
            for (std::size_t j = 0; j <= k; ++j) {
                h[j][k] = detail::dot(w, v[j]);
                for (std::size_t i = 0; i < n; ++i)
                    w[i] -= h[j][k] * v[j][i];
            }
            h[k + 1][k] = detail::norm2(w);
            const bool invariant = h[k + 1][k] == 0.0;
            if (!invariant)
                for (std::size_t i = 0; i < n; ++i)
                    v[k + 1][i] = w[i] / h[k + 1][k];
            for (std::size_t j = 0; j < k; ++j) {
                const double t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            const double denom = std::hypot(h[k][k], h[k + 1][k]);
            if (denom == 0.0)
                throw Breakdown("GMRES Hessenberg column vanished");
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            // The 2-norm estimate bounds the max norm of the residual.
            if (std::abs(g[k + 1]) <= 0.5 * check.threshold(x) || invariant) {
                ++k;
                ++it;
                break;
            }
        }
        std::vector<double> y(k, 0.0);
        for (std::size_t jj = k; jj-- > 0;) {
            double s = g[jj];
            for (std::size_t l = jj + 1; l < k; ++l)
                s -= h[jj][l] * y[l];
            y[jj] = s / h[jj][jj];
        }
        std::fill(z.begin(), z.end(), 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < n; ++i)
                z[i] += y[j] * v[j][i];
        for (std::size_t i = 0; i < n; ++i)
            x[i] += minv[i] * z[i];
    }
}

/// Jacobi-preconditioned BiCGStab from a zero start; switches to restarted
/// GMRES if the recurrence breaks down.
template <LinearOperator Op>
SolveResult solve(const Op& a, std::span<const double> b, const SolveOptions& opt = {}) {
    if (!(opt.tol > 0.0))
        throw InvalidArgument("solver tolerance must be positive");
    const std::size_t n = a.size();
    require_same_size(b.size(), n, "right-hand side vs operator size");
    std::vector<double> x(n, 0.0);
    detail::ResidualCheck<Op> check(a, b, opt.tol);
    if (check.b_norm == 0.0)
        return {std::move(x), 0, 0.0, 0.0, "bicgstab"};

    const std::vector<double> minv = detail::jacobi(a.diagonal());
    std::vector<double> r(b.begin(), b.end()), rhat(r), p(n, 0.0), v(n, 0.0), phat(n), s(n),
        shat(n), t(n), xtrial(n);
    double rho_old = 1.0, alpha = 1.0, omega = 1.0;
    std::size_t false_alarms = 0;
    const double tiny = 1e-300;

    auto restart = [&](std::span<const double> true_r) {
        std::copy(true_r.begin(), true_r.end(), r.begin());
        rhat = r;
        std::fill(p.begin(), p.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        rho_old = alpha = omega = 1.0;
    };
    auto fallback = [&](std::size_t it, const std::string& why) -> SolveResult {
        if (!opt.allow_fallback)
            throw Breakdown("BiCGStab " + why + " at iteration " + std::to_string(it));
        SolveResult res = gmres(a, b, x, opt, it);
        res.method = "bicgstab+gmres";
        return res;
    };

    std::vector<double> true_r(n);
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        const double rho = detail::dot(rhat, r);
        if (std::abs(rho) <= tiny || std::abs(rho) <= 1e-30 * detail::norm2(rhat) * detail::norm2(r))
            return fallback(it, "rho breakdown");
        const double beta = (rho / rho_old) * (alpha / omega);
        for (std::size_t i = 0; i < n; ++i)
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        for (std::size_t i = 0; i < n; ++i)
            phat[i] = minv[i] * p[i];
        a.apply(phat, v);
        const double rv = detail::dot(rhat, v);
        if (std::abs(rv) <= tiny)
            return fallback(it, "breakdown in <rhat, v>");
        alpha = rho / rv;
        for (std::size_t i = 0; i < n; ++i)
            s[i] = r[i] - alpha * v[i];

        for (std::size_t i = 0; i < n; ++i)
            xtrial[i] = x[i] + alpha * phat[i];
        if (detail::norm_inf(s) <= check.threshold(xtrial)) {
            const double res = check.residual(xtrial, true_r);
            const double thr = check.threshold(xtrial);
            if (res <= thr)
                return {std::move(xtrial), it, res, thr, "bicgstab"};
            x = xtrial;
            if (++false_alarms > 20)
                return fallback(it, "stagnation");
            restart(true_r);
            continue;
        }

        for (std::size_t i = 0; i < n; ++i)
            shat[i] = minv[i] * s[i];
        a.apply(shat, t);
        const double tt = detail::dot(t, t);
        if (tt <= tiny)
            return fallback(it, "breakdown in <t, t>");
        omega = detail::dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if (omega == 0.0)
            return fallback(it, "omega breakdown");
        rho_old = rho;

        const bool claimed = detail::norm_inf(r) <= check.threshold(x);
        if (claimed || it % opt.check_interval == 0) {
            const double res = check.residual(x, true_r);
            const double thr = check.threshold(x);
            if (res <= thr)
                return {std::move(x), it, res, thr, "bicgstab"};
            if (claimed) {
                if (++false_alarms > 20)
                    return fallback(it, "stagnation");
                restart(true_r);
            }
        }
    }
    const double res = check.residual(x, true_r);
    throw NotConverged("BiCGStab reached " + std::to_string(opt.max_iterations) +
                       " iterations (residual " + std::to_string(res) + ", target " +
                       std::to_string(check.threshold(x)) + ")");
}

inline std::vector<double> solve(const SparseMatrix& a, std::span<const double> b, double tol) {
    SolveOptions opt;
    opt.tol = tol;
    return solve(a, b, opt).x;
}

/// Jacobi-preconditioned conjugate gradients; only meaningful for symmetric
/// positive definite operators, used as an independent cross-check.
template <LinearOperator Op>
SolveResult conjugate_gradient(const Op& a, std::span<const double> b, const SolveOptions& opt = {}) {
    const std::size_t n = a.size();
    require_same_size(b.size(), n, "right-hand side vs operator size");
    detail::ResidualCheck<Op> check(a, b, opt.tol);
    std::vector<double> x(n, 0.0), r(b.begin(), b.end()), z(n), p(n), q(n), true_r(n);
    if (check.b_norm == 0.0)
        return {std::move(x), 0, 0.0, 0.0, "cg"};
    const std::vector<double> minv = detail::jacobi(a.diagonal());
    for (std::size_t i = 0; i < n; ++i)
        p[i] = z[i] = minv[i] * r[i];
    double rz = detail::dot(r, z);
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        a.apply(p, q);
        const double pq = detail::dot(p, q);
        if (!(pq > 0.0))
            throw Breakdown("CG curvature is not positive; operator is not SPD");
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if (detail::norm_inf(r) <= check.threshold(x) || it % opt.check_interval == 0) {
            const double res = check.residual(x, true_r);
            const double thr = check.threshold(x);
            if (res <= thr)
                return {std::move(x), it, res, thr, "cg"};
            r = true_r;
        }
        for (std::size_t i = 0; i < n; ++i)
            z[i] = minv[i] * r[i];
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    throw NotConverged("CG reached " + std::to_string(opt.max_iterations) + " iterations");
}

} // namespace nonlocal
