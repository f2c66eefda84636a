#pragma once

// Naive all-pairs assembly used as an oracle for the stencil builders (2D only).

#include "nonlocal/grid.hpp"
#include "nonlocal/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace nonlocal::testing {

// Kernel written out from its definition, independent of FrozenKernel.
inline double oracle_kernel(const SpdMatrix& a, double delta, double chi2, const Vec& z) {
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double q = (a(1, 1) * z[0] * z[0] - 2.0 * a(0, 1) * z[0] * z[1] + a(0, 0) * z[1] * z[1]) / det;
    if (q > delta * delta * chi2 * (1.0 + 1e-12))
        return 0.0;
    return 2.0 / (delta * delta) * std::exp(-q / (2.0 * delta * delta)) /
           (2.0 * std::numbers::pi * delta * delta * std::sqrt(det));
}

inline double oracle_hat(const TensorGrid& g, std::size_t flat) {
    const Lattice l = g.lattice_of(flat);
    double w = 1.0;
    for (int k = 0; k < g.dim(); ++k) {
        const auto& a = g.axis(k);
        const double left = l[k] > 0 ? a[l[k]] - a[l[k] - 1] : 0.0;
        const double right = l[k] + 1 < a.size() ? a[l[k] + 1] - a[l[k]] : 0.0;
        w *= 0.5 * (left + right);
    }
    return w;
}

// Dense all-pairs collocation matrix over [interior | collar] columns (2D).
inline std::vector<std::vector<double>> brute_force_collocation(const TensorGrid& g, const CoefficientField& field,
                                                         const KernelParams& p) {
    const auto& in = g.interior_nodes();
    std::vector<std::vector<double>> m(in.size(), std::vector<double>(g.node_count(), 0.0));
    for (std::size_t r = 0; r < in.size(); ++r) {
        const Vec xi = g.coord(in[r]);
        const SpdMatrix a = field(xi);
        double diag = 0.0;
        for (std::size_t f = 0; f < g.node_count(); ++f) {
            if (f == in[r])
                continue;
            const Vec y = g.coord(f);
            const double b = -oracle_kernel(a, p.delta, p.chi2, {y[0] - xi[0], y[1] - xi[1], 0.0}) *
                             oracle_hat(g, f);
            m[r][f] = b;
            diag -= b;
        }
        m[r][in[r]] = diag;
    }
    return m;
}

// Same quadrature as the scheme, but over every cell of the grid.
inline std::vector<std::vector<double>> brute_force_fd(const TensorGrid& g, const CoefficientField& field,
                                                const KernelParams& p, std::size_t points) {
    const QuadratureRule gl = gauss_legendre(points);
    const auto& in = g.interior_nodes();
    const auto& ax = g.axis(0);
    const auto& ay = g.axis(1);
    std::vector<std::vector<double>> m(in.size(), std::vector<double>(g.node_count(), 0.0));
    for (std::size_t r = 0; r < in.size(); ++r) {
        const Vec xi = g.coord(in[r]);
        const SpdMatrix a = field(xi);
        std::vector<double> c(g.node_count(), 0.0);
        for (std::size_t cx = 0; cx + 1 < ax.size(); ++cx)
            for (std::size_t cy = 0; cy + 1 < ay.size(); ++cy) {
                const double hx = ax[cx + 1] - ax[cx], hy = ay[cy + 1] - ay[cy];
                for (std::size_t px = 0; px < gl.size(); ++px)
                    for (std::size_t py = 0; py < gl.size(); ++py) {
                        const double tx = 0.5 * (gl.nodes[px] + 1.0), ty = 0.5 * (gl.nodes[py] + 1.0);
                        const Vec z{ax[cx] + tx * hx - xi[0], ay[cy] + ty * hy - xi[1], 0.0};
                        const double w = 0.25 * gl.weights[px] * gl.weights[py] * hx * hy;
                        const double val = w * oracle_kernel(a, p.delta, p.chi2, z) *
                                           (z[0] * z[0] + z[1] * z[1]) / (std::abs(z[0]) + std::abs(z[1]));
                        c[g.flat_of({cx, cy, 0})] += val * (1 - tx) * (1 - ty);
                        c[g.flat_of({cx + 1, cy, 0})] += val * tx * (1 - ty);
                        c[g.flat_of({cx, cy + 1, 0})] += val * (1 - tx) * ty;
                        c[g.flat_of({cx + 1, cy + 1, 0})] += val * tx * ty;
                    }
            }
        double diag = 0.0;
        for (std::size_t f = 0; f < g.node_count(); ++f) {
            if (f == in[r] || c[f] == 0.0)
                continue;
            const Vec y = g.coord(f);
            const double dx = y[0] - xi[0], dy = y[1] - xi[1];
            m[r][f] = -c[f] * (std::abs(dx) + std::abs(dy)) / (dx * dx + dy * dy);
            diag -= m[r][f];
        }
        m[r][in[r]] = diag;
    }
    return m;
}

} // namespace nonlocal::testing
