#pragma once

// One-dimensional Gauss rules used by the moment diagnostics, the
// quadrature-based comparison scheme and the nonlocal source evaluation.

#include "nonlocal/errors.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace nonlocal {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

/// Gauss-Legendre rule on [-1, 1] (Newton iteration on the three-term recurrence).
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0)
        throw InvalidArgument("Gauss-Legendre rule needs at least one point");
    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
            }
            pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line, using the
/// orthonormal recurrence so large n does not overflow.
inline QuadratureRule gauss_hermite(std::size_t n) {
    if (n == 0)
        throw InvalidArgument("Gauss-Hermite rule needs at least one point");
    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const std::size_t half = (n + 1) / 2;
    const double dn = static_cast<double>(n);
    double z = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * dn + 1.0) - 1.85575 * std::pow(2.0 * dn + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(dn, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * rule.nodes[n - 1];
        else if (i == 3)
            z = 1.91 * z - 0.91 * rule.nodes[n - 2];
        else
            z = 2.0 * z - rule.nodes[n - 1 - (i - 2)];
        double pp = 0.0;
        bool converged = false;
        for (int iter = 0; iter < 200; ++iter) {
            double p1 = pim4;
            double p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double jj = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (jj + 1.0)) * p2 - std::sqrt(jj / (jj + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * dn) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw QuadratureNotConverged("Gauss-Hermite node " + std::to_string(i) + " of " +
                                         std::to_string(n));
        rule.nodes[n - 1 - i] = z;
        rule.nodes[i] = -z;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / (pp * pp);
    }
    return rule;
}

} // namespace nonlocal
