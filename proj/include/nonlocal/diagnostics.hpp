#pragma once

// Error norms, convergence rates and structural checks of assembled systems.

#include "nonlocal/assembly.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/sparse.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nonlocal {

inline double linf_error(std::span<const double> u_h, std::span<const double> u_exact) {
    require_same_size(u_h.size(), u_exact.size(), "solution vs exact values");
    double e = 0.0;
    for (std::size_t i = 0; i < u_h.size(); ++i)
        e = std::max(e, std::abs(u_h[i] - u_exact[i]));
    return e;
}

/// rate_k = ln(e_{k-1} / e_k) / ln(N_k / N_{k-1}); one entry fewer than the input.
inline std::vector<double> convergence_rate(std::span<const double> errors,
                                            std::span<const double> ns) {
    require_same_size(errors.size(), ns.size(), "errors vs grid sizes");
    if (errors.size() < 2)
        throw InvalidArgument("convergence rates need at least two levels");
    for (std::size_t k = 0; k < errors.size(); ++k)
        if (!(errors[k] > 0.0) || !(ns[k] > 0.0))
            throw NonPositive("errors and grid sizes must be positive");
    std::vector<double> rates;
    for (std::size_t k = 1; k < errors.size(); ++k)
        rates.push_back(std::log(errors[k - 1] / errors[k]) / std::log(ns[k] / ns[k - 1]));
    return rates;
}

struct MaxPrincipleReport {
    bool pass = false;
    double min = 0.0;
    double max = 0.0;
};

inline MaxPrincipleReport max_principle_report(std::span<const double> solution, double lo,
                                               double hi, double slack = 1e-12) {
    MaxPrincipleReport r;
    r.min = std::numeric_limits<double>::infinity();
    r.max = -std::numeric_limits<double>::infinity();
    for (double v : solution) {
        r.min = std::min(r.min, v);
        r.max = std::max(r.max, v);
    }
    r.pass = solution.empty() || (r.min >= lo - slack && r.max <= hi + slack);
    return r;
}

/// Discrete form of the conservation identity
///   sum_i w_i sum_{collar j} (-b_ij) (u_i - g_j) = sum_i w_i f_i,
/// which follows from the solve when w_i b_ij is symmetric (constant A,
/// collocation scheme). Returns |LHS - RHS|.
inline double mass_conservation_check(const TensorGrid& grid, const CoefficientField& field,
                                      const CollocationSystem& system,
                                      std::span<const double> solution,
                                      std::span<const double> f_interior) {
    if (!field.is_constant())
        throw NonConstantCoefficient("mass conservation requires a constant coefficient");
    const LatticeOperator& op = system.matrix;
    require_same_size(solution.size(), op.size(), "solution vs interior nodes");
    require_same_size(f_interior.size(), op.size(), "source vs interior nodes");
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t r = 0; r < op.size(); ++r) {
        const double wi = hat_support_integral(grid, grid.node(op.row_node(r)));
        double flux = 0.0;
        op.for_each_entry(r, [&](std::size_t col, double b) {
            const std::int64_t s = op.slot(col);
            if (s < 0)
                flux -= b * (solution[r] - system.collar_values[static_cast<std::size_t>(-s - 1)]);
        });
        lhs += wi * flux;
        rhs += wi * f_interior[r];
    }
    return std::abs(lhs - rhs);
}

/// Nodal estimate of int (gamma(x, y) - gamma(y, x)) / 2 dy at each sampled node.
inline std::vector<double> asymmetry_condition_probe(const TensorGrid& grid,
                                                     const CoefficientField& field,
                                                     const KernelParams& params,
                                                     std::span<const std::size_t> sample_nodes) {
    std::vector<double> out;
    out.reserve(sample_nodes.size());
    if (field.is_constant()) {
        out.assign(sample_nodes.size(), 0.0);
        return out;
    }
    for (std::size_t flat : sample_nodes) {
        const NodeIndex i = grid.node(flat);
        const Vec xi = grid.coord(i);
        const FrozenKernel at_x(params, field(xi));
        // gamma(y, x) can be nonzero only within the widest possible ellipsoid.
        Lattice first{}, last{};
        for (int k = 0; k < grid.dim(); ++k) {
            const double e = params.delta * std::sqrt(params.chi2 * field.axis_bound(k)) * (1.0 + 1e-9);
            std::tie(first[k], last[k]) = grid.axis_window(k, xi[k], e);
        }
        double sum = 0.0;
        for_each_in_box(grid, first, last, [&](const Lattice& l) {
            const Vec y = grid.coord(l);
            const FrozenKernel at_y(params, field(y));
            const double diff = at_x(offset(xi, y)) - at_y(offset(y, xi));
            sum += 0.5 * diff * hat_support_integral(grid, {grid.flat_of(l), l});
        });
        out.push_back(sum);
    }
    return out;
}

struct MMatrixReport {
    bool pass = false;
    bool diagonal_positive = true;
    bool offdiagonal_nonpositive = true;
    bool zero_row_sums = true;
    bool strict_row_exists = false;
    std::optional<std::size_t> first_bad_row;
    std::string detail;
};

namespace detail {

inline void note_bad(MMatrixReport& rep, std::size_t row, const std::string& what) {
    if (!rep.first_bad_row) {
        rep.first_bad_row = row;
        rep.detail = "row " + std::to_string(row) + ": " + what;
    }
}

inline void finish(MMatrixReport& rep) {
    rep.pass = rep.diagonal_positive && rep.offdiagonal_nonpositive && rep.zero_row_sums &&
               rep.strict_row_exists;
    if (!rep.strict_row_exists && rep.detail.empty())
        rep.detail = "no row has a strictly positive interior sum";
}

} // namespace detail

/// Sign pattern and row-sum structure of [interior | collar] blocks.
inline MMatrixReport m_matrix_report(const SparseMatrix& interior, const SparseMatrix& collar,
                                     double rel_tol = 1e-12) {
    require_same_size(interior.rows(), collar.rows(), "interior vs collar block rows");
    MMatrixReport rep;
    for (std::size_t i = 0; i < interior.rows(); ++i) {
        double diag = 0.0, in_sum = 0.0, total = 0.0, scale = 0.0;
        const auto cols = interior.row_columns(i);
        const auto vals = interior.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            in_sum += vals[p];
            scale += std::abs(vals[p]);
            if (cols[p] == i) {
                diag = vals[p];
            } else if (vals[p] > 0.0) {
                rep.offdiagonal_nonpositive = false;
                detail::note_bad(rep, i, "positive off-diagonal entry");
            }
        }
        double out_sum = 0.0;
        for (double v : collar.row_values(i)) {
            out_sum += v;
            scale += std::abs(v);
            if (v > 0.0) {
                rep.offdiagonal_nonpositive = false;
                detail::note_bad(rep, i, "positive collar coupling");
            }
        }
        total = in_sum + out_sum;
        if (!(diag > 0.0)) {
            rep.diagonal_positive = false;
            detail::note_bad(rep, i, "non-positive diagonal");
        }
        if (std::abs(total) > rel_tol * scale) {
            rep.zero_row_sums = false;
            detail::note_bad(rep, i, "row sum " + std::to_string(total) + " is not zero");
        }
        if (in_sum > rel_tol * scale)
            rep.strict_row_exists = true;
    }
    detail::finish(rep);
    return rep;
}

/// Shared stencils are checked once; the strict-row search scans rows until
/// one is found.
inline MMatrixReport m_matrix_report(const LatticeOperator& op, double rel_tol = 1e-12) {
    MMatrixReport rep;
    std::vector<bool> seen(op.stencil_count(), false);
    for (std::size_t r = 0; r < op.size(); ++r) {
        const bool fresh = !seen[op.stencil_index(r)];
        if (!fresh && rep.strict_row_exists)
            continue;
        seen[op.stencil_index(r)] = true;
        double diag = 0.0, in_sum = 0.0, total = 0.0, scale = 0.0;
        const std::size_t self = op.row_node(r);
        op.for_each_entry(r, [&](std::size_t col, double v) {
            total += v;
            scale += std::abs(v);
            if (op.slot(col) >= 0)
                in_sum += v;
            if (col == self) {
                diag = v;
            } else if (v > 0.0) {
                rep.offdiagonal_nonpositive = false;
                detail::note_bad(rep, r, "positive off-diagonal entry");
            }
        });
        if (in_sum > rel_tol * scale)
            rep.strict_row_exists = true;
        if (!fresh)
            continue;
        if (!(diag > 0.0)) {
            rep.diagonal_positive = false;
            detail::note_bad(rep, r, "non-positive diagonal");
        }
        if (std::abs(total) > rel_tol * scale) {
            rep.zero_row_sums = false;
            detail::note_bad(rep, r, "row sum " + std::to_string(total) + " is not zero");
        }
    }
    detail::finish(rep);
    return rep;
}

inline MMatrixReport m_matrix_report(const CollocationSystem& system, double rel_tol = 1e-12) {
    return m_matrix_report(system.matrix, rel_tol);
}

} // namespace nonlocal
