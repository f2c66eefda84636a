#pragma once

// Tensor-product grids over the solution box plus its interaction collar.

#include "nonlocal/coeff.hpp"
#include "nonlocal/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace nonlocal {

struct Box {
    int dim = 2;
    Vec lo{};
    Vec hi{};

    static Box unit(int dim) {
        require_dim(dim);
        Box b;
        b.dim = dim;
        for (int k = 0; k < dim; ++k)
            b.hi[k] = 1.0;
        return b;
    }

    bool contains(const Vec& x) const noexcept {
        for (int k = 0; k < dim; ++k)
            if (x[k] < lo[k] || x[k] > hi[k])
                return false;
        return true;
    }
};

using Lattice = std::array<std::size_t, kMaxDim>;
using Partition = std::array<std::vector<double>, kMaxDim>;

struct NodeIndex {
    std::size_t flat = 0;
    Lattice lattice{};

    friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

enum class NodeRole : std::uint8_t { interior, collar };

/// Breakpoints splitting [lo, hi] into n equal cells.
inline std::vector<double> uniform_partition(double lo, double hi, std::size_t n) {
    if (n == 0)
        throw EmptyPartition("uniform partition needs at least one cell");
    if (!(hi > lo))
        throw InvalidArgument("partition bounds must satisfy lo < hi");
    std::vector<double> b(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        b[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    b[n] = hi;
    return b;
}

/// [lo, mid] in n_left cells followed by [mid, hi] in n_right cells.
inline std::vector<double> split_partition(double lo, double mid, double hi, std::size_t n_left,
                                           std::size_t n_right) {
    std::vector<double> b = uniform_partition(lo, mid, n_left);
    const std::vector<double> r = uniform_partition(mid, hi, n_right);
    b.insert(b.end(), r.begin() + 1, r.end());
    return b;
}

class TensorGrid {
public:
    /// axes[k] holds the full node coordinates along axis k (collar included);
    /// the faces of `solution` must coincide with nodes.
    TensorGrid(int dim, Partition axes, const Box& solution)
        : dim_(dim), axes_(std::move(axes)), solution_(solution) {
        require_dim(dim);
        if (solution.dim != dim)
            throw DimensionMismatch("solution box dimension differs from grid dimension");
        for (int k = 0; k < kMaxDim; ++k) {
            if (k >= dim) {
                axes_[k] = {0.0};
                first_[k] = last_[k] = 0;
                continue;
            }
            const auto& a = axes_[k];
            if (a.size() < 2)
                throw EmptyPartition("axis " + std::to_string(k) + " needs at least two nodes");
            for (std::size_t i = 1; i < a.size(); ++i)
                if (!(a[i] > a[i - 1]))
                    throw InvalidArgument("axis " + std::to_string(k) +
                                          " coordinates must be strictly increasing");
            first_[k] = locate_face(k, solution.lo[k]);
            last_[k] = locate_face(k, solution.hi[k]);
            if (last_[k] <= first_[k])
                throw InvalidArgument("solution box is empty along axis " + std::to_string(k));
        }
        strides_[kMaxDim - 1] = 1;
        for (int k = kMaxDim - 2; k >= 0; --k)
            strides_[k] = strides_[k + 1] * axes_[k + 1].size();
        node_count_ = strides_[0] * axes_[0].size();

        slot_.assign(node_count_, 0);
        for (std::size_t f = 0; f < node_count_; ++f) {
            const Lattice l = lattice_of(f);
            bool inside = true;
            for (int k = 0; k < dim_; ++k)
                inside = inside && l[k] > first_[k] && l[k] < last_[k];
            if (inside) {
                slot_[f] = static_cast<std::int64_t>(interior_.size());
                interior_.push_back(f);
            } else {
                slot_[f] = -static_cast<std::int64_t>(collar_.size()) - 1;
                collar_.push_back(f);
            }
        }
        if (interior_.empty())
            throw InvalidArgument("grid has no interior nodes");
    }

    int dim() const noexcept { return dim_; }
    const Box& solution_box() const noexcept { return solution_; }
    const std::vector<double>& axis(int k) const { return axes_[k]; }
    std::size_t axis_size(int k) const { return axes_[k].size(); }
    std::size_t node_count() const noexcept { return node_count_; }
    const Lattice& strides() const noexcept { return strides_; }

    /// Lattice index of the lower / upper face of the solution box along axis k.
    std::size_t solution_first(int k) const { return first_[k]; }
    std::size_t solution_last(int k) const { return last_[k]; }

    std::size_t collar_cells(int k, bool upper) const {
        return upper ? axes_[k].size() - 1 - last_[k] : first_[k];
    }

    Lattice lattice_of(std::size_t flat) const {
        Lattice l{};
        for (int k = 0; k < kMaxDim; ++k) {
            l[k] = flat / strides_[k];
            flat %= strides_[k];
        }
        return l;
    }

    std::size_t flat_of(const Lattice& l) const {
        std::size_t f = 0;
        for (int k = 0; k < kMaxDim; ++k) {
            if (l[k] >= axes_[k].size())
                throw InvalidArgument("lattice index out of range");
            f += l[k] * strides_[k];
        }
        return f;
    }

    NodeIndex node(std::size_t flat) const {
        if (flat >= node_count_)
            throw InvalidArgument("flat index out of range");
        return {flat, lattice_of(flat)};
    }

    NodeIndex node(const Lattice& l) const { return {flat_of(l), l}; }

    Vec coord(const Lattice& l) const noexcept {
        Vec x{};
        for (int k = 0; k < dim_; ++k)
            x[k] = axes_[k][l[k]];
        return x;
    }
    Vec coord(std::size_t flat) const { return coord(lattice_of(flat)); }
    Vec coord(const NodeIndex& n) const { return coord(n.lattice); }

    NodeRole role(std::size_t flat) const {
        return slot_.at(flat) >= 0 ? NodeRole::interior : NodeRole::collar;
    }

    std::size_t interior_count() const noexcept { return interior_.size(); }
    std::size_t collar_count() const noexcept { return collar_.size(); }
    /// Flat indices of interior (resp. collar) nodes in increasing order.
    const std::vector<std::size_t>& interior_nodes() const noexcept { return interior_; }
    const std::vector<std::size_t>& collar_nodes() const noexcept { return collar_; }

    /// Row of an interior node, or -1.
    std::int64_t interior_index(std::size_t flat) const {
        const std::int64_t s = slot_.at(flat);
        return s >= 0 ? s : -1;
    }
    /// Position of a collar node in collar_nodes(), or -1.
    std::int64_t collar_index(std::size_t flat) const {
        const std::int64_t s = slot_.at(flat);
        return s < 0 ? -s - 1 : -1;
    }

    /// Integral of the 1D hat at node i of axis k.
    double axis_weight(int k, std::size_t i) const {
        const auto& a = axes_[k];
        const double left = i > 0 ? a[i] - a[i - 1] : 0.0;
        const double right = i + 1 < a.size() ? a[i + 1] - a[i] : 0.0;
        return 0.5 * (left + right);
    }

    /// Largest cell width inside the solution box.
    double max_spacing() const {
        double h = 0.0;
        for (int k = 0; k < dim_; ++k)
            for (std::size_t i = first_[k]; i < last_[k]; ++i)
                h = std::max(h, axes_[k][i + 1] - axes_[k][i]);
        return h;
    }

    /// Node range [first, last] on axis k whose coordinates lie within
    /// [center - half_width, center + half_width]; empty when first > last.
    std::pair<std::size_t, std::size_t> axis_window(int k, double center, double half_width) const {
        const auto& a = axes_[k];
        const auto lo = std::lower_bound(a.begin(), a.end(), center - half_width);
        const auto hi = std::upper_bound(a.begin(), a.end(), center + half_width);
        const auto first = static_cast<std::size_t>(lo - a.begin());
        const auto past = static_cast<std::size_t>(hi - a.begin());
        if (past == 0)
            return {1, 0};
        return {first, past - 1};
    }

private:
    std::size_t locate_face(int k, double value) const {
        const auto& a = axes_[k];
        const double tol = 1e-12 * std::max(1.0, a.back() - a.front());
        const auto it = std::lower_bound(a.begin(), a.end(), value - tol);
        if (it == a.end() || std::abs(*it - value) > tol)
            throw InvalidArgument("solution box face " + std::to_string(value) + " on axis " +
                                  std::to_string(k) + " is not a grid node");
        return static_cast<std::size_t>(it - a.begin());
    }

    int dim_;
    Partition axes_;
    Box solution_;
    Lattice first_{};
    Lattice last_{};
    Lattice strides_{};
    std::size_t node_count_ = 0;
    std::vector<std::int64_t> slot_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> collar_;
};

struct GridOptions {
    /// Upper bound on collar cells per side, guarding against a misconfigured delta.
    std::size_t max_collar_cells = 4096;
};

/// Collar cells needed on axis k so every interior ellipsoid is covered.
inline std::size_t collar_cells_needed(double width, double cell) {
    const double ratio = width / cell;
    const double r = std::round(ratio);
    // Treat ratios within rounding of an integer as that integer.
    if (std::abs(ratio - r) <= 1e-9 * std::max(1.0, r))
        return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(ratio));
}

/// Extends the breakpoints of the solution box outward by whole cells (each
/// collar cell copies the width of the adjacent boundary cell) until the
/// collar is at least delta * sqrt(chi2 * bound_k) wide on axis k.
inline TensorGrid build_grid(const Box& domain, const Partition& partitions,
                             const KernelParams& params, const CoefficientField& field,
                             const GridOptions& options = {}) {
    params.validate();
    require_dim(domain.dim);
    if (field.dim() != domain.dim || params.dim != domain.dim)
        throw DimensionMismatch("grid, kernel and coefficient dimensions must agree");
    Partition axes;
    for (int k = 0; k < domain.dim; ++k) {
        const auto& b = partitions[k];
        if (b.size() < 2)
            throw EmptyPartition("axis " + std::to_string(k) + " needs at least two breakpoints");
        for (std::size_t i = 1; i < b.size(); ++i)
            if (!(b[i] > b[i - 1]))
                throw InvalidArgument("breakpoints must be strictly increasing");
        const double tol = 1e-12 * std::max(1.0, domain.hi[k] - domain.lo[k]);
        if (std::abs(b.front() - domain.lo[k]) > tol || std::abs(b.back() - domain.hi[k]) > tol)
            throw InvalidArgument("breakpoints must span the solution box on axis " +
                                  std::to_string(k));

        const double width = params.delta * std::sqrt(params.chi2 * field.axis_bound(k));
        const double h_lo = b[1] - b[0];
        const double h_hi = b[b.size() - 1] - b[b.size() - 2];
        const std::size_t n_lo = collar_cells_needed(width, h_lo);
        const std::size_t n_hi = collar_cells_needed(width, h_hi);
        if (n_lo > options.max_collar_cells || n_hi > options.max_collar_cells)
            throw CollarOverflow("axis " + std::to_string(k) + " needs " +
                                 std::to_string(std::max(n_lo, n_hi)) + " collar cells (limit " +
                                 std::to_string(options.max_collar_cells) + ")");

        auto& a = axes[k];
        a.reserve(b.size() + n_lo + n_hi);
        for (std::size_t m = n_lo; m >= 1; --m)
            a.push_back(domain.lo[k] - static_cast<double>(m) * h_lo);
        a.push_back(domain.lo[k]);
        a.insert(a.end(), b.begin() + 1, b.end() - 1);
        a.push_back(domain.hi[k]);
        for (std::size_t m = 1; m <= n_hi; ++m)
            a.push_back(domain.hi[k] + static_cast<double>(m) * h_hi);
    }
    return TensorGrid(domain.dim, std::move(axes), domain);
}

inline double hat_support_integral(const TensorGrid& grid, const NodeIndex& j) {
    double w = 1.0;
    for (int k = 0; k < grid.dim(); ++k)
        w *= grid.axis_weight(k, j.lattice[k]);
    return w;
}

/// Visits every lattice point of the box [first[k], last[k]] in flat order.
template <class Visit>
void for_each_in_box(const TensorGrid& grid, const Lattice& first, const Lattice& last,
                     Visit&& visit) {
    for (int k = 0; k < grid.dim(); ++k)
        if (first[k] > last[k])
            return;
    Lattice l = first;
    const int d = grid.dim();
    for (;;) {
        visit(l);
        int k = d - 1;
        while (k >= 0) {
            if (l[k] < last[k]) {
                ++l[k];
                break;
            }
            l[k] = first[k];
            --k;
        }
        if (k < 0)
            return;
    }
}

/// Nodes x_j != x_i inside the influence ellipsoid of interior node i, in flat order.
inline std::vector<NodeIndex> neighbors_in_ellipsoid(const TensorGrid& grid, const NodeIndex& i,
                                                     const KernelParams& params,
                                                     const CoefficientField& field) {
    if (grid.role(i.flat) != NodeRole::interior)
        throw InvalidArgument("neighbor query requires an interior node");
    const Vec xi = grid.coord(i);
    const FrozenKernel kernel(params, field(xi));
    Lattice first{}, last{};
    for (int k = 0; k < grid.dim(); ++k) {
        const double e = kernel.extents()[k] * (1.0 + 1e-9);
        std::tie(first[k], last[k]) = grid.axis_window(k, xi[k], e);
    }
    std::vector<NodeIndex> out;
    for_each_in_box(grid, first, last, [&](const Lattice& l) {
        const std::size_t f = grid.flat_of(l);
        if (f != i.flat && kernel.contains(offset(xi, grid.coord(l))))
            out.push_back({f, l});
    });
    if (out.empty())
        throw NoNeighbors("node " + std::to_string(i.flat) +
                          " has no neighbors; delta is too small for the grid");
    return out;
}

inline double multilinear_interpolate(const TensorGrid& grid, std::span<const double> nodal_values,
                                      const Vec& y) {
    require_same_size(nodal_values.size(), grid.node_count(), "nodal values vs grid nodes");
    const int d = grid.dim();
    Lattice cell{};
    Vec t{};
    for (int k = 0; k < d; ++k) {
        const auto& a = grid.axis(k);
        if (!(y[k] >= a.front() && y[k] <= a.back()))
            throw OutOfDomain("coordinate " + std::to_string(y[k]) + " on axis " +
                              std::to_string(k) + " is outside the grid");
        auto it = std::upper_bound(a.begin(), a.end(), y[k]);
        std::size_t c = static_cast<std::size_t>(it - a.begin());
        c = c == 0 ? 0 : c - 1;
        c = std::min(c, a.size() - 2);
        cell[k] = c;
        t[k] = (y[k] - a[c]) / (a[c + 1] - a[c]);
    }
    double value = 0.0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
        double w = 1.0;
        Lattice l = cell;
        for (int k = 0; k < d; ++k) {
            const bool up = (corner >> k) & 1u;
            l[k] += up ? 1 : 0;
            w *= up ? t[k] : 1.0 - t[k];
        }
        if (w != 0.0)
            value += w * nodal_values[grid.flat_of(l)];
    }
    return value;
}

} // namespace nonlocal
