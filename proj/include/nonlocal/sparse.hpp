#pragma once

#include "nonlocal/errors.hpp"
#include "nonlocal/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace nonlocal {

/// Compressed sparse row matrix with strictly increasing columns per row.
class SparseMatrix {
public:
    using Index = std::uint32_t;

    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    SparseMatrix() = default;

    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
                 std::vector<Index> columns, std::vector<double> values)
        : rows_(rows), cols_(cols), offsets_(std::move(offsets)), columns_(std::move(columns)),
          values_(std::move(values)) {
        if (cols_ > std::numeric_limits<Index>::max())
            throw InvalidArgument("too many columns for 32-bit column indices");
        require_same_size(offsets_.size(), rows_ + 1, "row offsets vs rows + 1");
        require_same_size(columns_.size(), values_.size(), "column indices vs values");
        if (offsets_.front() != 0 || offsets_.back() != columns_.size())
            throw InvalidArgument("row offsets must start at 0 and end at the nonzero count");
        for (std::size_t i = 0; i < rows_; ++i) {
            if (offsets_[i + 1] < offsets_[i])
                throw InvalidArgument("row offsets must be monotone");
            for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
                if (columns_[p] >= cols_)
                    throw InvalidArgument("column index out of range");
                if (p > offsets_[i] && columns_[p] <= columns_[p - 1])
                    throw InvalidArgument("column indices must increase within a row");
            }
        }
    }

    /// Duplicates are summed; explicit zeros are kept.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<Triplet> triplets) {
        for (const auto& t : triplets)
            if (t.row >= rows || t.col >= cols)
                throw InvalidArgument("triplet index out of range");
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        std::vector<std::size_t> offsets(rows + 1, 0);
        std::vector<Index> columns;
        std::vector<double> values;
        columns.reserve(triplets.size());
        values.reserve(triplets.size());
        for (std::size_t p = 0; p < triplets.size(); ++p) {
            const auto& t = triplets[p];
            if (p > 0 && triplets[p - 1].row == t.row && triplets[p - 1].col == t.col) {
                values.back() += t.value;
                continue;
            }
            columns.push_back(static_cast<Index>(t.col));
            values.push_back(t.value);
            ++offsets[t.row + 1];
        }
        for (std::size_t i = 0; i < rows; ++i)
            offsets[i + 1] += offsets[i];
        return SparseMatrix(rows, cols, std::move(offsets), std::move(columns), std::move(values));
    }

    static SparseMatrix identity(std::size_t n) {
        std::vector<std::size_t> offsets(n + 1);
        std::vector<Index> columns(n);
        for (std::size_t i = 0; i < n; ++i) {
            offsets[i + 1] = i + 1;
            columns[i] = static_cast<Index>(i);
        }
        return SparseMatrix(n, n, std::move(offsets), std::move(columns), std::vector<double>(n, 1.0));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    /// Square dimension; throws for rectangular matrices.
    std::size_t size() const {
        if (rows_ != cols_)
            throw DimensionMismatch("matrix is not square");
        return rows_;
    }
    std::size_t nonzeros() const noexcept { return values_.size(); }

    std::span<const Index> row_columns(std::size_t i) const {
        return {columns_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    std::span<const double> row_values(std::size_t i) const {
        return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    double at(std::size_t i, std::size_t j) const {
        const auto cols = row_columns(i);
        const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(j));
        return it != cols.end() && *it == j ? row_values(i)[it - cols.begin()] : 0.0;
    }

    /// y = A x.
    void apply(std::span<const double> x, std::span<double> y) const {
        require_same_size(x.size(), cols_, "vector length vs matrix columns");
        require_same_size(y.size(), rows_, "output length vs matrix rows");
        parallel_for_chunks(rows_, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                double s = 0.0;
                for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
                    s += values_[p] * x[columns_[p]];
                y[i] = s;
            }
        });
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(std::min(rows_, cols_), 0.0);
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = at(i, i);
        return d;
    }

    double norm_inf() const {
        double n = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (double v : row_values(i))
                s += std::abs(v);
            n = std::max(n, s);
        }
        return n;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<Index> columns_;
    std::vector<double> values_;
};

inline std::vector<double> matvec(const SparseMatrix& a, std::span<const double> v) {
    std::vector<double> y(a.rows());
    a.apply(v, y);
    return y;
}

/// One "row col value" line per stored entry (0-based), 17 significant digits.
inline void write_triplets(std::ostream& out, const SparseMatrix& a) {
    char buf[96];
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto cols = a.row_columns(i);
        const auto vals = a.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            std::snprintf(buf, sizeof buf, "%zu %u %.17g\n", i, static_cast<unsigned>(cols[p]),
                          vals[p]);
            out << buf;
        }
    }
}

} // namespace nonlocal
