#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "batchsolve/batch_formats.hpp"
#include "batchsolve/parallel.hpp"

namespace batchsolve {


/// One scalar per batch entry.
struct BatchScalar {
    size_type num_systems = 0;
    std::vector<value_type> values;

    bool operator==(const BatchScalar&) const = default;
};


// Single-entry kernels. Every reduction runs in ascending index order so the
// result of an entry never depends on how the batch is partitioned.
namespace kernels {


inline void spmv_entry(const BatchCsr& a, size_type k,
                       std::span<const value_type> x, std::span<value_type> y,
                       size_type = 0)
{
    const auto vals = a.entry_values(k);
    for (size_type row = 0; row < a.num_rows; ++row) {
        value_type sum = 0.0;
        for (auto nz = a.row_ptrs[row]; nz < a.row_ptrs[row + 1]; ++nz) {
            sum += vals[nz] * x[a.col_idxs[nz]];
        }
        y[row] = sum;
    }
}


/// Rows are processed in chunks of `row_chunk` (0 = all rows), slot by
/// slot within a chunk. Each row still accumulates its slots in ascending
/// order, so the chunk size never changes the result.
inline void spmv_entry(const BatchEll& a, size_type k,
                       std::span<const value_type> x, std::span<value_type> y,
                       size_type row_chunk = 0)
{
    const auto vals = a.entry_values(k);
    const auto chunk = row_chunk == 0 ? a.num_rows : row_chunk;
    for (size_type first = 0; first < a.num_rows; first += chunk) {
        const auto last = std::min(a.num_rows, first + chunk);
        for (auto row = first; row < last; ++row) {
            y[row] = 0.0;
        }
        for (size_type slot = 0; slot < a.nnz_per_row; ++slot) {
            for (auto row = first; row < last; ++row) {
                const auto idx = a.slot_index(row, slot);
                const auto col = a.col_idxs[idx];
                if (col != ell_padding) {
                    y[row] += vals[idx] * x[col];
                }
            }
        }
    }
}


inline void spmv_entry(const BatchDense& a, size_type k,
                       std::span<const value_type> x, std::span<value_type> y,
                       size_type = 0)
{
    const auto vals = a.entry_values(k);
    for (size_type row = 0; row < a.num_rows; ++row) {
        value_type sum = 0.0;
        const auto* a_row = vals.data() + row * a.num_cols;
        for (size_type col = 0; col < a.num_cols; ++col) {
            sum += a_row[col] * x[col];
        }
        y[row] = sum;
    }
}


inline value_type dot(std::span<const value_type> x,
                      std::span<const value_type> y)
{
    value_type sum = 0.0;
    for (size_type i = 0; i < x.size(); ++i) {
        sum += x[i] * y[i];
    }
    return sum;
}


inline value_type norm2(std::span<const value_type> x)
{
    return std::sqrt(dot(x, x));
}


/// y <- y + alpha * x
inline void axpy(value_type alpha, std::span<const value_type> x,
                 std::span<value_type> y)
{
    for (size_type i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}


/// y <- x + beta * y
inline void xpby(std::span<const value_type> x, value_type beta,
                 std::span<value_type> y)
{
    for (size_type i = 0; i < x.size(); ++i) {
        y[i] = x[i] + beta * y[i];
    }
}


inline void scale(value_type alpha, std::span<value_type> x)
{
    for (auto& v : x) {
        v *= alpha;
    }
}


inline void copy(std::span<const value_type> x, std::span<value_type> y)
{
    std::copy(x.begin(), x.end(), y.begin());
}


}  // namespace kernels


/// A batch matrix format with a single-entry SpMV kernel.
template <typename M>
concept BatchMatrix = requires(const M& m, size_type k,
                               std::span<const value_type> x,
                               std::span<value_type> y) {
    { m.num_systems } -> std::convertible_to<size_type>;
    { m.num_rows } -> std::convertible_to<size_type>;
    { m.num_cols } -> std::convertible_to<size_type>;
    kernels::spmv_entry(m, k, x, y, size_type{});
};


namespace detail {


inline void require_same_shape(const BatchMultiVector& x,
                               const BatchMultiVector& y)
{
    require_dims(x.num_systems == y.num_systems && x.length == y.length,
                 "batch vector shape mismatch: (" +
                     std::to_string(x.num_systems) + " x " +
                     std::to_string(x.length) + ") vs (" +
                     std::to_string(y.num_systems) + " x " +
                     std::to_string(y.length) + ")");
}


inline void require_same_count(const BatchScalar& alpha,
                               const BatchMultiVector& x)
{
    require_dims(alpha.num_systems == x.num_systems,
                 "batch scalar has " + std::to_string(alpha.num_systems) +
                     " entries, vector has " + std::to_string(x.num_systems));
}


}  // namespace detail


template <BatchMatrix M>
BatchMultiVector spmv(const M& a, const BatchMultiVector& x,
                      unsigned num_workers = 1)
{
    detail::require_dims(a.num_cols == x.length,
                         "spmv: matrix has " + std::to_string(a.num_cols) +
                             " columns, vector length " +
                             std::to_string(x.length));
    detail::require_dims(a.num_systems == x.num_systems,
                         "spmv: matrix batch " +
                             std::to_string(a.num_systems) +
                             " vs vector batch " +
                             std::to_string(x.num_systems));
    auto y = BatchMultiVector::zeros(a.num_systems, a.num_rows);
    parallel_for_blocks(a.num_systems, num_workers,
                        [&](size_type begin, size_type end) {
                            for (auto k = begin; k < end; ++k) {
                                kernels::spmv_entry(a, k, x.entry(k),
                                                    y.entry(k));
                            }
                        });
    return y;
}


inline BatchScalar dot(const BatchMultiVector& x, const BatchMultiVector& y)
{
    detail::require_same_shape(x, y);
    BatchScalar out{x.num_systems, std::vector<value_type>(x.num_systems)};
    for (size_type k = 0; k < x.num_systems; ++k) {
        out.values[k] = kernels::dot(x.entry(k), y.entry(k));
    }
    return out;
}


inline BatchScalar norm2(const BatchMultiVector& x)
{
    BatchScalar out{x.num_systems, std::vector<value_type>(x.num_systems)};
    for (size_type k = 0; k < x.num_systems; ++k) {
        out.values[k] = kernels::norm2(x.entry(k));
    }
    return out;
}


/// Returns y + alpha_k * x per entry.
inline BatchMultiVector axpy(const BatchScalar& alpha,
                             const BatchMultiVector& x, BatchMultiVector y)
{
    detail::require_same_shape(x, y);
    detail::require_same_count(alpha, x);
    for (size_type k = 0; k < x.num_systems; ++k) {
        kernels::axpy(alpha.values[k], x.entry(k), y.entry(k));
    }
    return y;
}


inline BatchMultiVector scale(const BatchScalar& alpha, BatchMultiVector x)
{
    detail::require_same_count(alpha, x);
    for (size_type k = 0; k < x.num_systems; ++k) {
        kernels::scale(alpha.values[k], x.entry(k));
    }
    return x;
}


inline BatchMultiVector copy(const BatchMultiVector& x) { return x; }


}  // namespace batchsolve
