#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "batchsolve/batch_blas.hpp"
#include "batchsolve/batch_formats.hpp"

namespace batchsolve {


enum class PreconditionerKind { Identity, ScalarJacobi };


/// No-op preconditioner, z = r.
struct IdentityPreconditioner {
    static constexpr PreconditionerKind kind = PreconditionerKind::Identity;

    size_type workspace_elems() const { return 0; }

    void apply_entry(size_type, std::span<const value_type> r,
                     std::span<value_type> z) const
    {
        kernels::copy(r, z);
    }
};


/**
 * Scalar Jacobi preconditioner, M_k = diag(A_k)^-1. The inverse diagonal is
 * computed once at generation and reused by every application.
 */
struct BatchJacobi {
    static constexpr PreconditionerKind kind = PreconditionerKind::ScalarJacobi;

    size_type num_systems = 0;
    size_type num_rows = 0;
    std::vector<value_type> inv_diag;

    std::span<const value_type> entry(size_type k) const
    {
        return {inv_diag.data() + k * num_rows, num_rows};
    }

    size_type workspace_elems() const { return num_rows; }

    void apply_entry(size_type k, std::span<const value_type> r,
                     std::span<value_type> z) const
    {
        const auto d = entry(k);
        for (size_type i = 0; i < r.size(); ++i) {
            z[i] = d[i] * r[i];
        }
    }
};


// Diagonal lookup; nullopt when the position is outside the pattern.

inline std::optional<value_type> diagonal_value(const BatchCsr& a,
                                                size_type k, size_type row)
{
    const auto vals = a.entry_values(k);
    for (auto nz = a.row_ptrs[row]; nz < a.row_ptrs[row + 1]; ++nz) {
        if (static_cast<size_type>(a.col_idxs[nz]) == row) {
            return vals[nz];
        }
    }
    return std::nullopt;
}

inline std::optional<value_type> diagonal_value(const BatchEll& a,
                                                size_type k, size_type row)
{
    const auto vals = a.entry_values(k);
    for (size_type slot = 0; slot < a.nnz_per_row; ++slot) {
        const auto idx = a.slot_index(row, slot);
        if (a.col_idxs[idx] == static_cast<index_type>(row)) {
            return vals[idx];
        }
    }
    return std::nullopt;
}

inline std::optional<value_type> diagonal_value(const BatchDense& a,
                                                size_type k, size_type row)
{
    return a.at(k, row, row);
}


template <typename M>
BatchJacobi generate_jacobi(const M& a)
{
    detail::require_dims(a.num_rows == a.num_cols,
                         "Jacobi preconditioner needs a square matrix, got " +
                             std::to_string(a.num_rows) + " x " +
                             std::to_string(a.num_cols));
    BatchJacobi out{a.num_systems, a.num_rows,
                    std::vector<value_type>(a.num_systems * a.num_rows)};
    for (size_type k = 0; k < a.num_systems; ++k) {
        for (size_type row = 0; row < a.num_rows; ++row) {
            const auto diag = diagonal_value(a, k, row);
            if (!diag || *diag == 0.0) {
                throw SingularDiagonal(k, row);
            }
            const auto inv = 1.0 / *diag;
            if (!std::isfinite(inv)) {
                throw SingularDiagonal(k, row);
            }
            out.inv_diag[k * a.num_rows + row] = inv;
        }
    }
    return out;
}


template <typename P>
BatchMultiVector apply(const P& precond, const BatchMultiVector& r)
{
    if constexpr (requires { precond.num_rows; }) {
        detail::require_dims(precond.num_systems == r.num_systems &&
                                 precond.num_rows == r.length,
                             "preconditioner shape does not match vector");
    }
    auto z = BatchMultiVector::zeros(r.num_systems, r.length);
    for (size_type k = 0; k < r.num_systems; ++k) {
        precond.apply_entry(k, r.entry(k), z.entry(k));
    }
    return z;
}


}  // namespace batchsolve
