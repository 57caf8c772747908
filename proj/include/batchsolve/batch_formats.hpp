#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "batchsolve/base.hpp"

namespace batchsolve {


/**
 * A batch of dense vectors of equal length. Entry k occupies the contiguous
 * range [k * length, (k + 1) * length) of `values`.
 */
struct BatchMultiVector {
    size_type num_systems = 0;
    size_type length = 0;
    std::vector<value_type> values;

    static BatchMultiVector filled(size_type num_systems, size_type length,
                                   value_type value)
    {
        return {num_systems, length,
                std::vector<value_type>(num_systems * length, value)};
    }

    static BatchMultiVector zeros(size_type num_systems, size_type length)
    {
        return filled(num_systems, length, 0.0);
    }

    std::span<value_type> entry(size_type k)
    {
        return {values.data() + k * length, length};
    }

    std::span<const value_type> entry(size_type k) const
    {
        return {values.data() + k * length, length};
    }

    bool operator==(const BatchMultiVector&) const = default;
};


/**
 * Batched compressed sparse row matrix. The row pointers and column indexes
 * are stored once and shared by every entry; `values` holds one plane of
 * nnz values per entry, entry-major.
 */
struct BatchCsr {
    size_type num_systems = 0;
    size_type num_rows = 0;
    size_type num_cols = 0;
    std::vector<index_type> row_ptrs;
    std::vector<index_type> col_idxs;
    std::vector<value_type> values;

    size_type nnz() const { return col_idxs.size(); }

    std::span<value_type> entry_values(size_type k)
    {
        return {values.data() + k * nnz(), nnz()};
    }

    std::span<const value_type> entry_values(size_type k) const
    {
        return {values.data() + k * nnz(), nnz()};
    }

    bool operator==(const BatchCsr&) const = default;
};


/**
 * Batched ELLPACK matrix. Every row is padded to `nnz_per_row` slots. Both
 * the shared column indexes and each entry's value plane are slot-major:
 * slot s of row i lives at `s * num_rows + i`, so consecutive rows of the
 * same slot are adjacent. Padded slots carry `ell_padding` and value 0.
 */
struct BatchEll {
    size_type num_systems = 0;
    size_type num_rows = 0;
    size_type num_cols = 0;
    size_type nnz_per_row = 0;
    std::vector<index_type> col_idxs;
    std::vector<value_type> values;

    size_type slots_per_entry() const { return num_rows * nnz_per_row; }

    size_type slot_index(size_type row, size_type slot) const
    {
        return slot * num_rows + row;
    }

    std::span<value_type> entry_values(size_type k)
    {
        return {values.data() + k * slots_per_entry(), slots_per_entry()};
    }

    std::span<const value_type> entry_values(size_type k) const
    {
        return {values.data() + k * slots_per_entry(), slots_per_entry()};
    }

    bool operator==(const BatchEll&) const = default;
};


/// Batch of dense matrices, row-major within each entry plane.
struct BatchDense {
    size_type num_systems = 0;
    size_type num_rows = 0;
    size_type num_cols = 0;
    std::vector<value_type> values;

    static BatchDense zeros(size_type num_systems, size_type num_rows,
                            size_type num_cols)
    {
        return {num_systems, num_rows, num_cols,
                std::vector<value_type>(num_systems * num_rows * num_cols)};
    }

    value_type& at(size_type k, size_type row, size_type col)
    {
        return values[(k * num_rows + row) * num_cols + col];
    }

    value_type at(size_type k, size_type row, size_type col) const
    {
        return values[(k * num_rows + row) * num_cols + col];
    }

    std::span<const value_type> entry_values(size_type k) const
    {
        return {values.data() + k * num_rows * num_cols, num_rows * num_cols};
    }

    bool operator==(const BatchDense&) const = default;
};


// Conversions

/// Shared pattern is the union over all entries of positions with
/// |value| > tol; entries below tol at a union position keep their value as
/// an explicit stored entry.
inline BatchCsr csr_from_dense(const BatchDense& m, value_type tol = 0.0)
{
    BatchCsr out{m.num_systems, m.num_rows, m.num_cols, {}, {}, {}};
    out.row_ptrs.reserve(m.num_rows + 1);
    out.row_ptrs.push_back(0);
    for (size_type row = 0; row < m.num_rows; ++row) {
        for (size_type col = 0; col < m.num_cols; ++col) {
            bool any = false;
            for (size_type k = 0; k < m.num_systems && !any; ++k) {
                any = std::abs(m.at(k, row, col)) > tol;
            }
            if (any) {
                out.col_idxs.push_back(static_cast<index_type>(col));
            }
        }
        out.row_ptrs.push_back(static_cast<index_type>(out.col_idxs.size()));
    }
    const auto nnz = out.nnz();
    out.values.resize(m.num_systems * nnz);
    for (size_type k = 0; k < m.num_systems; ++k) {
        auto plane = out.entry_values(k);
        for (size_type row = 0; row < m.num_rows; ++row) {
            for (auto nz = out.row_ptrs[row]; nz < out.row_ptrs[row + 1];
                 ++nz) {
                plane[nz] = m.at(k, row, out.col_idxs[nz]);
            }
        }
    }
    return out;
}


inline BatchDense dense_from_csr(const BatchCsr& m)
{
    auto out = BatchDense::zeros(m.num_systems, m.num_rows, m.num_cols);
    for (size_type k = 0; k < m.num_systems; ++k) {
        const auto plane = m.entry_values(k);
        for (size_type row = 0; row < m.num_rows; ++row) {
            for (auto nz = m.row_ptrs[row]; nz < m.row_ptrs[row + 1]; ++nz) {
                out.at(k, row, m.col_idxs[nz]) = plane[nz];
            }
        }
    }
    return out;
}


inline BatchEll ell_from_csr(const BatchCsr& m)
{
    BatchEll out{m.num_systems, m.num_rows, m.num_cols, 0, {}, {}};
    for (size_type row = 0; row < m.num_rows; ++row) {
        out.nnz_per_row =
            std::max<size_type>(out.nnz_per_row,
                                m.row_ptrs[row + 1] - m.row_ptrs[row]);
    }
    out.col_idxs.assign(out.slots_per_entry(), ell_padding);
    out.values.assign(m.num_systems * out.slots_per_entry(), 0.0);
    for (size_type row = 0; row < m.num_rows; ++row) {
        const auto begin = m.row_ptrs[row];
        for (auto nz = begin; nz < m.row_ptrs[row + 1]; ++nz) {
            out.col_idxs[out.slot_index(row, nz - begin)] = m.col_idxs[nz];
        }
    }
    for (size_type k = 0; k < m.num_systems; ++k) {
        const auto src = m.entry_values(k);
        auto dst = out.entry_values(k);
        for (size_type row = 0; row < m.num_rows; ++row) {
            const auto begin = m.row_ptrs[row];
            for (auto nz = begin; nz < m.row_ptrs[row + 1]; ++nz) {
                dst[out.slot_index(row, nz - begin)] = src[nz];
            }
        }
    }
    return out;
}


/// Number of padded slots per entry plane.
inline size_type ell_padding_count(const BatchEll& m)
{
    return static_cast<size_type>(
        std::count(m.col_idxs.begin(), m.col_idxs.end(), ell_padding));
}


/// Count of pattern positions that hold a nonzero value in at least one
/// entry. Differs from nnz() when files store explicit zeros.
inline size_type structural_nonzeros(const BatchCsr& m)
{
    size_type count = 0;
    for (size_type nz = 0; nz < m.nnz(); ++nz) {
        for (size_type k = 0; k < m.num_systems; ++k) {
            if (m.entry_values(k)[nz] != 0.0) {
                ++count;
                break;
            }
        }
    }
    return count;
}


/// Repeat the entries of `m` cyclically until the batch holds
/// `num_systems` entries.
inline BatchCsr replicate_entries(const BatchCsr& m, size_type num_systems)
{
    detail::require_dims(m.num_systems > 0,
                         "cannot replicate an empty batch");
    BatchCsr out{num_systems, m.num_rows, m.num_cols, m.row_ptrs, m.col_idxs,
                 {}};
    out.values.reserve(num_systems * m.nnz());
    for (size_type k = 0; k < num_systems; ++k) {
        const auto src = m.entry_values(k % m.num_systems);
        out.values.insert(out.values.end(), src.begin(), src.end());
    }
    return out;
}


// Storage accounting

struct StorageReport {
    size_type value_elems = 0;
    size_type index_elems = 0;
    size_type pointer_elems = 0;

    bool operator==(const StorageReport&) const = default;
};

inline StorageReport storage_report(const BatchDense& m)
{
    return {m.num_systems * m.num_rows * m.num_cols, 0, 0};
}

inline StorageReport storage_report(const BatchCsr& m)
{
    return {m.num_systems * m.nnz(), m.nnz(), m.num_rows + 1};
}

inline StorageReport storage_report(const BatchEll& m)
{
    return {m.num_systems * m.num_rows * m.nnz_per_row,
            m.num_rows * m.nnz_per_row, 0};
}


// Validation

struct Violation {
    std::string invariant;
    std::string location;
};


namespace detail {


inline void check_length(std::vector<Violation>& out, size_type actual,
                         size_type expected, const char* what)
{
    if (actual != expected) {
        out.push_back({"values length", std::string(what) + " has " +
                                            std::to_string(actual) +
                                            " elements, expected " +
                                            std::to_string(expected)});
    }
}


}  // namespace detail


inline std::vector<Violation> validate(const BatchCsr& m)
{
    std::vector<Violation> out;
    bool pointers_ok = true;
    if (m.row_ptrs.size() != m.num_rows + 1) {
        out.push_back({"row_ptrs length",
                       "row_ptrs has " + std::to_string(m.row_ptrs.size()) +
                           " elements, expected " +
                           std::to_string(m.num_rows + 1)});
        pointers_ok = false;
    } else {
        if (m.row_ptrs.front() != 0) {
            out.push_back({"row_ptrs start", "row_ptrs[0] = " +
                                                 std::to_string(
                                                     m.row_ptrs.front())});
            pointers_ok = false;
        }
        for (size_type row = 0; row < m.num_rows; ++row) {
            if (m.row_ptrs[row + 1] < m.row_ptrs[row]) {
                out.push_back({"row_ptrs monotone",
                               "row_ptrs[" + std::to_string(row + 1) +
                                   "] < row_ptrs[" + std::to_string(row) +
                                   "]"});
                pointers_ok = false;
            }
        }
        if (static_cast<size_type>(m.row_ptrs.back()) != m.nnz()) {
            out.push_back({"row_ptrs end",
                           "row_ptrs[num_rows] = " +
                               std::to_string(m.row_ptrs.back()) +
                               ", nnz = " + std::to_string(m.nnz())});
            pointers_ok = false;
        }
    }
    for (size_type nz = 0; nz < m.nnz(); ++nz) {
        const auto col = m.col_idxs[nz];
        if (col < 0 || static_cast<size_type>(col) >= m.num_cols) {
            out.push_back({"column bound", "col_idxs[" + std::to_string(nz) +
                                               "] = " + std::to_string(col)});
        }
    }
    // Row ordering is only meaningful once the row ranges are sound.
    if (pointers_ok) {
        for (size_type row = 0; row < m.num_rows; ++row) {
            for (auto nz = m.row_ptrs[row] + 1; nz < m.row_ptrs[row + 1];
                 ++nz) {
                if (m.col_idxs[nz] <= m.col_idxs[nz - 1]) {
                    out.push_back({"column order",
                                   "row " + std::to_string(row) +
                                       " at col_idxs[" + std::to_string(nz) +
                                       "]"});
                }
            }
        }
    }
    detail::check_length(out, m.values.size(), m.num_systems * m.nnz(),
                         "values");
    return out;
}


inline std::vector<Violation> validate(const BatchEll& m)
{
    std::vector<Violation> out;
    if (m.col_idxs.size() != m.slots_per_entry()) {
        out.push_back({"index length",
                       "col_idxs has " + std::to_string(m.col_idxs.size()) +
                           " elements, expected " +
                           std::to_string(m.slots_per_entry())});
        return out;
    }
    detail::check_length(out, m.values.size(),
                         m.num_systems * m.slots_per_entry(), "values");
    const bool values_ok = out.empty();
    for (size_type slot = 0; slot < m.nnz_per_row; ++slot) {
        for (size_type row = 0; row < m.num_rows; ++row) {
            const auto idx = m.slot_index(row, slot);
            const auto col = m.col_idxs[idx];
            const auto where = "row " + std::to_string(row) + " slot " +
                               std::to_string(slot);
            if (col == ell_padding) {
                if (!values_ok) {
                    continue;
                }
                for (size_type k = 0; k < m.num_systems; ++k) {
                    if (m.entry_values(k)[idx] != 0.0) {
                        out.push_back({"padding value",
                                       where + " entry " + std::to_string(k)});
                    }
                }
            } else if (col < 0 || static_cast<size_type>(col) >= m.num_cols) {
                out.push_back({"column bound", where + " col " +
                                                   std::to_string(col)});
            }
        }
    }
    return out;
}


inline std::vector<Violation> validate(const BatchDense& m)
{
    std::vector<Violation> out;
    detail::check_length(out, m.values.size(),
                         m.num_systems * m.num_rows * m.num_cols, "values");
    return out;
}


inline std::vector<Violation> validate(const BatchMultiVector& v)
{
    std::vector<Violation> out;
    detail::check_length(out, v.values.size(), v.num_systems * v.length,
                         "values");
    return out;
}


// Synthetic 3-point stencil batches

/**
 * Diagonal shift of entry k, deterministic in (0, 0.5] for a given seed.
 * Only the raw 64-bit engine output is used, so the value does not depend
 * on the standard library's distribution implementations.
 */
inline value_type stencil_shift(std::uint64_t seed, size_type entry)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(entry),
                      static_cast<std::uint32_t>(
                          static_cast<std::uint64_t>(entry) >> 32)};
    std::mt19937_64 engine(seq);
    const auto unit = static_cast<value_type>(engine() >> 11) * 0x1.0p-53;
    return 0.5 * (1.0 - unit);
}


/**
 * Tridiagonal [-1, 2(1 + shift_k), -1] batch, one entry per element of
 * `shifts`. Every entry is SPD for shift_k >= 0.
 */
inline BatchCsr generate_stencil_batch(size_type num_rows,
                                       std::span<const value_type> shifts)
{
    detail::require_dims(num_rows >= 2,
                         "stencil needs at least 2 rows, got " +
                             std::to_string(num_rows));
    detail::require_dims(!shifts.empty(), "stencil batch needs >= 1 entry");
    const auto nnz = 3 * num_rows - 2;
    BatchCsr out{shifts.size(), num_rows, num_rows, {}, {}, {}};
    out.row_ptrs.reserve(num_rows + 1);
    out.col_idxs.reserve(nnz);
    out.row_ptrs.push_back(0);
    for (size_type row = 0; row < num_rows; ++row) {
        const auto first = row == 0 ? row : row - 1;
        const auto last = std::min(row + 1, num_rows - 1);
        for (auto col = first; col <= last; ++col) {
            out.col_idxs.push_back(static_cast<index_type>(col));
        }
        out.row_ptrs.push_back(static_cast<index_type>(out.col_idxs.size()));
    }
    out.values.resize(shifts.size() * nnz);
    for (size_type k = 0; k < shifts.size(); ++k) {
        auto plane = out.entry_values(k);
        const auto diag = 2.0 * (1.0 + shifts[k]);
        for (size_type row = 0; row < num_rows; ++row) {
            for (auto nz = out.row_ptrs[row]; nz < out.row_ptrs[row + 1];
                 ++nz) {
                plane[nz] = static_cast<size_type>(out.col_idxs[nz]) == row
                                ? diag
                                : -1.0;
            }
        }
    }
    return out;
}


inline BatchCsr generate_stencil_batch(size_type num_systems,
                                       size_type num_rows, std::uint64_t seed)
{
    detail::require_dims(num_systems >= 1, "stencil batch needs >= 1 entry");
    std::vector<value_type> shifts(num_systems);
    for (size_type k = 0; k < num_systems; ++k) {
        shifts[k] = stencil_shift(seed, k);
    }
    return generate_stencil_batch(num_rows, shifts);
}


}  // namespace batchsolve
