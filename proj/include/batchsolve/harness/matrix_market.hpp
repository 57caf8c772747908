#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "batchsolve/base.hpp"
#include "batchsolve/batch_formats.hpp"

namespace batchsolve::harness {


/// Files of one batch do not share a sparsity pattern. `row()`/`col()` are
/// 0-based and absent when the dimensions already differ.
class PatternMismatch : public Error {
public:
    PatternMismatch(const std::string& what, std::string file,
                    std::optional<size_type> row, std::optional<size_type> col)
        : Error(what), file_{std::move(file)}, row_{row}, col_{col}
    {}

    const std::string& file() const noexcept { return file_; }
    std::optional<size_type> row() const noexcept { return row_; }
    std::optional<size_type> col() const noexcept { return col_; }

private:
    std::string file_;
    std::optional<size_type> row_;
    std::optional<size_type> col_;
};


namespace detail {


inline std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}


inline bool blank(const std::string& line)
{
    return line.find_first_not_of(" \t\r") == std::string::npos;
}


}  // namespace detail


/**
 * Reads a Matrix Market coordinate file with a real field and general or
 * symmetric symmetry into a single-entry BatchCsr. Symmetric files must
 * list the lower triangle only and are expanded to full storage. Explicit
 * zeros are kept as stored entries.
 */
inline BatchCsr read_matrix_market(std::istream& in,
                                   const std::string& source = "<stream>")
{
    std::string line;
    size_type line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError(source, 1, "empty file");
    }
    ++line_no;
    {
        std::istringstream header(line);
        std::string banner, object, format, field, symmetry;
        header >> banner >> object >> format >> field >> symmetry;
        if (banner != "%%MatrixMarket") {
            throw ParseError(source, line_no,
                             "missing %%MatrixMarket banner");
        }
        if (detail::lower(object) != "matrix" ||
            detail::lower(format) != "coordinate") {
            throw ParseError(source, line_no,
                             "only 'matrix coordinate' files are supported");
        }
        if (detail::lower(field) != "real") {
            throw ParseError(source, line_no,
                             "unsupported field '" + field +
                                 "', expected real");
        }
        symmetry = detail::lower(symmetry);
        if (symmetry != "general" && symmetry != "symmetric") {
            throw ParseError(source, line_no,
                             "unsupported symmetry '" + symmetry + "'");
        }
        line = symmetry;
    }
    const bool symmetric = line == "symmetric";

    auto next_content_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::blank(line) && line.front() != '%') {
                return true;
            }
        }
        return false;
    };

    if (!next_content_line()) {
        throw ParseError(source, line_no + 1, "missing size line");
    }
    long long rows = 0, cols = 0, entries = 0;
    {
        std::istringstream size_line(line);
        std::string extra;
        if (!(size_line >> rows >> cols >> entries) || (size_line >> extra) ||
            rows <= 0 || cols <= 0 || entries < 0) {
            throw ParseError(source, line_no, "malformed size line");
        }
    }

    std::vector<std::tuple<size_type, size_type, value_type>> triplets;
    triplets.reserve(static_cast<size_type>(symmetric ? 2 * entries
                                                      : entries));
    for (long long e = 0; e < entries; ++e) {
        if (!next_content_line()) {
            throw ParseError(source, line_no + 1,
                             "expected " + std::to_string(entries) +
                                 " entries, found " + std::to_string(e));
        }
        std::istringstream entry_line(line);
        long long i = 0, j = 0;
        std::string value_text, extra;
        if (!(entry_line >> i >> j >> value_text) || (entry_line >> extra)) {
            throw ParseError(source, line_no, "malformed entry line");
        }
        value_type value = 0.0;
        try {
            size_type pos = 0;
            value = std::stod(value_text, &pos);
            if (pos != value_text.size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception&) {
            throw ParseError(source, line_no,
                             "invalid value '" + value_text + "'");
        }
        if (i < 1 || i > rows || j < 1 || j > cols) {
            throw ParseError(source, line_no,
                             "index (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ") out of range");
        }
        if (symmetric && j > i) {
            throw ParseError(source, line_no,
                             "symmetric file lists an upper-triangle entry");
        }
        const auto row = static_cast<size_type>(i - 1);
        const auto col = static_cast<size_type>(j - 1);
        triplets.emplace_back(row, col, value);
        if (symmetric && row != col) {
            triplets.emplace_back(col, row, value);
        }
    }
    if (next_content_line()) {
        throw ParseError(source, line_no, "unexpected data after entries");
    }

    std::stable_sort(triplets.begin(), triplets.end(),
                     [](const auto& a, const auto& b) {
                         return std::tie(std::get<0>(a), std::get<1>(a)) <
                                std::tie(std::get<0>(b), std::get<1>(b));
                     });
    BatchCsr out{1, static_cast<size_type>(rows), static_cast<size_type>(cols),
                 std::vector<index_type>(static_cast<size_type>(rows) + 1, 0),
                 {}, {}};
    out.col_idxs.reserve(triplets.size());
    out.values.reserve(triplets.size());
    for (size_type n = 0; n < triplets.size(); ++n) {
        const auto [row, col, value] = triplets[n];
        if (n > 0 && std::get<0>(triplets[n - 1]) == row &&
            std::get<1>(triplets[n - 1]) == col) {
            throw ParseError(source, 0,
                             "duplicate entry (" + std::to_string(row + 1) +
                                 ", " + std::to_string(col + 1) + ")");
        }
        out.col_idxs.push_back(static_cast<index_type>(col));
        out.values.push_back(value);
        ++out.row_ptrs[row + 1];
    }
    for (size_type row = 0; row < out.num_rows; ++row) {
        out.row_ptrs[row + 1] += out.row_ptrs[row];
    }
    return out;
}


inline BatchCsr read_matrix_market(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path.string(), 0, "cannot open file");
    }
    return read_matrix_market(in, path.string());
}


/// Writes entry `k` as a general coordinate file. Values use 17
/// significant digits, so reading the file back is bit-exact.
inline void write_matrix_market(std::ostream& out, const BatchCsr& m,
                                size_type k = 0)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.num_rows << ' ' << m.num_cols << ' ' << m.nnz() << '\n';
    const auto vals = m.entry_values(k);
    char buffer[64];
    for (size_type row = 0; row < m.num_rows; ++row) {
        for (auto nz = m.row_ptrs[row]; nz < m.row_ptrs[row + 1]; ++nz) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", vals[nz]);
            out << row + 1 << ' ' << m.col_idxs[nz] + 1 << ' ' << buffer
                << '\n';
        }
    }
}


inline void write_matrix_market(const std::filesystem::path& path,
                                const BatchCsr& m, size_type k = 0)
{
    std::ofstream out(path);
    if (!out) {
        throw ParseError(path.string(), 0, "cannot open file for writing");
    }
    write_matrix_market(out, m, k);
}


/// Throws PatternMismatch at the first row-major position present in one
/// pattern but not the other.
inline void require_same_pattern(const BatchCsr& reference,
                                 const BatchCsr& other,
                                 const std::string& reference_name,
                                 const std::string& other_name)
{
    if (reference.num_rows != other.num_rows ||
        reference.num_cols != other.num_cols) {
        throw PatternMismatch(
            "pattern mismatch: " + other_name + " is " +
                std::to_string(other.num_rows) + " x " +
                std::to_string(other.num_cols) + " but " + reference_name +
                " is " + std::to_string(reference.num_rows) + " x " +
                std::to_string(reference.num_cols),
            other_name, std::nullopt, std::nullopt);
    }
    for (size_type row = 0; row < reference.num_rows; ++row) {
        auto a = reference.row_ptrs[row];
        const auto a_end = reference.row_ptrs[row + 1];
        auto b = other.row_ptrs[row];
        const auto b_end = other.row_ptrs[row + 1];
        for (; a < a_end || b < b_end; ++a, ++b) {
            const bool a_has = a < a_end;
            const bool b_has = b < b_end;
            if (a_has && b_has &&
                reference.col_idxs[a] == other.col_idxs[b]) {
                continue;
            }
            index_type col = 0;
            if (a_has && b_has) {
                col = std::min(reference.col_idxs[a], other.col_idxs[b]);
            } else {
                col = a_has ? reference.col_idxs[a] : other.col_idxs[b];
            }
            const bool in_reference =
                std::binary_search(reference.col_idxs.begin() +
                                       reference.row_ptrs[row],
                                   reference.col_idxs.begin() + a_end, col);
            throw PatternMismatch(
                "pattern mismatch between " + reference_name + " and " +
                    other_name + " at (" + std::to_string(row + 1) + ", " +
                    std::to_string(col + 1) + "): present only in " +
                    (in_reference ? reference_name : other_name),
                other_name, row, static_cast<size_type>(col));
        }
    }
}


/**
 * Loads files that share one sparsity pattern into a batch of
 * `replicate * paths.size()` entries; entry k takes its values from
 * `paths[k % paths.size()]`.
 */
inline BatchCsr load_matrix_market_batch(
    const std::vector<std::filesystem::path>& paths, size_type replicate = 1)
{
    batchsolve::detail::require_dims(!paths.empty(),
                                     "no Matrix Market files given");
    batchsolve::detail::require_dims(replicate >= 1, "replicate must be >= 1");
    auto unique = read_matrix_market(paths.front());
    unique.values.reserve(paths.size() * unique.nnz());
    for (size_type f = 1; f < paths.size(); ++f) {
        const auto next = read_matrix_market(paths[f]);
        require_same_pattern(unique, next, paths.front().string(),
                             paths[f].string());
        unique.values.insert(unique.values.end(), next.values.begin(),
                             next.values.end());
        ++unique.num_systems;
    }
    return replicate_entries(unique, unique.num_systems * replicate);
}


/// `*.mtx` files of a directory in lexicographic order.
inline std::vector<std::filesystem::path> list_matrix_market_dir(
    const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw ParseError(dir.string(), 0, "not a directory");
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& item : std::filesystem::directory_iterator(dir)) {
        if (item.is_regular_file() && item.path().extension() == ".mtx") {
            paths.push_back(item.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}


}  // namespace batchsolve::harness
