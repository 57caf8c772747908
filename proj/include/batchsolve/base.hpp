#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace batchsolve {

using size_type = std::size_t;
using index_type = std::int32_t;
using value_type = double;

/// Column index marking a padded ELL slot.
inline constexpr index_type ell_padding = -1;


/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

/// A zero or structurally missing diagonal met while building a Jacobi
/// preconditioner.
class SingularDiagonal : public Error {
public:
    SingularDiagonal(size_type entry, size_type row)
        : Error("singular diagonal in batch entry " + std::to_string(entry) +
                " at row " + std::to_string(row)),
          entry_{entry},
          row_{row}
    {}

    size_type entry() const noexcept { return entry_; }
    size_type row() const noexcept { return row_; }

private:
    size_type entry_;
    size_type row_;
};

class UnsupportedCombination : public Error {
public:
    using Error::Error;
};

class InvalidOverride : public Error {
public:
    using Error::Error;
};

/// Malformed text input. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, size_type line,
               const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : "") + ": " +
                what),
          line_{line}
    {}

    size_type line() const noexcept { return line_; }

private:
    size_type line_;
};


namespace detail {


inline void require_dims(bool condition, const std::string& what)
{
    if (!condition) {
        throw InvalidDimension(what);
    }
}


}  // namespace detail
}  // namespace batchsolve
