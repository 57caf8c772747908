#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "batchsolve/batch_formats.hpp"
#include "batchsolve/dispatch_tuning.hpp"
#include "batchsolve/solvers.hpp"

namespace batchsolve::harness {


// Names used on the command line and in CSV output.

inline std::string to_string(SolverKind s)
{
    return s == SolverKind::Cg ? "cg" : "bicgstab";
}

inline std::string to_string(MatrixFormat f)
{
    switch (f) {
    case MatrixFormat::Csr:
        return "csr";
    case MatrixFormat::Ell:
        return "ell";
    case MatrixFormat::Dense:
        return "dense";
    }
    return "?";
}

inline std::string to_string(PreconditionerKind p)
{
    return p == PreconditionerKind::Identity ? "none" : "jacobi";
}

inline std::string to_string(ToleranceMode m)
{
    return m == ToleranceMode::Absolute ? "abs" : "rel";
}


/// One row of benchmark output; the CSV columns follow field order.
struct BenchmarkRecord {
    std::string solver;
    std::string format;
    std::string precond;
    size_type num_systems = 0;
    size_type num_rows = 0;
    size_type nnz = 0;
    double tol = 0.0;
    std::string tol_mode;
    double wall_time_seconds = 0.0;
    double wall_time_median_seconds = 0.0;
    size_type total_iterations = 0;
    size_type max_iterations = 0;
    size_type converged_count = 0;
    size_type total_spmv = 0;
    std::string launch_plan;
    std::string error;

    bool operator==(const BenchmarkRecord&) const = default;
};


/// A sweep point. `load` builds the batch; it runs outside the timed
/// region and may throw, which is reported in the record's error column.
struct BenchmarkPoint {
    std::function<BatchCsr()> load;
};

/// `unique` stencil entries repeated `replicate` times. Shifts come from
/// `seed` unless `fixed_shift` is set, which gives every entry that shift
/// (0 yields the plain 1-D Laplacian).
inline BenchmarkPoint stencil_point(size_type num_rows, size_type unique,
                                    size_type replicate = 1,
                                    std::uint64_t seed = 0,
                                    std::optional<double> fixed_shift = {})
{
    return {[=] {
        auto m = fixed_shift
                     ? generate_stencil_batch(
                           num_rows, std::vector<double>(unique, *fixed_shift))
                     : generate_stencil_batch(unique, num_rows, seed);
        return replicate == 1 ? m
                              : replicate_entries(m, unique * replicate);
    }};
}

inline BenchmarkPoint matrix_point(BatchCsr m)
{
    return {[m = std::move(m)] { return m; }};
}


struct BenchmarkSpec {
    SolveConfig solve;
    MatrixFormat format = MatrixFormat::Csr;
    size_type repetitions = 5;
    DeviceProfile device = default_device_profile();
    std::vector<BenchmarkPoint> points;
};


/**
 * Runs every sweep point in order: one untimed warm-up solve, then
 * `repetitions` timed solves recording the minimum and median wall time.
 * The right-hand side is all ones and the initial guess zero. A failing
 * point yields a record with `error` set; the sweep continues.
 */
inline std::vector<BenchmarkRecord> run_benchmark(const BenchmarkSpec& spec)
{
    using clock = std::chrono::steady_clock;
    std::vector<BenchmarkRecord> records;
    for (const auto& point : spec.points) {
        BenchmarkRecord rec;
        rec.solver = to_string(spec.solve.solver);
        rec.format = to_string(spec.format);
        rec.precond = to_string(spec.solve.precond);
        rec.tol = spec.solve.tol;
        rec.tol_mode = to_string(spec.solve.tol_mode);
        try {
            const auto csr = point.load();
            rec.num_systems = csr.num_systems;
            rec.num_rows = csr.num_rows;
            rec.nnz = csr.nnz();
            const auto matrix = convert(csr, spec.format);
            const auto b =
                BatchMultiVector::filled(csr.num_systems, csr.num_rows, 1.0);
            const auto x0 = BatchMultiVector::zeros(csr.num_systems,
                                                    csr.num_rows);
            auto result = solve(matrix, b, x0, spec.solve, spec.device);
            std::vector<double> times;
            for (size_type rep = 0; rep < spec.repetitions; ++rep) {
                const auto start = clock::now();
                result = solve(matrix, b, x0, spec.solve, spec.device);
                times.push_back(
                    std::chrono::duration<double>(clock::now() - start)
                        .count());
            }
            if (!times.empty()) {
                std::sort(times.begin(), times.end());
                rec.wall_time_seconds = times.front();
                const auto mid = times.size() / 2;
                rec.wall_time_median_seconds =
                    times.size() % 2 ? times[mid]
                                     : 0.5 * (times[mid - 1] + times[mid]);
            }
            rec.total_iterations = result.total_iterations();
            rec.max_iterations = result.max_iterations();
            rec.converged_count = result.converged_count();
            rec.total_spmv = result.total_spmv();
            rec.launch_plan = result.launch_plan.summary();
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        records.push_back(std::move(rec));
    }
    return records;
}


inline constexpr std::string_view csv_header =
    "solver,format,precond,num_systems,num_rows,nnz,tol,tol_mode,"
    "wall_time_seconds,wall_time_median_seconds,total_iterations,"
    "max_iterations,converged_count,total_spmv,launch_plan,error";


namespace detail {


inline std::string csv_field(std::string_view text)
{
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(text);
    }
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_number(double v)
{
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}


}  // namespace detail


/// CSV with a header row, one line per record, fields quoted only when
/// they contain a comma, quote or line break.
inline std::string emit_csv(const std::vector<BenchmarkRecord>& records)
{
    using detail::csv_field;
    using detail::csv_number;
    std::string out(csv_header);
    out += '\n';
    for (const auto& r : records) {
        const std::string fields[] = {
            csv_field(r.solver),
            csv_field(r.format),
            csv_field(r.precond),
            std::to_string(r.num_systems),
            std::to_string(r.num_rows),
            std::to_string(r.nnz),
            csv_number(r.tol),
            csv_field(r.tol_mode),
            csv_number(r.wall_time_seconds),
            csv_number(r.wall_time_median_seconds),
            std::to_string(r.total_iterations),
            std::to_string(r.max_iterations),
            std::to_string(r.converged_count),
            std::to_string(r.total_spmv),
            csv_field(r.launch_plan),
            csv_field(r.error),
        };
        for (size_type i = 0; i < std::size(fields); ++i) {
            if (i) {
                out += ',';
            }
            out += fields[i];
        }
        out += '\n';
    }
    return out;
}


}  // namespace batchsolve::harness
