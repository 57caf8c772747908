// Command line front end: benchmark sweeps, Matrix Market validation and
// stencil batch export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "batchsolve/batchsolve.hpp"
#include "batchsolve/harness/benchmark.hpp"
#include "batchsolve/harness/matrix_market.hpp"

namespace bs = batchsolve;
namespace fs = std::filesystem;

namespace {


struct BenchOptions {
    std::string solver = "cg";
    std::string format = "csr";
    std::string precond = "none";
    double tol = 1e-10;
    std::string tol_mode = "rel";
    bs::size_type max_iters = 0;
    std::vector<bs::size_type> stencil_rows;
    std::string mm_dir;
    std::vector<bs::size_type> batch;
    bs::size_type replicate = 1;
    bs::size_type reps = 5;
    std::string device_profile;
    std::string out;
    unsigned workers = 1;
    std::uint64_t seed = 0;
    bs::size_type wg_override = 0;
    bs::size_type sg_override = 0;
};


int run_bench(const BenchOptions& opt)
{
    bs::harness::BenchmarkSpec base;
    base.solve.solver =
        opt.solver == "cg" ? bs::SolverKind::Cg : bs::SolverKind::Bicgstab;
    base.format = opt.format == "csr"   ? bs::MatrixFormat::Csr
                  : opt.format == "ell" ? bs::MatrixFormat::Ell
                                        : bs::MatrixFormat::Dense;
    base.solve.precond = opt.precond == "jacobi"
                             ? bs::PreconditionerKind::ScalarJacobi
                             : bs::PreconditionerKind::Identity;
    base.solve.tol = opt.tol;
    base.solve.tol_mode = opt.tol_mode == "abs" ? bs::ToleranceMode::Absolute
                                                : bs::ToleranceMode::Relative;
    base.solve.num_workers = opt.workers;
    if (opt.wg_override) {
        base.solve.tuning.work_group_size = opt.wg_override;
    }
    if (opt.sg_override) {
        base.solve.tuning.sub_group_size = opt.sg_override;
    }
    base.repetitions = opt.reps;
    if (!opt.device_profile.empty()) {
        base.device = bs::load_device_profile(opt.device_profile);
    }

    // (rows, point) pairs; rows picks the default iteration cap.
    std::vector<std::pair<bs::size_type, bs::harness::BenchmarkPoint>> points;
    if (!opt.mm_dir.empty()) {
        const auto files = bs::harness::list_matrix_market_dir(opt.mm_dir);
        const auto loaded =
            bs::harness::load_matrix_market_batch(files, opt.replicate);
        if (opt.batch.empty()) {
            points.emplace_back(loaded.num_rows,
                                bs::harness::matrix_point(loaded));
        }
        for (auto count : opt.batch) {
            points.emplace_back(loaded.num_rows,
                                bs::harness::matrix_point(
                                    bs::replicate_entries(loaded, count)));
        }
    } else {
        const auto batches =
            opt.batch.empty() ? std::vector<bs::size_type>{1} : opt.batch;
        for (auto rows : opt.stencil_rows) {
            for (auto count : batches) {
                points.emplace_back(rows, bs::harness::stencil_point(
                                              rows, count, opt.replicate,
                                              opt.seed));
            }
        }
    }

    std::vector<bs::harness::BenchmarkRecord> records;
    for (auto& [rows, point] : points) {
        auto spec = base;
        spec.solve.max_iters = opt.max_iters ? opt.max_iters : 2 * rows;
        spec.points = {std::move(point)};
        auto recs = bs::harness::run_benchmark(spec);
        for (const auto& r : recs) {
            std::cerr << r.num_systems << " x " << r.num_rows << ": "
                      << (r.error.empty()
                              ? std::to_string(r.converged_count) + "/" +
                                    std::to_string(r.num_systems) +
                                    " converged, min " +
                                    std::to_string(r.wall_time_seconds) + " s"
                              : "error: " + r.error)
                      << '\n';
        }
        records.insert(records.end(), recs.begin(), recs.end());
    }

    const auto csv = bs::harness::emit_csv(records);
    if (opt.out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(opt.out);
        if (!out) {
            std::cerr << "cannot write " << opt.out << '\n';
            return 2;
        }
        out << csv;
    }
    bool all_converged = true;
    for (const auto& r : records) {
        all_converged = all_converged && r.error.empty() &&
                        r.converged_count == r.num_systems;
    }
    return all_converged ? 0 : 1;
}


int run_validate(const std::string& dir)
{
    const auto files = bs::harness::list_matrix_market_dir(dir);
    if (files.empty()) {
        std::cerr << "no .mtx files in " << dir << '\n';
        return 1;
    }
    const auto batch = bs::harness::load_matrix_market_batch(files);
    const auto violations = bs::validate(batch);
    std::cout << "files: " << files.size() << '\n'
              << "shape: " << batch.num_rows << " x " << batch.num_cols
              << '\n'
              << "stored nnz: " << batch.nnz() << '\n'
              << "structural nnz: " << bs::structural_nonzeros(batch) << '\n';
    for (const auto& v : violations) {
        std::cout << "violation: " << v.invariant << " at " << v.location
                  << '\n';
    }
    return violations.empty() ? 0 : 1;
}


int run_generate(bs::size_type rows, bs::size_type count,
                 std::uint64_t seed, const std::string& dir)
{
    fs::create_directories(dir);
    const auto batch = bs::generate_stencil_batch(count, rows, seed);
    for (bs::size_type k = 0; k < count; ++k) {
        char name[64];
        std::snprintf(name, sizeof(name), "stencil_%05zu.mtx", k);
        bs::harness::write_matrix_market(fs::path(dir) / name, batch, k);
    }
    std::cout << "wrote " << count << " files to " << dir << '\n';
    return 0;
}


}  // namespace


int main(int argc, char** argv)
{
    CLI::App app{"Batched sparse iterative solvers"};
    app.require_subcommand(1);

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark sweep");
    bench_cmd->add_option("--solver", bench.solver)
        ->check(CLI::IsMember({"cg", "bicgstab"}));
    bench_cmd->add_option("--format", bench.format)
        ->check(CLI::IsMember({"csr", "ell", "dense"}));
    bench_cmd->add_option("--precond", bench.precond)
        ->check(CLI::IsMember({"none", "jacobi"}));
    bench_cmd->add_option("--tol", bench.tol)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--tol-mode", bench.tol_mode)
        ->check(CLI::IsMember({"abs", "rel"}));
    bench_cmd->add_option("--max-iters", bench.max_iters,
                          "Iteration cap (default 2 * num_rows)");
    auto* rows_opt =
        bench_cmd
            ->add_option("--stencil-rows", bench.stencil_rows,
                         "Stencil sizes, comma separated for a sweep")
            ->delimiter(',');
    auto* mm_opt = bench_cmd->add_option(
        "--mm-dir", bench.mm_dir, "Directory of Matrix Market files");
    rows_opt->excludes(mm_opt);
    bench_cmd->add_option("--batch", bench.batch,
                          "Unique stencil entries (or total entries for "
                          "--mm-dir), comma separated for a sweep")
        ->delimiter(',');
    bench_cmd->add_option("--replicate", bench.replicate)
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--reps", bench.reps);
    bench_cmd->add_option("--device-profile", bench.device_profile)
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("--out", bench.out, "CSV output (default stdout)");
    bench_cmd->add_option("--workers", bench.workers,
                          "Worker threads, 0 = all cores");
    bench_cmd->add_option("--seed", bench.seed);
    bench_cmd->add_option("--work-group-size", bench.wg_override);
    bench_cmd->add_option("--sub-group-size", bench.sg_override);

    std::string validate_dir;
    auto* validate_cmd = app.add_subcommand(
        "validate", "Check a Matrix Market batch directory");
    validate_cmd->add_option("--mm-dir", validate_dir)->required();

    bs::size_type gen_rows = 0;
    bs::size_type gen_count = 1;
    std::uint64_t gen_seed = 0;
    std::string gen_dir;
    auto* generate_cmd = app.add_subcommand(
        "generate", "Write a stencil batch as Matrix Market files");
    generate_cmd->add_option("--rows", gen_rows)->required();
    generate_cmd->add_option("--count", gen_count);
    generate_cmd->add_option("--seed", gen_seed);
    generate_cmd->add_option("--out-dir", gen_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bench_cmd) {
            if (bench.stencil_rows.empty() && bench.mm_dir.empty()) {
                std::cerr << "bench needs --stencil-rows or --mm-dir\n";
                return 2;
            }
            return run_bench(bench);
        }
        if (*validate_cmd) {
            return run_validate(validate_dir);
        }
        return run_generate(gen_rows, gen_count, gen_seed, gen_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
