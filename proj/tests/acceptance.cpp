// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "batchsolve/batchsolve.hpp"
#include "batchsolve/harness/benchmark.hpp"
#include "batchsolve/harness/matrix_market.hpp"
#include "support/oracles.hpp"

namespace {

using namespace batchsolve;
namespace oracle = batchsolve::testing;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;


struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (pass) {
            detail.clear();
        }
        pass = false;
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += why;
    }
};


std::string fmt(const char* format, auto... args)
{
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), format, args...);
    return buffer;
}


double seconds_since(clock_type::time_point start)
{
    return std::chrono::duration<double>(clock_type::now() - start).count();
}


SolveConfig config(SolverKind solver, ToleranceMode mode, double tol,
                   size_type max_iters,
                   PreconditionerKind precond = PreconditionerKind::Identity)
{
    SolveConfig cfg;
    cfg.solver = solver;
    cfg.tol_mode = mode;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    cfg.precond = precond;
    return cfg;
}


std::vector<double> lu_entry(const BatchCsr& a, const BatchMultiVector& b,
                             size_type k)
{
    const Eigen::VectorXd x =
        oracle::lu_solve(oracle::dense_entry(a, k), oracle::to_eigen(b.entry(k)));
    return {x.data(), x.data() + x.size()};
}


bool same_bits(const BatchSolveResult& a, const BatchSolveResult& b)
{
    return a.x == b.x && a.iters == b.iters && a.converged == b.converged &&
           a.breakdown == b.breakdown && a.final_metric == b.final_metric &&
           a.true_residual_norm == b.true_residual_norm &&
           a.spmv_count == b.spmv_count;
}


struct OracleSweep {
    double worst = 0.0;
    size_type failing = 0;
    size_type entries = 0;
};


OracleSweep oracle_sweep(SolverKind solver, double tol)
{
    OracleSweep out;
    for (int trial = 0; trial < 50; ++trial) {
        std::mt19937_64 rng(1000 + trial);
        const size_type n = 2 + rng() % 63;
        const size_type ns = 1 + rng() % 32;
        const auto a = solver == SolverKind::Cg
                           ? generate_stencil_batch(ns, n, trial)
                           : oracle::perturbed_stencil(ns, n, trial);
        const auto b = oracle::random_vectors(rng, ns, n);
        const auto res = solve(a, b, BatchMultiVector::zeros(ns, n),
                               config(solver, ToleranceMode::Relative, tol,
                                      10 * n));
        for (size_type k = 0; k < ns; ++k) {
            const auto err = oracle::max_abs_diff(res.x.entry(k),
                                                  lu_entry(a, b, k));
            out.worst = std::max(out.worst, err);
            out.failing += !res.converged[k] || !(err <= 1e-8);
            ++out.entries;
        }
    }
    return out;
}


Outcome oracle_equivalence()
{
    Outcome out;
    const auto start = clock_type::now();
    const auto cg = oracle_sweep(SolverKind::Cg, 1e-12);
    const auto bicg = oracle_sweep(SolverKind::Bicgstab, 1e-12);
    const auto elapsed = seconds_since(start);

    const auto summary =
        fmt("cg worst %.3g, bicgstab worst %.3g over %zu entries each, %.2f s",
            cg.worst, bicg.worst, cg.entries, elapsed);
    if (cg.failing) {
        out.fail(fmt("cg: %zu/%zu entries exceed 1e-8 (worst %.3g)",
                     cg.failing, cg.entries, cg.worst));
        // Diagnostic only: the CG stop compares |r.z|, a squared quantity,
        // so the same sweep is rerun with the squared tolerance.
        const auto squared = oracle_sweep(SolverKind::Cg, 1e-24);
        out.detail += fmt(" [diagnostic: cg with rel tol 1e-24 on |rho|: "
                          "%zu failing, worst %.3g]",
                          squared.failing, squared.worst);
    }
    if (bicg.failing) {
        out.fail(fmt("bicgstab: %zu/%zu entries exceed 1e-8 (worst %.3g)",
                     bicg.failing, bicg.entries, bicg.worst));
    }
    if (!(elapsed < 10.0)) {
        out.fail(fmt("runtime %.2f s", elapsed));
    }
    out.detail = out.pass ? summary : out.detail + " | " + summary;
    return out;
}


Outcome cg_trace_fidelity()
{
    // Exact rational replay of the recurrence, rounded to double.
    const std::array<double, 4> rho{8.833333333333334, 1.3497790196508146,
                                    0.004552327566975652,
                                    0.0002151338026149324};
    const std::array<double, 3> alpha{1.358974358974359, 0.8594449913249029,
                                      1.5219175404774214};
    const std::array<std::array<double, 4>, 3> x{{
        {0.33974358974358976, 0.6794871794871795, 1.0192307692307692,
         1.811965811965812},
        {0.052120048857093, 0.8828825684871751, 1.421654161577386,
         1.7703716628860582},
        {0.013887929486205325, 0.862122321539588, 1.4113638561540693,
         1.7997596120636061},
    }};
    const std::array<std::array<double, 4>, 3> r{{
        {-1.4914529914529915, 0.6410256410256411, 1.4145299145299146,
         -0.7564102564102564},
        {-0.09596928982725528, -0.057756063514220905, -0.03336241493631129,
         0.058419124062118306},
        {0.006810991531160632, -0.02323750051807745, 0.01642650898691682,
         -0.0018029095229542848},
    }};
    const double entries[4][4] = {
        {4, -1, 0, 1}, {-1, 4, -1, 0}, {0, -1, 4, -1}, {1, 0, -1, 3}};
    auto d = BatchDense::zeros(1, 4, 4);
    for (size_type i = 0; i < 4; ++i) {
        for (size_type j = 0; j < 4; ++j) {
            d.at(0, i, j) = entries[i][j];
        }
    }

    std::vector<double> rhos, alphas;
    std::vector<std::vector<double>> xs, rs;
    batch_cg(csr_from_dense(d), BatchMultiVector{1, 4, {1, 2, 3, 4}},
             BatchMultiVector::zeros(1, 4),
             config(SolverKind::Cg, ToleranceMode::Absolute, 1e-30, 3,
                    PreconditionerKind::ScalarJacobi),
             [&](const IterationState& s) {
                 rhos.push_back(s.rho);
                 alphas.push_back(s.alpha);
                 xs.emplace_back(s.x.begin(), s.x.end());
                 rs.emplace_back(s.r.begin(), s.r.end());
             });

    Outcome out;
    if (rhos.size() != 4) {
        out.fail(fmt("observed %zu states, expected 4", rhos.size()));
        return out;
    }
    double worst = std::abs(rhos[0] - rho[0]);
    for (size_type it = 1; it <= 3; ++it) {
        worst = std::max(worst, std::abs(rhos[it] - rho[it]));
        worst = std::max(worst, std::abs(alphas[it] - alpha[it - 1]));
        worst = std::max(worst, oracle::max_abs_diff(xs[it], x[it - 1]));
        worst = std::max(worst, oracle::max_abs_diff(rs[it], r[it - 1]));
    }
    out.detail = fmt("3 iterations, max deviation %.3g", worst);
    if (!(worst <= 1e-14)) {
        out.fail(out.detail);
    }
    return out;
}


Outcome format_equivalence()
{
    Outcome out;
    std::mt19937_64 rng(2024);
    double spmv_worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const size_type ns = 1 + rng() % 16;
        const size_type rows = 1 + rng() % 60;
        const size_type cols = trial % 4 == 0 ? 1 + rng() % 60 : rows;
        const double density = 0.05 + 0.9 * (rng() % 1000) / 1000.0;
        const auto csr = oracle::random_batch(rng, ns, rows, density, cols);
        const auto v = oracle::random_vectors(rng, ns, cols);

        const auto y_csr = spmv(csr, v);
        const auto y_ell = spmv(ell_from_csr(csr), v);
        const auto y_dense = spmv(dense_from_csr(csr), v);
        for (size_type k = 0; k < ns; ++k) {
            const auto ref = oracle::naive_product(oracle::dense_entry(csr, k),
                                                   v.entry(k));
            for (const auto* y : {&y_csr, &y_ell, &y_dense}) {
                spmv_worst =
                    std::max(spmv_worst, oracle::rel_diff(y->entry(k), ref));
            }
            spmv_worst = std::max(
                spmv_worst, oracle::rel_diff(y_ell.entry(k), y_csr.entry(k)));
            spmv_worst = std::max(
                spmv_worst, oracle::rel_diff(y_dense.entry(k), y_csr.entry(k)));
        }
    }
    if (!(spmv_worst <= 1e-13)) {
        out.fail(fmt("spmv relative deviation %.3g", spmv_worst));
    }

    double solve_worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const size_type ns = 1 + rng() % 12;
        const size_type n = 4 + rng() % 40;
        const bool spd = trial % 2 == 0;
        const auto csr = spd ? generate_stencil_batch(ns, n, 300 + trial)
                             : oracle::random_batch(rng, ns, n, 0.3);
        const auto b = oracle::random_vectors(rng, ns, n);
        const auto x0 = BatchMultiVector::zeros(ns, n);
        const auto cfg =
            config(spd ? SolverKind::Cg : SolverKind::Bicgstab,
                   ToleranceMode::Relative, 1e-14, 500,
                   trial % 3 ? PreconditionerKind::ScalarJacobi
                             : PreconditionerKind::Identity);
        const auto ref = solve(csr, b, x0, cfg);
        for (auto format : {MatrixFormat::Ell, MatrixFormat::Dense}) {
            const auto res = solve(convert(csr, format), b, x0, cfg);
            for (size_type k = 0; k < ns; ++k) {
                solve_worst = std::max(
                    solve_worst, oracle::rel_diff(res.x.entry(k),
                                                  ref.x.entry(k)));
            }
        }
    }
    if (!(solve_worst <= 1e-12)) {
        out.fail(fmt("solve relative deviation %.3g", solve_worst));
    }
    if (out.pass) {
        out.detail = fmt("100 spmv batches worst %.3g, 20 solves worst %.3g",
                         spmv_worst, solve_worst);
    }
    return out;
}


Outcome storage_formulas()
{
    Outcome out;
    std::mt19937_64 rng(4);
    size_type mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_type ns = 1 + rng() % 40;
        const size_type rows = 1 + rng() % 40;
        const size_type cols = 1 + rng() % 40;
        const double density = (rng() % 1000) / 1000.0;
        // Row lengths and nnz are counted here from the raw pattern.
        BatchCsr csr{ns, rows, cols, {0}, {}, {}};
        size_type nnz = 0;
        size_type nnz_per_row = 0;
        for (size_type row = 0; row < rows; ++row) {
            size_type length = 0;
            for (size_type col = 0; col < cols; ++col) {
                if ((rng() % 1000) / 1000.0 < density) {
                    csr.col_idxs.push_back(static_cast<index_type>(col));
                    ++length;
                }
            }
            nnz += length;
            nnz_per_row = std::max(nnz_per_row, length);
            csr.row_ptrs.push_back(static_cast<index_type>(nnz));
        }
        csr.values.assign(ns * nnz, 1.0);

        const StorageReport want_csr{ns * nnz, nnz, rows + 1};
        const StorageReport want_ell{ns * rows * nnz_per_row,
                                     rows * nnz_per_row, 0};
        const StorageReport want_dense{ns * rows * cols, 0, 0};
        mismatches += storage_report(csr) != want_csr;
        mismatches += storage_report(ell_from_csr(csr)) != want_ell;
        mismatches += storage_report(dense_from_csr(csr)) != want_dense;
    }
    out.detail = "1000 tuples, 3 formats each";
    if (mismatches) {
        out.fail(fmt("%zu mismatching reports", mismatches));
    }
    return out;
}


Outcome tuning_planners()
{
    Outcome out;
    const size_type cap = 1024;
    size_type bad = 0;
    for (size_type sg : {16u, 32u}) {
        for (size_type rows = 1; rows <= 4096; ++rows) {
            const size_type want = std::min(cap, (rows + sg - 1) / sg * sg);
            bad += select_work_group_size(rows, sg, cap) != want;
        }
    }
    if (bad) {
        out.fail(fmt("%zu work-group sizes off", bad));
    }

    std::mt19937_64 rng(5);
    size_type prefix_bad = 0;
    size_type monotone_bad = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const auto solver = rng() % 2 ? SolverKind::Cg : SolverKind::Bicgstab;
        const auto precond = rng() % 2 ? PreconditionerKind::ScalarJacobi
                                       : PreconditionerKind::Identity;
        const size_type rows = 1 + rng() % 2048;
        const size_type bytes = rng() % 2 ? 8 : 4;
        const size_type cap_a = rng() % (11 * rows * bytes);
        const size_type cap_b = cap_a + rng() % (4 * rows * bytes);
        const auto a = plan_workspace(solver, rows, bytes, cap_a, precond);
        const auto b = plan_workspace(solver, rows, bytes, cap_b, precond);

        size_type used = 0;
        bool seen_main = false;
        for (const auto& item : a.assignments) {
            seen_main = seen_main || item.tier == MemoryTier::Main;
            if (item.tier == MemoryTier::Fast) {
                prefix_bad += seen_main;
                used += item.bytes;
            }
        }
        prefix_bad += used != a.fast_used || used > cap_a;
        monotone_bad += b.fast_count() < a.fast_count();
        for (size_type i = 0; i < a.assignments.size(); ++i) {
            monotone_bad += a.assignments[i].tier == MemoryTier::Fast &&
                            b.assignments[i].tier != MemoryTier::Fast;
        }
    }
    if (prefix_bad || monotone_bad) {
        out.fail(fmt("workspace prefix violations %zu, monotonicity "
                     "violations %zu",
                     prefix_bad, monotone_bad));
    }
    if (out.pass) {
        out.detail = "8192 grid points, 2000 workspace pairs";
    }
    return out;
}


Outcome independence_and_determinism()
{
    Outcome out;
    std::mt19937_64 rng(6);
    size_type perm_bad = 0;
    size_type worker_bad = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const size_type ns = 2 + rng() % 30;
        const size_type n = 3 + rng() % 50;
        const bool spd = trial % 2 == 0;
        const auto a = spd ? generate_stencil_batch(ns, n, 600 + trial)
                           : oracle::random_batch(rng, ns, n, 0.25);
        const auto b = oracle::random_vectors(rng, ns, n);
        const auto x0 = oracle::random_vectors(rng, ns, n);
        const auto cfg =
            config(spd ? SolverKind::Cg : SolverKind::Bicgstab,
                   ToleranceMode::Relative, 1e-12, 200,
                   trial % 4 < 2 ? PreconditionerKind::ScalarJacobi
                                 : PreconditionerKind::Identity);

        std::vector<size_type> perm(ns);
        std::iota(perm.begin(), perm.end(), size_type{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        auto pa = a;
        auto pb = b;
        auto px0 = x0;
        for (size_type k = 0; k < ns; ++k) {
            std::ranges::copy(a.entry_values(perm[k]),
                              pa.entry_values(k).begin());
            std::ranges::copy(b.entry(perm[k]), pb.entry(k).begin());
            std::ranges::copy(x0.entry(perm[k]), px0.entry(k).begin());
        }
        const auto res = solve(a, b, x0, cfg);
        const auto pres = solve(pa, pb, px0, cfg);
        for (size_type k = 0; k < ns; ++k) {
            const auto j = perm[k];
            perm_bad += !std::ranges::equal(pres.x.entry(k), res.x.entry(j)) ||
                        pres.iters[k] != res.iters[j] ||
                        pres.converged[k] != res.converged[j] ||
                        pres.final_metric[k] != res.final_metric[j] ||
                        pres.spmv_count[k] != res.spmv_count[j];
        }

        for (unsigned workers : {2u, 3u, 8u}) {
            auto wcfg = cfg;
            wcfg.num_workers = workers;
            worker_bad += !same_bits(solve(a, b, x0, wcfg), res);
        }
    }
    out.detail = "20 batches, worker counts 1/2/3/8";
    if (perm_bad) {
        out.fail(fmt("%zu permuted entries differ", perm_bad));
    }
    if (worker_bad) {
        out.fail(fmt("%zu worker-count runs differ", worker_bad));
    }
    return out;
}


Outcome scaling_proxy()
{
    Outcome out;
    harness::BenchmarkSpec spec;
    spec.solve = config(SolverKind::Cg, ToleranceMode::Relative, 1e-10, 200,
                        PreconditionerKind::ScalarJacobi);
    spec.repetitions = 9;
    const size_type base = 256;
    for (size_type n = base; n <= 4096; n *= 2) {
        spec.points.push_back(harness::stencil_point(32, 1, n, 41));
    }
    const auto records = harness::run_benchmark(spec);

    const auto& first = records.front();
    std::string times;
    for (size_type i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.error.empty()) {
            out.fail("benchmark error: " + rec.error);
            return out;
        }
        const size_type factor = rec.num_systems / base;
        if (rec.converged_count != rec.num_systems ||
            rec.total_iterations != factor * first.total_iterations ||
            rec.total_spmv != factor * first.total_spmv) {
            out.fail(fmt("counts not linear at batch %zu", rec.num_systems));
        }
        const double ratio = rec.wall_time_seconds /
                             (first.wall_time_seconds * factor);
        if (i > 0 && rec.wall_time_seconds < records[i - 1].wall_time_seconds) {
            out.fail(fmt("wall time decreased at batch %zu", rec.num_systems));
        }
        if (!(ratio >= 1.0 / 3.0 && ratio <= 3.0)) {
            out.fail(fmt("batch %zu is %.2fx linear", rec.num_systems, ratio));
        }
        times += fmt("%s%zu:%.2fms", i ? " " : "", rec.num_systems,
                     1e3 * rec.wall_time_seconds);
    }
    if (out.pass) {
        out.detail = fmt("%zu iters per entry, times ", first.max_iterations) +
                     times;
    }
    return out;
}


Outcome preconditioner_effect()
{
    Outcome out;
    const size_type ns = 16;
    const size_type n = 48;
    const auto a = oracle::ill_scaled(generate_stencil_batch(ns, n, 77));
    const auto b = BatchMultiVector::filled(ns, n, 1.0);
    const auto x0 = BatchMultiVector::zeros(ns, n);
    auto cfg = config(SolverKind::Cg, ToleranceMode::Relative, 1e-10, 5000);

    const auto plain = solve(a, b, x0, cfg);
    cfg.precond = PreconditionerKind::ScalarJacobi;
    const auto jacobi = solve(a, b, x0, cfg);

    size_type plain_total = 0;
    size_type jacobi_total = 0;
    for (size_type k = 0; k < ns; ++k) {
        plain_total += plain.iters[k];
        jacobi_total += jacobi.iters[k];
        if (!plain.converged[k] || !jacobi.converged[k]) {
            out.fail(fmt("entry %zu did not converge", k));
        } else if (jacobi.iters[k] >= plain.iters[k]) {
            out.fail(fmt("entry %zu: jacobi %zu vs plain %zu", k,
                         jacobi.iters[k], plain.iters[k]));
        }
    }
    if (out.pass) {
        out.detail = fmt("%zu entries, iterations plain %zu vs jacobi %zu",
                         ns, plain_total, jacobi_total);
    }
    return out;
}


class ScratchDir {
public:
    ScratchDir()
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("batchsolve_accept_" + std::to_string(rd()) +
                 std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~ScratchDir() { fs::remove_all(path_); }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};


Outcome ingestion()
{
    Outcome out;
    std::mt19937_64 rng(9);
    size_type round_trips = 0;
    size_type mismatch_checks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ScratchDir dir;
        const size_type ns = 1 + rng() % 5;
        const size_type rows = 1 + rng() % 30;
        const size_type cols = 1 + rng() % 30;
        auto m = oracle::random_batch(rng, ns, rows, 0.3, cols);
        std::uniform_real_distribution<double> exponent(-300.0, 300.0);
        for (auto& v : m.values) {
            v *= std::pow(10.0, exponent(rng));
        }
        m.values[rng() % m.values.size()] = 0.0;

        for (size_type k = 0; k < ns; ++k) {
            harness::write_matrix_market(
                dir.path() / fmt("e%03zu.mtx", k), m, k);
        }
        const auto loaded = harness::load_matrix_market_batch(
            harness::list_matrix_market_dir(dir.path()));
        if (loaded != m) {
            out.fail(fmt("round trip %d differs", trial));
        }
        ++round_trips;

        // Flip one pattern position in a copy of the last entry.
        Eigen::MatrixXi pattern = Eigen::MatrixXi::Zero(rows, cols);
        for (size_type row = 0; row < rows; ++row) {
            for (auto nz = m.row_ptrs[row]; nz < m.row_ptrs[row + 1]; ++nz) {
                pattern(row, m.col_idxs[nz]) = 1;
            }
        }
        const size_type flip_row = rng() % rows;
        const size_type flip_col = rng() % cols;
        auto dense = dense_from_csr(m);
        auto single = BatchDense::zeros(1, rows, cols);
        for (size_type i = 0; i < rows; ++i) {
            for (size_type j = 0; j < cols; ++j) {
                single.at(0, i, j) = pattern(i, j) ? dense.at(0, i, j) + 1.0
                                                   : 0.0;
            }
        }
        single.at(0, flip_row, flip_col) = pattern(flip_row, flip_col) ? 0.0
                                                                       : 2.5;
        harness::write_matrix_market(dir.path() / "zz_bad.mtx",
                                     csr_from_dense(single), 0);
        try {
            harness::load_matrix_market_batch(
                harness::list_matrix_market_dir(dir.path()));
            out.fail(fmt("mismatch %d accepted", trial));
        } catch (const harness::PatternMismatch& e) {
            const auto where = fmt("(%zu, %zu)", flip_row + 1, flip_col + 1);
            if (!e.row() || !e.col() || *e.row() != flip_row ||
                *e.col() != flip_col ||
                std::string(e.what()).find(where) == std::string::npos ||
                fs::path(e.file()).filename() != "zz_bad.mtx") {
                out.fail(fmt("mismatch %d reported as: ", trial) + e.what());
            }
        }
        ++mismatch_checks;
    }
    if (out.pass) {
        out.detail = fmt("%zu bitwise round trips, %zu located mismatches",
                         round_trips, mismatch_checks);
    }
    return out;
}


}  // namespace


int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"oracle equivalence", oracle_equivalence},
        {"cg trace fidelity", cg_trace_fidelity},
        {"format equivalence", format_equivalence},
        {"storage formulas", storage_formulas},
        {"tuning planners", tuning_planners},
        {"independence and determinism", independence_and_determinism},
        {"scaling proxy", scaling_proxy},
        {"preconditioner effect", preconditioner_effect},
        {"matrix market ingestion", ingestion},
    };

    int failures = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome.fail(std::string("exception: ") + e.what());
        }
        failures += !outcome.pass;
        std::printf("[%s] %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", index,
                    name, outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", index - failures, index);
    return failures == 0 ? 0 : 1;
}
