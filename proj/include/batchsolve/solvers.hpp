#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "batchsolve/batch_blas.hpp"
#include "batchsolve/batch_formats.hpp"
#include "batchsolve/dispatch_tuning.hpp"
#include "batchsolve/parallel.hpp"
#include "batchsolve/preconditioners.hpp"

namespace batchsolve {


enum class ToleranceMode { Absolute, Relative };


class InvalidConfig : public Error {
public:
    using Error::Error;
};


struct SolveConfig {
    SolverKind solver = SolverKind::Cg;
    size_type max_iters = 100;
    value_type tol = 1e-10;
    ToleranceMode tol_mode = ToleranceMode::Relative;
    PreconditionerKind precond = PreconditionerKind::Identity;
    LaunchOverrides tuning;
    /// Worker threads across batch entries; 0 = one per hardware thread.
    unsigned num_workers = 1;
};


inline void validate_config(const SolveConfig& cfg)
{
    if (!(cfg.tol > 0.0) || !std::isfinite(cfg.tol)) {
        throw InvalidConfig("tolerance must be positive and finite, got " +
                            std::to_string(cfg.tol));
    }
    if (cfg.max_iters < 1) {
        throw InvalidConfig("max_iters must be >= 1");
    }
}


/**
 * Per-entry outcome of a batched solve.
 *
 * `final_metric` is the stopping metric at exit: |r . z| for CG and
 * ||r||_2 for BiCGSTAB. `true_residual_norm` is ||b - A x||_2 recomputed
 * from the returned solution. `spmv_count` counts solver SpMVs only, not the
 * final audit product.
 */
struct BatchSolveResult {
    BatchMultiVector x;
    std::vector<size_type> iters;
    std::vector<std::uint8_t> converged;
    std::vector<std::uint8_t> breakdown;
    std::vector<value_type> final_metric;
    std::vector<value_type> true_residual_norm;
    std::vector<size_type> spmv_count;
    LaunchPlan launch_plan;
    WorkspacePlan workspace_plan;

    size_type num_systems() const { return iters.size(); }

    size_type converged_count() const
    {
        return std::accumulate(converged.begin(), converged.end(),
                               size_type{0});
    }

    size_type total_iterations() const
    {
        return std::accumulate(iters.begin(), iters.end(), size_type{0});
    }

    size_type max_iterations() const
    {
        size_type m = 0;
        for (auto it : iters) {
            m = std::max(m, it);
        }
        return m;
    }

    size_type total_spmv() const
    {
        return std::accumulate(spmv_count.begin(), spmv_count.end(),
                               size_type{0});
    }
};


/// Snapshot handed to an iteration observer. Iteration 0 is the state right
/// after initialization. Spans are only valid during the callback.
struct IterationState {
    size_type entry = 0;
    size_type iteration = 0;
    value_type rho = 0.0;
    value_type alpha = 0.0;
    value_type omega = 0.0;
    value_type metric = 0.0;
    std::span<const value_type> x;
    std::span<const value_type> r;
};

struct NoObserver {
    void operator()(const IterationState&) const noexcept {}
};


// Stopping criteria. `initial` is the metric at iteration 0.

struct AbsoluteStop {
    static value_type threshold(value_type tol, value_type)
    {
        return tol;
    }
};

struct RelativeStop {
    static value_type threshold(value_type tol, value_type initial)
    {
        return initial == 0.0 ? tol : tol * initial;
    }
};


namespace detail {


/**
 * Solver vectors of one worker, laid out according to a WorkspacePlan:
 * fast-tier vectors share one contiguous arena, main-tier vectors another.
 * Allocated once per worker and reused for every entry it solves.
 */
class Workspace {
public:
    Workspace(const WorkspacePlan& plan, size_type length,
              size_type precond_elems)
    {
        size_type fast = 0;
        size_type main = 0;
        for (const auto& a : plan.assignments) {
            auto& total = a.tier == MemoryTier::Fast ? fast : main;
            total += elems_for(a.name, length, precond_elems);
        }
        fast_arena_.resize(fast);
        main_arena_.resize(main);
        fast = main = 0;
        for (const auto& a : plan.assignments) {
            const auto n = elems_for(a.name, length, precond_elems);
            if (a.tier == MemoryTier::Fast) {
                slots_.push_back({a.name, {fast_arena_.data() + fast, n}});
                fast += n;
            } else {
                slots_.push_back({a.name, {main_arena_.data() + main, n}});
                main += n;
            }
        }
    }

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    std::span<value_type> get(std::string_view name) const
    {
        for (const auto& slot : slots_) {
            if (slot.name == name) {
                return slot.data;
            }
        }
        return {};
    }

private:
    static size_type elems_for(std::string_view name, size_type length,
                               size_type precond_elems)
    {
        return name == "precond" ? precond_elems : length;
    }

    struct Slot {
        std::string name;
        std::span<value_type> data;
    };

    std::vector<value_type> fast_arena_;
    std::vector<value_type> main_arena_;
    std::vector<Slot> slots_;
};


/// Preconditioner bound to one worker's workspace copy of its data.
template <typename P>
class LocalPreconditioner;

template <>
class LocalPreconditioner<IdentityPreconditioner> {
public:
    LocalPreconditioner(const IdentityPreconditioner&, std::span<value_type>)
    {}

    void load(size_type) {}

    void apply(std::span<const value_type> r, std::span<value_type> z) const
    {
        kernels::copy(r, z);
    }
};

template <>
class LocalPreconditioner<BatchJacobi> {
public:
    LocalPreconditioner(const BatchJacobi& p, std::span<value_type> work)
        : source_{p}, work_{work}
    {}

    void load(size_type k) { kernels::copy(source_.entry(k), work_); }

    void apply(std::span<const value_type> r, std::span<value_type> z) const
    {
        for (size_type i = 0; i < r.size(); ++i) {
            z[i] = work_[i] * r[i];
        }
    }

private:
    const BatchJacobi& source_;
    std::span<value_type> work_;
};


/// Output slots of one entry.
struct EntryOutcome {
    size_type iters = 0;
    bool converged = false;
    bool breakdown = false;
    value_type metric = 0.0;
    size_type spmvs = 0;
};


template <typename M>
void residual(const M& a, size_type k, size_type chunk,
              std::span<const value_type> b, std::span<const value_type> x,
              std::span<value_type> scratch, std::span<value_type> r)
{
    kernels::spmv_entry(a, k, x, scratch, chunk);
    for (size_type i = 0; i < r.size(); ++i) {
        r[i] = b[i] - scratch[i];
    }
}


/**
 * Preconditioned CG for a single entry, step for step as the batched CG
 * recurrence: stop when |rho| < tau, checked at the top of each iteration.
 */
template <typename Stop, typename M, typename Precond, typename Observer>
EntryOutcome cg_entry(const M& a, size_type k, size_type chunk,
                      std::span<const value_type> b, Precond& precond,
                      const Workspace& ws, const SolveConfig& cfg,
                      Observer& observer)
{
    const auto r = ws.get("r");
    const auto z = ws.get("z");
    const auto p = ws.get("p");
    const auto t = ws.get("t");
    const auto x = ws.get("x");
    EntryOutcome out;

    residual(a, k, chunk, b, x, t, r);
    out.spmvs = 1;
    precond.apply(r, z);
    kernels::copy(z, p);
    std::fill(t.begin(), t.end(), 0.0);
    value_type rho = kernels::dot(r, z);
    // alpha and rho_new are overwritten before first use.
    value_type alpha = 1.0;
    value_type rho_new = 1.0;
    const auto tau = Stop::threshold(cfg.tol, std::abs(rho));
    observer(IterationState{k, 0, rho, alpha, 0.0, std::abs(rho), x, r});

    for (size_type iter = 0; iter < cfg.max_iters; ++iter) {
        if (std::abs(rho) < tau) {
            break;
        }
        kernels::spmv_entry(a, k, p, t, chunk);
        ++out.spmvs;
        const auto pt = kernels::dot(p, t);
        if (pt == 0.0 || !std::isfinite(pt)) {
            out.breakdown = true;
            break;
        }
        alpha = rho / pt;
        kernels::axpy(alpha, p, x);
        kernels::axpy(-alpha, t, r);
        precond.apply(r, z);
        rho_new = kernels::dot(r, z);
        kernels::xpby(z, rho_new / rho, p);
        rho = rho_new;
        ++out.iters;
        observer(IterationState{k, out.iters, rho, alpha, 0.0, std::abs(rho),
                                x, r});
    }
    out.metric = std::abs(rho);
    out.converged = !out.breakdown && out.metric < tau;
    return out;
}


/**
 * Preconditioned BiCGSTAB for a single entry. The preconditioner is applied
 * to the search directions (p_hat = M p, s_hat = M s) so `r` is always the
 * unpreconditioned residual; the stopping metric ||r||_2 is checked at the
 * top of each iteration and after the half step s.
 */
template <typename Stop, typename M, typename Precond, typename Observer>
EntryOutcome bicgstab_entry(const M& a, size_type k, size_type chunk,
                            std::span<const value_type> b, Precond& precond,
                            const Workspace& ws, const SolveConfig& cfg,
                            Observer& observer)
{
    const auto r = ws.get("r");
    const auto r_hat = ws.get("r_hat");
    const auto p = ws.get("p");
    const auto v = ws.get("v");
    const auto s = ws.get("s");
    const auto t = ws.get("t");
    const auto z = ws.get("z");
    const auto x = ws.get("x");
    EntryOutcome out;

    residual(a, k, chunk, b, x, t, r);
    out.spmvs = 1;
    kernels::copy(r, r_hat);
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    value_type rho_old = 1.0;
    value_type alpha = 1.0;
    value_type omega = 1.0;
    value_type res = kernels::norm2(r);
    const auto tau = Stop::threshold(cfg.tol, res);
    observer(IterationState{k, 0, rho_old, alpha, omega, res, x, r});

    for (size_type iter = 0; iter < cfg.max_iters; ++iter) {
        if (res < tau) {
            break;
        }
        const auto rho = kernels::dot(r_hat, r);
        if (rho == 0.0 || !std::isfinite(rho)) {
            out.breakdown = true;
            break;
        }
        const auto beta = (rho / rho_old) * (alpha / omega);
        for (size_type i = 0; i < p.size(); ++i) {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(p, z);
        kernels::spmv_entry(a, k, z, v, chunk);
        ++out.spmvs;
        const auto rv = kernels::dot(r_hat, v);
        if (rv == 0.0 || !std::isfinite(rv)) {
            out.breakdown = true;
            break;
        }
        alpha = rho / rv;
        for (size_type i = 0; i < s.size(); ++i) {
            s[i] = r[i] - alpha * v[i];
        }
        kernels::axpy(alpha, z, x);
        const auto s_norm = kernels::norm2(s);
        if (s_norm < tau) {
            kernels::copy(s, r);
            res = s_norm;
            ++out.iters;
            observer(IterationState{k, out.iters, rho, alpha, omega, res, x,
                                    r});
            break;
        }
        precond.apply(s, z);
        kernels::spmv_entry(a, k, z, t, chunk);
        ++out.spmvs;
        const auto tt = kernels::dot(t, t);
        omega = tt == 0.0 ? 0.0 : kernels::dot(t, s) / tt;
        if (omega == 0.0 || !std::isfinite(omega)) {
            kernels::copy(s, r);
            res = s_norm;
            out.breakdown = true;
            break;
        }
        kernels::axpy(omega, z, x);
        for (size_type i = 0; i < r.size(); ++i) {
            r[i] = s[i] - omega * t[i];
        }
        res = kernels::norm2(r);
        rho_old = rho;
        ++out.iters;
        observer(IterationState{k, out.iters, rho, alpha, omega, res, x, r});
    }
    out.metric = res;
    out.converged = !out.breakdown && res < tau;
    return out;
}


template <typename M>
void check_solve_shapes(const M& a, const BatchMultiVector& b,
                        const BatchMultiVector& x0)
{
    require_dims(a.num_rows == a.num_cols,
                 "solver needs a square matrix, got " +
                     std::to_string(a.num_rows) + " x " +
                     std::to_string(a.num_cols));
    require_dims(b.num_systems == a.num_systems && b.length == a.num_rows,
                 "right-hand side shape does not match the matrix batch");
    require_same_shape(b, x0);
    require_dims(b.values.size() == b.num_systems * b.length &&
                     x0.values.size() == x0.num_systems * x0.length,
                 "batch vector storage does not match its shape");
}


/// Runs one statically instantiated (solver, matrix, preconditioner, stop)
/// combination over the whole batch.
template <SolverKind Kind, typename Stop, typename M, typename P,
          typename Observer>
BatchSolveResult run_fused(const M& a, const BatchMultiVector& b,
                           const BatchMultiVector& x0, const SolveConfig& cfg,
                           const P& precond, const DeviceProfile& device,
                           Observer& observer)
{
    const auto n = a.num_rows;
    const auto ns = a.num_systems;
    BatchSolveResult result;
    result.launch_plan = make_launch_plan(n, device, cfg.tuning);
    result.workspace_plan = plan_workspace(
        Kind, n, sizeof(value_type), device.fast_capacity_bytes, P::kind);
    result.x = BatchMultiVector::zeros(ns, n);
    result.iters.assign(ns, 0);
    result.converged.assign(ns, 0);
    result.breakdown.assign(ns, 0);
    result.final_metric.assign(ns, 0.0);
    result.true_residual_norm.assign(ns, 0.0);
    result.spmv_count.assign(ns, 0);
    const auto chunk = result.launch_plan.work_group_size;

    parallel_for_blocks(ns, cfg.num_workers, [&](size_type begin,
                                                 size_type end) {
        const Workspace ws(result.workspace_plan, n,
                           precond.workspace_elems());
        LocalPreconditioner<P> local(precond, ws.get("precond"));
        const auto x = ws.get("x");
        const auto r = ws.get("r");
        const auto t = ws.get("t");
        for (auto k = begin; k < end; ++k) {
            local.load(k);
            kernels::copy(x0.entry(k), x);
            EntryOutcome out;
            if constexpr (Kind == SolverKind::Cg) {
                out = cg_entry<Stop>(a, k, chunk, b.entry(k), local, ws, cfg,
                                     observer);
            } else {
                out = bicgstab_entry<Stop>(a, k, chunk, b.entry(k), local, ws,
                                           cfg, observer);
            }
            kernels::copy(x, result.x.entry(k));
            residual(a, k, chunk, b.entry(k), x, t, r);
            result.true_residual_norm[k] = kernels::norm2(r);
            result.iters[k] = out.iters;
            result.converged[k] = out.converged;
            result.breakdown[k] = out.breakdown;
            result.final_metric[k] = out.metric;
            result.spmv_count[k] = out.spmvs;
        }
    });
    return result;
}


template <typename F>
decltype(auto) with_stop(ToleranceMode mode, F&& f)
{
    switch (mode) {
    case ToleranceMode::Absolute:
        return f(AbsoluteStop{});
    case ToleranceMode::Relative:
        return f(RelativeStop{});
    }
    throw UnsupportedCombination("unknown tolerance mode " +
                                 std::to_string(static_cast<int>(mode)));
}


template <typename M, typename F>
decltype(auto) with_preconditioner(const M& a, PreconditionerKind kind, F&& f)
{
    switch (kind) {
    case PreconditionerKind::Identity:
        return f(IdentityPreconditioner{});
    case PreconditionerKind::ScalarJacobi:
        return f(generate_jacobi(a));
    }
    throw UnsupportedCombination("unknown preconditioner kind " +
                                 std::to_string(static_cast<int>(kind)));
}


template <SolverKind Kind, BatchMatrix M, typename Observer>
BatchSolveResult solve_with(const M& a, const BatchMultiVector& b,
                            const BatchMultiVector& x0, const SolveConfig& cfg,
                            const DeviceProfile& device, Observer& observer)
{
    validate_config(cfg);
    check_solve_shapes(a, b, x0);
    return with_preconditioner(a, cfg.precond, [&](const auto& precond) {
        return with_stop(cfg.tol_mode, [&]<typename Stop>(Stop) {
            return run_fused<Kind, Stop>(a, b, x0, cfg, precond, device,
                                         observer);
        });
    });
}


}  // namespace detail


/**
 * Batched preconditioned conjugate gradient. Every entry iterates
 * independently from its own initial guess and stops on |r . z| < tau_k,
 * with tau_k = tol (Absolute) or tol * |r0 . z0| (Relative; tol when the
 * initial value is 0). `cfg.solver` is ignored.
 *
 * The observer is invoked from worker threads when cfg.num_workers != 1.
 */
template <BatchMatrix M, typename Observer = NoObserver>
BatchSolveResult batch_cg(const M& a, const BatchMultiVector& b,
                          const BatchMultiVector& x0, const SolveConfig& cfg,
                          Observer&& observer = {},
                          const DeviceProfile& device = default_device_profile())
{
    return detail::solve_with<SolverKind::Cg>(a, b, x0, cfg, device,
                                              observer);
}


/// Batched preconditioned BiCGSTAB with the stopping metric ||r||_2 against
/// tol (Absolute) or tol * ||r0||_2 (Relative). `cfg.solver` is ignored.
template <BatchMatrix M, typename Observer = NoObserver>
BatchSolveResult batch_bicgstab(
    const M& a, const BatchMultiVector& b, const BatchMultiVector& x0,
    const SolveConfig& cfg, Observer&& observer = {},
    const DeviceProfile& device = default_device_profile())
{
    return detail::solve_with<SolverKind::Bicgstab>(a, b, x0, cfg, device,
                                                    observer);
}


/// Runtime dispatch on solver kind, then preconditioner and stopping
/// criterion, down to one fused instantiation per combination.
template <BatchMatrix M>
BatchSolveResult solve(const M& a, const BatchMultiVector& b,
                       const BatchMultiVector& x0, const SolveConfig& cfg,
                       const DeviceProfile& device = default_device_profile())
{
    switch (cfg.solver) {
    case SolverKind::Cg:
        return batch_cg(a, b, x0, cfg, NoObserver{}, device);
    case SolverKind::Bicgstab:
        return batch_bicgstab(a, b, x0, cfg, NoObserver{}, device);
    }
    throw UnsupportedCombination("unknown solver kind " +
                                 std::to_string(static_cast<int>(cfg.solver)));
}


// Format-erased entry point

enum class MatrixFormat { Csr, Ell, Dense };

using AnyBatchMatrix = std::variant<BatchCsr, BatchEll, BatchDense>;

inline AnyBatchMatrix convert(const BatchCsr& m, MatrixFormat format)
{
    switch (format) {
    case MatrixFormat::Csr:
        return m;
    case MatrixFormat::Ell:
        return ell_from_csr(m);
    case MatrixFormat::Dense:
        return dense_from_csr(m);
    }
    throw UnsupportedCombination("unknown matrix format " +
                                 std::to_string(static_cast<int>(format)));
}

inline BatchSolveResult solve(
    const AnyBatchMatrix& a, const BatchMultiVector& b,
    const BatchMultiVector& x0, const SolveConfig& cfg,
    const DeviceProfile& device = default_device_profile())
{
    return std::visit(
        [&](const auto& m) { return solve(m, b, x0, cfg, device); }, a);
}


}  // namespace batchsolve
