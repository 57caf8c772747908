#pragma once

#include <array>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "batchsolve/base.hpp"
#include "batchsolve/preconditioners.hpp"

namespace batchsolve {


enum class SolverKind { Cg, Bicgstab };


/**
 * Execution limits of a target device. The planners only read these
 * numbers; on the CPU backend the resulting plans select ELL row chunking
 * and are recorded in benchmark output.
 */
struct DeviceProfile {
    std::string name = "pvc-stack";
    size_type max_work_group_size = 1024;
    size_type fast_capacity_bytes = 128 * 1024;
    size_type sub_group_threshold = 64;

    bool operator==(const DeviceProfile&) const = default;
};

inline DeviceProfile default_device_profile() { return {}; }


/**
 * Reads `key = value` lines (keys: name, max_wg, slm_bytes, sg_threshold).
 * Blank lines and lines starting with '#' are ignored; missing keys keep
 * the default profile's value.
 */
inline DeviceProfile parse_device_profile(std::istream& in,
                                          const std::string& source = "profile")
{
    auto profile = default_device_profile();
    std::string line;
    size_type line_no = 0;
    auto trim = [](std::string_view s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string_view::npos) {
            return std::string{};
        }
        const auto last = s.find_last_not_of(" \t\r");
        return std::string{s.substr(first, last - first + 1)};
    };
    auto parse_count = [&](const std::string& text) {
        size_type pos = 0;
        unsigned long long value = 0;
        try {
            value = std::stoull(text, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != text.size() || text.front() == '-') {
            throw ParseError(source, line_no,
                             "expected a non-negative integer, got '" + text +
                                 "'");
        }
        return static_cast<size_type>(value);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty() || content.front() == '#') {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source, line_no, "expected 'key = value'");
        }
        const auto key = trim(std::string_view(content).substr(0, eq));
        const auto value = trim(std::string_view(content).substr(eq + 1));
        if (key == "name") {
            profile.name = value;
        } else if (key == "max_wg") {
            profile.max_work_group_size = parse_count(value);
        } else if (key == "slm_bytes") {
            profile.fast_capacity_bytes = parse_count(value);
        } else if (key == "sg_threshold") {
            profile.sub_group_threshold = parse_count(value);
        } else {
            throw ParseError(source, line_no, "unknown key '" + key + "'");
        }
    }
    if (profile.sub_group_threshold == 0) {
        throw ParseError(source, 0, "sg_threshold must be >= 1");
    }
    return profile;
}

inline DeviceProfile load_device_profile(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open device profile");
    }
    return parse_device_profile(in, path);
}


// Launch configuration

inline constexpr std::array<size_type, 2> supported_sub_group_sizes{16, 32};

inline bool is_supported_sub_group_size(size_type sg)
{
    return sg == 16 || sg == 32;
}


/// Smallest multiple of the sub-group size covering all rows, capped at the
/// device maximum.
inline size_type select_work_group_size(size_type num_rows,
                                        size_type sub_group_size,
                                        size_type device_max)
{
    if (!is_supported_sub_group_size(sub_group_size)) {
        throw InvalidDimension("unsupported sub-group size " +
                               std::to_string(sub_group_size));
    }
    if (device_max == 0 || device_max % sub_group_size != 0) {
        throw InvalidDimension("device max work-group size " +
                               std::to_string(device_max) +
                               " is not a multiple of sub-group size " +
                               std::to_string(sub_group_size));
    }
    if (num_rows > device_max) {
        return device_max;
    }
    const auto rounded =
        (num_rows + sub_group_size - 1) / sub_group_size * sub_group_size;
    return std::max(rounded, sub_group_size);
}


/// Small matrices (num_rows <= threshold) use 16-wide sub-groups.
inline size_type select_sub_group_size(size_type num_rows, size_type threshold)
{
    return num_rows <= threshold ? 16 : 32;
}


struct LaunchOverrides {
    std::optional<size_type> work_group_size;
    std::optional<size_type> sub_group_size;
};


struct LaunchPlan {
    size_type work_group_size = 0;
    size_type sub_group_size = 0;
    std::vector<std::string> notes;

    std::string summary() const
    {
        return "wg=" + std::to_string(work_group_size) +
               ";sg=" + std::to_string(sub_group_size);
    }
};


inline LaunchPlan make_launch_plan(size_type num_rows,
                                   const DeviceProfile& device,
                                   const LaunchOverrides& overrides = {})
{
    LaunchPlan plan;
    plan.notes.push_back("device profile '" + device.name + "'");
    if (overrides.sub_group_size) {
        plan.sub_group_size = *overrides.sub_group_size;
        if (!is_supported_sub_group_size(plan.sub_group_size)) {
            throw InvalidOverride("sub-group size override " +
                                  std::to_string(plan.sub_group_size) +
                                  " is not one of 16, 32");
        }
        plan.notes.push_back("sub-group size overridden");
    } else {
        plan.sub_group_size =
            select_sub_group_size(num_rows, device.sub_group_threshold);
        plan.notes.push_back(
            "sub-group threshold " +
            std::to_string(device.sub_group_threshold) +
            " is a placeholder, not calibrated for this device");
    }
    const auto selected = select_work_group_size(
        num_rows, plan.sub_group_size, device.max_work_group_size);
    if (overrides.work_group_size) {
        const auto wg = *overrides.work_group_size;
        if (wg == 0 || wg % plan.sub_group_size != 0) {
            throw InvalidOverride("work-group size override " +
                                  std::to_string(wg) +
                                  " is not divisible by sub-group size " +
                                  std::to_string(plan.sub_group_size));
        }
        if (wg > device.max_work_group_size) {
            throw InvalidOverride("work-group size override " +
                                  std::to_string(wg) +
                                  " exceeds device maximum " +
                                  std::to_string(device.max_work_group_size));
        }
        if (wg < selected) {
            throw InvalidOverride("work-group size override " +
                                  std::to_string(wg) + " does not cover " +
                                  std::to_string(num_rows) + " rows");
        }
        plan.work_group_size = wg;
        plan.notes.push_back("work-group size overridden");
    } else {
        plan.work_group_size = selected;
    }
    return plan;
}


// Workspace tiering

enum class MemoryTier { Fast, Main };

struct WorkspaceAssignment {
    std::string name;
    MemoryTier tier = MemoryTier::Main;
    size_type bytes = 0;
};

struct WorkspacePlan {
    std::vector<WorkspaceAssignment> assignments;
    size_type fast_capacity = 0;
    size_type fast_used = 0;

    size_type fast_count() const
    {
        size_type n = 0;
        for (const auto& a : assignments) {
            n += a.tier == MemoryTier::Fast;
        }
        return n;
    }
};


/// Solver vectors in decreasing placement priority (usage frequency and
/// size). The BiCGSTAB order extends the CG rule to its larger vector set.
inline std::vector<std::string> workspace_priority(SolverKind solver)
{
    if (solver == SolverKind::Cg) {
        return {"r", "z", "p", "t", "x"};
    }
    return {"r", "p", "v", "s", "t", "z", "r_hat", "x"};
}


/**
 * Greedy whole-vector placement: walk the priority list and keep vectors in
 * the fast tier until the first one that does not fit; it and everything
 * after it go to main memory. The preconditioner workspace comes last.
 */
inline WorkspacePlan plan_workspace(
    SolverKind solver, size_type num_rows, size_type scalar_bytes,
    size_type fast_capacity,
    PreconditionerKind precond = PreconditionerKind::ScalarJacobi)
{
    WorkspacePlan plan;
    plan.fast_capacity = fast_capacity;
    const auto vector_bytes = num_rows * scalar_bytes;
    auto items = workspace_priority(solver);
    std::vector<size_type> sizes(items.size(), vector_bytes);
    if (precond == PreconditionerKind::ScalarJacobi) {
        items.push_back("precond");
        sizes.push_back(vector_bytes);
    }
    bool spilled = false;
    for (size_type i = 0; i < items.size(); ++i) {
        auto tier = MemoryTier::Main;
        if (!spilled && plan.fast_used + sizes[i] <= fast_capacity) {
            tier = MemoryTier::Fast;
            plan.fast_used += sizes[i];
        } else {
            spilled = true;
        }
        plan.assignments.push_back({items[i], tier, sizes[i]});
    }
    return plan;
}


}  // namespace batchsolve
