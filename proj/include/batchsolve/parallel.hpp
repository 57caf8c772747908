#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "batchsolve/base.hpp"

namespace batchsolve {


/// Resolve a requested worker count; 0 means one per hardware thread.
inline unsigned resolve_workers(unsigned requested, size_type num_items)
{
    unsigned workers = requested;
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    return static_cast<unsigned>(
        std::max<size_type>(1, std::min<size_type>(workers, num_items)));
}


/**
 * Split [0, num_items) into contiguous blocks, one per worker, and call
 * `body(begin, end)` for each block. Blocks never overlap, so bodies that
 * only write to their own items need no synchronization. The calling thread
 * runs the first block. The first exception thrown by any block is
 * rethrown after all workers joined.
 */
template <typename Body>
void parallel_for_blocks(size_type num_items, unsigned requested_workers,
                         Body&& body)
{
    if (num_items == 0) {
        return;
    }
    const auto workers = resolve_workers(requested_workers, num_items);
    if (workers == 1) {
        body(size_type{0}, num_items);
        return;
    }
    const auto block = (num_items + workers - 1) / workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&](size_type begin, size_type end) {
        try {
            body(begin, end);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers - 1);
        for (unsigned w = 1; w < workers; ++w) {
            const auto begin = std::min(num_items, w * block);
            const auto end = std::min(num_items, begin + block);
            if (begin < end) {
                threads.emplace_back(run, begin, end);
            }
        }
        run(0, std::min(num_items, block));
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}


}  // namespace batchsolve
