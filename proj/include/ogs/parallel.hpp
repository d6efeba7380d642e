// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ogs {

// Static-partition worker pool. Work item i always lands on the same worker
// for a given (n, num_threads), which keeps per-thread accumulation orders
// stable and makes parallel reductions bit-reproducible.
class ThreadPool {
  public:
    explicit ThreadPool(int threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // fn(begin, end, thread_index); thread 0 is the calling thread.
    void run_chunks(std::int64_t n,
                    const std::function<void(std::int64_t, std::int64_t, int)>& fn);

  private:
    struct Task {
        const std::function<void(std::int64_t, std::int64_t, int)>* fn = nullptr;
        std::int64_t n = 0;
        std::uint64_t generation = 0;
    };

    void worker_loop(int index);

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    Task task_;
    std::uint64_t generation_ = 0;
    int pending_ = 0;
    bool stop_ = false;
};

// Process-wide pool; size from OGS_THREADS or hardware_concurrency.
ThreadPool& global_pool();
void set_global_threads(int threads);

// parallel_for over [0, n) with static chunking on the global pool.
void parallel_chunks(std::int64_t n,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn);

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

} // namespace ogs
