// SPDX-License-Identifier: Apache-2.0
#include "ogs/parallel.hpp"

#include <cstdlib>
#include <memory>

namespace ogs {

ThreadPool::ThreadPool(int threads) {
    if (threads < 1) threads = 1;
    for (int i = 1; i < threads; ++i)
        workers_.emplace_back([this, i] { worker_loop(i); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    cv_start_.notify_all();
    for (auto& w : workers_) w.join();
}

void ThreadPool::worker_loop(int index) {
    std::uint64_t seen = 0;
    for (;;) {
        Task task;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_start_.wait(lock, [&] { return stop_ || generation_ > seen; });
            if (stop_) return;
            seen = generation_;
            task = task_;
        }
        const int nt = size();
        const std::int64_t chunk = (task.n + nt - 1) / nt;
        const std::int64_t begin = chunk * index;
        const std::int64_t end = std::min<std::int64_t>(task.n, begin + chunk);
        if (begin < end) (*task.fn)(begin, end, index);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --pending_;
        }
        cv_done_.notify_one();
    }
}

void ThreadPool::run_chunks(std::int64_t n,
                            const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
    if (n <= 0) return;
    const int nt = size();
    if (nt == 1 || n == 1) {
        fn(0, n, 0);
        return;
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        task_ = Task{&fn, n, ++generation_};
        pending_ = static_cast<int>(workers_.size());
    }
    cv_start_.notify_all();

    const std::int64_t chunk = (n + nt - 1) / nt;
    fn(0, std::min<std::int64_t>(n, chunk), 0);

    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [&] { return pending_ == 0; });
}

namespace {

int default_threads() {
    if (const char* env = std::getenv("OGS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

std::unique_ptr<ThreadPool> g_pool;

} // namespace

ThreadPool& global_pool() {
    if (!g_pool) g_pool = std::make_unique<ThreadPool>(default_threads());
    return *g_pool;
}

void set_global_threads(int threads) {
    g_pool = std::make_unique<ThreadPool>(threads < 1 ? 1 : threads);
}

void parallel_chunks(std::int64_t n,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
    global_pool().run_chunks(n, fn);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    parallel_chunks(n, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
}

} // namespace ogs
