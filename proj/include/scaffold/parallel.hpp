// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace scaffold {

/// Fixed-size worker pool running one blocking parallel_for at a time.
/// Work is split into `size()` contiguous chunks; chunk w always goes to
/// worker w, and callers must make results independent of the split.
class ThreadPool {
public:
    using RangeFn = std::function<void(std::size_t begin, std::size_t end, std::size_t worker)>;

    explicit ThreadPool(std::size_t threads = 1) : count_(std::max<std::size_t>(1, threads)) {
        workers_.reserve(count_ - 1);
        for (std::size_t w = 1; w < count_; ++w) {
            workers_.emplace_back([this, w] { worker_loop(w); });
        }
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : workers_) {
            t.join();
        }
    }

    std::size_t size() const noexcept { return count_; }

    void parallel_for(std::size_t n, const RangeFn& fn) {
        if (n == 0) {
            return;
        }
        if (count_ == 1) {
            fn(0, n, 0);
            return;
        }
        {
            std::lock_guard lock(mutex_);
            job_ = &fn;
            job_size_ = n;
            pending_ = count_ - 1;
            error_ = nullptr;
            ++generation_;
        }
        wake_.notify_all();
        run_chunk(0);
        std::unique_lock lock(mutex_);
        done_.wait(lock, [this] { return pending_ == 0; });
        job_ = nullptr;
        if (error_) {
            std::rethrow_exception(std::exchange(error_, nullptr));
        }
    }

private:
    void run_chunk(std::size_t w) {
        const std::size_t begin = job_size_ * w / count_;
        const std::size_t end = job_size_ * (w + 1) / count_;
        if (begin < end) {
            try {
                (*job_)(begin, end, w);
            } catch (...) {
                std::lock_guard lock(mutex_);
                if (!error_) {
                    error_ = std::current_exception();
                }
            }
        }
    }

    void worker_loop(std::size_t w) {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) {
                    return;
                }
                seen = generation_;
            }
            run_chunk(w);
            {
                std::lock_guard lock(mutex_);
                --pending_;
            }
            done_.notify_one();
        }
    }

    std::size_t count_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const RangeFn* job_ = nullptr;
    std::size_t job_size_ = 0;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
};

/// Thread count from SCAFFOLD_THREADS, else hardware concurrency.
inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("SCAFFOLD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) {
            return static_cast<std::size_t>(v);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace scaffold
