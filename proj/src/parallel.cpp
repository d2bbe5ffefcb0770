#include "rlrk/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace rlrk {
namespace {

int initial_thread_count() {
    if (const char* env = std::getenv("RLRK_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_threads{initial_thread_count()};
thread_local bool tl_inside_worker = false;

}  // namespace

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

int thread_count() { return g_threads.load(); }

void run_chunks(std::size_t num_chunks, const std::function<void(std::size_t)>& fn) {
    if (num_chunks == 0) return;
    const int workers = thread_count();
    if (workers <= 1 || num_chunks == 1 || tl_inside_worker) {
        for (std::size_t c = 0; c < num_chunks; ++c) fn(c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        tl_inside_worker = true;
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= num_chunks) break;
            try {
                fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                break;
            }
        }
        tl_inside_worker = false;
    };

    const std::size_t spawn =
        std::min<std::size_t>(static_cast<std::size_t>(workers), num_chunks) - 1;
    std::vector<std::thread> pool;
    pool.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rlrk
