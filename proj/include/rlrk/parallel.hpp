#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rlrk {

/// Worker cap for all internal parallelism. Initialized from RLRK_THREADS
/// (falling back to hardware concurrency); tests override it to check
/// determinism across thread counts.
void set_thread_count(int n);
int thread_count();

/// Runs fn(chunk) for chunk = 0..num_chunks-1 on up to thread_count()
/// workers. Chunk boundaries never depend on the worker count, so any
/// chunk-wise partial results can be reduced deterministically afterwards.
/// Nested calls (from inside a worker) execute inline.
void run_chunks(std::size_t num_chunks, const std::function<void(std::size_t)>& fn);

/// Fixed chunk count for n items: independent of thread count by design.
inline std::size_t chunk_count(std::size_t n) {
    const std::size_t kMaxChunks = 64;
    return n < kMaxChunks ? (n == 0 ? 1 : n) : kMaxChunks;
}

/// [begin, end) of chunk c when n items are split into `chunks` pieces.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, std::size_t chunks,
                                                       std::size_t c) {
    const std::size_t base = n / chunks, rem = n % chunks;
    const std::size_t begin = c * base + (c < rem ? c : rem);
    return {begin, begin + base + (c < rem ? 1 : 0)};
}

/// In-place pairwise tree reduction of partials[0..k): combine(a, b) folds b
/// into a. The combining order depends only on k, giving bit-reproducible
/// floating-point sums.
template <class T, class Combine>
T& tree_reduce(std::vector<T>& partials, Combine combine) {
    for (std::size_t stride = 1; stride < partials.size(); stride *= 2) {
        for (std::size_t i = 0; i + stride < partials.size(); i += 2 * stride) {
            combine(partials[i], partials[i + stride]);
        }
    }
    return partials.front();
}

}  // namespace rlrk
