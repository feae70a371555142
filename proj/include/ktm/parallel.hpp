#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ktm {

/// Selects between the OpenMP path and the serial reference loop. Both
/// produce bit-identical results; the serial path exists for testing and
/// benchmarking.
enum class Execution { serial, parallel };

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Runs f(i) for i in [0, n). Iterations must be independent.
template <typename F>
void parallel_for(std::size_t n, F &&f, Execution exec = Execution::parallel) {
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        f(static_cast<std::size_t>(i));
    }
}

/// Contiguous [begin, end) block of `n` items owned by `part` of `parts`.
struct Block {
    std::size_t begin;
    std::size_t end;
};

inline Block block_of(std::size_t n, std::size_t part, std::size_t parts) {
    const std::size_t base = n / parts;
    const std::size_t extra = n % parts;
    const std::size_t begin = part * base + (part < extra ? part : extra);
    return {begin, begin + base + (part < extra ? 1 : 0)};
}

}  // namespace ktm
