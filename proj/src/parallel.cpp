#include "poisonforge/parallel.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poisonforge {

namespace {
std::atomic<int> g_threads{0}; // 0 = not configured yet
}

int hardware_threads() {
#ifdef _OPENMP
    return std::max(1, omp_get_max_threads());
#else
    return 1;
#endif
}

int num_threads() {
    int t = g_threads.load(std::memory_order_relaxed);
    return t > 0 ? t : hardware_threads();
}

void set_num_threads(int n) { g_threads.store(std::max(0, n), std::memory_order_relaxed); }

} // namespace poisonforge
