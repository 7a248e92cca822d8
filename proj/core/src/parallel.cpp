#include "spdnn/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace spdnn {

std::size_t worker_count() {
    if (const char* env = std::getenv("SPDNN_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t work_per_item) {
    constexpr std::size_t kMinWorkPerThread = 1 << 16;
    std::size_t workers = std::min(worker_count(), n);
    if (work_per_item > 0)
        workers = std::min(workers, std::max<std::size_t>(1, n * work_per_item / kMinWorkPerThread));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    auto chunk = [&](std::size_t w) {
        std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
        for (std::size_t i = begin; i < end; ++i) fn(i);
    };
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(chunk, w);
    chunk(0);
}

} // namespace spdnn
