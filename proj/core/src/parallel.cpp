#include "tabgns/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace tabgns {

namespace {

std::atomic<std::size_t> g_max_threads{1};

std::size_t hardware_cap() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<std::size_t>(hc);
}

} // namespace

void set_max_threads(std::size_t n) {
    g_max_threads.store(std::clamp<std::size_t>(n, 1, hardware_cap()));
}

std::size_t max_threads() { return g_max_threads.load(); }

bool configure_threads_from_env(const char* var) {
    const char* value = std::getenv(var);
    if (value == nullptr || *value == '\0') return false;
    char* end = nullptr;
    const long parsed = std::strtol(value, &end, 10);
    if (end == value || parsed < 0) return false;
    set_max_threads(parsed <= 1 ? 1 : static_cast<std::size_t>(parsed));
    return true;
}

void parallel_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t threads = std::min(max_threads(), n);
    if (threads <= 1 || n < 64) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& w : workers) w.join();
}

} // namespace tabgns
