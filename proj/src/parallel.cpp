#include "lf/parallel.hpp"

namespace lf {

static int g_max_workers = 0;

void set_max_workers(int n) { g_max_workers = n < 0 ? 0 : n; }

int max_workers() { return g_max_workers; }

int resolved_workers() {
    if (g_max_workers > 0) return g_max_workers;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace lf
