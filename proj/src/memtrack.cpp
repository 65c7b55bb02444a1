#include "lln/memtrack.hpp"

#include <algorithm>

namespace lln::memtrack {

namespace {
thread_local std::uint64_t g_current = 0;
thread_local std::uint64_t g_peak = 0;
}  // namespace

void reset() {
    g_current = 0;
    g_peak = 0;
}

std::uint64_t current_bytes() { return g_current; }
std::uint64_t peak_bytes() { return g_peak; }

ScopedCharge::ScopedCharge(std::uint64_t bytes) : bytes_(bytes) {
    g_current += bytes_;
    g_peak = std::max(g_peak, g_current);
}

ScopedCharge::~ScopedCharge() { g_current -= bytes_; }

}  // namespace lln::memtrack
