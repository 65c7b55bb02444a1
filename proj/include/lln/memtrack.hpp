#pragma once

#include <cstddef>
#include <cstdint>

namespace lln::memtrack {

// High-water-mark accounting of the attention module's own matrix buffers.
// Scoped charges are thread-local, so concurrent benchmark cells do not
// interfere. Deterministic by construction (no allocator hooks, no RSS).

void reset();
std::uint64_t current_bytes();
std::uint64_t peak_bytes();

class ScopedCharge {
public:
    explicit ScopedCharge(std::uint64_t bytes);
    ScopedCharge(const ScopedCharge&) = delete;
    ScopedCharge& operator=(const ScopedCharge&) = delete;
    ~ScopedCharge();

private:
    std::uint64_t bytes_;
};

inline std::uint64_t matrix_bytes(std::int64_t rows, std::int64_t cols) {
    return static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) *
           sizeof(double);
}

}  // namespace lln::memtrack
