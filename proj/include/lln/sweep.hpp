#pragma once

#include "lln/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lln {

struct SweepRow {
    std::string kernel;
    double temperature = 0.0;
    // Empty when the kernel degenerates at this cell (relu zero rows).
    std::optional<double> entropy_bits;
    std::optional<double> spectral_gap;
};

// One row per (kernel, temperature). Inputs are shared base Gaussian draws
// rescaled per temperature so sigma_q = sigma_k = tau^{-1/2}; the lln kernel
// is moment-matched per temperature against the model target 1/tau^2.
std::vector<SweepRow> kernel_sweep(const std::vector<std::string>& kernels,
                                   const std::vector<double>& temps, int n,
                                   int d, std::uint64_t seed);

std::string sweep_csv_header();
std::string sweep_row_csv(const SweepRow& row);

}  // namespace lln
