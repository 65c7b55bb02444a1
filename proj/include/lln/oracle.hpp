#pragma once

#include "lln/attention.hpp"
#include "lln/common.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace lln::oracle {

// Brute-force references used by tests and the verify command. These stay on
// separate code paths from the implementations they check: no stabilizing
// shifts, no two-pass shortcuts, nothing shared beyond elementary exp/log.

enum class KernelKind {
    exp_scaled,               // e^{q.k / sqrt(d)}
    elementwise_exp_product,  // sum_m e^{gq q_m} e^{gk k_m}
    quadratic,                // (q.k)^2
    relu                      // max(0, q.k)
};

KernelKind kernel_from_string(const std::string& s);

struct KernelSpec {
    KernelKind kind = KernelKind::exp_scaled;
    double gain_q = 1.0;
    double gain_k = 1.0;
};

// Materializes the full kernel matrix and normalizes rows. Throws
// DegenerateError on a nonpositive row sum (possible for quadratic/relu).
AttnResult brute_force_attention(const Mat& q, const Mat& k, const Mat& v,
                                 const KernelSpec& spec);

// Central differences (f(x + h e) - f(x - h e)) / 2h per entry.
Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x,
                     double h);

// Sample variance of ln(sum_{i=1..n} e^{Z_i}), Z_i i.i.d. N(0, sigma_sq).
double mc_lognormal_sum_var(double sigma_sq, int n, int trials,
                            std::uint64_t seed);

}  // namespace lln::oracle
