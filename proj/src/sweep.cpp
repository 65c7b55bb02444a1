#include "lln/sweep.hpp"

#include "lln/attention.hpp"
#include "lln/io.hpp"
#include "lln/moment_match.hpp"
#include "lln/oracle.hpp"
#include "lln/rng.hpp"
#include "lln/stats.hpp"

#include <cmath>
#include <sstream>

namespace lln {

std::vector<SweepRow> kernel_sweep(const std::vector<std::string>& kernels,
                                   const std::vector<double>& temps, int n,
                                   int d, std::uint64_t seed) {
    if (kernels.empty() || temps.empty())
        throw DomainError("need at least one kernel and one temperature");
    for (double tau : temps)
        if (!(tau > 0.0)) throw DomainError("temperatures must be positive");

    // Shared base draws, rescaled jointly per temperature; scale-invariant
    // kernels (quadratic, relu) therefore see identical matrices at every
    // temperature.
    auto gen = make_rng(derive_seed(seed, 42));
    const Mat base_q = gaussian_matrix(n, d, 1.0, gen);
    const Mat base_k = gaussian_matrix(n, d, 1.0, gen);

    MatchConfig mcfg;
    mcfg.n_tokens = n;
    mcfg.dim = d;
    mcfg.n_seeds = 8;
    mcfg.seed = derive_seed(seed, 7);

    std::vector<SweepRow> rows;
    for (const std::string& kname : kernels) {
        for (double tau : temps) {
            const double sigma = std::sqrt(1.0 / tau);
            const Mat q = sigma * base_q;
            const Mat k = sigma * base_k;
            SweepRow row;
            row.kernel = kname;
            row.temperature = tau;
            std::optional<Mat> weights;
            try {
                if (kname == "softmax") {
                    weights = Mat(softmax_log_weights(q, k).array().exp());
                } else if (kname == "lln") {
                    // Match the model target sigma_sm^2 = 1/tau^2 at this
                    // temperature.
                    const double spread = solve_feature_spread(
                        1.0 / (tau * tau), mcfg, &measure_sigma_lln_sq);
                    const double gain = std::sqrt(spread / 2.0) / sigma;
                    weights = Mat(lln_log_weights(q, k, gain, gain).array().exp());
                } else if (kname == "lln-nomatch") {
                    weights = Mat(lln_log_weights(q, k, 1.0, 1.0).array().exp());
                } else if (kname == "quadratic" || kname == "relu") {
                    weights = oracle::brute_force_attention(
                                  q, k, k,
                                  {oracle::kernel_from_string(kname), 1.0, 1.0})
                                  .weights;
                } else {
                    throw DomainError("unknown kernel: " + kname);
                }
            } catch (const DegenerateError&) {
                weights.reset();  // degenerate rows: empty metric cells
            }
            if (weights) {
                row.entropy_bits = matrix_entropy(*weights);
                row.spectral_gap = spectral_gap(*weights).gap;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string sweep_csv_header() {
    return "kernel,temperature,entropy_bits,spectral_gap";
}

std::string sweep_row_csv(const SweepRow& row) {
    std::ostringstream os;
    os << row.kernel << ',' << format_double(row.temperature) << ',';
    if (row.entropy_bits) os << format_double(*row.entropy_bits);
    os << ',';
    if (row.spectral_gap) os << format_double(*row.spectral_gap);
    return os.str();
}

}  // namespace lln
