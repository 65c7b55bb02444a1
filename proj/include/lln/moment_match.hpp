#pragma once

#include "lln/attention.hpp"
#include "lln/common.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace lln {

struct MatchConfig {
    std::vector<double> sigma_tilde_sq_grid;  // defaults to 8 points in [1, 4]
    int n_tokens = 256;
    int dim = 64;
    int n_seeds = 16;
    std::uint64_t seed = 0;
    // Operating point at which the fitted constants are turned into params.
    double sigma_q = 1.0;
    double sigma_k = 1.0;

    MatchConfig();
    void validate() const;
};

struct GridPoint {
    double sigma_tilde_sq = 0.0;   // requested grid value
    double sigma_sm_sq = 0.0;      // measured softmax log-variance (target)
    double sigma_lln_sq = 0.0;     // measured LLN log-variance at that spread
};

struct MatchResult {
    double a = 0.0;
    double b = 0.0;
    LLNParams params;
    double residual = 0.0;  // max relative gap between targets and the line
    std::vector<GridPoint> grid;
};

// Variance of ln(softmax attention entries) for inputs with
// sigma_q = sigma_k = sigma_tilde_sq^(1/4), averaged over cfg.n_seeds seeds.
double measure_sigma_sm_sq(double sigma_tilde_sq, const MatchConfig& cfg);

// Same sampling protocol for LLN attention with the symmetric gain split
// alpha^2 sigma_q^2 = beta^2 sigma_k^2 = sigma_tilde_sq / 2.
double measure_sigma_lln_sq(double sigma_tilde_sq, const MatchConfig& cfg);

using MeasureFn = std::function<double(double, const MatchConfig&)>;

// Finds the feature spread at which the LLN log-variance reaches `target`
// (monotone secant/bisection on the seeded, hence deterministic, measurement).
double solve_feature_spread(double target, const MatchConfig& cfg,
                            const MeasureFn& measure_lln);

// Broad-regime calibration: measure softmax targets over the grid, solve the
// matching feature spread for each, then least-squares the line
// target = a * spread + b through the solved pairs. Eq. 11 then recovers the
// spreads from (a, b).
MatchResult fit_broad_constants(const MatchConfig& cfg);
MatchResult fit_broad_constants(const MatchConfig& cfg, const MeasureFn& sm,
                                const MeasureFn& lln);

// alpha = st / (sqrt(2) sigma_q), beta = st / (sqrt(2) sigma_k),
// st = sqrt((sigma_q^2 sigma_k^2 - b) / a). Throws CalibrationError when
// sigma_q^2 sigma_k^2 <= b.
LLNParams solve_alpha_beta(double a, double b, double sigma_q, double sigma_k);

std::string match_result_to_json(const MatchResult& r);

}  // namespace lln
