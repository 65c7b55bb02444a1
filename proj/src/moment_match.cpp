#include "lln/moment_match.hpp"

#include "lln/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace lln {

MatchConfig::MatchConfig() {
    sigma_tilde_sq_grid.resize(8);
    for (int i = 0; i < 8; ++i)
        sigma_tilde_sq_grid[i] = 1.0 + 3.0 * i / 7.0;
}

void MatchConfig::validate() const {
    if (sigma_tilde_sq_grid.size() < 2)
        throw DomainError("grid needs at least 2 points");
    for (double s : sigma_tilde_sq_grid)
        if (!(s > 0.0) || s > 16.0)
            throw DomainError("grid values must lie in (0, 16]");
    if (n_tokens < 2) throw DomainError("n_tokens must be >= 2");
    if (dim < 1) throw DomainError("dim must be >= 1");
    if (n_seeds < 1) throw DomainError("n_seeds must be >= 1");
    if (!(sigma_q > 0.0) || !(sigma_k > 0.0))
        throw DomainError("sigma_q and sigma_k must be positive");
}

namespace {

double log_matrix_variance(const Mat& ln_weights) {
    const double mean = ln_weights.mean();
    return (ln_weights.array() - mean).square().mean();
}

}  // namespace

double measure_sigma_sm_sq(double sigma_tilde_sq, const MatchConfig& cfg) {
    cfg.validate();
    if (!(sigma_tilde_sq > 0.0)) throw DomainError("sigma_tilde_sq must be positive");
    const double sigma = std::pow(sigma_tilde_sq, 0.25);
    double acc = 0.0;
    for (int s = 0; s < cfg.n_seeds; ++s) {
        auto gen = make_rng(derive_seed(cfg.seed, 2 * s));
        Mat q = gaussian_matrix(cfg.n_tokens, cfg.dim, sigma, gen);
        Mat k = gaussian_matrix(cfg.n_tokens, cfg.dim, sigma, gen);
        acc += log_matrix_variance(softmax_log_weights(q, k));
    }
    return acc / cfg.n_seeds;
}

double measure_sigma_lln_sq(double sigma_tilde_sq, const MatchConfig& cfg) {
    cfg.validate();
    if (!(sigma_tilde_sq > 0.0)) throw DomainError("sigma_tilde_sq must be positive");
    const double sigma = std::pow(sigma_tilde_sq, 0.25);
    const double gain = std::sqrt(sigma_tilde_sq / 2.0) / sigma;
    double acc = 0.0;
    for (int s = 0; s < cfg.n_seeds; ++s) {
        auto gen = make_rng(derive_seed(cfg.seed, 2 * s + 1));
        Mat q = gaussian_matrix(cfg.n_tokens, cfg.dim, sigma, gen);
        Mat k = gaussian_matrix(cfg.n_tokens, cfg.dim, sigma, gen);
        acc += log_matrix_variance(lln_log_weights(q, k, gain, gain));
    }
    return acc / cfg.n_seeds;
}

double solve_feature_spread(double target, const MatchConfig& cfg,
                            const MeasureFn& measure_lln) {
    if (!(target > 0.0)) throw CalibrationError("matching target must be positive");
    constexpr double kMaxSpread = 120.0;
    double lo = 0.25, hi = 8.0;
    double flo = measure_lln(lo, cfg);
    double fhi = measure_lln(hi, cfg);
    while (fhi < target && hi < kMaxSpread) {
        lo = hi;
        flo = fhi;
        hi *= 1.6;
        fhi = measure_lln(hi, cfg);
    }
    while (flo > target && lo > 1e-4) {
        hi = lo;
        fhi = flo;
        lo *= 0.5;
        flo = measure_lln(lo, cfg);
    }
    if (fhi < target || flo > target)
        throw CalibrationError("matching target outside reachable variance range");
    // Secant step clamped to the bracket; the measurement is deterministic
    // under fixed seeds, so this behaves like a smooth monotone function.
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 80; ++it) {
        t = lo + (hi - lo) * (target - flo) / std::max(fhi - flo, 1e-300);
        const double margin = 1e-6 * (hi - lo);
        t = std::min(std::max(t, lo + margin), hi - margin);
        const double ft = measure_lln(t, cfg);
        if (std::abs(ft - target) <= 1e-4 * std::max(1.0, target)) return t;
        if (ft < target) {
            lo = t;
            flo = ft;
        } else {
            hi = t;
            fhi = ft;
        }
    }
    return 0.5 * (lo + hi);
}

MatchResult fit_broad_constants(const MatchConfig& cfg) {
    return fit_broad_constants(cfg, &measure_sigma_sm_sq, &measure_sigma_lln_sq);
}

MatchResult fit_broad_constants(const MatchConfig& cfg, const MeasureFn& sm,
                                const MeasureFn& lln) {
    cfg.validate();
    MatchResult res;
    const std::size_t g = cfg.sigma_tilde_sq_grid.size();
    std::vector<double> targets(g), spreads(g);
    res.grid.resize(g);
    for (std::size_t i = 0; i < g; ++i) {
        const double s = cfg.sigma_tilde_sq_grid[i];
        targets[i] = sm(s, cfg);
        res.grid[i] = {s, targets[i], lln(s, cfg)};
    }
    for (std::size_t i = 0; i < g; ++i)
        spreads[i] = solve_feature_spread(targets[i], cfg, lln);

    // Least-squares line target = a * spread + b.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < g; ++i) {
        sx += spreads[i];
        sy += targets[i];
        sxx += spreads[i] * spreads[i];
        sxy += spreads[i] * targets[i];
    }
    const double n = static_cast<double>(g);
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12 * std::max(1.0, sxx))
        throw DegenerateError("singular fit: grid points coincide");
    res.a = (n * sxy - sx * sy) / det;
    res.b = (sy * sxx - sx * sxy) / det;
    if (!(res.a > 0.0))
        throw DegenerateError("fitted slope must be positive");

    res.residual = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        const double line = res.a * spreads[i] + res.b;
        res.residual = std::max(
            res.residual, std::abs(targets[i] - line) / std::abs(targets[i]));
    }
    res.params = solve_alpha_beta(res.a, res.b, cfg.sigma_q, cfg.sigma_k);
    return res;
}

LLNParams solve_alpha_beta(double a, double b, double sigma_q, double sigma_k) {
    if (!(a > 0.0)) throw DomainError("a must be positive");
    if (!(sigma_q > 0.0) || !(sigma_k > 0.0))
        throw DomainError("sigmas must be positive");
    const double prod = sigma_q * sigma_q * sigma_k * sigma_k;
    if (!(prod > b))
        throw CalibrationError(
            "calibration infeasible: sigma_q^2 sigma_k^2 <= b (inputs too "
            "narrow for the broad regime)");
    LLNParams p;
    p.a = a;
    p.b = b;
    p.sigma_q = sigma_q;
    p.sigma_k = sigma_k;
    p.sigma_tilde = std::sqrt((prod - b) / a);
    p.alpha = p.sigma_tilde / (std::sqrt(2.0) * sigma_q);
    p.beta = p.sigma_tilde / (std::sqrt(2.0) * sigma_k);
    p.validate();
    return p;
}

std::string match_result_to_json(const MatchResult& r) {
    nlohmann::ordered_json j;
    j["a"] = r.a;
    j["b"] = r.b;
    j["alpha"] = r.params.alpha;
    j["beta"] = r.params.beta;
    j["sigma_q"] = r.params.sigma_q;
    j["sigma_k"] = r.params.sigma_k;
    j["sigma_tilde"] = r.params.sigma_tilde;
    j["residual"] = r.residual;
    j["grid"] = nlohmann::ordered_json::array();
    for (const auto& gp : r.grid) {
        j["grid"].push_back({{"s2", gp.sigma_tilde_sq},
                             {"sm", gp.sigma_sm_sq},
                             {"lln", gp.sigma_lln_sq}});
    }
    return j.dump(2);
}

}  // namespace lln
