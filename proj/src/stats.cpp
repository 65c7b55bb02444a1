#include "lln/stats.hpp"

#include "lln/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace lln {

namespace {

double population_variance(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / n;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double empirical_temperature(const Mat& q, const Mat& k) {
    require_same_shape(q, k, "q vs k");
    require_finite(q, "q");
    require_finite(k, "k");
    const Eigen::Index n = q.rows();
    if (n * n < 2) throw DomainError("need at least 2 scores");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Mat scores = (q * k.transpose()) * scale;
    const double mean = scores.mean();
    const double var = (scores.array() - mean).square().mean();
    if (!(var > 0.0)) throw DegenerateError("zero score variance");
    return 1.0 / std::sqrt(var);
}

double theoretical_temperature(double sigma_q, double sigma_k, double c_cross) {
    const double radicand = sigma_q * sigma_q * sigma_k * sigma_k + c_cross;
    if (!(radicand > 0.0))
        throw DomainError("sigma_q^2 sigma_k^2 + c_cross must be positive");
    return 1.0 / std::sqrt(radicand);
}

double estimate_c_cross(const Mat& q, const Mat& k) {
    require_same_shape(q, k, "q vs k");
    const Eigen::Index n = q.size();
    if (n < 2) throw DomainError("need at least 2 paired samples");
    const auto x = q.reshaped();
    const auto y = k.reshaped();
    const double mx = x.mean(), my = y.mean();
    const double mx2 = x.array().square().mean();
    const double my2 = y.array().square().mean();
    const double cov_sq =
        (x.array().square() * y.array().square()).mean() - mx2 * my2;
    const double cov = (x.array() * y.array()).mean() - mx * my;
    return cov_sq - cov * cov;
}

double matrix_entropy(const Mat& p) {
    require_row_stochastic(p);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            const double w = p(i, j);
            if (w > 0.0) acc -= w * std::log2(w);
        }
    }
    return acc / static_cast<double>(p.rows());
}

Mat deflate(const Mat& p) {
    require_row_stochastic(p);
    const Eigen::Index n = p.rows();
    Vec mu = p.colwise().mean().transpose();  // (1/N) P^T 1
    return p - Vec::Ones(n) * mu.transpose();
}

std::pair<double, double> deflation_centering_check(const Mat& p) {
    Mat pb = deflate(p);
    const double row_resid = pb.rowwise().sum().cwiseAbs().maxCoeff();
    const double col_resid = pb.colwise().sum().cwiseAbs().maxCoeff();
    return {row_resid, col_resid};
}

SpectralResult spectral_gap_dense(const Mat& p) {
    if (p.rows() < 2) throw ShapeError("spectral gap needs N >= 2");
    Mat pb = deflate(p);
    Eigen::EigenSolver<Mat> solver(pb, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("dense eigendecomposition failed", 0.0);
    const auto& vals = solver.eigenvalues();
    Eigen::Index best = 0;
    double best_mod = 0.0;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double m = std::abs(vals(i));
        if (m > best_mod) {
            best_mod = m;
            best = i;
        }
    }
    SpectralResult r;
    r.lambda2_mod = best_mod;
    r.gap = 1.0 - best_mod;
    r.v2 = solver.eigenvectors().col(best);
    return r;
}

// Restarted Arnoldi on the deflated operator v -> P v - 1 (mu . v).
// Only the eigenvalue modulus is needed, so convergence is declared when the
// dominant Ritz modulus stabilizes and its Arnoldi residual is small.
SpectralResult spectral_gap_power(const Mat& p, double tol, int max_matvecs) {
    if (p.rows() < 2) throw ShapeError("spectral gap needs N >= 2");
    require_row_stochastic(p);
    const Eigen::Index n = p.rows();
    const Vec mu = p.colwise().mean().transpose();
    const auto apply = [&](const Vec& x) -> Vec {
        return p * x - Vec::Ones(n) * mu.dot(x);
    };

    const int m = static_cast<int>(std::min<Eigen::Index>(24, n - 1));
    auto gen = make_rng(0x5eedULL);
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(gen);
    v.normalize();

    int matvecs = 0;
    double prev_est = -1.0;
    double last_resid = std::numeric_limits<double>::infinity();
    while (matvecs < max_matvecs) {
        Mat V(n, m + 1);
        Mat H = Mat::Zero(m + 1, m);
        V.col(0) = v;
        int k_eff = m;
        for (int j = 0; j < m; ++j) {
            Vec w = apply(V.col(j));
            ++matvecs;
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(w);
                w -= H(i, j) * V.col(i);
            }
            for (int i = 0; i <= j; ++i) {  // one reorthogonalization pass
                const double c = V.col(i).dot(w);
                H(i, j) += c;
                w -= c * V.col(i);
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) < 1e-14) {
                k_eff = j + 1;
                break;
            }
            V.col(j + 1) = w / H(j + 1, j);
        }
        Eigen::EigenSolver<Mat> es(H.topLeftCorner(k_eff, k_eff), true);
        Eigen::Index best = 0;
        double best_mod = 0.0;
        for (Eigen::Index i = 0; i < k_eff; ++i) {
            const double mod = std::abs(es.eigenvalues()(i));
            if (mod > best_mod) {
                best_mod = mod;
                best = i;
            }
        }
        const Eigen::VectorXcd y = es.eigenvectors().col(best);
        // Arnoldi residual for the dominant Ritz pair.
        last_resid = (k_eff < m) ? 0.0
                                 : H(k_eff, k_eff - 1) * std::abs(y(k_eff - 1));
        const bool stable =
            prev_est >= 0.0 &&
            std::abs(best_mod - prev_est) <= tol * std::max(1.0, best_mod);
        if (stable && last_resid <= 1e-8 * std::max(1.0, best_mod)) {
            SpectralResult r;
            r.lambda2_mod = best_mod;
            r.gap = 1.0 - best_mod;
            r.v2 = V.leftCols(k_eff) * y;
            return r;
        }
        prev_est = best_mod;
        Vec vr = (V.leftCols(k_eff) * y).real();
        if (vr.norm() < 1e-12) vr = (V.leftCols(k_eff) * y).imag();
        // Perturb slightly when stagnating on a conjugate pair.
        if (stable) {
            auto g2 = make_rng(derive_seed(0x5eedULL, matvecs));
            for (Eigen::Index i = 0; i < n; ++i)
                vr(i) += 1e-6 * dist(g2);
        }
        v = vr.normalized();
    }
    throw ConvergenceError("power iteration did not converge", last_resid);
}

SpectralResult spectral_gap(const Mat& p) {
    return p.rows() <= kDenseSpectralLimit ? spectral_gap_dense(p)
                                           : spectral_gap_power(p);
}

std::pair<double, double> lognormal_predict(double n, double sigma_sm_sq) {
    if (!(n >= 2.0)) throw DomainError("lognormal_predict needs n >= 2");
    if (sigma_sm_sq < 0.0) throw DomainError("sigma_sm_sq must be nonnegative");
    return {-std::log(n) - 0.5 * sigma_sm_sq, sigma_sm_sq};
}

LogFit lognormal_fit_values(const std::vector<double>& values) {
    if (values.empty()) throw DomainError("log fit needs at least one value");
    std::vector<double> logs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0))
            throw DomainError(
                "log fit requires strictly positive entries (zero indicates "
                "upstream underflow)");
        logs[i] = std::log(values[i]);
    }
    LogFit fit;
    fit.mu_log =
        std::accumulate(logs.begin(), logs.end(), 0.0) / logs.size();
    fit.sigma2_log = population_variance(logs);
    // Spread at rounding level: standardization is meaningless, KS := 0.
    const double sd_floor = 1e-12 * (1.0 + std::abs(fit.mu_log));
    if (!(fit.sigma2_log > sd_floor * sd_floor)) {
        fit.ks_stat = 0.0;
        return fit;
    }
    const double sd = std::sqrt(fit.sigma2_log);
    std::sort(logs.begin(), logs.end());
    const double n = static_cast<double>(logs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double f = std_normal_cdf((logs[i] - fit.mu_log) / sd);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    fit.ks_stat = d;
    return fit;
}

LogFit lognormal_fit(const Mat& p) {
    std::vector<double> vals(p.data(), p.data() + p.size());
    return lognormal_fit_values(vals);
}

FentonRegime fenton_regime_from_string(const std::string& s) {
    if (s == "narrow") return FentonRegime::narrow;
    if (s == "moderate") return FentonRegime::moderate;
    if (s == "broad") return FentonRegime::broad;
    throw DomainError("unknown regime: " + s);
}

double fenton_sum_variance(double sigma_sq, int n, FentonRegime regime,
                           double a, double b) {
    if (!(sigma_sq > 0.0)) throw DomainError("sigma_sq must be positive");
    if (n < 1) throw DomainError("n must be >= 1");
    switch (regime) {
        case FentonRegime::narrow:
            return static_cast<double>(n) * sigma_sq;
        case FentonRegime::moderate:
            return std::log1p(std::expm1(sigma_sq) / static_cast<double>(n));
        case FentonRegime::broad:
            return a * sigma_sq + b;
    }
    throw DomainError("unknown regime");
}

double lln_temperature(const LLNParams& params) {
    const double aq = params.alpha * params.alpha * params.sigma_q * params.sigma_q;
    const double bk = params.beta * params.beta * params.sigma_k * params.sigma_k;
    const double radicand = params.a * (aq + bk) + params.b;
    if (!(radicand > 0.0))
        throw DomainError("lln temperature radicand must be positive");
    return 1.0 / std::sqrt(radicand);
}

StatsReport analyze_matrix(const Mat& q, const Mat& k, const Mat& weights,
                           bool allow_zero_entries) {
    require_row_stochastic(weights);
    StatsReport rep;
    // Constant-score fixtures have no finite temperature; report NaN (JSON
    // null) rather than refusing the remaining diagnostics.
    try {
        rep.temperature_empirical = empirical_temperature(q, k);
    } catch (const DegenerateError&) {
        rep.temperature_empirical = std::numeric_limits<double>::quiet_NaN();
    }
    const double sq = std::sqrt((q.array() - q.mean()).square().mean());
    const double sk = std::sqrt((k.array() - k.mean()).square().mean());
    try {
        rep.temperature_theoretical =
            theoretical_temperature(sq, sk, estimate_c_cross(q, k));
    } catch (const DomainError&) {
        rep.temperature_theoretical = std::numeric_limits<double>::quiet_NaN();
    }
    rep.entropy_bits = matrix_entropy(weights);
    const SpectralResult spec = spectral_gap(weights);
    rep.lambda2_mod = spec.lambda2_mod;
    rep.spectral_gap = spec.gap;
    LogFit fit;
    if (allow_zero_entries) {
        std::vector<double> vals;
        vals.reserve(weights.size());
        for (const double* it = weights.data(); it != weights.data() + weights.size(); ++it)
            if (*it > 0.0) vals.push_back(*it);
        fit = lognormal_fit_values(vals);
    } else {
        fit = lognormal_fit(weights);
    }
    rep.mu_log = fit.mu_log;
    rep.sigma2_log = fit.sigma2_log;
    rep.ks_stat = fit.ks_stat;
    return rep;
}

}  // namespace lln
