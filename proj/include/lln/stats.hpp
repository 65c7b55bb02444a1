#pragma once

#include "lln/attention.hpp"
#include "lln/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lln {

// Per-matrix diagnostics bundle.
struct StatsReport {
    double temperature_empirical = 0.0;
    double temperature_theoretical = 0.0;
    double entropy_bits = 0.0;
    double lambda2_mod = 0.0;
    double spectral_gap = 0.0;
    double mu_log = 0.0;
    double sigma2_log = 0.0;
    double ks_stat = 0.0;
};

// 1 / population std over all N^2 scores q_i.k_j / sqrt(d).
double empirical_temperature(const Mat& q, const Mat& k);

// 1 / sqrt(sigma_q^2 sigma_k^2 + c_cross).
double theoretical_temperature(double sigma_q, double sigma_k, double c_cross);

// Cross-covariance of the squared entries minus the squared covariance,
// over elementwise-paired samples; vanishes for independent q, k.
double estimate_c_cross(const Mat& q, const Mat& k);

// Average row entropy in bits, with 0 * log 0 := 0.
double matrix_entropy(const Mat& p);

struct SpectralResult {
    double lambda2_mod = 0.0;
    double gap = 0.0;
    Eigen::VectorXcd v2;
};

// Deflated matrix P - 1 mu^T with mu = (1/N) P^T 1; its spectrum is
// {0, lambda_2, ..., lambda_N} and it is centered in rows and columns.
Mat deflate(const Mat& p);

// |lambda_2| and gap = 1 - |lambda_2|. Dense eigendecomposition of the
// deflated matrix up to kDenseSpectralLimit tokens, restarted Arnoldi
// iteration above that.
SpectralResult spectral_gap(const Mat& p);
SpectralResult spectral_gap_dense(const Mat& p);
SpectralResult spectral_gap_power(const Mat& p, double tol = 1e-10,
                                  int max_matvecs = 10000);

inline constexpr Eigen::Index kDenseSpectralLimit = 2048;

// Max |row sum| and max |column sum| of the deflated matrix.
std::pair<double, double> deflation_centering_check(const Mat& p);

// Predicted log-normal parameters (mu, sigma^2) of softmax attention
// entries: mu = -ln n - sigma_sm^2 / 2. Real-valued n is accepted for
// degenerate checks.
std::pair<double, double> lognormal_predict(double n, double sigma_sm_sq);

struct LogFit {
    double mu_log = 0.0;
    double sigma2_log = 0.0;
    double ks_stat = 0.0;
};

// Sample mean/variance of ln(entries) plus the Kolmogorov-Smirnov distance
// of the standardized log-entries against the standard normal CDF.
LogFit lognormal_fit(const Mat& p);
LogFit lognormal_fit_values(const std::vector<double>& values);

enum class FentonRegime { narrow, moderate, broad };
FentonRegime fenton_regime_from_string(const std::string& s);

// Variance of ln(sum of n i.i.d. lognormals with log-variance sigma_sq):
//   narrow   -> n * sigma_sq
//   moderate -> ln((e^sigma_sq - 1)/n + 1)
//   broad    -> a * sigma_sq + b
double fenton_sum_variance(double sigma_sq, int n, FentonRegime regime,
                           double a = 0.0, double b = 0.0);

// tau = 1 / sqrt(a (alpha^2 sq^2 + beta^2 sk^2) + b).
double lln_temperature(const LLNParams& params);

// Full report for one attention matrix produced from (q, k).
// Structural zeros (block-diagonal weights) are excluded from the log fit
// when allow_zero_entries is set; softmax/LLN weights must be positive.
StatsReport analyze_matrix(const Mat& q, const Mat& k, const Mat& weights,
                           bool allow_zero_entries = false);

}  // namespace lln
