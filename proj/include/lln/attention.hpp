#pragma once

#include "lln/common.hpp"

#include <string>

namespace lln {

enum class Method { softmax, lln, block_diag, lln_diag };

Method method_from_string(const std::string& s);
const char* to_string(Method m);

// Calibration bundle produced by moment matching. alpha, beta are the
// feature-map gains; (a, b) are the broad-regime constants; sigma_tilde is
// the feature-map log-spread realizing the match.
struct LLNParams {
    double alpha = 0.0;
    double beta = 0.0;
    double a = 1.0;
    double b = 0.0;
    double sigma_q = 1.0;
    double sigma_k = 1.0;
    double sigma_tilde = 0.0;

    // Builds a self-consistent bundle from raw gains (test fixtures and
    // ad-hoc use). alpha = beta = 0 is accepted as the degenerate uniform
    // case.
    static LLNParams from_gains(double alpha, double beta);

    bool degenerate() const { return alpha == 0.0 && beta == 0.0; }
    void validate() const;
};

struct AttnConfig {
    Method method = Method::softmax;
    int block_size = 64;
    bool scale_by_sqrt_d = true;  // softmax kernel only; lln applies gains raw

    void validate() const;
};

struct AttnResult {
    Mat output;   // N x d
    Mat weights;  // N x N, row-stochastic
};

struct LLNGrads {
    Mat dq, dk, dv;
};

// Softmax attention with 1/sqrt(d) scaling, stabilized by per-row max
// subtraction (exact by translation invariance).
AttnResult softmax_attention(const Mat& q, const Mat& k, const Mat& v);

// Elementwise exp(gain * x). The caller is responsible for any stabilizing
// scalar pre-shift; shifts cancel in the attention ratio.
Mat lln_feature_map(const Mat& x, double gain);

// O(N^2) form of LLN attention; materializes the weight matrix.
AttnResult lln_attention_materialized(const Mat& q, const Mat& k, const Mat& v,
                                      const LLNParams& params);

// Two-pass O(N d^2) form; never materializes an N x N matrix and keeps
// auxiliary state at O(d^2 + d).
Mat lln_attention_linear(const Mat& q, const Mat& k, const Mat& v,
                         const LLNParams& params);

// Analytic backward pass of the two-pass form for L = <upstream, output>,
// O(N d^2) time, no N x N intermediate.
LLNGrads lln_attention_grad(const Mat& q, const Mat& k, const Mat& v,
                            const LLNParams& params, const Mat& upstream);

// Softmax attention on consecutive blocks of block_size tokens; the last
// block may be short and attends only within itself.
AttnResult block_diag_attention(const Mat& q, const Mat& k, const Mat& v,
                                int block_size);

// Output-only block branch (no N x N weights assembled).
Mat block_diag_output(const Mat& q, const Mat& k, const Mat& v, int block_size);

// Hybrid layer: 0.5 * linear LLN output + 0.5 * block-diagonal output.
Mat lln_diag_attention(const Mat& q, const Mat& k, const Mat& v,
                       const LLNParams& params, int block_size);

// Builds the weight matrix selected by the config. For lln-diag this is the
// materialized hybrid average 0.5 P_lln + 0.5 P_block (row-stochastic since
// both branches are). params is ignored for softmax and block-diag.
Mat attention_weights(const AttnConfig& cfg, const Mat& q, const Mat& k,
                      const LLNParams& params = {});

// Log-domain weights, ln P row-normalized by log-sum-exp. These never leave
// the log domain, so they stay exact where exp/normalize would underflow;
// used by the distribution measurements.
Mat softmax_log_weights(const Mat& q, const Mat& k);
Mat lln_log_weights(const Mat& q, const Mat& k, double alpha, double beta);

}  // namespace lln
