#include "lln/attention.hpp"

#include "lln/memtrack.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lln {

namespace {

constexpr double kExpOverflowLimit = 700.0;  // exp(709.8) overflows a double
constexpr double kDenominatorFloor = 1e-300;

void check_qkv(const Mat& q, const Mat& k, const Mat& v) {
    if (q.rows() < 1 || q.cols() < 1) throw ShapeError("q must be at least 1x1");
    require_same_shape(q, k, "q vs k");
    require_same_shape(q, v, "q vs v");
    require_finite(q, "q");
    require_finite(k, "k");
    require_finite(v, "v");
}

void check_qk(const Mat& q, const Mat& k) {
    if (q.rows() < 1 || q.cols() < 1) throw ShapeError("q must be at least 1x1");
    require_same_shape(q, k, "q vs k");
    require_finite(q, "q");
    require_finite(k, "k");
}

// Row-softmax in place with per-row max subtraction.
void softmax_rows_inplace(Mat& scores) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - m).exp();
        scores.row(i) /= scores.row(i).sum();
    }
}

}  // namespace

Method method_from_string(const std::string& s) {
    if (s == "softmax") return Method::softmax;
    if (s == "lln") return Method::lln;
    if (s == "block-diag" || s == "block_diag") return Method::block_diag;
    if (s == "lln-diag" || s == "lln_diag") return Method::lln_diag;
    throw DomainError("unknown method: " + s);
}

const char* to_string(Method m) {
    switch (m) {
        case Method::softmax: return "softmax";
        case Method::lln: return "lln";
        case Method::block_diag: return "block-diag";
        case Method::lln_diag: return "lln-diag";
    }
    return "?";
}

LLNParams LLNParams::from_gains(double alpha, double beta) {
    LLNParams p;
    p.alpha = alpha;
    p.beta = beta;
    if (alpha == 0.0 && beta == 0.0) return p;  // degenerate uniform fixture
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw DomainError("LLN gains must be positive (or both zero)");
    // Synthesize a bundle consistent with the gain split
    // alpha^2 sigma_q^2 = beta^2 sigma_k^2 = sigma_tilde^2 / 2.
    p.sigma_q = 1.0;
    p.sigma_k = alpha / beta;
    p.sigma_tilde = std::sqrt(2.0) * alpha;
    p.a = 1.0;
    p.b = p.sigma_q * p.sigma_q * p.sigma_k * p.sigma_k -
          p.sigma_tilde * p.sigma_tilde;
    return p;
}

void LLNParams::validate() const {
    if (degenerate()) return;
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw DomainError("LLNParams: alpha and beta must be positive");
    if (!(sigma_q > 0.0) || !(sigma_k > 0.0) || !(sigma_tilde > 0.0))
        throw DomainError("LLNParams: sigmas must be positive");
    const double st2 = sigma_tilde * sigma_tilde;
    const double from_ab = (sigma_q * sigma_q * sigma_k * sigma_k - b) / a;
    if (!(from_ab > 0.0) || std::abs(from_ab - st2) > 1e-9 * std::max(1.0, st2))
        throw DomainError(
            "LLNParams: sigma_tilde^2 != (sigma_q^2 sigma_k^2 - b) / a");
    const double aq = alpha * alpha * sigma_q * sigma_q;
    const double bk = beta * beta * sigma_k * sigma_k;
    const double half = 0.5 * st2;
    if (std::abs(aq - half) > 1e-9 * std::max(1.0, half) ||
        std::abs(bk - half) > 1e-9 * std::max(1.0, half))
        throw DomainError(
            "LLNParams: gain split alpha^2 sq^2 = beta^2 sk^2 = st^2/2 violated");
}

void AttnConfig::validate() const {
    if (block_size < 1) throw DomainError("block_size must be >= 1");
}

AttnResult softmax_attention(const Mat& q, const Mat& k, const Mat& v) {
    check_qkv(q, k, v);
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    memtrack::ScopedCharge cw(memtrack::matrix_bytes(n, n));
    Mat weights = (q * k.transpose()) * scale;
    softmax_rows_inplace(weights);

    memtrack::ScopedCharge co(memtrack::matrix_bytes(n, d));
    Mat output = weights * v;
    return {std::move(output), std::move(weights)};
}

Mat lln_feature_map(const Mat& x, double gain) {
    require_finite(x, "x");
    const double extreme = std::max(std::abs(gain * x.maxCoeff()),
                                    std::abs(gain * x.minCoeff()));
    if (extreme > kExpOverflowLimit) {
        std::ostringstream os;
        os << "feature map overflow: |gain * x| reaches " << extreme
           << " (limit " << kExpOverflowLimit << ")";
        throw DomainError(os.str());
    }
    return (gain * x).array().exp();
}

AttnResult lln_attention_materialized(const Mat& q, const Mat& k, const Mat& v,
                                      const LLNParams& params) {
    check_qkv(q, k, v);
    params.validate();
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();

    // Scalar shifts only: a per-row max for alpha*q and one global max for
    // beta*k. Both cancel exactly in the ratio; per-dimension shifts would
    // not.
    memtrack::ScopedCharge cq(memtrack::matrix_bytes(n, d));
    Mat phi_q = params.alpha * q;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = phi_q.row(i).maxCoeff();
        phi_q.row(i) = (phi_q.row(i).array() - m).exp();
    }
    memtrack::ScopedCharge ck(memtrack::matrix_bytes(n, d));
    const double kshift = (params.beta * k).maxCoeff();
    Mat phi_k = ((params.beta * k).array() - kshift).exp();

    memtrack::ScopedCharge cw(memtrack::matrix_bytes(n, n));
    Mat weights = phi_q * phi_k.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = weights.row(i).sum();
        if (!(s > kDenominatorFloor))
            throw DegenerateError("LLN normalization underflow");
        weights.row(i) /= s;
    }

    memtrack::ScopedCharge co(memtrack::matrix_bytes(n, d));
    Mat output = weights * v;
    return {std::move(output), std::move(weights)};
}

Mat lln_attention_linear(const Mat& q, const Mat& k, const Mat& v,
                         const LLNParams& params) {
    check_qkv(q, k, v);
    params.validate();
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();
    const double kshift = (params.beta * k).maxCoeff();

    // Pass 1 over keys: S = sum_j phi(k_j) v_j^T and z = sum_j phi(k_j).
    memtrack::ScopedCharge cs(memtrack::matrix_bytes(d, d));
    memtrack::ScopedCharge cz(memtrack::matrix_bytes(d, 1));
    memtrack::ScopedCharge crow(2 * memtrack::matrix_bytes(d, 1));
    Mat S = Mat::Zero(d, d);
    Vec z = Vec::Zero(d);
    Vec phi(d);
    for (Eigen::Index j = 0; j < n; ++j) {
        phi = ((params.beta * k.row(j)).transpose().array() - kshift).exp();
        S.noalias() += phi * v.row(j);
        z += phi;
    }

    // Pass 2 over queries.
    memtrack::ScopedCharge co(memtrack::matrix_bytes(n, d));
    Mat out(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = (params.alpha * q.row(i)).maxCoeff();
        phi = ((params.alpha * q.row(i)).transpose().array() - m).exp();
        const double den = phi.dot(z);
        if (!(den > kDenominatorFloor))
            throw DegenerateError("LLN normalization underflow");
        out.row(i) = (phi.transpose() * S) / den;
    }
    return out;
}

LLNGrads lln_attention_grad(const Mat& q, const Mat& k, const Mat& v,
                            const LLNParams& params, const Mat& upstream) {
    check_qkv(q, k, v);
    require_same_shape(q, upstream, "q vs upstream");
    require_finite(upstream, "upstream");
    params.validate();
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();
    const double kshift = (params.beta * k).maxCoeff();

    memtrack::ScopedCharge cs(2 * memtrack::matrix_bytes(d, d));
    memtrack::ScopedCharge cz(2 * memtrack::matrix_bytes(d, 1));
    Mat S = Mat::Zero(d, d);
    Vec z = Vec::Zero(d);
    Vec phi(d);
    for (Eigen::Index j = 0; j < n; ++j) {
        phi = ((params.beta * k.row(j)).transpose().array() - kshift).exp();
        S.noalias() += phi * v.row(j);
        z += phi;
    }

    memtrack::ScopedCharge cg(3 * memtrack::matrix_bytes(n, d));
    Mat dq(n, d), dk(n, d), dv(n, d);

    // Query pass. With u_i = phi(q_i), D_i = u_i.z, out_i = (u_i^T S)/D_i:
    //   dL/du_i = (S g_i - c_i z) / D_i,   c_i = out_i . g_i
    //   dq_i    = alpha * u_i (.) dL/du_i
    // and accumulate G = sum_i u_i g_i^T / D_i, gz = -sum_i c_i u_i / D_i
    // for the key/value pass.
    Mat G = Mat::Zero(d, d);
    Vec gz = Vec::Zero(d);
    Vec du(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = (params.alpha * q.row(i)).maxCoeff();
        phi = ((params.alpha * q.row(i)).transpose().array() - m).exp();
        const double den = phi.dot(z);
        if (!(den > kDenominatorFloor))
            throw DegenerateError("LLN normalization underflow");
        const Eigen::RowVectorXd out_i = (phi.transpose() * S) / den;
        const double c = out_i.dot(upstream.row(i));
        du = (S * upstream.row(i).transpose() - c * z) / den;
        dq.row(i) = params.alpha * phi.cwiseProduct(du).transpose();
        G.noalias() += (phi / den) * upstream.row(i);
        gz -= (c / den) * phi;
    }

    // Key/value pass: dk_j = beta * phi(k_j) (.) (G v_j + gz),
    // dv_j = G^T phi(k_j).
    for (Eigen::Index j = 0; j < n; ++j) {
        phi = ((params.beta * k.row(j)).transpose().array() - kshift).exp();
        dk.row(j) =
            params.beta *
            phi.cwiseProduct(G * v.row(j).transpose() + gz).transpose();
        dv.row(j) = (G.transpose() * phi).transpose();
    }
    return {std::move(dq), std::move(dk), std::move(dv)};
}

AttnResult block_diag_attention(const Mat& q, const Mat& k, const Mat& v,
                                int block_size) {
    check_qkv(q, k, v);
    if (block_size < 1) throw DomainError("block_size must be >= 1");
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();

    memtrack::ScopedCharge cw(memtrack::matrix_bytes(n, n));
    memtrack::ScopedCharge co(memtrack::matrix_bytes(n, d));
    Mat weights = Mat::Zero(n, n);
    Mat output(n, d);
    for (Eigen::Index start = 0; start < n; start += block_size) {
        const Eigen::Index len = std::min<Eigen::Index>(block_size, n - start);
        AttnResult blk = softmax_attention(q.middleRows(start, len),
                                           k.middleRows(start, len),
                                           v.middleRows(start, len));
        weights.block(start, start, len, len) = blk.weights;
        output.middleRows(start, len) = blk.output;
    }
    return {std::move(output), std::move(weights)};
}

Mat block_diag_output(const Mat& q, const Mat& k, const Mat& v,
                      int block_size) {
    check_qkv(q, k, v);
    if (block_size < 1) throw DomainError("block_size must be >= 1");
    const Eigen::Index n = q.rows();
    const Eigen::Index d = q.cols();

    memtrack::ScopedCharge co(memtrack::matrix_bytes(n, d));
    Mat output(n, d);
    for (Eigen::Index start = 0; start < n; start += block_size) {
        const Eigen::Index len = std::min<Eigen::Index>(block_size, n - start);
        output.middleRows(start, len) =
            softmax_attention(q.middleRows(start, len),
                              k.middleRows(start, len),
                              v.middleRows(start, len))
                .output;
    }
    return output;
}

Mat lln_diag_attention(const Mat& q, const Mat& k, const Mat& v,
                       const LLNParams& params, int block_size) {
    Mat lin = lln_attention_linear(q, k, v, params);
    Mat blk = block_diag_output(q, k, v, block_size);
    return 0.5 * lin + 0.5 * blk;
}

Mat attention_weights(const AttnConfig& cfg, const Mat& q, const Mat& k,
                      const LLNParams& params) {
    cfg.validate();
    switch (cfg.method) {
        case Method::softmax: {
            if (cfg.scale_by_sqrt_d) return softmax_attention(q, k, k).weights;
            check_qk(q, k);
            Mat w = q * k.transpose();  // raw scores, no 1/sqrt(d)
            softmax_rows_inplace(w);
            return w;
        }
        case Method::lln:
            return lln_attention_materialized(q, k, k, params).weights;
        case Method::block_diag:
            return block_diag_attention(q, k, k, cfg.block_size).weights;
        case Method::lln_diag: {
            Mat w_lln = lln_attention_materialized(q, k, k, params).weights;
            Mat w_blk = block_diag_attention(q, k, k, cfg.block_size).weights;
            return 0.5 * w_lln + 0.5 * w_blk;
        }
    }
    throw DomainError("unknown method");
}

Mat softmax_log_weights(const Mat& q, const Mat& k) {
    check_qk(q, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Mat ln = (q * k.transpose()) * scale;
    for (Eigen::Index i = 0; i < ln.rows(); ++i) {
        const double m = ln.row(i).maxCoeff();
        const double lse = m + std::log((ln.row(i).array() - m).exp().sum());
        ln.row(i).array() -= lse;
    }
    return ln;
}

Mat lln_log_weights(const Mat& q, const Mat& k, double alpha, double beta) {
    check_qk(q, k);
    const Eigen::Index n = q.rows();
    // ln kappa_ij = LSE_m (alpha q_im + beta k_jm)
    //             = c_i + d_j + ln( sum_m e^{alpha q_im - c_i} e^{beta k_jm - d_j} )
    // with per-row maxima c, d, so the inner sum is a plain matrix product of
    // factors in (0, 1].
    Mat eq = alpha * q;
    Mat ek = beta * k;
    Vec c(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i) = eq.row(i).maxCoeff();
        eq.row(i) = (eq.row(i).array() - c(i)).exp();
        d(i) = ek.row(i).maxCoeff();
        ek.row(i) = (ek.row(i).array() - d(i)).exp();
    }
    Mat ln = eq * ek.transpose();
    if (!(ln.minCoeff() > 0.0))
        throw DegenerateError("LLN kernel underflow in log-domain path");
    ln = ln.array().log();
    ln.colwise() += c;
    ln.rowwise() += d.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double rm = ln.row(i).maxCoeff();
        const double lse = rm + std::log((ln.row(i).array() - rm).exp().sum());
        ln.row(i).array() -= lse;
    }
    return ln;
}

}  // namespace lln
