#include "lln/verify.hpp"

#include "lln/attention.hpp"
#include "lln/oracle.hpp"
#include "lln/rng.hpp"
#include "lln/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

namespace lln {

namespace {

Mat random_stochastic(int n, std::mt19937_64& gen) {
    Mat m = gaussian_matrix(n, n, 1.0, gen).array().exp();
    for (int i = 0; i < n; ++i) m.row(i) /= m.row(i).sum();
    return m;
}

Mat softmax_of(const Mat& x, double tau) {
    Mat p = x / tau;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

std::string format_tol(double tol) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", tol);
    return buf;
}

CheckResult residual_check(const std::string& name, double worst, double tol) {
    CheckResult c;
    c.name = name;
    c.worst = worst;
    c.pass = worst <= tol;
    c.detail = "tol " + format_tol(tol);
    return c;
}

}  // namespace

std::vector<CheckResult> verify_stats(std::uint64_t seed,
                                      bool inject_row_sum_defect) {
    std::vector<CheckResult> out;

    {  // Row-stochasticity of produced attention matrices.
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            auto gen = make_rng(derive_seed(seed, 100 + s));
            Mat q = gaussian_matrix(12, 4, 1.0, gen);
            Mat k = gaussian_matrix(12, 4, 1.0, gen);
            Mat v = gaussian_matrix(12, 4, 1.0, gen);
            Mat w1 = softmax_attention(q, k, v).weights;
            Mat w2 = lln_attention_materialized(q, k, v,
                                                LLNParams::from_gains(0.5, 0.5))
                         .weights;
            Mat w3 = block_diag_attention(q, k, v, 5).weights;
            if (inject_row_sum_defect && s == 3) w1.row(2) *= 0.9;
            for (const Mat* w : {&w1, &w2, &w3}) {
                for (Eigen::Index i = 0; i < w->rows(); ++i)
                    worst = std::max(worst, std::abs(w->row(i).sum() - 1.0));
                worst = std::max(worst, std::max(0.0, -w->minCoeff()));
                worst = std::max(worst, std::max(0.0, w->maxCoeff() - 1.0));
            }
        }
        out.push_back(residual_check("row-stochastic", worst, 1e-9));
    }

    {  // Entropy bounds 0 <= H <= log2 N and spectral gap in [0, 1].
        double worst_h = 0.0, worst_g = 0.0;
        for (int s = 0; s < 20; ++s) {
            auto gen = make_rng(derive_seed(seed, 200 + s));
            const int n = 4 + static_cast<int>(splitmix64(s) % 29);
            Mat p = random_stochastic(n, gen);
            const double h = matrix_entropy(p);
            worst_h = std::max(worst_h, std::max(-h, h - std::log2(double(n))));
            const double g = spectral_gap(p).gap;
            worst_g = std::max(worst_g, std::max(-g, g - 1.0));
        }
        out.push_back(residual_check("entropy-bounds", worst_h, 1e-12));
        out.push_back(residual_check("spectral-gap-bounds", worst_g, 1e-12));
    }

    {  // Entropy monotonically increasing with temperature.
        const std::vector<double> taus{0.25, 0.5, 1.0, 2.0, 4.0};
        double worst = -1e300;
        for (int s = 0; s < 100; ++s) {
            auto gen = make_rng(derive_seed(seed, 300 + s));
            Mat x = gaussian_matrix(16, 16, 1.0, gen);
            double prev = -1.0;
            for (double tau : taus) {
                const double h = matrix_entropy(softmax_of(x, tau));
                if (prev >= 0.0) worst = std::max(worst, prev - h);
                prev = h;
            }
        }
        out.push_back(
            residual_check("entropy-monotone-in-temperature", worst, 1e-12));
    }

    {  // Row variance around 1/N monotonically decreasing with temperature.
        const std::vector<double> taus{0.25, 0.5, 1.0, 2.0, 4.0};
        double worst = -1e300;
        for (int s = 0; s < 100; ++s) {
            auto gen = make_rng(derive_seed(seed, 400 + s));
            const int n = 16;
            Mat x = gaussian_matrix(n, n, 1.0, gen);
            Vec prev;
            for (double tau : taus) {
                Mat p = softmax_of(x, tau);
                Vec var(n);
                for (int i = 0; i < n; ++i)
                    var(i) = (p.row(i).array() - 1.0 / n).square().mean();
                if (prev.size() > 0)
                    worst = std::max(worst, (var - prev).maxCoeff());
                prev = var;
            }
        }
        out.push_back(
            residual_check("row-variance-monotone-in-temperature", worst, 1e-12));
    }

    {  // Eigenpair variance identity |v* Pb^T Pb v| / (v*v) = |lambda|^2.
        double worst = 0.0;
        for (int s = 0; s < 50; ++s) {
            auto gen = make_rng(derive_seed(seed, 500 + s));
            const int n = 2 + static_cast<int>(splitmix64(1000 + s) % 31);
            Mat p = random_stochastic(n, gen);
            Mat pb = deflate(p);
            Eigen::EigenSolver<Mat> es(pb, true);
            Mat gram = pb.transpose() * pb;
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXcd v = es.eigenvectors().col(i);
                const double lhs =
                    std::abs((v.adjoint() * gram * v)(0, 0)) /
                    std::abs((v.adjoint() * v)(0, 0));
                const double lam2 = std::norm(es.eigenvalues()(i));
                worst = std::max(worst, std::abs(lhs - lam2));
            }
        }
        out.push_back(
            residual_check("eigenpair-variance-identity", worst, 1e-8));
    }

    {  // Deflation leaves rows and columns centered.
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            auto gen = make_rng(derive_seed(seed, 600 + s));
            const int n = 2 + static_cast<int>(splitmix64(2000 + s) % 31);
            auto [rowr, colr] = deflation_centering_check(random_stochastic(n, gen));
            worst = std::max({worst, rowr, colr});
        }
        out.push_back(residual_check("deflation-centering", worst, 1e-10));
    }

    {  // Row lemmas: sum p_i (x_i - mu) = 0 and sum p_i^2 (x_i - mu) >= 0.
        double worst_mean = 0.0;
        double worst_quad = -1e300;
        for (int s = 0; s < 1000; ++s) {
            auto gen = make_rng(derive_seed(seed, 700 + s));
            Mat x = gaussian_matrix(1, 32, 1.5, gen);
            Mat p = softmax_of(x, 1.0);
            const double mu = (p.array() * x.array()).sum();
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < 32; ++j) {
                m1 += p(0, j) * (x(0, j) - mu);
                m2 += p(0, j) * p(0, j) * (x(0, j) - mu);
            }
            worst_mean = std::max(worst_mean, std::abs(m1));
            worst_quad = std::max(worst_quad, -m2);
        }
        out.push_back(
            residual_check("row-weighted-mean-zero", worst_mean, 1e-10));
        out.push_back(residual_check("squared-weight-deviation-nonneg",
                                     worst_quad, 1e-12));
    }

    {  // Deflated |lambda2| equals the direct modulus-sorted second
       // eigenvalue of the undeflated matrix.
        double worst = 0.0;
        for (int s = 0; s < 20; ++s) {
            auto gen = make_rng(derive_seed(seed, 800 + s));
            Mat p = random_stochastic(16, gen);
            const double mine = spectral_gap_dense(p).lambda2_mod;
            Eigen::EigenSolver<Mat> es(p, false);
            std::vector<double> mods(16);
            for (int i = 0; i < 16; ++i) mods[i] = std::abs(es.eigenvalues()(i));
            std::sort(mods.begin(), mods.end(), std::greater<double>());
            worst = std::max(worst, std::abs(mine - mods[1]));
        }
        out.push_back(
            residual_check("spectral-deflation-vs-direct", worst, 1e-8));
    }

    return out;
}

std::vector<CheckResult> verify_grads(std::uint64_t seed) {
    std::vector<CheckResult> out;
    double worst_q = 0.0, worst_k = 0.0, worst_v = 0.0;
    const double h = 1e-5;
    for (int s = 0; s < 50; ++s) {
        auto gen = make_rng(derive_seed(seed, 900 + s));
        const int n = 5, d = 3;
        Mat q = gaussian_matrix(n, d, 1.0, gen);
        Mat k = gaussian_matrix(n, d, 1.0, gen);
        Mat v = gaussian_matrix(n, d, 1.0, gen);
        Mat g = gaussian_matrix(n, d, 1.0, gen);
        std::uniform_real_distribution<double> u(0.2, 0.9);
        const LLNParams params = LLNParams::from_gains(u(gen), u(gen));
        const LLNGrads grads = lln_attention_grad(q, k, v, params, g);

        const auto rel_worst = [&](const Mat& analytic, const Mat& numeric) {
            double w = 0.0;
            for (Eigen::Index i = 0; i < analytic.size(); ++i) {
                const double a = analytic(i), b = numeric(i);
                if (std::abs(a) <= 1e-6 && std::abs(b) <= 1e-6) continue;
                w = std::max(w, std::abs(a - b) /
                                    std::max(std::abs(a), std::abs(b)));
            }
            return w;
        };
        worst_q = std::max(
            worst_q,
            rel_worst(grads.dq, oracle::finite_diff_grad(
                                    [&](const Mat& x) {
                                        return (g.array() *
                                                lln_attention_linear(x, k, v,
                                                                     params)
                                                    .array())
                                            .sum();
                                    },
                                    q, h)));
        worst_k = std::max(
            worst_k,
            rel_worst(grads.dk, oracle::finite_diff_grad(
                                    [&](const Mat& x) {
                                        return (g.array() *
                                                lln_attention_linear(q, x, v,
                                                                     params)
                                                    .array())
                                            .sum();
                                    },
                                    k, h)));
        worst_v = std::max(
            worst_v,
            rel_worst(grads.dv, oracle::finite_diff_grad(
                                    [&](const Mat& x) {
                                        return (g.array() *
                                                lln_attention_linear(q, k, x,
                                                                     params)
                                                    .array())
                                            .sum();
                                    },
                                    v, h)));
    }
    out.push_back(residual_check("grad-q-vs-finite-diff", worst_q, 1e-4));
    out.push_back(residual_check("grad-k-vs-finite-diff", worst_k, 1e-4));
    out.push_back(residual_check("grad-v-vs-finite-diff", worst_v, 1e-4));
    return out;
}

std::vector<CheckResult> verify_oracles(std::uint64_t seed) {
    std::vector<CheckResult> out;

    {  // Implementations agree with the brute-force reference.
        double worst_sm = 0.0, worst_lln = 0.0, worst_two = 0.0;
        for (int s = 0; s < 50; ++s) {
            auto gen = make_rng(derive_seed(seed, 1100 + s));
            const int n = 2 + static_cast<int>(splitmix64(3000 + s) % 63);
            const int d = 1 + static_cast<int>(splitmix64(4000 + s) % 16);
            Mat q = gaussian_matrix(n, d, 1.0, gen);
            Mat k = gaussian_matrix(n, d, 1.0, gen);
            Mat v = gaussian_matrix(n, d, 1.0, gen);

            AttnResult mine = softmax_attention(q, k, v);
            AttnResult ref = oracle::brute_force_attention(
                q, k, v, {oracle::KernelKind::exp_scaled, 1.0, 1.0});
            worst_sm = std::max(
                worst_sm,
                std::max((mine.output - ref.output).cwiseAbs().maxCoeff(),
                         (mine.weights - ref.weights).cwiseAbs().maxCoeff()));

            const LLNParams params = LLNParams::from_gains(0.6, 0.4);
            AttnResult mlln = lln_attention_materialized(q, k, v, params);
            AttnResult rlln = oracle::brute_force_attention(
                q, k, v,
                {oracle::KernelKind::elementwise_exp_product, 0.6, 0.4});
            worst_lln = std::max(
                worst_lln,
                std::max((mlln.output - rlln.output).cwiseAbs().maxCoeff(),
                         (mlln.weights - rlln.weights).cwiseAbs().maxCoeff()));

            Mat lin = lln_attention_linear(q, k, v, params);
            worst_two = std::max(worst_two,
                                 (lin - mlln.output).cwiseAbs().maxCoeff());
        }
        out.push_back(residual_check("softmax-vs-brute-force", worst_sm, 1e-10));
        out.push_back(residual_check("lln-vs-brute-force", worst_lln, 1e-10));
        out.push_back(
            residual_check("two-pass-vs-materialized", worst_two, 1e-9));
    }

    {  // Softmax row shift invariance.
        double worst = 0.0;
        for (int s = 0; s < 20; ++s) {
            auto gen = make_rng(derive_seed(seed, 1200 + s));
            Mat x = gaussian_matrix(8, 8, 1.0, gen);
            Mat p1 = softmax_of(x, 1.0);
            Mat x2 = x;
            x2.row(3).array() += 7.5;
            Mat p2 = softmax_of(x2, 1.0);
            worst = std::max(worst, (p1 - p2).cwiseAbs().maxCoeff());
        }
        out.push_back(residual_check("softmax-shift-invariance", worst, 1e-12));
    }

    {  // LLN per-query positive scaling and global key shift invariances.
        double worst_scale = 0.0, worst_shift = 0.0;
        for (int s = 0; s < 20; ++s) {
            auto gen = make_rng(derive_seed(seed, 1300 + s));
            Mat q = gaussian_matrix(8, 4, 1.0, gen);
            Mat k = gaussian_matrix(8, 4, 1.0, gen);
            Mat v = gaussian_matrix(8, 4, 1.0, gen);
            const LLNParams params = LLNParams::from_gains(0.7, 0.7);
            Mat w1 = lln_attention_materialized(q, k, v, params).weights;
            // Scaling phi(q_i) by a positive scalar is a uniform additive
            // shift of that row of alpha*q.
            Mat q2 = q;
            q2.row(2).array() += 3.0 / params.alpha;
            Mat w2 = lln_attention_materialized(q2, k, v, params).weights;
            worst_scale = std::max(worst_scale,
                                   (w1 - w2).cwiseAbs().maxCoeff());
            Mat k2 = k.array() - 1.25;
            Mat w3 = lln_attention_materialized(q, k2, v, params).weights;
            worst_shift = std::max(worst_shift,
                                   (w1 - w3).cwiseAbs().maxCoeff());
        }
        out.push_back(
            residual_check("lln-query-scale-invariance", worst_scale, 1e-12));
        out.push_back(
            residual_check("lln-key-shift-invariance", worst_shift, 1e-10));
    }

    {  // Permuting query rows permutes outputs identically.
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            auto gen = make_rng(derive_seed(seed, 1400 + s));
            const int n = 9, d = 4;
            Mat q = gaussian_matrix(n, d, 1.0, gen);
            Mat k = gaussian_matrix(n, d, 1.0, gen);
            Mat v = gaussian_matrix(n, d, 1.0, gen);
            std::vector<int> perm(n);
            for (int i = 0; i < n; ++i) perm[i] = i;
            std::shuffle(perm.begin(), perm.end(), gen);
            Mat qp(n, d);
            for (int i = 0; i < n; ++i) qp.row(i) = q.row(perm[i]);
            const LLNParams params = LLNParams::from_gains(0.5, 0.5);

            Mat o_sm = softmax_attention(q, k, v).output;
            Mat o_smp = softmax_attention(qp, k, v).output;
            Mat o_lln = lln_attention_linear(q, k, v, params);
            Mat o_llnp = lln_attention_linear(qp, k, v, params);
            Mat o_hy = lln_diag_attention(q, k, v, params, n);
            Mat o_hyp = lln_diag_attention(qp, k, v, params, n);
            for (int i = 0; i < n; ++i) {
                worst = std::max(worst, (o_smp.row(i) - o_sm.row(perm[i]))
                                            .cwiseAbs()
                                            .maxCoeff());
                worst = std::max(worst, (o_llnp.row(i) - o_lln.row(perm[i]))
                                            .cwiseAbs()
                                            .maxCoeff());
                worst = std::max(worst, (o_hyp.row(i) - o_hy.row(perm[i]))
                                            .cwiseAbs()
                                            .maxCoeff());
            }
        }
        out.push_back(
            residual_check("permutation-equivariance", worst, 1e-12));
    }

    {  // Monte-Carlo lognormal sums against the moderate Fenton formula.
        const double mc = oracle::mc_lognormal_sum_var(1.0, 64, 100000,
                                                       derive_seed(seed, 1500));
        const double fe = fenton_sum_variance(1.0, 64, FentonRegime::moderate);
        out.push_back(residual_check("mc-lognormal-vs-fenton-n64",
                                     std::abs(mc - fe) / fe, 0.10));
    }

    {  // Oracle determinism under a fixed seed.
        const double a =
            oracle::mc_lognormal_sum_var(0.5, 16, 5000, derive_seed(seed, 1600));
        const double b =
            oracle::mc_lognormal_sum_var(0.5, 16, 5000, derive_seed(seed, 1600));
        out.push_back(residual_check("oracle-determinism", std::abs(a - b), 0.0));
    }

    return out;
}

}  // namespace lln
