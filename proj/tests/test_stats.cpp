#include "lln/attention.hpp"
#include "lln/moment_match.hpp"
#include "lln/rng.hpp"
#include "lln/stats.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <cmath>

using namespace lln;

namespace {

Mat random_stochastic(int n, std::mt19937_64& gen) {
    Mat m = gaussian_matrix(n, n, 1.0, gen).array().exp();
    for (int i = 0; i < n; ++i) m.row(i) /= m.row(i).sum();
    return m;
}

}  // namespace

TEST_CASE("empirical temperature near 1 for independent unit Gaussians") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto gen = make_rng(derive_seed(777, s));
        Mat q = gaussian_matrix(128, 256, 1.0, gen);
        Mat k = gaussian_matrix(128, 256, 1.0, gen);
        const double tau = empirical_temperature(q, k);
        CHECK(tau >= 0.93);
        CHECK(tau <= 1.07);
    }
}

TEST_CASE("empirical temperature for fully correlated keys") {
    // k = q doubles the score variance (C_cross = sigma^4 = 1), so tau targets
    // 1/sqrt(2); with N = d the self-score mean offset contributes its d/N
    // share consistently.
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto gen = make_rng(derive_seed(31337, s));
        Mat q = gaussian_matrix(256, 256, 1.0, gen);
        const double tau = empirical_temperature(q, q);
        CHECK(tau >= 0.65);
        CHECK(tau <= 0.77);
    }
}

TEST_CASE("empirical temperature invariant under compensating scalings") {
    auto gen = make_rng(5);
    Mat q = gaussian_matrix(128, 256, 2.0, gen);
    Mat k = gaussian_matrix(128, 256, 0.5, gen);
    const double tau = empirical_temperature(q, k);
    CHECK(tau >= 0.93);
    CHECK(tau <= 1.07);
}

TEST_CASE("empirical temperature degenerate input") {
    Mat q = Mat::Ones(4, 3), k = Mat::Ones(4, 3);
    CHECK_THROWS_AS(empirical_temperature(q, k), DegenerateError);
}

TEST_CASE("theoretical temperature formula") {
    CHECK(theoretical_temperature(1, 1, 0) == doctest::Approx(1.0));
    CHECK(theoretical_temperature(1, 1, 1) ==
          doctest::Approx(0.7071067811865476).epsilon(1e-15));
    CHECK(theoretical_temperature(2, 0.5, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(theoretical_temperature(1, 1, -2.0), DomainError);
}

TEST_CASE("cross-covariance estimate") {
    auto gen = make_rng(6);
    Mat q = gaussian_matrix(256, 64, 1.0, gen);
    Mat k = gaussian_matrix(256, 64, 1.0, gen);
    CHECK(std::abs(estimate_c_cross(q, k)) < 0.1);      // independent -> 0
    CHECK(estimate_c_cross(q, q) == doctest::Approx(1.0).epsilon(0.15));

    // The independent-inputs estimate shrinks as the sample count grows.
    double small_acc = 0.0, big_acc = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto g2 = make_rng(derive_seed(66, s));
        small_acc += std::abs(estimate_c_cross(gaussian_matrix(16, 16, 1.0, g2),
                                               gaussian_matrix(16, 16, 1.0, g2)));
        big_acc += std::abs(estimate_c_cross(gaussian_matrix(128, 128, 1.0, g2),
                                             gaussian_matrix(128, 128, 1.0, g2)));
    }
    CHECK(big_acc < small_acc);
}

TEST_CASE("matrix entropy") {
    CHECK(matrix_entropy(Mat::Constant(4, 4, 0.25)) == doctest::Approx(2.0));
    CHECK(matrix_entropy(Mat::Identity(8, 8)) == doctest::Approx(0.0));
    Mat haf(4, 4);
    haf.setZero();
    for (int i = 0; i < 4; ++i) {
        haf(i, 0) = 0.5;
        haf(i, 1) = 0.5;
    }
    CHECK(matrix_entropy(haf) == doctest::Approx(1.0));
    Mat bad = Mat::Constant(3, 3, 0.4);
    CHECK_THROWS_AS(matrix_entropy(bad), DomainError);
}

TEST_CASE("spectral gap endpoints") {
    const int n = 12;
    SpectralResult uni = spectral_gap(Mat::Constant(n, n, 1.0 / n));
    CHECK(uni.lambda2_mod == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(uni.gap == doctest::Approx(1.0));
    SpectralResult id = spectral_gap(Mat::Identity(n, n));
    CHECK(id.lambda2_mod == doctest::Approx(1.0));
    CHECK(id.gap == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("deflated |lambda2| equals the direct second eigenvalue") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto gen = make_rng(derive_seed(1001, s));
        Mat p = random_stochastic(16, gen);
        const double mine = spectral_gap(p).lambda2_mod;
        Eigen::EigenSolver<Mat> es(p, false);
        std::vector<double> mods;
        for (int i = 0; i < 16; ++i) mods.push_back(std::abs(es.eigenvalues()(i)));
        std::sort(mods.begin(), mods.end(), std::greater<double>());
        CHECK(std::abs(mine - mods[1]) <= 1e-8);
    }
}

TEST_CASE("power iteration agrees with the dense path") {
    for (std::uint64_t s = 0; s < 3; ++s) {
        auto gen = make_rng(derive_seed(2002, s));
        Mat q = gaussian_matrix(300, 32, 1.0, gen);
        Mat k = gaussian_matrix(300, 32, 1.0, gen);
        Mat p = softmax_attention(q, k, k).weights;
        const double dense = spectral_gap_dense(p).lambda2_mod;
        const double power = spectral_gap_power(p).lambda2_mod;
        CHECK(std::abs(dense - power) <= 1e-8);
    }
}

TEST_CASE("power iteration reports non-convergence") {
    auto gen = make_rng(3003);
    Mat p = random_stochastic(32, gen);
    CHECK_THROWS_AS(spectral_gap_power(p, 1e-10, 4), ConvergenceError);
}

TEST_CASE("deflation centering residuals") {
    auto uni = deflation_centering_check(Mat::Constant(4, 4, 0.25));
    CHECK(uni.first <= 1e-15);
    CHECK(uni.second <= 1e-15);
    auto id = deflation_centering_check(Mat::Identity(4, 4));
    CHECK(id.first <= 1e-15);
    CHECK(id.second <= 1e-15);
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto gen = make_rng(derive_seed(4004, s));
        const int n = 2 + static_cast<int>(splitmix64(s) % 31);
        auto [rowr, colr] = deflation_centering_check(random_stochastic(n, gen));
        CHECK(rowr <= 1e-10);
        CHECK(colr <= 1e-10);
    }
}

TEST_CASE("lognormal prediction") {
    auto [mu1, s1] = lognormal_predict(1024, 1.0);
    CHECK(mu1 == doctest::Approx(-std::log(1024.0) - 0.5).epsilon(1e-15));
    CHECK(s1 == 1.0);
    auto [mu2, s2] = lognormal_predict(std::exp(1.0), 0.0);
    CHECK(mu2 == doctest::Approx(-1.0).epsilon(1e-15));
    auto [mu3, s3] = lognormal_predict(64, 2.0);
    CHECK(mu3 == doctest::Approx(-std::log(64.0) - 1.0).epsilon(1e-15));
    (void)s2;
    (void)s3;
}

TEST_CASE("lognormal fit basics") {
    const int n = 16;
    LogFit fit = lognormal_fit(Mat::Constant(n, n, 1.0 / n));
    CHECK(fit.sigma2_log == doctest::Approx(0.0));
    CHECK(fit.mu_log == doctest::Approx(-std::log(double(n))));
    CHECK(fit.ks_stat == 0.0);
    Mat withzero = Mat::Constant(4, 4, 0.25);
    withzero(1, 2) = 0.0;
    CHECK_THROWS_AS(lognormal_fit(withzero), DomainError);
}

TEST_CASE("softmax attention entries follow the predicted log-normal law") {
    // Desk-size render of the N=512 reproduction (full version in the
    // acceptance suite).
    const int n = 256, d = 64;
    double mu_acc = 0, s2_acc = 0, ks_acc = 0, shat_acc = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        auto gen = make_rng(derive_seed(5005, s));
        Mat q = gaussian_matrix(n, d, 1.0, gen);
        Mat k = gaussian_matrix(n, d, 1.0, gen);
        Mat scores = (q * k.transpose()) / std::sqrt(double(d));
        shat_acc += (scores.array() - scores.mean()).square().mean();
        LogFit fit = lognormal_fit(
            Mat(softmax_log_weights(q, k).array().exp()));
        mu_acc += fit.mu_log;
        s2_acc += fit.sigma2_log;
        ks_acc += fit.ks_stat;
    }
    const double shat = shat_acc / seeds;
    auto [mu_pred, s2_pred] = lognormal_predict(n, shat);
    CHECK(std::abs(mu_acc / seeds - mu_pred) <= 0.15);
    CHECK(std::abs(s2_acc / seeds - shat) / shat <= 0.15);
    CHECK(ks_acc / seeds <= 0.05);
    (void)s2_pred;
}

TEST_CASE("fenton formulas") {
    CHECK(fenton_sum_variance(1.0, 64, FentonRegime::moderate) ==
          doctest::Approx(std::log((std::exp(1.0) - 1.0) / 64.0 + 1.0))
              .epsilon(1e-15));
    CHECK(fenton_sum_variance(0.01, 16, FentonRegime::narrow) ==
          doctest::Approx(0.16).epsilon(1e-15));
    CHECK(fenton_sum_variance(2.0, 8, FentonRegime::broad, 0.5, 0.25) ==
          doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("lln temperature") {
    LLNParams p = solve_alpha_beta(2.0, 0.1, 1.0, 1.0);
    CHECK(p.alpha * p.alpha * p.sigma_q * p.sigma_q ==
          doctest::Approx(0.225).epsilon(1e-12));
    CHECK(lln_temperature(p) == doctest::Approx(1.0).epsilon(1e-12));
    LLNParams p2 = solve_alpha_beta(1.0, 0.0, 1.0, 1.0);
    CHECK(lln_temperature(p2) == doctest::Approx(1.0).epsilon(1e-12));
    LLNParams bad = p;
    bad.b = -10.0;
    CHECK_THROWS_AS(lln_temperature(bad), DomainError);
}

TEST_CASE("entropy increases and row variance decreases with temperature") {
    const std::vector<double> taus{0.25, 0.5, 1.0, 2.0, 4.0};
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto gen = make_rng(derive_seed(6006, s));
        const int n = 16;
        Mat x = gaussian_matrix(n, n, 1.0, gen);
        double prev_h = -1.0;
        Vec prev_var;
        for (double tau : taus) {
            Mat p = x / tau;
            for (int i = 0; i < n; ++i) {
                const double m = p.row(i).maxCoeff();
                p.row(i) = (p.row(i).array() - m).exp();
                p.row(i) /= p.row(i).sum();
            }
            const double h = matrix_entropy(p);
            if (prev_h >= 0.0) CHECK(h >= prev_h - 1e-12);
            Vec var(n);
            for (int i = 0; i < n; ++i)
                var(i) = (p.row(i).array() - 1.0 / n).square().mean();
            if (prev_var.size() > 0)
                CHECK((var - prev_var).maxCoeff() <= 1e-12);
            prev_h = h;
            prev_var = var;
        }
    }
}

TEST_CASE("eigenpair variance identity on deflated matrices") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto gen = make_rng(derive_seed(7007, s));
        const int n = 2 + static_cast<int>(splitmix64(s + 50) % 31);
        Mat pb = deflate(random_stochastic(n, gen));
        Eigen::EigenSolver<Mat> es(pb, true);
        Mat gram = pb.transpose() * pb;
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXcd v = es.eigenvectors().col(i);
            const double lhs = std::abs((v.adjoint() * gram * v)(0, 0)) /
                               std::abs((v.adjoint() * v)(0, 0));
            CHECK(std::abs(lhs - std::norm(es.eigenvalues()(i))) <= 1e-8);
        }
    }
}

TEST_CASE("analyze_matrix matches the individual diagnostics") {
    auto gen = make_rng(8008);
    Mat q = gaussian_matrix(32, 8, 1.0, gen);
    Mat k = gaussian_matrix(32, 8, 1.0, gen);
    Mat w = softmax_attention(q, k, k).weights;
    StatsReport rep = analyze_matrix(q, k, w);
    CHECK(rep.temperature_empirical == empirical_temperature(q, k));
    CHECK(rep.entropy_bits == matrix_entropy(w));
    CHECK(rep.spectral_gap ==
          doctest::Approx(1.0 - rep.lambda2_mod).epsilon(1e-15));
    LogFit fit = lognormal_fit(w);
    CHECK(rep.mu_log == fit.mu_log);
    CHECK(rep.sigma2_log == fit.sigma2_log);
    CHECK(rep.ks_stat == fit.ks_stat);
    CHECK(rep.entropy_bits >= 0.0);
    CHECK(rep.entropy_bits <= std::log2(32.0));
}
