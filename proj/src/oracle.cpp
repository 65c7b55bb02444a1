#include "lln/oracle.hpp"

#include "lln/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace lln::oracle {

KernelKind kernel_from_string(const std::string& s) {
    if (s == "exp-scaled" || s == "exp_scaled") return KernelKind::exp_scaled;
    if (s == "elementwise-exp-product" || s == "elementwise_exp_product")
        return KernelKind::elementwise_exp_product;
    if (s == "quadratic") return KernelKind::quadratic;
    if (s == "relu") return KernelKind::relu;
    throw DomainError("unknown kernel: " + s);
}

namespace {

double kernel_value(const KernelSpec& spec, const Eigen::RowVectorXd& qi,
                    const Eigen::RowVectorXd& kj) {
    switch (spec.kind) {
        case KernelKind::exp_scaled:
            return std::exp(qi.dot(kj) /
                            std::sqrt(static_cast<double>(qi.size())));
        case KernelKind::elementwise_exp_product: {
            double acc = 0.0;
            for (Eigen::Index m = 0; m < qi.size(); ++m)
                acc += std::exp(spec.gain_q * qi(m)) *
                       std::exp(spec.gain_k * kj(m));
            return acc;
        }
        case KernelKind::quadratic: {
            const double s = qi.dot(kj);
            return s * s;
        }
        case KernelKind::relu:
            return std::max(0.0, qi.dot(kj));
    }
    throw DomainError("unknown kernel kind");
}

}  // namespace

AttnResult brute_force_attention(const Mat& q, const Mat& k, const Mat& v,
                                 const KernelSpec& spec) {
    if (q.rows() < 1 || q.cols() < 1) throw ShapeError("q must be at least 1x1");
    require_same_shape(q, k, "q vs k");
    require_same_shape(q, v, "q vs v");
    require_finite(q, "q");
    require_finite(k, "k");
    require_finite(v, "v");
    if (!std::isfinite(spec.gain_q) || !std::isfinite(spec.gain_k))
        throw DomainError("kernel gains must be finite");

    const Eigen::Index n = q.rows();
    Mat weights(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            weights(i, j) = kernel_value(spec, q.row(i), k.row(j));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = weights.row(i).sum();
        if (!(s > 0.0) || !std::isfinite(s))
            throw DegenerateError("degenerate kernel row (nonpositive sum)");
        weights.row(i) /= s;
    }
    Mat output = weights * v;
    return {std::move(output), std::move(weights)};
}

Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x,
                     double h) {
    if (!(h > 0.0)) throw DomainError("h must be positive");
    Mat grad(x.rows(), x.cols());
    Mat xp = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double orig = xp(i, j);
            xp(i, j) = orig + h;
            const double fp = f(xp);
            xp(i, j) = orig - h;
            const double fm = f(xp);
            xp(i, j) = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw DomainError("non-finite function value in finite diff");
            grad(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    return grad;
}

double mc_lognormal_sum_var(double sigma_sq, int n, int trials,
                            std::uint64_t seed) {
    if (!(sigma_sq > 0.0)) throw DomainError("sigma_sq must be positive");
    if (n < 1) throw DomainError("n must be >= 1");
    if (trials < 100) throw DomainError("need at least 100 trials");
    auto gen = make_rng(seed);
    std::normal_distribution<double> dist(0.0, std::sqrt(sigma_sq));
    std::vector<double> logsums(static_cast<std::size_t>(trials));
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int t = 0; t < trials; ++t) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            z[i] = dist(gen);
            zmax = std::max(zmax, z[i]);
        }
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += std::exp(z[i] - zmax);
        logsums[t] = zmax + std::log(acc);
    }
    double mean = 0.0;
    for (double v : logsums) mean += v;
    mean /= trials;
    double var = 0.0;
    for (double v : logsums) var += (v - mean) * (v - mean);
    return var / (trials - 1);
}

}  // namespace lln::oracle
