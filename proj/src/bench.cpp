#include "lln/bench.hpp"

#include "lln/memtrack.hpp"
#include "lln/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <new>
#include <sstream>

namespace lln {

void BenchConfig::validate() const {
    if (methods.empty()) throw DomainError("no methods selected");
    if (seq_lens.empty()) throw DomainError("no sequence lengths");
    for (std::size_t i = 1; i < seq_lens.size(); ++i)
        if (seq_lens[i] <= seq_lens[i - 1])
            throw DomainError("sequence lengths must be positive ascending");
    if (seq_lens.front() < 1) throw DomainError("sequence lengths must be positive");
    if (dim < 1) throw DomainError("dim must be >= 1");
    if (block_size < 1) throw DomainError("block_size must be >= 1");
    if (repeats < 3) throw DomainError("repeats must be >= 3");
}

std::uint64_t predicted_peak_bytes(Method m, int n, int d, int block_size,
                                   bool with_grad) {
    using memtrack::matrix_bytes;
    const std::uint64_t nd = matrix_bytes(n, d);
    const std::uint64_t nn = matrix_bytes(n, n);
    const std::uint64_t dd = matrix_bytes(d, d);
    const std::uint64_t b = std::min(block_size, n);
    switch (m) {
        case Method::softmax:
            return nn + nd + 3 * nd;  // weights + output + q/k/v inputs
        case Method::lln:
            if (with_grad)
                return 2 * dd + 2 * matrix_bytes(d, 1) + 3 * nd + 4 * nd;
            return dd + 3 * matrix_bytes(d, 1) + nd + 3 * nd;
        case Method::block_diag:
            return matrix_bytes(b, b) + matrix_bytes(b, d) + nd + 3 * nd;
        case Method::lln_diag:
            return dd + 3 * matrix_bytes(d, 1) + 3 * nd + 3 * nd +
                   matrix_bytes(b, b) + matrix_bytes(b, d);
    }
    return 0;
}

namespace {

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Inputs are charged against the module's high-water mark so the per-cell
// peak reflects everything the measurement holds live.
struct CellInputs {
    Mat q, k, v;
    memtrack::ScopedCharge charge;
    CellInputs(int n, int d, std::uint64_t seed)
        : charge(3 * memtrack::matrix_bytes(n, d)) {
        auto gen = make_rng(seed);
        q = gaussian_matrix(n, d, 1.0, gen);
        k = gaussian_matrix(n, d, 1.0, gen);
        v = gaussian_matrix(n, d, 1.0, gen);
    }
};

}  // namespace

BenchRecord run_bench_cell(Method m, int n, const BenchConfig& cfg) {
    BenchRecord rec;
    rec.method = to_string(m);
    rec.seq_len = n;
    rec.dim = cfg.dim;
    rec.block_size = cfg.block_size;
    rec.repeats = cfg.repeats;

    const std::uint64_t predicted =
        predicted_peak_bytes(m, n, cfg.dim, cfg.block_size, cfg.with_grad);
    if (cfg.mem_budget_bytes > 0 && predicted > cfg.mem_budget_bytes) {
        rec.status = "oom";
        rec.peak_bytes = predicted;
        return rec;
    }

    const LLNParams params = LLNParams::from_gains(cfg.alpha, cfg.beta);
    try {
        memtrack::reset();
        CellInputs in(n, cfg.dim, derive_seed(cfg.seed, static_cast<std::uint64_t>(n)));
        Mat upstream;
        if (cfg.with_grad) upstream = Mat::Ones(n, cfg.dim);

        std::vector<double> times;
        times.reserve(cfg.repeats);
        for (int r = 0; r < cfg.repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            switch (m) {
                case Method::softmax: {
                    volatile double sink = softmax_attention(in.q, in.k, in.v)
                                               .output.sum();
                    (void)sink;
                    break;
                }
                case Method::lln: {
                    if (cfg.with_grad) {
                        volatile double sink =
                            lln_attention_grad(in.q, in.k, in.v, params,
                                               upstream)
                                .dq.sum();
                        (void)sink;
                    } else {
                        volatile double sink =
                            lln_attention_linear(in.q, in.k, in.v, params)
                                .sum();
                        (void)sink;
                    }
                    break;
                }
                case Method::block_diag: {
                    volatile double sink =
                        block_diag_output(in.q, in.k, in.v, cfg.block_size)
                            .sum();
                    (void)sink;
                    break;
                }
                case Method::lln_diag: {
                    volatile double sink =
                        lln_diag_attention(in.q, in.k, in.v, params,
                                           cfg.block_size)
                            .sum();
                    (void)sink;
                    break;
                }
            }
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        rec.wall_time_s = median(times);
        rec.peak_bytes = memtrack::peak_bytes();
    } catch (const std::bad_alloc&) {
        rec.status = "oom";
        rec.peak_bytes = predicted;
        rec.wall_time_s = 0.0;
    }
    return rec;
}

std::vector<BenchRecord> run_bench(const BenchConfig& cfg) {
    cfg.validate();
    std::vector<BenchRecord> out;
    for (Method m : cfg.methods)
        for (int n : cfg.seq_lens) out.push_back(run_bench_cell(m, n, cfg));
    return out;
}

std::string bench_csv_header() {
    return "method,seq_len,dim,block_size,wall_time_s,peak_bytes,repeats,status";
}

std::string bench_record_csv(const BenchRecord& r) {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", r.wall_time_s);
    os << r.method << ',' << r.seq_len << ',' << r.dim << ',' << r.block_size
       << ',' << buf << ',' << r.peak_bytes << ',' << r.repeats << ','
       << r.status;
    return os.str();
}

}  // namespace lln
