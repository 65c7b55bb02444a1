#include "lln/attention.hpp"
#include "lln/bench.hpp"
#include "lln/io.hpp"
#include "lln/moment_match.hpp"
#include "lln/rng.hpp"
#include "lln/stats.hpp"
#include "lln/sweep.hpp"
#include "lln/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw lln::IoError("cannot open for writing: " + path);
    return file;
}

// ---------------------------------------------------------------- gen ----

int cmd_gen(std::uint64_t seed, int n, int d, double sigma_q, double sigma_k,
            double sigma_v, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw lln::IoError("cannot create directory: " + out_dir);
    auto gen = lln::make_rng(seed);
    lln::write_matrix_csv((fs::path(out_dir) / "q.csv").string(),
                          lln::gaussian_matrix(n, d, sigma_q, gen));
    lln::write_matrix_csv((fs::path(out_dir) / "k.csv").string(),
                          lln::gaussian_matrix(n, d, sigma_k, gen));
    lln::write_matrix_csv((fs::path(out_dir) / "v.csv").string(),
                          lln::gaussian_matrix(n, d, sigma_v, gen));
    return kExitOk;
}

// ------------------------------------------------------------ analyze ----

lln::LLNParams read_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lln::IoError("cannot open params file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw lln::IoError(std::string("params parse failure: ") + e.what());
    }
    const double alpha = j.at("alpha").get<double>();
    const double beta = j.at("beta").get<double>();
    if (j.contains("sigma_tilde")) {
        lln::LLNParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.a = j.value("a", 1.0);
        p.b = j.value("b", 0.0);
        p.sigma_q = j.value("sigma_q", 1.0);
        p.sigma_k = j.value("sigma_k", 1.0);
        p.sigma_tilde = j.at("sigma_tilde").get<double>();
        p.validate();
        return p;
    }
    return lln::LLNParams::from_gains(alpha, beta);
}

int cmd_analyze(const std::string& q_path, const std::string& k_path,
                const std::string& method_str,
                const std::optional<std::string>& params_path, int block_size,
                const std::string& out_path) {
    const lln::Method method = lln::method_from_string(method_str);
    lln::Mat q = lln::read_matrix_csv(q_path);
    lln::Mat k = lln::read_matrix_csv(k_path);
    lln::require_same_shape(q, k, "q vs k");

    lln::LLNParams params;
    if (method == lln::Method::lln || method == lln::Method::lln_diag) {
        if (!params_path)
            throw lln::DomainError("method " + method_str +
                                   " requires --params");
        params = read_params_file(*params_path);
    }

    lln::AttnConfig cfg;
    cfg.method = method;
    cfg.block_size = block_size;
    const lln::Mat weights = lln::attention_weights(cfg, q, k, params);
    // Block-diagonal weights carry structural zeros outside the blocks; the
    // log fit runs over the strictly positive entries there.
    const bool allow_zeros = method == lln::Method::block_diag;
    const lln::StatsReport rep = lln::analyze_matrix(q, k, weights, allow_zeros);

    nlohmann::ordered_json j;
    j["method"] = method_str;
    j["n"] = q.rows();
    j["d"] = q.cols();
    j["temperature_empirical"] = rep.temperature_empirical;
    j["temperature_theoretical"] = rep.temperature_theoretical;
    j["entropy_bits"] = rep.entropy_bits;
    j["lambda2_mod"] = rep.lambda2_mod;
    j["spectral_gap"] = rep.spectral_gap;
    j["mu_log"] = rep.mu_log;
    j["sigma2_log"] = rep.sigma2_log;
    j["ks_stat"] = rep.ks_stat;
    std::ofstream file;
    open_out(file, out_path) << j.dump(2) << '\n';
    return kExitOk;
}

// -------------------------------------------------------------- match ----

int cmd_match(const lln::MatchConfig& cfg, const std::string& out_path) {
    const lln::MatchResult res = lln::fit_broad_constants(cfg);
    std::ofstream file;
    open_out(file, out_path) << lln::match_result_to_json(res) << '\n';
    return kExitOk;
}

// -------------------------------------------------------------- sweep ----

int cmd_sweep(const std::vector<std::string>& kernels,
              const std::vector<double>& temps, int n, int d,
              std::uint64_t seed, const std::string& out_path) {
    const auto rows = lln::kernel_sweep(kernels, temps, n, d, seed);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << lln::sweep_csv_header() << '\n';
    for (const auto& row : rows) out << lln::sweep_row_csv(row) << '\n';
    return kExitOk;
}

// -------------------------------------------------------------- bench ----

int cmd_bench(const lln::BenchConfig& cfg, const std::string& out_path) {
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << lln::bench_csv_header() << '\n';
    for (const lln::BenchRecord& rec : lln::run_bench(cfg))
        out << lln::bench_record_csv(rec) << '\n';
    return kExitOk;
}

// ------------------------------------------------------------- verify ----

int cmd_verify(const std::string& suite, std::uint64_t seed,
               const std::string& inject) {
    std::vector<lln::CheckResult> checks;
    const bool inject_row = inject == "row-sum";
    if (!inject.empty() && !inject_row)
        throw lln::DomainError("unknown defect to inject: " + inject);
    if (suite == "all" || suite == "stats") {
        auto v = lln::verify_stats(seed, inject_row);
        checks.insert(checks.end(), v.begin(), v.end());
    }
    if (suite == "all" || suite == "grads") {
        auto v = lln::verify_grads(seed);
        checks.insert(checks.end(), v.begin(), v.end());
    }
    if (suite == "all" || suite == "oracles") {
        auto v = lln::verify_oracles(seed);
        checks.insert(checks.end(), v.begin(), v.end());
    }
    if (checks.empty()) throw lln::DomainError("unknown suite: " + suite);
    bool all_pass = true;
    for (const auto& c : checks) {
        all_pass = all_pass && c.pass;
        std::cout << (c.pass ? "PASS" : "FAIL") << ' ' << c.name
                  << "  worst=" << lln::format_double(c.worst) << "  ("
                  << c.detail << ")\n";
    }
    return all_pass ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Linear Log-Normal attention laboratory: attention kernels, "
        "distribution diagnostics, moment matching, and scaling benchmarks"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Write synthetic q/k/v CSV files");
    std::uint64_t gen_seed = 0;
    int gen_n = 128, gen_d = 64;
    double gen_sq = 1.0, gen_sk = 1.0, gen_sv = 1.0;
    std::string gen_out = ".";
    gen->add_option("--seed", gen_seed, "RNG seed")->required();
    gen->add_option("--n", gen_n, "token count")->check(CLI::PositiveNumber);
    gen->add_option("--d", gen_d, "head dimension")->check(CLI::PositiveNumber);
    gen->add_option("--sigma-q", gen_sq, "query std");
    gen->add_option("--sigma-k", gen_sk, "key std");
    gen->add_option("--sigma-v", gen_sv, "value std");
    gen->add_option("--out", gen_out, "output directory");

    // analyze
    auto* analyze =
        app.add_subcommand("analyze", "Stats report for one attention matrix");
    std::string an_q, an_k, an_method = "softmax", an_params, an_out;
    int an_block = 64;
    analyze->add_option("--q", an_q, "q.csv path")->required();
    analyze->add_option("--k", an_k, "k.csv path")->required();
    analyze->add_option("--method", an_method,
                        "softmax|lln|block-diag|lln-diag");
    analyze->add_option("--params", an_params, "LLN params JSON path");
    analyze->add_option("--block-size", an_block, "block size")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--out", an_out, "output path (default stdout)");

    // match
    auto* match = app.add_subcommand(
        "match", "Moment-match LLN to softmax; prints the result as JSON");
    lln::MatchConfig mcfg;
    std::vector<double> match_grid;
    std::string match_out;
    match->add_option("--seed", mcfg.seed, "RNG seed")->required();
    match->add_option("--grid", match_grid,
                      "sigma_tilde^2 grid (default 8 points in [1,4])");
    match->add_option("--n", mcfg.n_tokens, "tokens per instance");
    match->add_option("--d", mcfg.dim, "head dimension");
    match->add_option("--seeds", mcfg.n_seeds, "seeds per measurement");
    match->add_option("--sigma-q", mcfg.sigma_q, "operating query std");
    match->add_option("--sigma-k", mcfg.sigma_k, "operating key std");
    match->add_option("--out", match_out, "output path (default stdout)");

    // sweep
    auto* sweep = app.add_subcommand(
        "sweep", "Entropy / spectral gap across kernels and temperatures");
    std::vector<std::string> sw_kernels{"softmax", "lln", "lln-nomatch",
                                        "quadratic", "relu"};
    std::vector<double> sw_temps{0.5,
                                 0.7071067811865476,
                                 1.0,
                                 1.4142135623730951,
                                 2.0,
                                 2.8284271247461903,
                                 4.0};
    int sw_n = 256, sw_d = 64;
    std::uint64_t sw_seed = 0;
    std::string sw_out;
    sweep->add_option("--kernels", sw_kernels,
                      "softmax,lln,lln-nomatch,quadratic,relu")
        ->delimiter(',');
    sweep->add_option("--temps", sw_temps, "temperature grid")->delimiter(',');
    sweep->add_option("--n", sw_n, "token count")->check(CLI::PositiveNumber);
    sweep->add_option("--d", sw_d, "head dimension")->check(CLI::PositiveNumber);
    sweep->add_option("--seed", sw_seed, "RNG seed")->required();
    sweep->add_option("--out", sw_out, "output path (default stdout)");

    // bench
    auto* bench = app.add_subcommand(
        "bench", "Wall-time and peak-memory scaling across sequence lengths");
    lln::BenchConfig bcfg;
    std::vector<std::string> be_methods{"softmax", "lln"};
    double be_budget_gb = 0.0;
    std::string be_out;
    bench->add_option("--methods", be_methods, "softmax,lln,lln-diag")
        ->delimiter(',');
    bench->add_option("--seq-lens", bcfg.seq_lens, "ascending lengths")
        ->delimiter(',');
    bench->add_option("--dim", bcfg.dim, "head dimension");
    bench->add_option("--block-size", bcfg.block_size, "block size");
    bench->add_option("--repeats", bcfg.repeats, "repeats per cell (>= 3)");
    bench->add_flag("--grad", bcfg.with_grad, "time forward+backward (lln)");
    bench->add_option("--alpha", bcfg.alpha, "LLN alpha gain");
    bench->add_option("--beta", bcfg.beta, "LLN beta gain");
    bench->add_option("--seed", bcfg.seed, "RNG seed")->required();
    bench->add_option("--mem-budget-gb", be_budget_gb,
                      "auxiliary memory budget; cells predicted above it "
                      "report status=oom (0 = unlimited)");
    bench->add_option("--out", be_out, "output path (default stdout)");

    // verify
    auto* verify =
        app.add_subcommand("verify", "Run the property suites; exit 0 iff all pass");
    std::string ve_suite = "all", ve_inject;
    std::uint64_t ve_seed = 0;
    verify->add_option("--suite", ve_suite, "all|stats|grads|oracles");
    verify->add_option("--seed", ve_seed, "RNG seed")->required();
    verify->add_option("--inject-defect", ve_inject,
                       "self-test hook: corrupt a fixture (row-sum)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_seed, gen_n, gen_d, gen_sq, gen_sk, gen_sv,
                           gen_out);
        if (analyze->parsed())
            return cmd_analyze(an_q, an_k, an_method,
                               an_params.empty()
                                   ? std::nullopt
                                   : std::optional<std::string>(an_params),
                               an_block, an_out);
        if (match->parsed()) {
            if (!match_grid.empty()) mcfg.sigma_tilde_sq_grid = match_grid;
            return cmd_match(mcfg, match_out);
        }
        if (sweep->parsed())
            return cmd_sweep(sw_kernels, sw_temps, sw_n, sw_d, sw_seed, sw_out);
        if (bench->parsed()) {
            bcfg.methods.clear();
            for (const auto& m : be_methods)
                bcfg.methods.push_back(lln::method_from_string(m));
            bcfg.mem_budget_bytes = static_cast<std::uint64_t>(
                be_budget_gb * 1024.0 * 1024.0 * 1024.0);
            return cmd_bench(bcfg, be_out);
        }
        if (verify->parsed()) return cmd_verify(ve_suite, ve_seed, ve_inject);
    } catch (const lln::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const lln::CalibrationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
