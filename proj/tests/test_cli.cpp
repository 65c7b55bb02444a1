#include "lln/attention.hpp"
#include "lln/io.hpp"
#include "lln/rng.hpp"
#include "lln/stats.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

std::string cli_path() {
    const char* p = std::getenv("LLN_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LLN_CLI env var not set");
    return p;
}

RunResult run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
        out.append(buf.data(), n);
    const int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("lln_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("gen writes deterministic Gaussian csv files") {
    fs::path d1 = fresh_dir("gen1"), d2 = fresh_dir("gen2");
    CHECK(run_cli("gen --seed 7 --n 2 --d 2 --out " + d1.string()).exit_code == 0);
    CHECK(run_cli("gen --seed 7 --n 2 --d 2 --out " + d2.string()).exit_code == 0);
    for (const char* f : {"q.csv", "k.csv", "v.csv"})
        CHECK(slurp(d1 / f) == slurp(d2 / f));

    fs::path dz = fresh_dir("genz");
    run_cli("gen --seed 3 --n 4 --d 3 --sigma-q 0 --out " + dz.string());
    lln::Mat q = lln::read_matrix_csv((dz / "q.csv").string());
    CHECK(q.cwiseAbs().maxCoeff() == 0.0);

    fs::path db = fresh_dir("genbig");
    run_cli("gen --seed 9 --n 1000 --d 64 --sigma-q 1.5 --out " + db.string());
    lln::Mat qb = lln::read_matrix_csv((db / "q.csv").string());
    const double sd = std::sqrt((qb.array() - qb.mean()).square().mean());
    CHECK(std::abs(sd - 1.5) / 1.5 <= 0.03);
}

TEST_CASE("analyze on the uniform fixture") {
    fs::path dir = fresh_dir("uniform");
    const int n = 4, d = 3;
    lln::Mat q(n, d), k(n, d);
    for (int i = 0; i < n; ++i) {
        q.row(i) << 0.4, -0.2, 1.0;
        k.row(i) << -0.3, 0.8, 0.1;
    }
    lln::write_matrix_csv((dir / "q.csv").string(), q);
    lln::write_matrix_csv((dir / "k.csv").string(), k);
    RunResult r = run_cli("analyze --q " + (dir / "q.csv").string() + " --k " +
                          (dir / "k.csv").string() + " --method softmax");
    CHECK(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["entropy_bits"].get<double>() == doctest::Approx(2.0));
    CHECK(j["spectral_gap"].get<double>() == doctest::Approx(1.0));

    // alpha=beta=0 LLN params give the same uniform report.
    std::ofstream(dir / "params.json") << "{\"alpha\":0,\"beta\":0}";
    RunResult r2 = run_cli("analyze --q " + (dir / "q.csv").string() + " --k " +
                           (dir / "k.csv").string() +
                           " --method lln --params " +
                           (dir / "params.json").string());
    CHECK(r2.exit_code == 0);
    auto j2 = nlohmann::json::parse(r2.out);
    CHECK(j2["entropy_bits"].get<double>() == doctest::Approx(2.0));
    CHECK(j2["spectral_gap"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("analyze matches direct library invocation bit for bit") {
    fs::path dir = fresh_dir("roundtrip");
    run_cli("gen --seed 13 --n 128 --d 16 --out " + dir.string());
    RunResult r = run_cli("analyze --q " + (dir / "q.csv").string() + " --k " +
                          (dir / "k.csv").string() + " --method softmax");
    CHECK(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);

    lln::Mat q = lln::read_matrix_csv((dir / "q.csv").string());
    lln::Mat k = lln::read_matrix_csv((dir / "k.csv").string());
    lln::Mat w = lln::softmax_attention(q, k, k).weights;
    lln::StatsReport rep = lln::analyze_matrix(q, k, w);
    CHECK(j["temperature_empirical"].get<double>() == rep.temperature_empirical);
    CHECK(j["temperature_theoretical"].get<double>() ==
          rep.temperature_theoretical);
    CHECK(j["entropy_bits"].get<double>() == rep.entropy_bits);
    CHECK(j["lambda2_mod"].get<double>() == rep.lambda2_mod);
    CHECK(j["spectral_gap"].get<double>() == rep.spectral_gap);
    CHECK(j["mu_log"].get<double>() == rep.mu_log);
    CHECK(j["sigma2_log"].get<double>() == rep.sigma2_log);
    CHECK(j["ks_stat"].get<double>() == rep.ks_stat);
}

TEST_CASE("analyze error paths") {
    fs::path dir = fresh_dir("analyzeerr");
    CHECK(run_cli("analyze --q /nonexistent/q.csv --k /nonexistent/k.csv "
                  "--method softmax")
              .exit_code == 3);
    lln::write_matrix_csv((dir / "q.csv").string(), lln::Mat::Ones(3, 2));
    lln::write_matrix_csv((dir / "k.csv").string(), lln::Mat::Ones(4, 2));
    CHECK(run_cli("analyze --q " + (dir / "q.csv").string() + " --k " +
                  (dir / "k.csv").string() + " --method softmax")
              .exit_code == 2);
    lln::write_matrix_csv((dir / "k.csv").string(), lln::Mat::Ones(3, 2));
    CHECK(run_cli("analyze --q " + (dir / "q.csv").string() + " --k " +
                  (dir / "k.csv").string() + " --method lln")
              .exit_code == 2);  // missing --params
}

TEST_CASE("match is deterministic and honors the exit-code contract") {
    const std::string flags = "match --seed 42 --n 96 --d 24 --seeds 4";
    RunResult a = run_cli(flags);
    RunResult b = run_cli(flags);
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);
    auto j = nlohmann::json::parse(a.out);
    CHECK(j["residual"].get<double>() >= 0.0);
    CHECK(j["grid"].size() == 8);

    // Degenerate grid -> usage/infeasible exit class.
    RunResult bad = run_cli("match --seed 1 --n 64 --d 16 --seeds 2 "
                            "--grid 2.0,2.0,2.0");
    CHECK(bad.exit_code == 2);
    // Missing required --seed is a parse error.
    CHECK(run_cli("match").exit_code == 2);
}

TEST_CASE("sweep emits the documented csv and softmax entropy rises with tau") {
    fs::path dir = fresh_dir("sweep");
    fs::path out = dir / "sweep.csv";
    RunResult r = run_cli(
        "sweep --kernels softmax,quadratic --temps 0.5,1,2 --n 48 --d 12 "
        "--seed 5 --out " +
        out.string());
    CHECK(r.exit_code == 0);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    CHECK(header == "kernel,temperature,entropy_bits,spectral_gap");
    struct Row {
        std::string kernel;
        double tau, h;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string kernel, tau, h, gap;
        std::getline(ss, kernel, ',');
        std::getline(ss, tau, ',');
        std::getline(ss, h, ',');
        std::getline(ss, gap, ',');
        rows.push_back({kernel, std::stod(tau), std::stod(h)});
    }
    CHECK(rows.size() == 6);
    double prev = -1.0;
    double quad_min = 1e300, quad_max = -1e300;
    for (const auto& row : rows) {
        if (row.kernel == "softmax") {
            CHECK(row.h > prev);
            prev = row.h;
        } else {
            quad_min = std::min(quad_min, row.h);
            quad_max = std::max(quad_max, row.h);
        }
    }
    CHECK(quad_max - quad_min <= 1e-12);  // scale-invariant kernel
}

TEST_CASE("bench csv schema, determinism of peak bytes, and oom handling") {
    RunResult r = run_cli(
        "bench --methods softmax,lln --seq-lens 64,128 --dim 16 --repeats 3 "
        "--seed 2");
    CHECK(r.exit_code == 0);
    std::stringstream ss(r.out);
    std::string header;
    std::getline(ss, header);
    CHECK(header ==
          "method,seq_len,dim,block_size,wall_time_s,peak_bytes,repeats,status");
    int rows = 0;
    std::string line;
    std::uint64_t sm64 = 0, sm128 = 0;
    while (std::getline(ss, line)) {
        ++rows;
        std::stringstream ls(line);
        std::string method, n, d, bs, t, peak, reps, status;
        std::getline(ls, method, ',');
        std::getline(ls, n, ',');
        std::getline(ls, d, ',');
        std::getline(ls, bs, ',');
        std::getline(ls, t, ',');
        std::getline(ls, peak, ',');
        std::getline(ls, reps, ',');
        std::getline(ls, status, ',');
        CHECK(status == "ok");
        if (method == "softmax" && n == "64") sm64 = std::stoull(peak);
        if (method == "softmax" && n == "128") sm128 = std::stoull(peak);
    }
    CHECK(rows == 4);
    CHECK(sm64 > 0);
    CHECK(sm128 > 2 * sm64);  // quadratic term dominates the growth

    RunResult oom = run_cli(
        "bench --methods softmax --seq-lens 4096 --dim 64 --repeats 3 --seed 2 "
        "--mem-budget-gb 0.001");
    CHECK(oom.exit_code == 0);
    CHECK(oom.out.find(",oom") != std::string::npos);
}

TEST_CASE("verify suites pass and the injected defect trips the invariant") {
    RunResult grads = run_cli("verify --suite grads --seed 1");
    CHECK(grads.exit_code == 0);
    CHECK(grads.out.find("FAIL") == std::string::npos);

    RunResult stats = run_cli("verify --suite stats --seed 1");
    CHECK(stats.exit_code == 0);

    RunResult bad = run_cli("verify --suite stats --seed 1 --inject-defect row-sum");
    CHECK(bad.exit_code == 1);
    CHECK(bad.out.find("FAIL row-stochastic") != std::string::npos);
}
