#pragma once

#include "lln/attention.hpp"
#include "lln/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lln {

struct BenchRecord {
    std::string method;
    int seq_len = 0;
    int dim = 0;
    int block_size = 0;
    double wall_time_s = 0.0;   // median over repeats
    std::uint64_t peak_bytes = 0;
    int repeats = 0;
    std::string status = "ok";  // ok | oom
};

struct BenchConfig {
    std::vector<Method> methods{Method::softmax, Method::lln};
    std::vector<int> seq_lens{512, 1024, 2048, 4096, 8192};
    int dim = 64;
    int block_size = 64;
    int repeats = 5;
    bool with_grad = false;
    double alpha = 0.5;
    double beta = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t mem_budget_bytes = 0;  // 0 = unlimited

    void validate() const;
};

// Dominant matrix buffers a forward (or forward+backward) pass allocates;
// used for the pre-flight budget check. Mirrors the memtrack charges.
std::uint64_t predicted_peak_bytes(Method m, int n, int d, int block_size,
                                   bool with_grad);

// Times one (method, seq_len) cell: median wall time over repeats and the
// deterministic peak of the module's own buffers. Emits status=oom instead
// of failing when the budget or the allocator says no.
BenchRecord run_bench_cell(Method m, int n, const BenchConfig& cfg);

std::vector<BenchRecord> run_bench(const BenchConfig& cfg);

std::string bench_csv_header();
std::string bench_record_csv(const BenchRecord& r);

}  // namespace lln
