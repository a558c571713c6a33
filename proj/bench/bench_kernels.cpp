// Serial reference vs. OpenMP kernels. Run with OMP_NUM_THREADS set to the
// core count; on a single core the parallel variants only show overhead.

#include "dtrx/kernels.hpp"
#include "dtrx/ldpc.hpp"
#include "dtrx/link.hpp"
#include "dtrx/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace dtrx;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v)
        x = g(rng);
    return v;
}

void BM_gemm_reference(benchmark::State& st)
{
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : st) {
        kernels::reference::gemm_nn(a, b, c, n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_gemm(benchmark::State& st, kernels::Exec exec)
{
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : st) {
        kernels::gemm_nn(a, b, c, n, n, n, false, exec);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_bp(benchmark::State& st, kernels::Exec exec)
{
    static const ldpc::LdpcCode code(ldpc::construct_regular(1296, 3, 6, 1));
    Rng rng(3);
    std::normal_distribution<double> g(2.0, 2.0);
    std::vector<double> llrs(code.n());
    for (auto& l : llrs)
        l = g(rng);
    ldpc::DecodeOptions opts;
    opts.early_exit = false;
    opts.exec = exec;
    for (auto _ : st)
        benchmark::DoNotOptimize(ldpc::bp_decode(code, llrs, opts));
}

void BM_sweep(benchmark::State& st, kernels::Exec exec)
{
    static const link::Link lnk([] {
        auto cfg = link::parse_config("");
        cfg.seed = 5;
        return cfg;
    }());
    const std::vector<double> snrs{10.0};
    link::StopRule stop;
    stop.min_frames = stop.max_frames = 8;
    for (auto _ : st)
        benchmark::DoNotOptimize(link::run_ber_sweep(lnk, snrs, stop, exec));
}

} // namespace

BENCHMARK(BM_gemm_reference)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK_CAPTURE(BM_gemm, serial, kernels::Exec::serial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK_CAPTURE(BM_gemm, parallel, kernels::Exec::parallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK_CAPTURE(BM_bp, serial, kernels::Exec::serial);
BENCHMARK_CAPTURE(BM_bp, parallel, kernels::Exec::parallel);
BENCHMARK_CAPTURE(BM_sweep, serial, kernels::Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_sweep, parallel, kernels::Exec::parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
