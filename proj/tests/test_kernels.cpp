#include "dtrx/kernels.hpp"
#include "dtrx/rng.hpp"

#include "doctest.h"

#include <omp.h>

#include <random>
#include <vector>

using namespace dtrx;
using namespace dtrx::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v)
        x = g(rng);
    return v;
}

struct Case {
    std::size_t n, k, m;
};

} // namespace

TEST_CASE("gemm variants agree bitwise with the reference")
{
    // Force a team even on a single core so the parallel path really runs.
    omp_set_num_threads(4);
    for (const Case c : {Case{1, 1, 1}, Case{3, 7, 5}, Case{17, 33, 9}, Case{64, 64, 64}, Case{130, 20, 70}}) {
        const auto a = random_vec(c.n * c.k, c.n);
        const auto b = random_vec(c.k * c.m, c.m + 100);
        const auto bt = random_vec(c.m * c.k, c.m + 200);
        const auto at = random_vec(c.k * c.n, c.n + 300);
        const auto init = random_vec(c.n * c.m, 7);
        for (bool acc : {false, true}) {
            std::vector<double> ref = init, ser = init, par = init;
            reference::gemm_nn(a, b, ref, c.n, c.k, c.m, acc);
            gemm_nn(a, b, ser, c.n, c.k, c.m, acc, Exec::serial);
            gemm_nn(a, b, par, c.n, c.k, c.m, acc, Exec::parallel);
            CHECK(ser == ref);
            CHECK(par == ref);

            ref = ser = par = init;
            reference::gemm_nt(a, bt, ref, c.n, c.k, c.m, acc);
            gemm_nt(a, bt, ser, c.n, c.k, c.m, acc, Exec::serial);
            gemm_nt(a, bt, par, c.n, c.k, c.m, acc, Exec::parallel);
            CHECK(ser == ref);
            CHECK(par == ref);

            ref = ser = par = init;
            reference::gemm_tn(at, b, ref, c.n, c.k, c.m, acc);
            gemm_tn(at, b, ser, c.n, c.k, c.m, acc, Exec::serial);
            gemm_tn(at, b, par, c.n, c.k, c.m, acc, Exec::parallel);
            CHECK(ser == ref);
            CHECK(par == ref);
        }
    }
}

TEST_CASE("gemm matches a hand computed product")
{
    const std::vector<double> a{1, 2, 3, 4, 5, 6}; // 2x3
    const std::vector<double> b{1, 0, 0, 1, 1, 1}; // 3x2
    std::vector<double> c(4);
    gemm_nn(a, b, c, 2, 3, 2, false, Exec::serial);
    CHECK(c == std::vector<double>{4, 5, 10, 11});
}

TEST_CASE("for_each_index covers every index once")
{
    omp_set_num_threads(3);
    std::vector<int> hits(1000, 0);
    for_each_index(hits.size(), Exec::parallel, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits)
        CHECK(h == 1);
}

TEST_CASE("auto_exec stays serial for small work and inside a parallel region")
{
    omp_set_num_threads(2);
    CHECK(auto_exec(10) == Exec::serial);
    CHECK(auto_exec(std::size_t{1} << 30) == Exec::parallel);
    Exec inner = Exec::parallel;
#pragma omp parallel num_threads(2)
    {
#pragma omp single
        inner = auto_exec(std::size_t{1} << 30);
    }
    CHECK(inner == Exec::serial);
}
