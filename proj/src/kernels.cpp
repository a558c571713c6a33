#include "dtrx/kernels.hpp"

#include <omp.h>

#include <cstddef>
#include <vector>

namespace dtrx::kernels {

namespace {

constexpr std::size_t parallel_threshold = std::size_t{1} << 18;

// Runs body(i, scratch) for every row i in [0, n). Scratch is a per-thread
// buffer of `width` doubles.
template <typename Body>
void for_rows(std::size_t n, std::size_t width, Exec exec, Body&& body)
{
    if (exec == Exec::serial || n < 2) {
        std::vector<double> scratch(width);
        for (std::size_t i = 0; i < n; ++i)
            body(i, scratch.data());
        return;
    }
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
        std::vector<double> scratch(width);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i)
            body(static_cast<std::size_t>(i), scratch.data());
    }
}

inline void store_row(double* dst, const double* src, std::size_t m, bool accumulate)
{
    if (accumulate) {
        for (std::size_t j = 0; j < m; ++j)
            dst[j] += src[j];
    } else {
        for (std::size_t j = 0; j < m; ++j)
            dst[j] = src[j];
    }
}

} // namespace

Exec auto_exec(std::size_t flops) noexcept
{
    if (flops < parallel_threshold || omp_in_parallel() || omp_get_max_threads() < 2)
        return Exec::serial;
    return Exec::parallel;
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec)
{
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for_rows(n, m, exec, [=](std::size_t i, double* row) {
        for (std::size_t j = 0; j < m; ++j)
            row[j] = 0.0;
        const double* ai = pa + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = pb + p * m;
            for (std::size_t j = 0; j < m; ++j)
                row[j] += av * bp[j];
        }
        store_row(pc + i * m, row, m, accumulate);
    });
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec)
{
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for_rows(n, m, exec, [=](std::size_t i, double* row) {
        const double* ai = pa + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = pb + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += ai[p] * bj[p];
            row[j] = acc;
        }
        store_row(pc + i * m, row, m, accumulate);
    });
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec)
{
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for_rows(n, m, exec, [=](std::size_t i, double* row) {
        for (std::size_t j = 0; j < m; ++j)
            row[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[p * n + i];
            const double* bp = pb + p * m;
            for (std::size_t j = 0; j < m; ++j)
                row[j] += av * bp[j];
        }
        store_row(pc + i * m, row, m, accumulate);
    });
}

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate)
{
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += a[i * k + p] * b[p * m + j];
            c[i * m + j] = accumulate ? c[i * m + j] + acc : acc;
        }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate)
{
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += a[i * k + p] * b[j * k + p];
            c[i * m + j] = accumulate ? c[i * m + j] + acc : acc;
        }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate)
{
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += a[p * n + i] * b[p * m + j];
            c[i * m + j] = accumulate ? c[i * m + j] + acc : acc;
        }
}

} // namespace reference

} // namespace dtrx::kernels
