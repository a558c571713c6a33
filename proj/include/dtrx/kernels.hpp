#pragma once

// Dense inner loops shared by the autodiff engine. Each kernel has a plain
// serial reference and an OpenMP variant that partitions output rows across
// threads. Both visit the reduction index in the same order, so results are
// bitwise identical; tests/test_kernels.cpp holds them to that.

#include <cstddef>
#include <span>

namespace dtrx::kernels {

enum class Exec { serial, parallel };

/// Parallel when the work is large enough and we are not already inside an
/// OpenMP region (frame- or batch-level parallelism takes precedence).
Exec auto_exec(std::size_t flops) noexcept;

/// body(i) for i in [0, n); iterations must write disjoint outputs.
template <typename Body>
void for_each_index(std::size_t n, Exec exec, Body&& body)
{
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i)
        body(static_cast<std::size_t>(i));
}

/// c[n x m] = a[n x k] * b[k x m]   (c += ... when accumulate)
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec);

/// c[n x m] = a[n x k] * b[m x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec);

/// c[n x m] = a[k x n]^T * b[k x m]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec);

namespace reference {

// Textbook triple loops. Kept for testing and benchmarking only.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t m, bool accumulate);

} // namespace reference

} // namespace dtrx::kernels
