#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dtrx::modem {

using cplx = std::complex<double>;

/// Gray-labelled constellation with unit average energy. Label l (bits
/// b0..b_{q-1} with b0 as the most significant bit of l) maps to points()[l].
class Constellation {
public:
    /// Square Gray QAM, M in {4, 16, 64}. Even-indexed bits drive the
    /// in-phase axis, odd-indexed bits the quadrature axis:
    ///   QPSK : ((1-2b0) + j(1-2b1)) / sqrt(2)
    ///   16QAM: ((1-2b0)(2-(1-2b2)) + j(1-2b1)(2-(1-2b3))) / sqrt(10)
    ///   64QAM: ((1-2b0)(4-(1-2b2)(2-(1-2b4))) + j(...b1,b3,b5)) / sqrt(42)
    static Constellation qam(std::size_t order);
    /// Arbitrary labelled point set, normalised to unit energy.
    static Constellation custom(std::vector<cplx> points);

    std::size_t order() const noexcept { return points_.size(); }
    std::size_t bits_per_symbol() const noexcept { return bits_; }
    const std::vector<cplx>& points() const noexcept { return points_; }

    /// Bit b (0 = first mapped bit) of label l.
    std::uint8_t label_bit(std::size_t label, std::size_t b) const noexcept
    {
        return static_cast<std::uint8_t>((label >> (bits_ - 1 - b)) & 1u);
    }

private:
    Constellation(std::vector<cplx> points, std::size_t bits);
    std::vector<cplx> points_;
    std::size_t bits_ = 0;
};

/// Maps q bits to one symbol.
cplx map_bits(const Constellation& cons, std::span<const std::uint8_t> bits);
/// Maps a bit stream (length a multiple of q) to symbols.
std::vector<cplx> map_stream(const Constellation& cons, std::span<const std::uint8_t> bits);

/// Max-log LLRs of y = h x + n. Positive favours bit 0.
void demap_maxlog(const Constellation& cons, cplx y, cplx h, double noise_var, std::span<double> llrs);
std::vector<double> demap_maxlog(const Constellation& cons, cplx y, cplx h, double noise_var);

/// Exact a-posteriori LLRs by log-sum-exp over all points.
std::vector<double> exact_app_demap(const Constellation& cons, cplx y, cplx h, double noise_var);

/// Index of the point closest to y (hard symbol decision).
std::size_t nearest_point(const Constellation& cons, cplx y);

} // namespace dtrx::modem
