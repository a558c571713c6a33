#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dtrx::ofdm {

using cplx = std::complex<double>;

struct FrameConfig {
    std::size_t num_subcarriers = 128;
    double subcarrier_spacing_hz = 240e3;
    std::size_t num_symbols = 14;
    std::size_t fft_size = 128;
    std::size_t cp_length = 16;
    std::vector<std::size_t> pilot_symbols{2, 11};
    std::uint64_t pilot_seed = 1;

    /// Throws ConfigError when an invariant is broken.
    void validate() const;

    double sample_rate_hz() const { return static_cast<double>(fft_size) * subcarrier_spacing_hz; }
    /// Duration of one OFDM symbol including its cyclic prefix.
    double symbol_duration_s() const { return static_cast<double>(fft_size + cp_length) / sample_rate_hz(); }
    std::size_t samples_per_symbol() const { return fft_size + cp_length; }
    std::size_t samples_per_frame() const { return num_symbols * samples_per_symbol(); }
    std::size_t resource_elements() const { return num_subcarriers * num_symbols; }
    bool is_pilot_symbol(std::size_t n) const;
    std::size_t pilot_count() const;
    std::size_t data_count() const { return resource_elements() - pilot_count(); }

    friend bool operator==(const FrameConfig&, const FrameConfig&) = default;
};

struct PilotPattern {
    std::vector<std::uint8_t> mask; // S x T, subcarrier fastest
    std::vector<cplx> values;       // S x T, zero where mask is clear
};

/// Full pilot OFDM symbols at the configured indices, the outer product of a
/// symbol indicator with an all-ones subcarrier vector. Pilot values are
/// seeded unit-modulus QPSK points.
PilotPattern kronecker_pilot_mask(const FrameConfig& cfg);

/// Complex S x T grid stored subcarrier-fastest: element (m, n) is at m + n*S.
class ResourceGrid {
public:
    ResourceGrid() = default;
    ResourceGrid(std::size_t subcarriers, std::size_t symbols);

    std::size_t subcarriers() const noexcept { return s_; }
    std::size_t symbols() const noexcept { return t_; }
    std::size_t index(std::size_t m, std::size_t n) const noexcept { return m + n * s_; }

    cplx& operator()(std::size_t m, std::size_t n) { return values_[index(m, n)]; }
    cplx operator()(std::size_t m, std::size_t n) const { return values_[index(m, n)]; }

    std::vector<cplx>& values() noexcept { return values_; }
    const std::vector<cplx>& values() const noexcept { return values_; }
    std::vector<std::uint8_t>& pilot_mask() noexcept { return mask_; }
    const std::vector<std::uint8_t>& pilot_mask() const noexcept { return mask_; }
    bool is_pilot(std::size_t m, std::size_t n) const { return !mask_.empty() && mask_[index(m, n)] != 0; }

private:
    std::size_t s_ = 0;
    std::size_t t_ = 0;
    std::vector<cplx> values_;
    std::vector<std::uint8_t> mask_;
};

/// Flat indices (m + n*S) of the data resource elements in transmit order:
/// symbol-major, subcarrier-first, pilots skipped.
std::vector<std::size_t> data_indices(const FrameConfig& cfg);

/// Places data symbols on the non-pilot resource elements in transmit order.
ResourceGrid build_grid(const FrameConfig& cfg, std::span<const cplx> data_symbols);
/// Reads data resource elements back in transmit order.
std::vector<cplx> extract_data(const FrameConfig& cfg, std::span<const cplx> grid_values);

/// Unitary inverse DFT per symbol with cyclic prefix. Output length T*(N+cp).
std::vector<cplx> ofdm_modulate(const FrameConfig& cfg, const ResourceGrid& grid);
/// Drops the prefix, unitary forward DFT, keeps the first S bins.
std::vector<cplx> ofdm_demodulate(const FrameConfig& cfg, std::span<const cplx> signal);

} // namespace dtrx::ofdm
