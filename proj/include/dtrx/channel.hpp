#pragma once

#include "dtrx/ofdm.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dtrx::channel {

using cplx = std::complex<double>;

/// Tapped-delay-line profile. Delays are in samples at the frame sample rate.
struct TdlProfile {
    std::string name;
    std::vector<std::size_t> delays;
    std::vector<double> powers;
    double carrier_hz = 28e9;
    double speed_min_kmh = 0.0;
    double speed_max_kmh = 0.0;
    /// Static taps (sqrt of the power, zero phase) when false.
    bool fading = true;

    /// Throws ConfigError unless powers sum to 1, delays strictly increase
    /// and the largest delay fits in the cyclic prefix.
    void validate(std::size_t cp_length) const;
};

/// Named presets: "uma-low", "uma-high", "flat-rayleigh", "awgn".
TdlProfile preset(std::string_view name);
std::vector<std::string> preset_names();

/// Number of sinusoids per tap in the sum-of-sinusoids generator.
inline constexpr std::size_t jakes_sinusoids = 16;
/// Stand-in noise variance reported when no noise is added.
inline constexpr double noiseless_variance = 1e-30;

double max_doppler_hz(double speed_kmh, double carrier_hz);

/// Block-fading realization: tap gains are constant over one OFDM symbol.
struct ChannelRealization {
    std::size_t subcarriers = 0;
    std::size_t symbols = 0;
    std::size_t fft_size = 0;
    std::size_t cp_length = 0;
    std::vector<std::size_t> delays;
    std::vector<cplx> gains;    // taps x T, symbol fastest
    std::vector<cplx> response; // S x T, subcarrier fastest
    double speed_kmh = 0.0;
    std::uint64_t seed = 0;

    std::size_t taps() const noexcept { return delays.size(); }
    cplx gain(std::size_t tap, std::size_t n) const { return gains[tap * symbols + n]; }
    cplx frequency_response(std::size_t m, std::size_t n) const { return response[m + n * subcarriers]; }
    bool matches(const ofdm::FrameConfig& cfg) const;
};

/// Jakes sum-of-sinusoids fading per tap, speed drawn uniformly from the
/// profile range. Deterministic in seed.
ChannelRealization generate_realization(const TdlProfile& profile, const ofdm::FrameConfig& cfg, std::uint64_t seed);

/// Time-invariant realization from explicit tap gains (tests, static links).
ChannelRealization static_realization(const ofdm::FrameConfig& cfg, std::vector<std::size_t> delays,
                                      std::span<const cplx> tap_gains);

/// H(m, n) = sum_k g_k(n) exp(-j 2 pi m d_k / N) for every resource element.
void compute_response(ChannelRealization& r);

/// Per-symbol linear convolution with that symbol's tap vector.
std::vector<cplx> apply_channel(const ChannelRealization& r, const ofdm::FrameConfig& cfg,
                                std::span<const cplx> signal);

struct NoisySignal {
    std::vector<cplx> signal;
    double noise_var = 0.0;
};

/// Complex AWGN with N0 = Es * 10^(-snr/10), Es the measured mean sample
/// energy of `signal`. es_n0_db = +infinity adds no noise and reports
/// noiseless_variance.
NoisySignal add_awgn(std::span<const cplx> signal, double es_n0_db, std::uint64_t seed);

} // namespace dtrx::channel
