#pragma once

#include "dtrx/channel.hpp"
#include "dtrx/llr_grid.hpp"
#include "dtrx/modem.hpp"
#include "dtrx/ofdm.hpp"

#include <complex>
#include <span>
#include <vector>

namespace dtrx::baseline {

using cplx = std::complex<double>;

enum class EstimateSource { ls_interpolated, perfect };

struct ChannelEstimate {
    std::vector<cplx> h; // S x T, subcarrier fastest
    EstimateSource source = EstimateSource::ls_interpolated;
    double noise_var = 0.0;
};

/// Least squares at pilot REs, linear interpolation in time between pilot
/// symbols and constant extrapolation beyond the first and last one.
ChannelEstimate ls_estimate(const ofdm::FrameConfig& cfg, std::span<const cplx> received,
                            const ofdm::PilotPattern& pilots, double noise_var);

/// Genie estimate: the true frequency response, copied bitwise.
ChannelEstimate perfect_estimate(const channel::ChannelRealization& truth, double noise_var);

enum class Equalizer { mmse, zf };

/// Effective noise variance reported for a resource element whose channel
/// estimate is zero.
inline constexpr double erasure_noise_var = 1e12;

/// One-tap equalizer output per data RE, in transmit order.
struct Equalized {
    /// MMSE: conj(H) y / (|H|^2 + N0). ZF: y / H.
    std::vector<cplx> symbols;
    /// E[symbols | x] = bias * x. |H|^2 / (|H|^2 + N0) for MMSE, 1 for ZF.
    std::vector<double> bias;
    /// Noise variance of symbols / bias, N0 / |H|^2 capped at erasure_noise_var.
    std::vector<double> noise_vars;
};

Equalized equalize(const ofdm::FrameConfig& cfg, std::span<const cplx> received, const ChannelEstimate& est,
                   double noise_var, Equalizer kind = Equalizer::mmse);

inline Equalized mmse_equalize(const ofdm::FrameConfig& cfg, std::span<const cplx> received,
                               const ChannelEstimate& est, double noise_var)
{
    return equalize(cfg, received, est, noise_var, Equalizer::mmse);
}

enum class ReceiverKind { baseline_ls, perfect_csi };

/// Estimation (or genie), one-tap equalisation, bias removal and max-log
/// demapping. perfect_csi requires `truth`.
LlrGrid receive_frame(ReceiverKind kind, const ofdm::FrameConfig& cfg, const modem::Constellation& cons,
                      std::span<const cplx> received, double noise_var,
                      const channel::ChannelRealization* truth, Equalizer eq = Equalizer::mmse);

} // namespace dtrx::baseline
