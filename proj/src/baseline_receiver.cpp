#include "dtrx/baseline_receiver.hpp"

#include "dtrx/error.hpp"

#include <algorithm>
#include <string>

namespace dtrx::baseline {

ChannelEstimate ls_estimate(const ofdm::FrameConfig& cfg, std::span<const cplx> received,
                            const ofdm::PilotPattern& pilots, double noise_var)
{
    const std::size_t s = cfg.num_subcarriers;
    const std::size_t t = cfg.num_symbols;
    if (received.size() != s * t || pilots.mask.size() != s * t)
        throw DimensionError("ls_estimate: grid does not match the frame config");

    std::vector<std::size_t> psym;
    for (std::size_t n = 0; n < t; ++n)
        if (cfg.is_pilot_symbol(n))
            psym.push_back(n);
    if (psym.empty())
        throw Error("ls_estimate: frame has no pilot symbols");

    ChannelEstimate est;
    est.source = EstimateSource::ls_interpolated;
    est.noise_var = noise_var;
    est.h.assign(s * t, cplx{});
    for (auto n : psym)
        for (std::size_t m = 0; m < s; ++m)
            est.h[m + n * s] = received[m + n * s] / pilots.values[m + n * s];

    for (std::size_t n = 0; n < t; ++n) {
        if (cfg.is_pilot_symbol(n))
            continue;
        const auto hi = std::upper_bound(psym.begin(), psym.end(), n);
        if (hi == psym.begin() || hi == psym.end()) {
            const std::size_t src = (hi == psym.begin()) ? psym.front() : psym.back();
            for (std::size_t m = 0; m < s; ++m)
                est.h[m + n * s] = est.h[m + src * s];
            continue;
        }
        const std::size_t a = *(hi - 1);
        const std::size_t b = *hi;
        const double w = static_cast<double>(n - a) / static_cast<double>(b - a);
        for (std::size_t m = 0; m < s; ++m)
            est.h[m + n * s] = (1.0 - w) * est.h[m + a * s] + w * est.h[m + b * s];
    }
    return est;
}

ChannelEstimate perfect_estimate(const channel::ChannelRealization& truth, double noise_var)
{
    ChannelEstimate est;
    est.source = EstimateSource::perfect;
    est.noise_var = noise_var;
    est.h = truth.response;
    return est;
}

Equalized equalize(const ofdm::FrameConfig& cfg, std::span<const cplx> received, const ChannelEstimate& est,
                   double noise_var, Equalizer kind)
{
    if (!(noise_var > 0.0))
        throw Error("equalize: noise variance must be positive");
    if (received.size() != cfg.resource_elements() || est.h.size() != received.size())
        throw DimensionError("equalize: grid does not match the frame config");
    const auto idx = ofdm::data_indices(cfg);
    Equalized out;
    out.symbols.resize(idx.size());
    out.bias.resize(idx.size());
    out.noise_vars.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const cplx h = est.h[idx[i]];
        const cplx y = received[idx[i]];
        const double g = std::norm(h);
        if (g == 0.0) {
            out.symbols[i] = cplx{};
            out.bias[i] = 0.0;
            out.noise_vars[i] = erasure_noise_var;
            continue;
        }
        if (kind == Equalizer::mmse) {
            out.symbols[i] = std::conj(h) * y / (g + noise_var);
            out.bias[i] = g / (g + noise_var);
        } else {
            out.symbols[i] = y / h;
            out.bias[i] = 1.0;
        }
        out.noise_vars[i] = std::min(noise_var / g, erasure_noise_var);
    }
    return out;
}

LlrGrid receive_frame(ReceiverKind kind, const ofdm::FrameConfig& cfg, const modem::Constellation& cons,
                      std::span<const cplx> received, double noise_var,
                      const channel::ChannelRealization* truth, Equalizer eq)
{
    ChannelEstimate est;
    if (kind == ReceiverKind::perfect_csi) {
        if (!truth)
            throw Error("perfect-csi receiver requires the true channel realization");
        if (!truth->matches(cfg))
            throw ConfigError("perfect-csi: realization does not match the frame config");
        est = perfect_estimate(*truth, noise_var);
    } else {
        est = ls_estimate(cfg, received, ofdm::kronecker_pilot_mask(cfg), noise_var);
    }
    const Equalized e = equalize(cfg, received, est, noise_var, eq);
    const std::size_t q = cons.bits_per_symbol();
    LlrGrid out;
    out.bits_per_symbol = q;
    out.llrs.assign(e.symbols.size() * q, 0.0);
    for (std::size_t i = 0; i < e.symbols.size(); ++i) {
        const cplx x = e.bias[i] > 0.0 ? e.symbols[i] / e.bias[i] : cplx{};
        modem::demap_maxlog(cons, x, cplx{1.0, 0.0}, e.noise_vars[i], std::span<double>(out.llrs).subspan(i * q, q));
    }
    return out;
}

} // namespace dtrx::baseline
