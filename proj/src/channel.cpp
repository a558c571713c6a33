#include "dtrx/channel.hpp"

#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace dtrx::channel {

namespace {

constexpr double speed_of_light = 299'792'458.0;

TdlProfile make_uma(std::string name, double vmin, double vmax)
{
    TdlProfile p;
    p.name = std::move(name);
    p.delays = {0, 2, 5, 9};
    p.powers = {0.5, 0.25, 0.15, 0.10};
    p.speed_min_kmh = vmin;
    p.speed_max_kmh = vmax;
    return p;
}

} // namespace

void TdlProfile::validate(std::size_t cp_length) const
{
    if (delays.empty() || delays.size() != powers.size())
        throw ConfigError("profile '" + name + "': need one power per tap");
    const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("profile '" + name + "': tap powers must sum to 1");
    for (std::size_t k = 0; k < delays.size(); ++k) {
        if (powers[k] < 0.0)
            throw ConfigError("profile '" + name + "': negative tap power");
        if (k > 0 && delays[k] <= delays[k - 1])
            throw ConfigError("profile '" + name + "': delays must be strictly increasing");
    }
    if (delays.back() > cp_length)
        throw ConfigError("profile '" + name + "': max delay " + std::to_string(delays.back()) +
                          " exceeds cyclic prefix " + std::to_string(cp_length));
    if (speed_min_kmh < 0.0 || speed_max_kmh < speed_min_kmh)
        throw ConfigError("profile '" + name + "': bad speed range");
}

TdlProfile preset(std::string_view name)
{
    if (name == "uma-low")
        return make_uma("uma-low", 0.0, 60.0);
    if (name == "uma-high")
        return make_uma("uma-high", 60.0, 120.0);
    if (name == "flat-rayleigh") {
        TdlProfile p;
        p.name = "flat-rayleigh";
        p.delays = {0};
        p.powers = {1.0};
        p.speed_max_kmh = 60.0;
        return p;
    }
    if (name == "awgn") {
        TdlProfile p;
        p.name = "awgn";
        p.delays = {0};
        p.powers = {1.0};
        p.fading = false;
        return p;
    }
    throw ConfigError("unknown channel profile '" + std::string(name) + "'");
}

std::vector<std::string> preset_names()
{
    return {"uma-low", "uma-high", "flat-rayleigh", "awgn"};
}

double max_doppler_hz(double speed_kmh, double carrier_hz)
{
    return speed_kmh / 3.6 * carrier_hz / speed_of_light;
}

bool ChannelRealization::matches(const ofdm::FrameConfig& cfg) const
{
    return subcarriers == cfg.num_subcarriers && symbols == cfg.num_symbols && fft_size == cfg.fft_size &&
           cp_length == cfg.cp_length;
}

void compute_response(ChannelRealization& r)
{
    const double two_pi = 2.0 * std::numbers::pi;
    r.response.assign(r.subcarriers * r.symbols, cplx{});
    for (std::size_t n = 0; n < r.symbols; ++n)
        for (std::size_t m = 0; m < r.subcarriers; ++m) {
            cplx h{};
            for (std::size_t k = 0; k < r.taps(); ++k) {
                // Reduce m*d mod N first so the phase is exact for integer delays.
                const std::size_t md = (m * r.delays[k]) % r.fft_size;
                const double phase = -two_pi * static_cast<double>(md) / static_cast<double>(r.fft_size);
                h += r.gain(k, n) * std::polar(1.0, phase);
            }
            r.response[m + n * r.subcarriers] = h;
        }
}

ChannelRealization generate_realization(const TdlProfile& profile, const ofdm::FrameConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    profile.validate(cfg.cp_length);
    ChannelRealization r;
    r.subcarriers = cfg.num_subcarriers;
    r.symbols = cfg.num_symbols;
    r.fft_size = cfg.fft_size;
    r.cp_length = cfg.cp_length;
    r.delays = profile.delays;
    r.seed = seed;
    r.gains.assign(profile.delays.size() * cfg.num_symbols, cplx{});

    Rng rng(derive_seed(seed, {0x6a616b6573ULL}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    r.speed_kmh = profile.speed_min_kmh + (profile.speed_max_kmh - profile.speed_min_kmh) * unit(rng);
    const double fd = max_doppler_hz(r.speed_kmh, profile.carrier_hz);
    const double ts = cfg.symbol_duration_s();
    const double two_pi = 2.0 * std::numbers::pi;

    for (std::size_t k = 0; k < r.taps(); ++k) {
        if (!profile.fading) {
            for (std::size_t n = 0; n < r.symbols; ++n)
                r.gains[k * r.symbols + n] = std::sqrt(profile.powers[k]);
            continue;
        }
        double doppler[jakes_sinusoids];
        double phase[jakes_sinusoids];
        for (std::size_t i = 0; i < jakes_sinusoids; ++i) {
            doppler[i] = fd * std::cos(two_pi * unit(rng));
            phase[i] = two_pi * unit(rng);
        }
        const double amp = std::sqrt(profile.powers[k] / static_cast<double>(jakes_sinusoids));
        for (std::size_t n = 0; n < r.symbols; ++n) {
            const double t = static_cast<double>(n) * ts;
            cplx g{};
            for (std::size_t i = 0; i < jakes_sinusoids; ++i)
                g += std::polar(1.0, two_pi * doppler[i] * t + phase[i]);
            r.gains[k * r.symbols + n] = amp * g;
        }
    }
    compute_response(r);
    return r;
}

ChannelRealization static_realization(const ofdm::FrameConfig& cfg, std::vector<std::size_t> delays,
                                      std::span<const cplx> tap_gains)
{
    cfg.validate();
    if (delays.size() != tap_gains.size() || delays.empty())
        throw DimensionError("static_realization: one gain per delay required");
    for (auto d : delays)
        if (d > cfg.cp_length)
            throw ConfigError("static_realization: delay exceeds cyclic prefix");
    ChannelRealization r;
    r.subcarriers = cfg.num_subcarriers;
    r.symbols = cfg.num_symbols;
    r.fft_size = cfg.fft_size;
    r.cp_length = cfg.cp_length;
    r.delays = std::move(delays);
    r.gains.resize(r.taps() * r.symbols);
    for (std::size_t k = 0; k < r.taps(); ++k)
        for (std::size_t n = 0; n < r.symbols; ++n)
            r.gains[k * r.symbols + n] = tap_gains[k];
    compute_response(r);
    return r;
}

std::vector<cplx> apply_channel(const ChannelRealization& r, const ofdm::FrameConfig& cfg,
                                std::span<const cplx> signal)
{
    if (!r.matches(cfg))
        throw ConfigError("apply_channel: realization was generated for a different frame config");
    if (signal.size() != cfg.samples_per_frame())
        throw DimensionError("apply_channel: signal length does not match the frame");
    const std::size_t sps = cfg.samples_per_symbol();
    std::vector<cplx> out(signal.size());
    for (std::size_t t = 0; t < signal.size(); ++t) {
        const std::size_t n = t / sps;
        cplx acc{};
        for (std::size_t k = 0; k < r.taps(); ++k)
            if (t >= r.delays[k])
                acc += r.gain(k, n) * signal[t - r.delays[k]];
        out[t] = acc;
    }
    return out;
}

NoisySignal add_awgn(std::span<const cplx> signal, double es_n0_db, std::uint64_t seed)
{
    NoisySignal out;
    out.signal.assign(signal.begin(), signal.end());
    if (std::isinf(es_n0_db) && es_n0_db > 0) {
        out.noise_var = noiseless_variance;
        return out;
    }
    double es = 0.0;
    for (const auto& s : signal)
        es += std::norm(s);
    es = signal.empty() ? 0.0 : es / static_cast<double>(signal.size());
    const double n0 = es * std::pow(10.0, -es_n0_db / 10.0);
    out.noise_var = std::max(n0, noiseless_variance);
    Rng rng(derive_seed(seed, {0x6177676eULL}));
    std::normal_distribution<double> gauss(0.0, std::sqrt(n0 / 2.0));
    for (auto& s : out.signal) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        s += cplx(re, im);
    }
    return out;
}

} // namespace dtrx::channel
