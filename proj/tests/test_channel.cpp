#include "dtrx/channel.hpp"
#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace dtrx;
using namespace dtrx::channel;
using ofdm::FrameConfig;

namespace {

std::vector<cplx> random_signal(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> v(n);
    for (auto& x : v)
        x = {g(rng), g(rng)};
    return v;
}

// Kolmogorov-Smirnov statistic of a sample against N(0, sigma^2).
double ks_normal(std::vector<double> x, double sigma)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 0.5 * std::erfc(-x[i] / (sigma * std::sqrt(2.0)));
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

} // namespace

TEST_CASE("presets are valid and named")
{
    for (const auto& name : preset_names())
        CHECK_NOTHROW(preset(name).validate(16));
    const auto p = preset("uma-low");
    CHECK(p.delays == std::vector<std::size_t>{0, 2, 5, 9});
    CHECK(p.speed_max_kmh == 60.0);
    CHECK(preset("uma-high").speed_min_kmh == 60.0);
    CHECK_THROWS_AS(preset("cdl-z"), ConfigError);
    CHECK_THROWS_AS(p.validate(8), ConfigError);
    auto bad = p;
    bad.powers[0] = 0.6;
    CHECK_THROWS_AS(bad.validate(16), ConfigError);
    bad = p;
    bad.delays = {0, 5, 2, 9};
    CHECK_THROWS_AS(bad.validate(16), ConfigError);
}

TEST_CASE("doppler from speed")
{
    CHECK(max_doppler_hz(0.0, 28e9) == 0.0);
    CHECK(max_doppler_hz(36.0, 28e9) == doctest::Approx(10.0 * 28e9 / 299792458.0));
}

TEST_CASE("zero speed gives constant gains")
{
    auto p = preset("uma-low");
    p.speed_max_kmh = 0.0;
    const auto r = generate_realization(p, FrameConfig{}, 42);
    CHECK(r.speed_kmh == 0.0);
    for (std::size_t k = 0; k < r.taps(); ++k)
        for (std::size_t n = 1; n < r.symbols; ++n)
            CHECK(r.gain(k, n) == r.gain(k, 0));
}

TEST_CASE("realizations are deterministic in the seed")
{
    const auto p = preset("uma-high");
    const auto a = generate_realization(p, FrameConfig{}, 5);
    const auto b = generate_realization(p, FrameConfig{}, 5);
    const auto c = generate_realization(p, FrameConfig{}, 6);
    CHECK(a.gains == b.gains);
    CHECK(a.response == b.response);
    CHECK(a.speed_kmh == b.speed_kmh);
    CHECK(a.gains != c.gains);
    CHECK(a.speed_kmh >= 60.0);
    CHECK(a.speed_kmh <= 120.0);
}

TEST_CASE("single tap is flat in frequency")
{
    const auto r = generate_realization(preset("flat-rayleigh"), FrameConfig{}, 9);
    for (std::size_t n = 0; n < r.symbols; ++n)
        for (std::size_t m = 1; m < r.subcarriers; ++m)
            CHECK(std::abs(std::abs(r.frequency_response(m, n)) - std::abs(r.frequency_response(0, n))) < 1e-15);
}

TEST_CASE("response is the DFT of the tap vector")
{
    const FrameConfig cfg;
    const auto r = generate_realization(preset("uma-low"), cfg, 17);
    for (std::size_t n : {0u, 13u})
        for (std::size_t m : {0u, 1u, 50u, 127u}) {
            cplx h{};
            for (std::size_t k = 0; k < r.taps(); ++k)
                h += r.gain(k, n) * std::exp(cplx(0, -2.0 * std::numbers::pi * double(m * r.delays[k]) / 128.0));
            CHECK(std::abs(h - r.frequency_response(m, n)) < 1e-12);
        }
}

TEST_CASE("average tap power is one")
{
    const FrameConfig cfg;
    const auto p = preset("uma-low");
    const int runs = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < runs; ++s) {
        const auto r = generate_realization(p, cfg, static_cast<std::uint64_t>(s));
        double e = 0.0;
        for (std::size_t k = 0; k < r.taps(); ++k)
            e += std::norm(r.gain(k, 7));
        sum += e;
        sum2 += e * e;
    }
    const double mean = sum / runs;
    const double sd = std::sqrt((sum2 / runs - mean * mean) / runs);
    MESSAGE("mean tap energy " << mean << " +- " << sd);
    CHECK(std::abs(mean - 1.0) < 3.0 * sd);
}

TEST_CASE("tap gain marginals are Gaussian (KS at alpha 0.01)")
{
    const FrameConfig cfg;
    const auto p = preset("flat-rayleigh");
    std::vector<double> re, im;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const auto r = generate_realization(p, cfg, s + 100000);
        re.push_back(r.gain(0, 5).real());
        im.push_back(r.gain(0, 5).imag());
    }
    const double crit = 1.628 / std::sqrt(10000.0);
    const double dre = ks_normal(re, std::sqrt(0.5));
    const double dim = ks_normal(im, std::sqrt(0.5));
    MESSAGE("KS D re " << dre << " im " << dim << " critical " << crit);
    CHECK(dre < crit);
    CHECK(dim < crit);
}

TEST_CASE("unit tap at delay zero is the identity")
{
    const FrameConfig cfg;
    const std::vector<cplx> g{1.0};
    const auto r = static_realization(cfg, {0}, g);
    const auto x = random_signal(cfg.samples_per_frame(), 1);
    CHECK(apply_channel(r, cfg, x) == x);
    FrameConfig other = cfg;
    other.cp_length = 8;
    CHECK_THROWS_AS(apply_channel(r, other, random_signal(other.samples_per_frame(), 1)), ConfigError);
    CHECK_THROWS_AS(apply_channel(r, cfg, std::vector<cplx>(3)), DimensionError);
}

TEST_CASE("delayed tap gives the analytic phase ramp on the grid")
{
    const FrameConfig cfg;
    Rng rng(3);
    std::normal_distribution<double> gn;
    ofdm::ResourceGrid grid(cfg.num_subcarriers, cfg.num_symbols);
    for (auto& v : grid.values())
        v = {gn(rng), gn(rng)};
    const auto tx = ofdm::ofdm_modulate(cfg, grid);
    for (std::size_t d : {3u, 11u}) {
        const std::vector<cplx> g{1.0};
        const auto r = static_realization(cfg, {d}, g);
        const auto rx = ofdm::ofdm_demodulate(cfg, apply_channel(r, cfg, tx));
        for (std::size_t n = 0; n < cfg.num_symbols; ++n)
            for (std::size_t m = 0; m < cfg.num_subcarriers; ++m) {
                const cplx ramp = std::polar(1.0, -2.0 * std::numbers::pi * double(m * d) / 128.0);
                CHECK(std::abs(rx[m + n * 128] - ramp * grid(m, n)) < 1e-9);
            }
    }
}

TEST_CASE("two equal taps at delays 0 and 8 have the analytic nulls")
{
    // 1 + exp(-j 2 pi m 8 / 128) vanishes at m = 8 + 16 i.
    const FrameConfig cfg;
    const std::vector<cplx> g{std::sqrt(0.5), std::sqrt(0.5)};
    const auto r = static_realization(cfg, {0, 8}, g);
    for (std::size_t m = 0; m < 128; ++m) {
        const double mag = std::abs(r.frequency_response(m, 0));
        const double expect = std::sqrt(0.5) * std::abs(2.0 * std::cos(std::numbers::pi * double(m) * 8.0 / 128.0));
        CHECK(std::abs(mag - expect) < 1e-9);
        if (m % 16 == 8)
            CHECK(mag < 1e-9);
    }

    // The same nulls appear on the grid after propagation.
    ofdm::ResourceGrid grid(cfg.num_subcarriers, cfg.num_symbols);
    for (auto& v : grid.values())
        v = 1.0;
    const auto rx = ofdm::ofdm_demodulate(cfg, apply_channel(r, cfg, ofdm::ofdm_modulate(cfg, grid)));
    for (std::size_t m = 8; m < 128; m += 16)
        CHECK(std::abs(rx[m]) < 1e-9);
}

TEST_CASE("awgn level follows the measured signal energy")
{
    const auto x = random_signal(1'000'000, 2); // Es = 2
    const auto y = add_awgn(x, 3.0, 77);
    const double n0 = 2.0 * std::pow(10.0, -0.3);
    CHECK(y.noise_var == doctest::Approx(2.0 * std::pow(10.0, -0.3)).epsilon(1e-2));
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        var += std::norm(y.signal[i] - x[i]);
    var /= static_cast<double>(x.size());
    CHECK(std::abs(var / y.noise_var - 1.0) < 0.01);
    CHECK(std::abs(y.noise_var / n0 - 1.0) < 0.01);

    const std::vector<cplx> unit(1000, cplx(1.0, 0.0));
    CHECK(add_awgn(unit, 0.0, 1).noise_var == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(add_awgn(unit, 0.0, 1).signal == add_awgn(unit, 0.0, 1).signal);

    const auto clean = add_awgn(x, std::numeric_limits<double>::infinity(), 1);
    CHECK(clean.signal == x);
    CHECK(clean.noise_var == noiseless_variance);
}
