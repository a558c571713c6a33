#include "dtrx/ofdm.hpp"

#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

namespace dtrx::ofdm {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
    ~PlanCache()
    {
        for (auto& [key, plan] : plans_)
            fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, int sign)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        std::vector<cplx> in(n), out(n);
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                          reinterpret_cast<fftw_complex*>(out.data()), sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan)
            throw Error("FFTW failed to plan a transform of size " + std::to_string(n));
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plans()
{
    static PlanCache cache;
    return cache;
}

void transform(std::size_t n, int sign, cplx* in, cplx* out)
{
    fftw_execute_dft(plans().get(n, sign), reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
}

} // namespace

void FrameConfig::validate() const
{
    if (num_subcarriers == 0 || num_symbols == 0 || fft_size == 0)
        throw ConfigError("frame dimensions must be positive");
    if (num_subcarriers > fft_size)
        throw ConfigError("subcarriers (" + std::to_string(num_subcarriers) + ") exceed FFT size (" +
                          std::to_string(fft_size) + ")");
    if (cp_length >= fft_size)
        throw ConfigError("cyclic prefix must be shorter than the FFT size");
    if (!(subcarrier_spacing_hz > 0.0))
        throw ConfigError("subcarrier spacing must be positive");
    for (auto p : pilot_symbols)
        if (p >= num_symbols)
            throw ConfigError("pilot symbol index " + std::to_string(p) + " outside the frame");
}

bool FrameConfig::is_pilot_symbol(std::size_t n) const
{
    return std::find(pilot_symbols.begin(), pilot_symbols.end(), n) != pilot_symbols.end();
}

std::size_t FrameConfig::pilot_count() const
{
    std::size_t count = 0;
    for (std::size_t n = 0; n < num_symbols; ++n)
        count += is_pilot_symbol(n) ? num_subcarriers : 0;
    return count;
}

PilotPattern kronecker_pilot_mask(const FrameConfig& cfg)
{
    const std::size_t s = cfg.num_subcarriers;
    const std::size_t t = cfg.num_symbols;
    PilotPattern p;
    p.mask.assign(s * t, 0);
    p.values.assign(s * t, cplx{});
    Rng rng(derive_seed(cfg.pilot_seed, {0x70696c6f74ULL}));
    const double a = 1.0 / std::sqrt(2.0);
    for (std::size_t n = 0; n < t; ++n) {
        if (!cfg.is_pilot_symbol(n))
            continue;
        for (std::size_t m = 0; m < s; ++m) {
            const auto r = rng();
            p.mask[m + n * s] = 1;
            p.values[m + n * s] = cplx((r & 1u) ? -a : a, (r & 2u) ? -a : a);
        }
    }
    return p;
}

ResourceGrid::ResourceGrid(std::size_t subcarriers, std::size_t symbols)
    : s_(subcarriers), t_(symbols), values_(subcarriers * symbols), mask_(subcarriers * symbols, 0)
{
}

std::vector<std::size_t> data_indices(const FrameConfig& cfg)
{
    std::vector<std::size_t> idx;
    idx.reserve(cfg.data_count());
    for (std::size_t n = 0; n < cfg.num_symbols; ++n) {
        if (cfg.is_pilot_symbol(n))
            continue;
        for (std::size_t m = 0; m < cfg.num_subcarriers; ++m)
            idx.push_back(m + n * cfg.num_subcarriers);
    }
    return idx;
}

ResourceGrid build_grid(const FrameConfig& cfg, std::span<const cplx> data_symbols)
{
    if (data_symbols.size() != cfg.data_count())
        throw DimensionError("build_grid: expected " + std::to_string(cfg.data_count()) + " data symbols, got " +
                             std::to_string(data_symbols.size()));
    ResourceGrid grid(cfg.num_subcarriers, cfg.num_symbols);
    const PilotPattern pilots = kronecker_pilot_mask(cfg);
    grid.pilot_mask() = pilots.mask;
    grid.values() = pilots.values;
    const auto idx = data_indices(cfg);
    for (std::size_t i = 0; i < idx.size(); ++i)
        grid.values()[idx[i]] = data_symbols[i];
    return grid;
}

std::vector<cplx> extract_data(const FrameConfig& cfg, std::span<const cplx> grid_values)
{
    if (grid_values.size() != cfg.resource_elements())
        throw DimensionError("extract_data: grid size mismatch");
    const auto idx = data_indices(cfg);
    std::vector<cplx> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[i] = grid_values[idx[i]];
    return out;
}

std::vector<cplx> ofdm_modulate(const FrameConfig& cfg, const ResourceGrid& grid)
{
    cfg.validate();
    if (grid.subcarriers() != cfg.num_subcarriers || grid.symbols() != cfg.num_symbols)
        throw DimensionError("ofdm_modulate: grid does not match the frame config");
    const std::size_t n_fft = cfg.fft_size;
    const std::size_t cp = cfg.cp_length;
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_fft));
    std::vector<cplx> out(cfg.samples_per_frame());
    std::vector<cplx> bins(n_fft), time(n_fft);
    for (std::size_t n = 0; n < cfg.num_symbols; ++n) {
        std::fill(bins.begin(), bins.end(), cplx{});
        for (std::size_t m = 0; m < cfg.num_subcarriers; ++m)
            bins[m] = grid(m, n);
        transform(n_fft, FFTW_BACKWARD, bins.data(), time.data());
        cplx* sym = out.data() + n * (n_fft + cp);
        for (std::size_t i = 0; i < cp; ++i)
            sym[i] = time[n_fft - cp + i] * norm;
        for (std::size_t i = 0; i < n_fft; ++i)
            sym[cp + i] = time[i] * norm;
    }
    return out;
}

std::vector<cplx> ofdm_demodulate(const FrameConfig& cfg, std::span<const cplx> signal)
{
    cfg.validate();
    if (signal.size() != cfg.samples_per_frame())
        throw DimensionError("ofdm_demodulate: expected " + std::to_string(cfg.samples_per_frame()) +
                             " samples, got " + std::to_string(signal.size()));
    const std::size_t n_fft = cfg.fft_size;
    const std::size_t cp = cfg.cp_length;
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_fft));
    std::vector<cplx> out(cfg.resource_elements());
    std::vector<cplx> time(n_fft), bins(n_fft);
    for (std::size_t n = 0; n < cfg.num_symbols; ++n) {
        const cplx* sym = signal.data() + n * (n_fft + cp) + cp;
        std::copy_n(sym, n_fft, time.begin());
        transform(n_fft, FFTW_FORWARD, time.data(), bins.data());
        for (std::size_t m = 0; m < cfg.num_subcarriers; ++m)
            out[m + n * cfg.num_subcarriers] = bins[m] * norm;
    }
    return out;
}

} // namespace dtrx::ofdm
