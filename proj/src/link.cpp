#include "dtrx/link.hpp"

#include "dtrx/baseline_receiver.hpp"
#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dtrx::link {

namespace {

// Sub-stream tags below a frame seed.
constexpr std::uint64_t tag_bits = 1;
constexpr std::uint64_t tag_channel = 2;
constexpr std::uint64_t tag_noise = 3;
constexpr std::uint64_t tag_filler = 4;

Bits random_bits(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Bits out(n);
    for (std::size_t i = 0; i < n; i += 64) {
        const std::uint64_t w = rng();
        for (std::size_t j = 0; j < 64 && i + j < n; ++j)
            out[i + j] = static_cast<std::uint8_t>((w >> j) & 1U);
    }
    return out;
}

template <typename F>
auto stage(const char* name, F&& f)
{
    try {
        auto out = f();
        return out;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

ldpc::LdpcCode build_code(const LinkConfig& cfg)
{
    cfg.validate();
    return ldpc::LdpcCode(
        ldpc::construct_regular(cfg.ldpc_n, cfg.ldpc_col_weight, cfg.ldpc_row_weight, cfg.ldpc_seed));
}

} // namespace

std::uint64_t frame_seed(std::uint64_t master, std::size_t snr_idx, std::size_t frame_idx)
{
    return derive_seed(master, {snr_idx, frame_idx});
}

Link::Link(LinkConfig cfg, std::shared_ptr<const nrx::ReceiverModel> model)
    : cfg_(std::move(cfg)),
      code_(build_code(cfg_)),
      cons_(modem::Constellation::qam(cfg_.modulation_order)),
      profile_(channel::preset(cfg_.channel)),
      pilots_(ofdm::kronecker_pilot_mask(cfg_.frame)),
      gather_(nrx::llr_gather_indices(cfg_.frame, cfg_.bits_per_symbol())),
      model_(std::move(model))
{
    if (model_) {
        const nrx::ModelDims& d = model_->dims;
        const auto n_feat = nrx::ModelDims::features_for(cfg_.frame);
        const auto out_dim = nrx::ModelDims::outputs_for(cfg_.frame, cfg_.bits_per_symbol());
        if (d.n_feat != n_feat || d.out_dim != out_dim)
            throw ModelShapeError("model expects " + std::to_string(d.n_feat) + " input features and " +
                                  std::to_string(d.out_dim) + " outputs per token; the link needs " +
                                  std::to_string(n_feat) + " and " + std::to_string(out_dim));
    }
}

void Link::set_profile(channel::TdlProfile profile)
{
    profile.validate(cfg_.frame.cp_length);
    profile_ = std::move(profile);
}

TxFrame Link::transmit(std::uint64_t seed, std::optional<std::span<const std::uint8_t>> info) const
{
    const std::size_t cw = cfg_.codewords_per_frame();
    const std::size_t k = code_.k();
    TxFrame tx;
    if (info) {
        if (info->size() != cw * k)
            throw DimensionError("transmit: expected " + std::to_string(cw * k) + " info bits, got " +
                                 std::to_string(info->size()));
        tx.info.assign(info->begin(), info->end());
    } else {
        tx.info = random_bits(cw * k, derive_seed(seed, {tag_bits}));
    }
    tx.coded.reserve(cfg_.frame_bits());
    for (std::size_t c = 0; c < cw; ++c) {
        const Bits word = code_.encode(std::span<const std::uint8_t>(tx.info).subspan(c * k, k));
        tx.coded.insert(tx.coded.end(), word.begin(), word.end());
    }
    const Bits filler = random_bits(cfg_.filler_bits(), derive_seed(seed, {tag_filler}));
    tx.coded.insert(tx.coded.end(), filler.begin(), filler.end());
    const auto symbols = modem::map_stream(cons_, tx.coded);
    tx.grid = ofdm::build_grid(cfg_.frame, symbols);
    tx.signal = ofdm::ofdm_modulate(cfg_.frame, tx.grid);
    return tx;
}

RxFrame Link::propagate(const TxFrame& tx, double snr_db, std::uint64_t seed) const
{
    RxFrame rx;
    rx.truth = channel::generate_realization(profile_, cfg_.frame, derive_seed(seed, {tag_channel}));
    const auto faded = channel::apply_channel(rx.truth, cfg_.frame, tx.signal);
    auto noisy = channel::add_awgn(faded, snr_db, derive_seed(seed, {tag_noise}));
    rx.noise_var = noisy.noise_var;
    rx.grid = ofdm::ofdm_demodulate(cfg_.frame, noisy.signal);
    return rx;
}

LlrGrid Link::receive(const RxFrame& rx, ReceiverType kind) const
{
    switch (kind) {
    case ReceiverType::baseline_ls:
        return baseline::receive_frame(baseline::ReceiverKind::baseline_ls, cfg_.frame, cons_, rx.grid,
                                       rx.noise_var, nullptr);
    case ReceiverType::perfect_csi:
        return baseline::receive_frame(baseline::ReceiverKind::perfect_csi, cfg_.frame, cons_, rx.grid,
                                       rx.noise_var, &rx.truth);
    case ReceiverType::neural: {
        if (!model_)
            throw Error("neural receiver selected but no model is loaded");
        const auto tokens = nrx::tokenize(cfg_.frame, rx.grid, pilots_, rx.noise_var);
        return nrx::infer(*model_, tokens, gather_, cfg_.bits_per_symbol());
    }
    }
    throw Error("unknown receiver");
}

Bits Link::decode(const LlrGrid& llrs) const
{
    if (llrs.llrs.size() != cfg_.frame_bits())
        throw DimensionError("decode: expected " + std::to_string(cfg_.frame_bits()) + " LLRs, got " +
                             std::to_string(llrs.llrs.size()));
    ldpc::DecodeOptions opts;
    opts.max_iterations = cfg_.bp_iterations;
    const std::size_t n = code_.n();
    Bits out;
    out.reserve(info_bits());
    for (std::size_t c = 0; c < cfg_.codewords_per_frame(); ++c) {
        const auto res = ldpc::bp_decode(code_, std::span<const double>(llrs.llrs).subspan(c * n, n), opts);
        const Bits info = code_.extract_info(res.bits);
        out.insert(out.end(), info.begin(), info.end());
    }
    return out;
}

FrameResult Link::run_frame(double snr_db, std::uint64_t seed, std::optional<std::span<const std::uint8_t>> info) const
{
    return run_frame(snr_db, seed, cfg_.receiver, info);
}

FrameResult Link::run_frame(double snr_db, std::uint64_t seed, ReceiverType kind,
                            std::optional<std::span<const std::uint8_t>> info) const
{
    FrameResult r;
    const TxFrame tx = stage("transmit", [&] { return transmit(seed, info); });
    r.trace.emplace_back("info_bits", tx.info.size());
    r.trace.emplace_back("coded_bits", tx.coded.size());
    r.trace.emplace_back("time_samples", tx.signal.size());
    const RxFrame rx = stage("channel", [&] { return propagate(tx, snr_db, seed); });
    r.trace.emplace_back("received_res", rx.grid.size());
    const LlrGrid llrs = stage("receiver", [&] { return receive(rx, kind); });
    r.trace.emplace_back("llrs", llrs.llrs.size());
    r.decoded_info = stage("decoder", [&] { return decode(llrs); });
    r.trace.emplace_back("decoded_bits", r.decoded_info.size());

    const std::size_t k = code_.k();
    r.codewords = cfg_.codewords_per_frame();
    for (std::size_t c = 0; c < r.codewords; ++c) {
        std::size_t errs = 0;
        for (std::size_t i = c * k; i < (c + 1) * k; ++i)
            errs += tx.info[i] != r.decoded_info[i];
        r.bit_errors += errs;
        r.block_errors += errs > 0;
    }
    r.tx_info = std::move(tx.info);
    return r;
}

// ---------------------------------------------------------------------------
// sweeps

std::vector<double> snr_range(double start, double stop, double step)
{
    if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(start) || !std::isfinite(stop))
        throw ConfigError("snr step must be positive and the range finite");
    std::vector<double> out;
    if (start > stop)
        return out;
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(start + static_cast<double>(i) * step);
    return out;
}

SweepResult run_ber_sweep(const Link& link, std::span<const double> snrs_db, const StopRule& stop,
                          kernels::Exec exec)
{
    return run_ber_sweep(link, link.config().receiver, snrs_db, stop, exec);
}

SweepResult run_ber_sweep(const Link& link, ReceiverType kind, std::span<const double> snrs_db,
                          const StopRule& stop, kernels::Exec exec)
{
    if (snrs_db.empty())
        throw ConfigError("sweep needs at least one SNR point");
    if (stop.max_frames == 0 || stop.min_frames > stop.max_frames)
        throw ConfigError("stop rule needs 1 <= max_frames and min_frames <= max_frames");

    const std::size_t chunk =
        exec == kernels::Exec::parallel ? 4 * static_cast<std::size_t>(std::max(1, omp_get_max_threads())) : 1;
    const std::uint64_t master = link.config().seed;
    SweepResult result;
    for (std::size_t si = 0; si < snrs_db.size(); ++si) {
        SweepRow row;
        row.snr_db = snrs_db[si];
        row.receiver = receiver_name(kind);
        row.seed = master;
        std::vector<FrameResult> batch;
        bool done = false;
        while (!done) {
            const std::size_t first = row.frames;
            const std::size_t count = std::min(chunk, stop.max_frames - first);
            batch.assign(count, FrameResult{});
            kernels::for_each_index(count, exec, [&](std::size_t i) {
                batch[i] = link.run_frame(row.snr_db, frame_seed(master, si, first + i), kind);
            });
            for (const auto& fr : batch) {
                ++row.frames;
                row.bits += fr.tx_info.size();
                row.bit_errors += fr.bit_errors;
                row.block_errors += fr.block_errors;
                if (row.frames >= stop.min_frames && row.bit_errors >= stop.target_errors) {
                    row.early_stop = row.frames < stop.max_frames;
                    done = true;
                    break;
                }
                if (row.frames >= stop.max_frames) {
                    done = true;
                    break;
                }
            }
        }
        const std::size_t blocks = row.frames * link.config().codewords_per_frame();
        row.ber = row.bits ? static_cast<double>(row.bit_errors) / static_cast<double>(row.bits) : 0.0;
        row.bler = blocks ? static_cast<double>(row.block_errors) / static_cast<double>(blocks) : 0.0;
        result.rows.push_back(row);
    }
    return result;
}

void write_csv(std::ostream& os, const SweepResult& r)
{
    os << csv_header << "\n";
    char buf[512];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu,%zu,%.17g,%zu,%.17g,%s,%llu\n", row.snr_db, row.frames,
                      row.bits, row.bit_errors, row.ber, row.block_errors, row.bler, row.receiver.c_str(),
                      static_cast<unsigned long long>(row.seed));
        os << buf;
    }
}

SweepResult parse_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != csv_header)
        throw Error("csv: unexpected header");
    SweepResult r;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 9)
            throw Error("csv: expected 9 columns in '" + line + "'");
        SweepRow row;
        try {
            row.snr_db = std::stod(f[0]);
            row.frames = std::stoull(f[1]);
            row.bits = std::stoull(f[2]);
            row.bit_errors = std::stoull(f[3]);
            row.ber = std::stod(f[4]);
            row.block_errors = std::stoull(f[5]);
            row.bler = std::stod(f[6]);
            row.receiver = f[7];
            row.seed = std::stoull(f[8]);
        } catch (const std::logic_error&) {
            throw Error("csv: malformed row '" + line + "'");
        }
        r.rows.push_back(row);
    }
    return r;
}

// ---------------------------------------------------------------------------
// payload transport

PayloadResult payload_roundtrip(const Link& link, std::span<const std::uint8_t> payload, double snr_db,
                                std::uint64_t seed, kernels::Exec exec)
{
    if (payload.empty())
        throw Error("payload must not be empty");
    if (payload.size() > 0xffffffffULL)
        throw Error("payload too large");

    constexpr std::size_t header_copies = 3;
    const auto len = static_cast<std::uint32_t>(payload.size());
    Bits stream;
    stream.reserve(header_copies * 32 + payload.size() * 8);
    for (std::size_t c = 0; c < header_copies; ++c)
        for (std::size_t b = 0; b < 32; ++b)
            stream.push_back(static_cast<std::uint8_t>((len >> b) & 1U));
    for (auto byte : payload)
        for (std::size_t b = 0; b < 8; ++b)
            stream.push_back(static_cast<std::uint8_t>((byte >> b) & 1U));
    const std::size_t k = link.code().k();
    stream.resize((stream.size() + k - 1) / k * k, 0);

    std::vector<std::size_t> perm(stream.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0x7061796cULL}));
    std::shuffle(perm.begin(), perm.end(), rng);
    Bits interleaved(stream.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        interleaved[i] = stream[perm[i]];

    const std::size_t per_frame = link.info_bits();
    const std::size_t frames = (interleaved.size() + per_frame - 1) / per_frame;
    std::vector<Bits> decoded(frames);
    kernels::for_each_index(frames, exec, [&](std::size_t f) {
        const std::uint64_t fs = frame_seed(seed, 0, f);
        const std::size_t begin = f * per_frame;
        const std::size_t used = std::min(per_frame, interleaved.size() - begin);
        Bits info = random_bits(per_frame, derive_seed(fs, {tag_filler, 1}));
        std::copy_n(interleaved.begin() + static_cast<std::ptrdiff_t>(begin), used, info.begin());
        auto r = link.run_frame(snr_db, fs, std::span<const std::uint8_t>(info));
        r.decoded_info.resize(used);
        decoded[f] = std::move(r.decoded_info);
    });

    Bits rx_stream(stream.size());
    std::size_t pos = 0;
    for (const auto& d : decoded)
        for (auto b : d)
            rx_stream[perm[pos++]] = b;

    PayloadResult out;
    out.frames = frames;
    out.bits = stream.size();
    for (std::size_t i = 0; i < stream.size(); ++i)
        out.bit_errors += stream[i] != rx_stream[i];
    out.ber = static_cast<double>(out.bit_errors) / static_cast<double>(out.bits);

    std::uint32_t rx_len = 0;
    for (std::size_t b = 0; b < 32; ++b) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < header_copies; ++c)
            ones += rx_stream[c * 32 + b];
        if (2 * ones > header_copies)
            rx_len |= 1U << b;
    }
    const std::size_t available = (stream.size() - header_copies * 32) / 8;
    out.bytes.resize(std::min<std::size_t>(rx_len, available));
    for (std::size_t i = 0; i < out.bytes.size(); ++i) {
        std::uint8_t byte = 0;
        for (std::size_t b = 0; b < 8; ++b)
            byte |= static_cast<std::uint8_t>(rx_stream[header_copies * 32 + i * 8 + b] << b);
        out.bytes[i] = byte;
    }
    return out;
}

} // namespace dtrx::link
