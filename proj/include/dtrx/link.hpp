#pragma once

// End-to-end link: info bits -> LDPC -> QAM -> grid -> OFDM -> channel ->
// AWGN -> receiver -> BP -> info bits, plus Monte-Carlo sweeps over SNR.

#include "dtrx/channel.hpp"
#include "dtrx/diff_receiver.hpp"
#include "dtrx/kernels.hpp"
#include "dtrx/ldpc.hpp"
#include "dtrx/link_config.hpp"
#include "dtrx/llr_grid.hpp"
#include "dtrx/modem.hpp"
#include "dtrx/ofdm.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dtrx::link {

using Bits = std::vector<std::uint8_t>;
using cplx = std::complex<double>;

/// Seed of frame `frame_idx` at sweep point `snr_idx`.
std::uint64_t frame_seed(std::uint64_t master, std::size_t snr_idx, std::size_t frame_idx);

struct TxFrame {
    Bits info;  // codewords_per_frame * k
    Bits coded; // frame_bits: the codewords followed by the filler
    ofdm::ResourceGrid grid;
    std::vector<cplx> signal;
};

struct RxFrame {
    std::vector<cplx> grid; // demodulated S x T grid
    double noise_var = 0.0;
    channel::ChannelRealization truth;
};

/// Stage name and the size of what it produced.
using FrameTrace = std::vector<std::pair<std::string, std::size_t>>;

struct FrameResult {
    Bits tx_info;
    Bits decoded_info;
    std::size_t bit_errors = 0;
    std::size_t block_errors = 0;
    std::size_t codewords = 0;
    FrameTrace trace;
};

class Link {
public:
    /// Builds the code, constellation and channel profile. The neural
    /// receiver needs `model`, whose dimensions must fit the frame.
    explicit Link(LinkConfig cfg, std::shared_ptr<const nrx::ReceiverModel> model = nullptr);

    const LinkConfig& config() const noexcept { return cfg_; }
    const ldpc::LdpcCode& code() const noexcept { return code_; }
    const modem::Constellation& constellation() const noexcept { return cons_; }
    const channel::TdlProfile& profile() const noexcept { return profile_; }
    const ofdm::PilotPattern& pilots() const noexcept { return pilots_; }
    const std::vector<std::size_t>& gather_indices() const noexcept { return gather_; }

    /// Info bits carried per frame.
    std::size_t info_bits() const { return cfg_.codewords_per_frame() * code_.k(); }

    /// Random info bits unless `info` is given (length info_bits()).
    TxFrame transmit(std::uint64_t seed, std::optional<std::span<const std::uint8_t>> info = std::nullopt) const;
    /// snr_db = +inf propagates without noise.
    RxFrame propagate(const TxFrame& tx, double snr_db, std::uint64_t seed) const;
    LlrGrid receive(const RxFrame& rx, ReceiverType kind) const;
    /// BP on every codeword; returns the decoded info bits.
    Bits decode(const LlrGrid& llrs) const;

    FrameResult run_frame(double snr_db, std::uint64_t seed,
                          std::optional<std::span<const std::uint8_t>> info = std::nullopt) const;
    FrameResult run_frame(double snr_db, std::uint64_t seed, ReceiverType kind,
                          std::optional<std::span<const std::uint8_t>> info = std::nullopt) const;

    /// Replaces the channel profile (tests use "awgn" or custom static taps).
    void set_profile(channel::TdlProfile profile);

private:
    LinkConfig cfg_;
    ldpc::LdpcCode code_;
    modem::Constellation cons_;
    channel::TdlProfile profile_;
    ofdm::PilotPattern pilots_;
    std::vector<std::size_t> gather_;
    std::shared_ptr<const nrx::ReceiverModel> model_;
};

struct StopRule {
    std::size_t min_frames = 10;
    std::size_t max_frames = 1000;
    std::size_t target_errors = 100;
};

struct SweepRow {
    double snr_db = 0.0;
    std::size_t frames = 0;
    std::size_t bits = 0;
    std::size_t bit_errors = 0;
    double ber = 0.0;
    std::size_t block_errors = 0;
    double bler = 0.0;
    std::string receiver;
    std::uint64_t seed = 0;
    /// Stopped on target_errors before max_frames. Not part of the CSV.
    bool early_stop = false;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

inline constexpr const char* csv_header = "snr_db,frames,bits,bit_errors,ber,block_errors,bler,receiver,seed";

void write_csv(std::ostream& os, const SweepResult& r);
SweepResult parse_csv(std::istream& is);

/// Frames are evaluated in chunks (in parallel when exec says so) and
/// accumulated in frame order, so the result equals a serial run.
SweepResult run_ber_sweep(const Link& link, std::span<const double> snrs_db, const StopRule& stop,
                          kernels::Exec exec = kernels::Exec::serial);
SweepResult run_ber_sweep(const Link& link, ReceiverType kind, std::span<const double> snrs_db,
                          const StopRule& stop, kernels::Exec exec = kernels::Exec::serial);

/// snr_start..snr_stop inclusive in steps of snr_step. Empty when start > stop.
std::vector<double> snr_range(double start, double stop, double step);

struct PayloadResult {
    std::vector<std::uint8_t> bytes;
    std::size_t frames = 0;
    std::size_t bits = 0; // transmitted stream bits (header, payload, padding)
    std::size_t bit_errors = 0;
    double ber = 0.0;
};

/// Sends a byte payload as a bit stream: a 32-bit length header repeated three
/// times, the payload, zero padding to whole info blocks. The stream is
/// interleaved with a seeded permutation before it is cut into blocks.
PayloadResult payload_roundtrip(const Link& link, std::span<const std::uint8_t> payload, double snr_db,
                                std::uint64_t seed, kernels::Exec exec = kernels::Exec::serial);

} // namespace dtrx::link
