#pragma once

// Link configuration and its text format. One `key = value` pair per line,
// '#' starts a comment, blank lines are ignored, unknown keys are errors.
// Every key has a default, so an empty file gives the full-size PHY:
// 128 subcarriers at 240 kHz, 14 symbols, 64-QAM, rate-1/2 LDPC of length 1296.

#include "dtrx/diff_receiver.hpp"
#include "dtrx/ofdm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dtrx::link {

enum class ReceiverType { baseline_ls, perfect_csi, neural };

ReceiverType parse_receiver(std::string_view name);
std::string receiver_name(ReceiverType r);

struct LinkConfig {
    ofdm::FrameConfig frame;
    std::size_t modulation_order = 64;

    std::size_t ldpc_n = 1296;
    std::size_t ldpc_col_weight = 3;
    std::size_t ldpc_row_weight = 6;
    std::uint64_t ldpc_seed = 1;
    std::size_t bp_iterations = 20;

    std::string channel = "uma-low";
    ReceiverType receiver = ReceiverType::baseline_ls;
    std::filesystem::path model_path;
    std::uint64_t seed = 1;

    // receiver network
    std::size_t d_model = 128;
    std::size_t heads = 4;
    std::size_t blocks = 4;
    std::size_t ffn = 128;
    bool learnable_lambda = false;
    bool literal_blocks = false;
    nrx::Activation activation = nrx::Activation::relu;

    // training
    double train_snr_min_db = 0.0;
    double train_snr_max_db = 20.0;
    std::size_t batch = 8;
    double learning_rate = 1e-3;

    std::size_t bits_per_symbol() const;
    /// Coded bits carried by the data REs of one frame.
    std::size_t frame_bits() const { return frame.data_count() * bits_per_symbol(); }
    std::size_t codewords_per_frame() const { return frame_bits() / ldpc_n; }
    std::size_t filler_bits() const { return frame_bits() - codewords_per_frame() * ldpc_n; }

    /// Receiver network dimensions implied by the frame and constellation.
    nrx::ModelDims model_dims() const;

    /// Throws ConfigError on any inconsistency.
    void validate() const;

    /// Resolved configuration in the file format, one key per line.
    std::string describe() const;
};

/// Parses config text; `origin` names the source in error messages.
LinkConfig parse_config(std::string_view text, const std::string& origin = "<string>");
LinkConfig load_config(const std::filesystem::path& path);

} // namespace dtrx::link
