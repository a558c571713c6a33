#pragma once

// Differential-attention transformer receiver. Every subcarrier is one token
// whose features are the received symbols over the frame, the known pilot
// values and the noise variance. A stack of blocks, each built around a
// multi-head differential attention, maps tokens to per-RE bit LLRs.

#include "dtrx/kernels.hpp"
#include "dtrx/llr_grid.hpp"
#include "dtrx/ofdm.hpp"
#include "dtrx/tensor.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dtrx::nrx {

using cplx = std::complex<double>;
using ad::NodeId;
using ad::Tensor;

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1 };

struct ModelDims {
    std::size_t n_feat = 57;
    std::size_t d_model = 128;
    std::size_t heads = 4;
    std::size_t blocks = 4;
    std::size_t ffn = 128;
    std::size_t out_dim = 84;
    /// A learnable per-block weight on the second attention map.
    bool learnable_lambda = false;
    /// Each block is act(Wo * DiffAttn(H) + bo) with no norm, FFN or residual.
    bool literal_blocks = false;
    Activation activation = Activation::relu;

    /// Q/K width per head; values are twice as wide.
    std::size_t d_head() const noexcept { return d_model / (2 * heads); }
    void validate() const;

    /// Feature and output sizes implied by a frame layout.
    static std::size_t features_for(const ofdm::FrameConfig& cfg) { return 4 * cfg.num_symbols + 1; }
    static std::size_t outputs_for(const ofdm::FrameConfig& cfg, std::size_t bits_per_symbol)
    {
        return cfg.num_symbols * bits_per_symbol;
    }

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct HeadParams {
    Tensor wq1, wq2, wk1, wk2; // [d_head x d_model]
    Tensor wv;                 // [2 d_head x d_model]
};

struct BlockParams {
    std::vector<HeadParams> heads;
    Tensor wo, bo;               // [d_model x d_model], [d_model]
    Tensor ln1_gain, ln1_bias;   // [d_model]
    Tensor ln2_gain, ln2_bias;   // [d_model]
    Tensor ffn_w1, ffn_b1;       // [ffn x d_model], [ffn]
    Tensor ffn_w2, ffn_b2;       // [d_model x ffn], [d_model]
    Tensor lambda;               // [1]
};

struct ReceiverModel {
    ModelDims dims;
    Tensor w0, b0;       // [d_model x n_feat], [d_model]
    std::vector<BlockParams> blocks;
    Tensor w_llr, b_llr; // [out_dim x d_model], [out_dim]

    /// Correctly shaped model: Xavier-uniform projections, zero biases,
    /// unit layer-norm gains.
    static ReceiverModel initialize(const ModelDims& dims, std::uint64_t seed);

    /// Every learnable tensor with a stable name, in a fixed order shared by
    /// the optimizer, the gradient collector and the model file.
    std::vector<std::pair<std::string, Tensor*>> parameters();
    std::vector<std::pair<std::string, const Tensor*>> parameters() const;
    std::size_t parameter_count() const;
};

/// [S x n_feat] token matrix:
///   Re y(m, 0..T-1), Im y(m, 0..T-1), Re p(m, 0..T-1), Im p(m, 0..T-1), noise_var
/// where p is zero on data REs.
Tensor tokenize(const ofdm::FrameConfig& cfg, std::span<const cplx> received, const ofdm::PilotPattern& pilots,
                double noise_var);

struct TokenBatch {
    Tensor tokens;                               // [B x S x n_feat]
    std::vector<std::vector<std::uint8_t>> bits; // coded bits per frame, transmit order
    std::vector<std::uint8_t> data_mask;         // S x T, 1 on data REs

    std::size_t frames() const noexcept { return tokens.empty() ? 0 : tokens.dim(0); }
    /// Token matrix of frame b.
    Tensor frame(std::size_t b) const;
};

TokenBatch make_batch(const ofdm::FrameConfig& cfg, std::span<const Tensor> frames,
                      std::vector<std::vector<std::uint8_t>> bits);

/// Head-output positions (token * out_dim + symbol * q + bit) of every data
/// bit in transmit order.
std::vector<std::size_t> llr_gather_indices(const ofdm::FrameConfig& cfg, std::size_t bits_per_symbol);

/// Node ids of one head's projections on a tape.
struct HeadNodes {
    NodeId wq1, wq2, wk1, wk2, wv;
};

struct DiffAttention {
    NodeId map;    // softmax(Q1 K1^T / sqrt d) - lambda softmax(Q2 K2^T / sqrt d), [N x N]
    NodeId output; // map * V, [N x 2 d_head]
};

/// One head of differential attention on already normalised input x.
/// `lambda` may be absent (weight 1).
DiffAttention diff_attention(ad::Tape& tape, NodeId x, const HeadNodes& head, std::size_t d_head,
                             const NodeId* lambda = nullptr);

struct ForwardGraph {
    std::vector<NodeId> params; // same order as ReceiverModel::parameters()
    NodeId head_output = 0;     // [S x out_dim]
    NodeId llrs = 0;            // flat data-bit LLRs in transmit order
};

/// Records the full forward pass of one frame on `tape`.
ForwardGraph build_forward(ad::Tape& tape, const ReceiverModel& model, const Tensor& tokens,
                           std::span<const std::size_t> gather_indices);

/// Same, on parameter nodes already on the tape (in parameters() order).
ForwardGraph build_forward(ad::Tape& tape, const ModelDims& dims, std::vector<NodeId> params, const Tensor& tokens,
                           std::span<const std::size_t> gather_indices);

/// Inference on every frame of a batch.
std::vector<LlrGrid> forward(const ReceiverModel& model, const TokenBatch& batch, const ofdm::FrameConfig& cfg,
                             std::size_t bits_per_symbol, kernels::Exec exec = kernels::Exec::serial);

/// Inference on one frame.
LlrGrid infer(const ReceiverModel& model, const Tensor& tokens, std::span<const std::size_t> gather_indices,
              std::size_t bits_per_symbol);

/// Mean BCE with P(bit = 1) = sigmoid(-llr).
double loss_bce(std::span<const double> llrs, std::span<const std::uint8_t> bits);

// Model file: "DTRXMDL\0", u32 version, dims, u32 tensor count, shape table
// (u16 name length, name, u8 rank, u32 dims), little-endian f64 payload in
// table order, u64 FNV-1a checksum over every preceding byte.
inline constexpr std::uint32_t model_format_version = 1;

std::vector<std::uint8_t> serialize_model(const ReceiverModel& model);
ReceiverModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const ReceiverModel& model, const std::filesystem::path& path);
ReceiverModel load_model(const std::filesystem::path& path);

} // namespace dtrx::nrx
