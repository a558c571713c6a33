#include "dtrx/diff_receiver.hpp"

#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dtrx::nrx {

void ModelDims::validate() const
{
    if (n_feat == 0 || d_model == 0 || heads == 0 || blocks == 0 || ffn == 0 || out_dim == 0)
        throw ConfigError("model dimensions must be positive");
    if (d_model % (2 * heads) != 0)
        throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by 2 * heads (" +
                          std::to_string(2 * heads) + ")");
}

namespace {

Tensor xavier(std::size_t out, std::size_t in, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor t({out, in});
    for (auto& v : t.values())
        v = u(rng);
    return t;
}

NodeId activate(ad::Tape& tape, NodeId x, Activation act)
{
    return act == Activation::relu ? tape.relu(x) : tape.sigmoid(x);
}

// Affine layer with row-major weight [out x in]: x * W^T + b.
NodeId dense(ad::Tape& tape, NodeId x, NodeId w, NodeId b)
{
    return tape.add_bias(tape.matmul_nt(x, w), b);
}

template <typename Model, typename Ptr>
std::vector<std::pair<std::string, Ptr>> collect(Model& m)
{
    std::vector<std::pair<std::string, Ptr>> out;
    out.emplace_back("input.w", &m.w0);
    out.emplace_back("input.b", &m.b0);
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        auto& blk = m.blocks[l];
        const std::string pre = "block" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < blk.heads.size(); ++h) {
            auto& hd = blk.heads[h];
            const std::string hp = pre + "head" + std::to_string(h) + ".";
            out.emplace_back(hp + "wq1", &hd.wq1);
            out.emplace_back(hp + "wq2", &hd.wq2);
            out.emplace_back(hp + "wk1", &hd.wk1);
            out.emplace_back(hp + "wk2", &hd.wk2);
            out.emplace_back(hp + "wv", &hd.wv);
        }
        out.emplace_back(pre + "wo", &blk.wo);
        out.emplace_back(pre + "bo", &blk.bo);
        out.emplace_back(pre + "ln1.gain", &blk.ln1_gain);
        out.emplace_back(pre + "ln1.bias", &blk.ln1_bias);
        out.emplace_back(pre + "ln2.gain", &blk.ln2_gain);
        out.emplace_back(pre + "ln2.bias", &blk.ln2_bias);
        out.emplace_back(pre + "ffn.w1", &blk.ffn_w1);
        out.emplace_back(pre + "ffn.b1", &blk.ffn_b1);
        out.emplace_back(pre + "ffn.w2", &blk.ffn_w2);
        out.emplace_back(pre + "ffn.b2", &blk.ffn_b2);
        out.emplace_back(pre + "lambda", &blk.lambda);
    }
    out.emplace_back("llr.w", &m.w_llr);
    out.emplace_back("llr.b", &m.b_llr);
    return out;
}

} // namespace

ReceiverModel ReceiverModel::initialize(const ModelDims& dims, std::uint64_t seed)
{
    dims.validate();
    Rng rng(derive_seed(seed, {0x696e6974ULL}));
    const std::size_t d = dims.d_model;
    const std::size_t dh = dims.d_head();
    ReceiverModel m;
    m.dims = dims;
    m.w0 = xavier(d, dims.n_feat, rng);
    m.b0 = Tensor({d}, 0.0);
    m.blocks.resize(dims.blocks);
    for (auto& blk : m.blocks) {
        blk.heads.resize(dims.heads);
        for (auto& hd : blk.heads) {
            hd.wq1 = xavier(dh, d, rng);
            hd.wq2 = xavier(dh, d, rng);
            hd.wk1 = xavier(dh, d, rng);
            hd.wk2 = xavier(dh, d, rng);
            hd.wv = xavier(2 * dh, d, rng);
        }
        blk.wo = xavier(d, d, rng);
        blk.bo = Tensor({d}, 0.0);
        blk.ln1_gain = Tensor({d}, 1.0);
        blk.ln1_bias = Tensor({d}, 0.0);
        blk.ln2_gain = Tensor({d}, 1.0);
        blk.ln2_bias = Tensor({d}, 0.0);
        blk.ffn_w1 = xavier(dims.ffn, d, rng);
        blk.ffn_b1 = Tensor({dims.ffn}, 0.0);
        blk.ffn_w2 = xavier(d, dims.ffn, rng);
        blk.ffn_b2 = Tensor({d}, 0.0);
        blk.lambda = Tensor({1}, dims.learnable_lambda ? 0.8 : 1.0);
    }
    m.w_llr = xavier(dims.out_dim, d, rng);
    m.b_llr = Tensor({dims.out_dim}, 0.0);
    return m;
}

std::vector<std::pair<std::string, Tensor*>> ReceiverModel::parameters()
{
    return collect<ReceiverModel, Tensor*>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> ReceiverModel::parameters() const
{
    return collect<const ReceiverModel, const Tensor*>(*this);
}

std::size_t ReceiverModel::parameter_count() const
{
    std::size_t total = 0;
    for (const auto& [name, t] : parameters())
        total += t->size();
    return total;
}

// ---------------------------------------------------------------------------
// tokens

Tensor tokenize(const ofdm::FrameConfig& cfg, std::span<const cplx> received, const ofdm::PilotPattern& pilots,
                double noise_var)
{
    const std::size_t s = cfg.num_subcarriers;
    const std::size_t t = cfg.num_symbols;
    if (received.size() != s * t || pilots.values.size() != s * t)
        throw DimensionError("tokenize: grid does not match the frame config");
    const std::size_t f = ModelDims::features_for(cfg);
    Tensor tok({s, f});
    for (std::size_t m = 0; m < s; ++m) {
        double* row = tok.data().data() + m * f;
        for (std::size_t n = 0; n < t; ++n) {
            const cplx y = received[m + n * s];
            const cplx p = pilots.mask[m + n * s] ? pilots.values[m + n * s] : cplx{};
            row[n] = y.real();
            row[t + n] = y.imag();
            row[2 * t + n] = p.real();
            row[3 * t + n] = p.imag();
        }
        row[4 * t] = noise_var;
    }
    return tok;
}

Tensor TokenBatch::frame(std::size_t b) const
{
    const std::size_t s = tokens.dim(1), f = tokens.dim(2);
    Tensor out({s, f});
    std::copy_n(tokens.data().data() + b * s * f, s * f, out.data().data());
    return out;
}

TokenBatch make_batch(const ofdm::FrameConfig& cfg, std::span<const Tensor> frames,
                      std::vector<std::vector<std::uint8_t>> bits)
{
    if (frames.empty())
        throw DimensionError("make_batch: no frames");
    if (bits.size() != frames.size())
        throw DimensionError("make_batch: one bit vector per frame required");
    const std::size_t s = cfg.num_subcarriers;
    const std::size_t f = ModelDims::features_for(cfg);
    TokenBatch batch;
    batch.tokens = Tensor({frames.size(), s, f});
    for (std::size_t b = 0; b < frames.size(); ++b) {
        if (frames[b].shape() != ad::Shape{s, f})
            throw DimensionError("make_batch: token matrix has the wrong shape");
        std::copy(frames[b].data().begin(), frames[b].data().end(), batch.tokens.data().begin() + b * s * f);
    }
    batch.bits = std::move(bits);
    batch.data_mask.assign(cfg.resource_elements(), 0);
    for (auto i : ofdm::data_indices(cfg))
        batch.data_mask[i] = 1;
    return batch;
}

std::vector<std::size_t> llr_gather_indices(const ofdm::FrameConfig& cfg, std::size_t bits_per_symbol)
{
    const std::size_t out_dim = ModelDims::outputs_for(cfg, bits_per_symbol);
    std::vector<std::size_t> idx;
    idx.reserve(cfg.data_count() * bits_per_symbol);
    for (auto re : ofdm::data_indices(cfg)) {
        const std::size_t m = re % cfg.num_subcarriers;
        const std::size_t n = re / cfg.num_subcarriers;
        for (std::size_t b = 0; b < bits_per_symbol; ++b)
            idx.push_back(m * out_dim + n * bits_per_symbol + b);
    }
    return idx;
}

// ---------------------------------------------------------------------------
// forward

DiffAttention diff_attention(ad::Tape& tape, NodeId x, const HeadNodes& head, std::size_t d_head,
                             const NodeId* lambda)
{
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_head));
    const NodeId q1 = tape.matmul_nt(x, head.wq1);
    const NodeId k1 = tape.matmul_nt(x, head.wk1);
    const NodeId q2 = tape.matmul_nt(x, head.wq2);
    const NodeId k2 = tape.matmul_nt(x, head.wk2);
    const NodeId v = tape.matmul_nt(x, head.wv);
    const NodeId s1 = tape.softmax_rows(tape.scale(tape.matmul_nt(q1, k1), inv_sqrt_d));
    NodeId s2 = tape.softmax_rows(tape.scale(tape.matmul_nt(q2, k2), inv_sqrt_d));
    if (lambda)
        s2 = tape.scale_by(s2, *lambda);
    const NodeId map = tape.sub(s1, s2);
    return {map, tape.matmul(map, v)};
}

ForwardGraph build_forward(ad::Tape& tape, const ReceiverModel& model, const Tensor& tokens,
                           std::span<const std::size_t> gather_indices)
{
    std::vector<NodeId> params;
    for (const auto& [name, t] : model.parameters())
        params.push_back(tape.parameter(*t));
    return build_forward(tape, model.dims, std::move(params), tokens, gather_indices);
}

ForwardGraph build_forward(ad::Tape& tape, const ModelDims& dims, std::vector<NodeId> params, const Tensor& tokens,
                           std::span<const std::size_t> gather_indices)
{
    if (tokens.rank() != 2 || tokens.dim(1) != dims.n_feat)
        throw DimensionError("forward: token matrix width " + std::to_string(tokens.cols()) +
                             " does not match the model input width " + std::to_string(dims.n_feat));
    const std::size_t expected = 4 + dims.blocks * (5 * dims.heads + 11);
    if (params.size() != expected)
        throw DimensionError("forward: expected " + std::to_string(expected) + " parameter nodes");

    ForwardGraph g;
    g.params = std::move(params);
    std::size_t cursor = 0;
    auto next = [&] { return g.params[cursor++]; };

    const NodeId x = tape.input(tokens);
    const NodeId w0 = next();
    const NodeId b0 = next();
    NodeId h = activate(tape, dense(tape, x, w0, b0), dims.activation);

    std::vector<HeadNodes> heads(dims.heads);
    std::vector<NodeId> head_out(dims.heads);
    for (std::size_t l = 0; l < dims.blocks; ++l) {
        for (auto& hd : heads)
            hd = HeadNodes{next(), next(), next(), next(), next()};
        const NodeId wo = next(), bo = next();
        const NodeId ln1g = next(), ln1b = next(), ln2g = next(), ln2b = next();
        const NodeId w1 = next(), b1 = next(), w2 = next(), b2 = next();
        const NodeId lambda = next();
        const NodeId* lam = dims.learnable_lambda ? &lambda : nullptr;

        if (dims.literal_blocks) {
            for (std::size_t i = 0; i < dims.heads; ++i)
                head_out[i] = diff_attention(tape, h, heads[i], dims.d_head(), lam).output;
            h = activate(tape, dense(tape, tape.concat_cols(head_out), wo, bo), dims.activation);
            continue;
        }
        const NodeId a = tape.layer_norm(h, ln1g, ln1b);
        for (std::size_t i = 0; i < dims.heads; ++i)
            head_out[i] = diff_attention(tape, a, heads[i], dims.d_head(), lam).output;
        h = tape.add(h, dense(tape, tape.concat_cols(head_out), wo, bo));
        const NodeId b = tape.layer_norm(h, ln2g, ln2b);
        const NodeId f = dense(tape, activate(tape, dense(tape, b, w1, b1), dims.activation), w2, b2);
        h = tape.add(h, f);
    }
    const NodeId wl = next(), bl = next();
    g.head_output = dense(tape, h, wl, bl);
    g.llrs = tape.gather(g.head_output, std::vector<std::size_t>(gather_indices.begin(), gather_indices.end()));
    return g;
}

LlrGrid infer(const ReceiverModel& model, const Tensor& tokens, std::span<const std::size_t> gather_indices,
              std::size_t bits_per_symbol)
{
    ad::Tape tape;
    const ForwardGraph g = build_forward(tape, model, tokens, gather_indices);
    LlrGrid out;
    out.bits_per_symbol = bits_per_symbol;
    out.llrs = tape.value(g.llrs).values();
    return out;
}

std::vector<LlrGrid> forward(const ReceiverModel& model, const TokenBatch& batch, const ofdm::FrameConfig& cfg,
                             std::size_t bits_per_symbol, kernels::Exec exec)
{
    if (model.dims.out_dim != ModelDims::outputs_for(cfg, bits_per_symbol))
        throw DimensionError("forward: model output width does not match the frame layout");
    const auto idx = llr_gather_indices(cfg, bits_per_symbol);
    std::vector<LlrGrid> out(batch.frames());
    kernels::for_each_index(batch.frames(), exec,
                            [&](std::size_t b) { out[b] = infer(model, batch.frame(b), idx, bits_per_symbol); });
    return out;
}

double loss_bce(std::span<const double> llrs, std::span<const std::uint8_t> bits)
{
    if (llrs.size() != bits.size() || llrs.empty())
        throw DimensionError("loss_bce: llr and bit counts differ");
    auto softplus = [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); };
    double s = 0.0;
    for (std::size_t i = 0; i < llrs.size(); ++i)
        s += bits[i] ? softplus(llrs[i]) : softplus(-llrs[i]);
    return s / static_cast<double>(llrs.size());
}

} // namespace dtrx::nrx
