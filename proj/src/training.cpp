#include "dtrx/training.hpp"

#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <cmath>
#include <string>

namespace dtrx::train {

Adam::Adam(const nrx::ReceiverModel& model, AdamConfig cfg) : cfg_(cfg)
{
    for (const auto& [name, t] : model.parameters()) {
        m_.emplace_back(t->shape(), 0.0);
        v_.emplace_back(t->shape(), 0.0);
    }
}

void Adam::step(nrx::ReceiverModel& model, const std::vector<ad::Tensor>& grads)
{
    auto params = model.parameters();
    if (grads.size() != params.size() || m_.size() != params.size())
        throw DimensionError("adam: gradient list does not match the model");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p].second->values();
        const auto& g = grads[p].values();
        auto& m = m_[p].values();
        auto& v = v_[p].values();
        if (g.size() != w.size())
            throw DimensionError("adam: gradient shape mismatch for " + params[p].first);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            w[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
    }
}

double batch_gradient(const nrx::ReceiverModel& model, std::span<const TrainingExample> batch,
                      std::span<const std::size_t> gather_indices, std::vector<ad::Tensor>& grads,
                      kernels::Exec exec)
{
    if (batch.empty())
        throw DimensionError("batch_gradient: empty batch");
    const auto params = model.parameters();
    // Frozen lambdas (learnable_lambda off) still appear here; the forward
    // pass never reads them, so their gradient stays zero.
    std::vector<std::vector<ad::Tensor>> item_grads(batch.size());
    std::vector<double> losses(batch.size());
    kernels::for_each_index(batch.size(), exec, [&](std::size_t b) {
        ad::Tape tape;
        const auto g = nrx::build_forward(tape, model, batch[b].tokens, gather_indices);
        const ad::NodeId loss = tape.bce_llr(g.llrs, batch[b].bits);
        losses[b] = tape.value(loss)[0];
        const ad::GradientMap gm = tape.backward(loss);
        auto& out = item_grads[b];
        out.reserve(params.size());
        for (std::size_t p = 0; p < params.size(); ++p)
            out.push_back(gm.has(g.params[p]) ? gm[g.params[p]] : ad::Tensor(params[p].second->shape(), 0.0));
    });

    grads.clear();
    for (const auto& [name, t] : params)
        grads.emplace_back(t->shape(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        loss += losses[b];
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& dst = grads[p].values();
            const auto& src = item_grads[b][p].values();
            for (std::size_t i = 0; i < dst.size(); ++i)
                dst[i] += src[i];
        }
    }
    for (auto& g : grads)
        for (auto& v : g.values())
            v *= inv;
    return loss * inv;
}

TrainingExample make_example(const link::Link& link, double snr_db, std::uint64_t seed)
{
    const auto tx = link.transmit(seed);
    const auto rx = link.propagate(tx, snr_db, seed);
    TrainingExample ex;
    ex.tokens = nrx::tokenize(link.config().frame, rx.grid, link.pilots(), rx.noise_var);
    ex.bits = tx.coded;
    return ex;
}

namespace {

void check_finite(double loss, std::size_t step)
{
    if (!std::isfinite(loss))
        throw TrainingDivergedError("training diverged at step " + std::to_string(step) +
                                    ": loss is not finite; lower the learning rate or check the inputs");
}

} // namespace

std::vector<double> train(nrx::ReceiverModel& model, const link::Link& link, const TrainOptions& opts)
{
    if (opts.steps == 0)
        throw ConfigError("training needs at least one step");
    if (opts.batch == 0)
        throw ConfigError("training batch must be at least 1");
    if (!(opts.snr_min_db <= opts.snr_max_db))
        throw ConfigError("training SNR range is empty");
    if (model.dims.n_feat != nrx::ModelDims::features_for(link.config().frame) ||
        model.dims.out_dim != nrx::ModelDims::outputs_for(link.config().frame, link.config().bits_per_symbol()))
        throw ModelShapeError("model dimensions do not fit the link frame layout");

    Adam adam(model, opts.adam);
    std::vector<double> trace;
    trace.reserve(opts.steps);
    std::vector<TrainingExample> batch(opts.batch);
    std::vector<ad::Tensor> grads;
    for (std::size_t s = 0; s < opts.steps; ++s) {
        kernels::for_each_index(opts.batch, opts.exec, [&](std::size_t b) {
            const std::uint64_t fs = derive_seed(opts.seed, {0x747261696eULL, s, b});
            Rng rng(derive_seed(fs, {0}));
            const double snr = std::uniform_real_distribution<double>(opts.snr_min_db, opts.snr_max_db)(rng);
            batch[b] = make_example(link, snr, fs);
        });
        const double loss = batch_gradient(model, batch, link.gather_indices(), grads, opts.exec);
        check_finite(loss, s);
        adam.step(model, grads);
        trace.push_back(loss);
        if (opts.on_step)
            opts.on_step(s, loss);
    }
    return trace;
}

std::vector<double> train_fixed(nrx::ReceiverModel& model, std::span<const TrainingExample> examples,
                                std::span<const std::size_t> gather_indices, std::size_t steps,
                                const AdamConfig& adam_cfg, kernels::Exec exec)
{
    if (steps == 0)
        throw ConfigError("training needs at least one step");
    Adam adam(model, adam_cfg);
    std::vector<double> trace;
    std::vector<ad::Tensor> grads;
    for (std::size_t s = 0; s < steps; ++s) {
        const double loss = batch_gradient(model, examples, gather_indices, grads, exec);
        check_finite(loss, s);
        adam.step(model, grads);
        trace.push_back(loss);
    }
    return trace;
}

ad::GradCheckReport model_grad_check(const nrx::ReceiverModel& model, const ad::Tensor& tokens,
                                     std::span<const std::uint8_t> bits, std::span<const std::size_t> gather_indices,
                                     std::size_t probes, std::uint64_t seed, double step)
{
    std::vector<ad::Tensor> inputs;
    for (const auto& [name, t] : model.parameters())
        inputs.push_back(*t);
    const std::vector<std::size_t> idx(gather_indices.begin(), gather_indices.end());
    const std::vector<std::uint8_t> target(bits.begin(), bits.end());
    const ad::LossBuilder f = [&](ad::Tape& tape, std::span<const ad::NodeId> leaves) {
        const auto g = nrx::build_forward(tape, model.dims, {leaves.begin(), leaves.end()}, tokens, idx);
        return tape.bce_llr(g.llrs, target);
    };
    return ad::grad_check_sampled(f, inputs, step, probes, seed);
}

double window_mean(std::span<const double> trace, std::size_t first, std::size_t count)
{
    if (count == 0 || first + count > trace.size())
        throw DimensionError("window_mean: window outside the trace");
    double s = 0.0;
    for (std::size_t i = first; i < first + count; ++i)
        s += trace[i];
    return s / static_cast<double>(count);
}

} // namespace dtrx::train
