#pragma once

#include "dtrx/diff_receiver.hpp"
#include "dtrx/kernels.hpp"
#include "dtrx/link.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dtrx::train {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam state for every tensor of one model, in parameters() order.
class Adam {
public:
    Adam(const nrx::ReceiverModel& model, AdamConfig cfg);
    /// One update with gradients laid out like model.parameters().
    void step(nrx::ReceiverModel& model, const std::vector<ad::Tensor>& grads);
    std::size_t steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<ad::Tensor> m_, v_;
    std::size_t t_ = 0;
};

struct TrainingExample {
    ad::Tensor tokens;
    std::vector<std::uint8_t> bits; // coded bits in transmit order
};

/// Mean BCE over the examples and its gradient for every parameter. Items
/// may run in parallel; per-item gradients are summed in item order, so the
/// result does not depend on exec.
double batch_gradient(const nrx::ReceiverModel& model, std::span<const TrainingExample> batch,
                      std::span<const std::size_t> gather_indices, std::vector<ad::Tensor>& grads,
                      kernels::Exec exec = kernels::Exec::serial);

struct TrainOptions {
    std::size_t steps = 1000;
    std::size_t batch = 8;
    AdamConfig adam;
    std::uint64_t seed = 1;
    double snr_min_db = 0.0;
    double snr_max_db = 20.0;
    kernels::Exec exec = kernels::Exec::serial;
    /// Called after each step with (step index, batch loss).
    std::function<void(std::size_t, double)> on_step;
};

/// Step s, item b draws an SNR uniformly in [snr_min_db, snr_max_db] and a
/// fresh frame (bits, channel, noise) from seeds derived from (seed, s, b).
TrainingExample make_example(const link::Link& link, double snr_db, std::uint64_t seed);

/// Trains on frames generated through `link`. Returns the per-step loss
/// trace. Throws TrainingDivergedError on a non-finite loss.
std::vector<double> train(nrx::ReceiverModel& model, const link::Link& link, const TrainOptions& opts);

/// Trains repeatedly on the same examples.
std::vector<double> train_fixed(nrx::ReceiverModel& model, std::span<const TrainingExample> examples,
                                std::span<const std::size_t> gather_indices, std::size_t steps,
                                const AdamConfig& adam, kernels::Exec exec = kernels::Exec::serial);

/// Central-difference check of the BCE gradient of the full model with
/// respect to `probes` randomly drawn parameters.
ad::GradCheckReport model_grad_check(const nrx::ReceiverModel& model, const ad::Tensor& tokens,
                                     std::span<const std::uint8_t> bits, std::span<const std::size_t> gather_indices,
                                     std::size_t probes, std::uint64_t seed, double step = 1e-5);

/// Mean of trace[first, first + count).
double window_mean(std::span<const double> trace, std::size_t first, std::size_t count);

} // namespace dtrx::train
