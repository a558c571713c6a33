#include "dtrx/cli.hpp"

#include "dtrx/error.hpp"
#include "dtrx/link.hpp"
#include "dtrx/training.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace dtrx::cli {

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

struct SweepFlags {
    double snr_start = 0.0;
    double snr_stop = 20.0;
    double snr_step = 2.0;
    std::size_t target_errors = 100;
    std::size_t min_frames = 10;
    std::size_t max_frames = 1000;
    std::string out;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f)
{
    cmd->add_option("--snr-start", f.snr_start, "first SNR point in dB")->capture_default_str();
    cmd->add_option("--snr-stop", f.snr_stop, "last SNR point in dB (inclusive)")->capture_default_str();
    cmd->add_option("--snr-step", f.snr_step, "SNR increment in dB")->capture_default_str();
    cmd->add_option("--target-errors", f.target_errors, "stop a point after this many bit errors")
        ->capture_default_str();
    cmd->add_option("--min-frames", f.min_frames, "frames per point before the error target applies")
        ->capture_default_str();
    cmd->add_option("--max-frames", f.max_frames, "frame limit per point")->capture_default_str();
    cmd->add_option("--out", f.out, "CSV output path (stdout when omitted)");
}

link::LinkConfig read_config(const std::string& path)
{
    return path.empty() ? link::parse_config("", "<defaults>") : link::load_config(path);
}

kernels::Exec frame_exec()
{
    return omp_get_max_threads() > 1 ? kernels::Exec::parallel : kernels::Exec::serial;
}

int sweep(const link::Link& lnk, const SweepFlags& f, std::ostream& out, std::ostream& err)
{
    const auto snrs = link::snr_range(f.snr_start, f.snr_stop, f.snr_step);
    if (snrs.empty())
        throw UsageError("empty SNR range: --snr-start must not exceed --snr-stop");
    link::StopRule stop;
    stop.min_frames = f.min_frames;
    stop.max_frames = f.max_frames;
    stop.target_errors = f.target_errors;
    const auto res = link::run_ber_sweep(lnk, snrs, stop, frame_exec());
    for (const auto& r : res.rows)
        err << r.receiver << " snr " << r.snr_db << " dB: " << r.frames << " frames, ber " << r.ber << ", bler "
            << r.bler << "\n";
    if (f.out.empty()) {
        link::write_csv(out, res);
    } else {
        std::ofstream os(f.out);
        if (!os)
            throw Error("cannot write '" + f.out + "'");
        link::write_csv(os, res);
    }
    return ok;
}

std::shared_ptr<const nrx::ReceiverModel> load_checked(const std::string& path)
{
    if (path.empty())
        throw ConfigError("the neural receiver needs a model (--model or the 'model' config key)");
    return std::make_shared<const nrx::ReceiverModel>(nrx::load_model(path));
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Link-level OFDM simulator with a differential-attention neural receiver"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string receiver;
    std::string model_path;
    SweepFlags sweep_flags;

    auto* simulate = app.add_subcommand("simulate", "BER/BLER sweep over SNR");
    simulate->add_option("--config", config_path, "link config file");
    simulate->add_option("--receiver", receiver, "baseline-ls, perfect-csi or neural");
    simulate->add_option("--model", model_path, "model file for the neural receiver");
    simulate->add_option("--seed", seed, "master seed");
    add_sweep_flags(simulate, sweep_flags);

    std::optional<std::size_t> steps, batch;
    std::optional<double> lr;
    std::string train_out, trace_out;
    auto* train_cmd = app.add_subcommand("train", "train the neural receiver");
    train_cmd->add_option("--config", config_path, "link config file");
    train_cmd->add_option("--steps", steps, "optimizer steps (default 1000)");
    train_cmd->add_option("--lr", lr, "Adam learning rate");
    train_cmd->add_option("--batch", batch, "frames per step");
    train_cmd->add_option("--out", train_out, "model output path")->required();
    train_cmd->add_option("--trace", trace_out, "write the per-step loss trace here");
    train_cmd->add_option("--seed", seed, "master seed");

    auto* eval = app.add_subcommand("eval", "BER/BLER sweep of a trained model");
    eval->add_option("--config", config_path, "link config file");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--seed", seed, "master seed");
    add_sweep_flags(eval, sweep_flags);

    std::size_t probes = 10;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full receiver gradient");
    gradcheck->add_option("--config", config_path, "link config file");
    gradcheck->add_option("--seed", seed, "seed for the model, the frame and the probes");
    gradcheck->add_option("--probes", probes, "parameters probed")->capture_default_str();

    auto* info = app.add_subcommand("info", "print the resolved configuration");
    info->add_option("--config", config_path, "link config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return usage;
    }

    try {
        link::LinkConfig cfg = read_config(config_path);
        if (seed)
            cfg.seed = *seed;

        if (*info) {
            out << cfg.describe();
            return ok;
        }

        if (*simulate) {
            if (!receiver.empty())
                cfg.receiver = link::parse_receiver(receiver);
            if (!model_path.empty())
                cfg.model_path = model_path;
            std::shared_ptr<const nrx::ReceiverModel> model;
            if (cfg.receiver == link::ReceiverType::neural)
                model = load_checked(cfg.model_path.string());
            return sweep(link::Link(cfg, model), sweep_flags, out, err);
        }

        if (*eval) {
            cfg.receiver = link::ReceiverType::neural;
            cfg.model_path = model_path;
            return sweep(link::Link(cfg, load_checked(model_path)), sweep_flags, out, err);
        }

        if (*train_cmd) {
            if (lr)
                cfg.learning_rate = *lr;
            if (batch)
                cfg.batch = *batch;
            cfg.validate();
            train::TrainOptions opts;
            opts.steps = steps.value_or(1000);
            opts.batch = cfg.batch;
            opts.adam.lr = cfg.learning_rate;
            opts.seed = cfg.seed;
            opts.snr_min_db = cfg.train_snr_min_db;
            opts.snr_max_db = cfg.train_snr_max_db;
            opts.exec = frame_exec();
            const std::size_t every = std::max<std::size_t>(1, opts.steps / 20);
            double window = 0.0;
            opts.on_step = [&](std::size_t s, double loss) {
                window += loss;
                if ((s + 1) % every == 0 || s + 1 == opts.steps) {
                    const std::size_t n = (s % every) + 1;
                    err << "step " << s + 1 << "/" << opts.steps << " mean loss " << window / double(n) << "\n";
                    window = 0.0;
                }
            };
            const link::Link lnk(cfg);
            auto model = nrx::ReceiverModel::initialize(cfg.model_dims(), cfg.seed);
            const auto trace = train::train(model, lnk, opts);
            nrx::save_model(model, train_out);
            if (!trace_out.empty()) {
                std::ofstream os(trace_out);
                if (!os)
                    throw Error("cannot write '" + trace_out + "'");
                os << "step,loss\n";
                char buf[64];
                for (std::size_t i = 0; i < trace.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, trace[i]);
                    os << buf;
                }
            }
            out << "saved " << train_out << " (" << model.parameter_count() << " parameters, final loss "
                << trace.back() << ")\n";
            return ok;
        }

        if (*gradcheck) {
            const std::uint64_t s = cfg.seed;
            const link::Link lnk(cfg);
            const auto model = nrx::ReceiverModel::initialize(cfg.model_dims(), s);
            const auto ex = train::make_example(lnk, 10.0, s);
            const auto rep = train::model_grad_check(model, ex.tokens, ex.bits, lnk.gather_indices(), probes, s);
            char buf[160];
            std::snprintf(buf, sizeof buf, "max rel err %.3e over %zu probes (%zu kink skips)\n", rep.max_rel_error,
                          rep.probes, rep.kink_skips);
            out << buf;
            if (rep.probes == 0 || !(rep.max_rel_error < 1e-4)) {
                err << "gradient check failed (threshold 1e-4)\n";
                return gradcheck_failed;
            }
            return ok;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return config;
    } catch (const ModelFormatError& e) {
        err << "model error: " << e.what() << "\n";
        return model;
    } catch (const ModelShapeError& e) {
        err << "model error: " << e.what() << "\n";
        return model;
    } catch (const TrainingDivergedError& e) {
        err << "error: " << e.what() << "\n";
        return diverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return runtime_failure;
    }
    return usage;
}

} // namespace dtrx::cli
