#include "dtrx/link_config.hpp"

#include "dtrx/channel.hpp"
#include "dtrx/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dtrx::link {

ReceiverType parse_receiver(std::string_view name)
{
    if (name == "baseline-ls")
        return ReceiverType::baseline_ls;
    if (name == "perfect-csi")
        return ReceiverType::perfect_csi;
    if (name == "neural")
        return ReceiverType::neural;
    throw ConfigError("unknown receiver '" + std::string(name) + "' (baseline-ls, perfect-csi, neural)");
}

std::string receiver_name(ReceiverType r)
{
    switch (r) {
    case ReceiverType::baseline_ls: return "baseline-ls";
    case ReceiverType::perfect_csi: return "perfect-csi";
    case ReceiverType::neural: return "neural";
    }
    return "?";
}

std::size_t LinkConfig::bits_per_symbol() const
{
    switch (modulation_order) {
    case 4: return 2;
    case 16: return 4;
    case 64: return 6;
    default: throw ConfigError("modulation must be 4, 16 or 64, got " + std::to_string(modulation_order));
    }
}

nrx::ModelDims LinkConfig::model_dims() const
{
    nrx::ModelDims d;
    d.n_feat = nrx::ModelDims::features_for(frame);
    d.out_dim = nrx::ModelDims::outputs_for(frame, bits_per_symbol());
    d.d_model = d_model;
    d.heads = heads;
    d.blocks = blocks;
    d.ffn = ffn;
    d.learnable_lambda = learnable_lambda;
    d.literal_blocks = literal_blocks;
    d.activation = activation;
    return d;
}

void LinkConfig::validate() const
{
    frame.validate();
    const std::size_t q = bits_per_symbol();
    if (ldpc_n % q != 0)
        throw ConfigError("ldpc_n (" + std::to_string(ldpc_n) + ") must be divisible by bits per symbol (" +
                          std::to_string(q) + ")");
    if (ldpc_col_weight < 2 || ldpc_row_weight <= ldpc_col_weight)
        throw ConfigError("ldpc weights must satisfy 2 <= col_weight < row_weight");
    if ((ldpc_n * ldpc_col_weight) % ldpc_row_weight != 0)
        throw ConfigError("ldpc_n * col_weight must be divisible by row_weight");
    if (codewords_per_frame() == 0)
        throw ConfigError("a codeword of " + std::to_string(ldpc_n) + " bits does not fit the " +
                          std::to_string(frame_bits()) + " data bits of one frame");
    if (bp_iterations == 0)
        throw ConfigError("bp_iterations must be at least 1");
    channel::preset(channel).validate(frame.cp_length);
    if (batch == 0)
        throw ConfigError("batch must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("lr must be positive");
    if (!(train_snr_min_db <= train_snr_max_db))
        throw ConfigError("train_snr_min_db must not exceed train_snr_max_db");
    model_dims().validate();
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v)
{
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("invalid value '" + v + "' for " + key);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError("invalid boolean '" + v + "' for " + key);
}

std::string fmt(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

using Setter = std::function<void(LinkConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter num(T LinkConfig::*field)
{
    return [field](LinkConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

template <typename T>
Setter frame_num(T ofdm::FrameConfig::*field)
{
    return [field](LinkConfig& c, const std::string& k, const std::string& v) {
        c.frame.*field = parse_number<T>(k, v);
    };
}

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"subcarriers", frame_num(&ofdm::FrameConfig::num_subcarriers)},
        {"subcarrier_spacing_hz", frame_num(&ofdm::FrameConfig::subcarrier_spacing_hz)},
        {"symbols", frame_num(&ofdm::FrameConfig::num_symbols)},
        {"fft_size", frame_num(&ofdm::FrameConfig::fft_size)},
        {"cp_length", frame_num(&ofdm::FrameConfig::cp_length)},
        {"pilot_seed", frame_num(&ofdm::FrameConfig::pilot_seed)},
        {"pilot_symbols",
         [](LinkConfig& c, const std::string& k, const std::string& v) {
             c.frame.pilot_symbols.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ','))
                 c.frame.pilot_symbols.push_back(parse_number<std::size_t>(k, trim(item)));
         }},
        {"modulation", num(&LinkConfig::modulation_order)},
        {"ldpc_n", num(&LinkConfig::ldpc_n)},
        {"ldpc_col_weight", num(&LinkConfig::ldpc_col_weight)},
        {"ldpc_row_weight", num(&LinkConfig::ldpc_row_weight)},
        {"ldpc_seed", num(&LinkConfig::ldpc_seed)},
        {"bp_iterations", num(&LinkConfig::bp_iterations)},
        {"channel", [](LinkConfig& c, const std::string&, const std::string& v) { c.channel = v; }},
        {"receiver", [](LinkConfig& c, const std::string&, const std::string& v) { c.receiver = parse_receiver(v); }},
        {"model", [](LinkConfig& c, const std::string&, const std::string& v) { c.model_path = v; }},
        {"seed", num(&LinkConfig::seed)},
        {"d_model", num(&LinkConfig::d_model)},
        {"heads", num(&LinkConfig::heads)},
        {"blocks", num(&LinkConfig::blocks)},
        {"ffn", num(&LinkConfig::ffn)},
        {"learnable_lambda",
         [](LinkConfig& c, const std::string& k, const std::string& v) { c.learnable_lambda = parse_bool(k, v); }},
        {"literal_blocks",
         [](LinkConfig& c, const std::string& k, const std::string& v) { c.literal_blocks = parse_bool(k, v); }},
        {"activation",
         [](LinkConfig& c, const std::string& k, const std::string& v) {
             if (v == "relu")
                 c.activation = nrx::Activation::relu;
             else if (v == "sigmoid")
                 c.activation = nrx::Activation::sigmoid;
             else
                 throw ConfigError("invalid value '" + v + "' for " + k + " (relu, sigmoid)");
         }},
        {"train_snr_min_db", num(&LinkConfig::train_snr_min_db)},
        {"train_snr_max_db", num(&LinkConfig::train_snr_max_db)},
        {"batch", num(&LinkConfig::batch)},
        {"lr", num(&LinkConfig::learning_rate)},
    };
    return table;
}

} // namespace

LinkConfig parse_config(std::string_view text, const std::string& origin)
{
    LinkConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError(where + "unknown key '" + key + "'");
        // An empty model path or pilot list is meaningful; other keys need a value.
        if (value.empty() && key != "model" && key != "pilot_symbols")
            throw ConfigError(where + "missing value for '" + key + "'");
        try {
            it->second(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

LinkConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string LinkConfig::describe() const
{
    std::ostringstream os;
    std::string pilots;
    for (std::size_t i = 0; i < frame.pilot_symbols.size(); ++i)
        pilots += (i ? "," : "") + std::to_string(frame.pilot_symbols[i]);
    os << "subcarriers = " << frame.num_subcarriers << "\n"
       << "subcarrier_spacing_hz = " << fmt(frame.subcarrier_spacing_hz) << "\n"
       << "symbols = " << frame.num_symbols << "\n"
       << "fft_size = " << frame.fft_size << "\n"
       << "cp_length = " << frame.cp_length << "\n"
       << "pilot_symbols = " << pilots << "\n"
       << "pilot_seed = " << frame.pilot_seed << "\n"
       << "modulation = " << modulation_order << "\n"
       << "ldpc_n = " << ldpc_n << "\n"
       << "ldpc_col_weight = " << ldpc_col_weight << "\n"
       << "ldpc_row_weight = " << ldpc_row_weight << "\n"
       << "ldpc_seed = " << ldpc_seed << "\n"
       << "bp_iterations = " << bp_iterations << "\n"
       << "channel = " << channel << "\n"
       << "receiver = " << receiver_name(receiver) << "\n"
       << "model = " << model_path.string() << "\n"
       << "seed = " << seed << "\n"
       << "d_model = " << d_model << "\n"
       << "heads = " << heads << "\n"
       << "blocks = " << blocks << "\n"
       << "ffn = " << ffn << "\n"
       << "learnable_lambda = " << (learnable_lambda ? "true" : "false") << "\n"
       << "literal_blocks = " << (literal_blocks ? "true" : "false") << "\n"
       << "activation = " << (activation == nrx::Activation::relu ? "relu" : "sigmoid") << "\n"
       << "train_snr_min_db = " << fmt(train_snr_min_db) << "\n"
       << "train_snr_max_db = " << fmt(train_snr_max_db) << "\n"
       << "batch = " << batch << "\n"
       << "lr = " << fmt(learning_rate) << "\n"
       << "# derived\n"
       << "# data_res_per_frame = " << frame.data_count() << "\n"
       << "# coded_bits_per_frame = " << frame_bits() << "\n"
       << "# codewords_per_frame = " << codewords_per_frame() << "\n"
       << "# filler_bits = " << filler_bits() << "\n";
    return os.str();
}

} // namespace dtrx::link
