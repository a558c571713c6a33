#include "dtrx/diff_receiver.hpp"

#include "dtrx/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dtrx::nrx {

namespace {

constexpr char magic[8] = {'D', 'T', 'R', 'X', 'M', 'D', 'L', '\0'};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), c, c + n);
    }
    template <typename T>
    void le(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t>& buffer() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void need(std::size_t n, const char* what) const
    {
        if (in_.size() - pos_ < n)
            throw ModelFormatError(std::string("model file truncated while reading ") + what);
    }
    template <typename T>
    T le(const char* what)
    {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }
    std::span<const std::uint8_t> take(std::size_t n, const char* what)
    {
        need(n, what);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::string shape_str(const ad::Shape& s)
{
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

} // namespace

std::vector<std::uint8_t> serialize_model(const ReceiverModel& model)
{
    Writer w;
    w.bytes(magic, sizeof magic);
    w.le<std::uint32_t>(model_format_version);
    const ModelDims& d = model.dims;
    for (auto v : {d.n_feat, d.d_model, d.heads, d.blocks, d.ffn, d.out_dim})
        w.le<std::uint32_t>(static_cast<std::uint32_t>(v));
    w.le<std::uint8_t>(d.learnable_lambda);
    w.le<std::uint8_t>(d.literal_blocks);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(d.activation));

    const auto params = model.parameters();
    w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.le<std::uint8_t>(static_cast<std::uint8_t>(t->rank()));
        for (auto n : t->shape())
            w.le<std::uint32_t>(static_cast<std::uint32_t>(n));
    }
    for (const auto& [name, t] : params)
        for (double v : t->values())
            w.f64(v);
    w.le<std::uint64_t>(fnv1a(w.buffer()));
    return std::move(w.buffer());
}

ReceiverModel deserialize_model(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    const auto m = r.take(sizeof magic, "magic");
    if (std::memcmp(m.data(), magic, sizeof magic) != 0)
        throw ModelFormatError("not a model file (bad magic)");
    const auto version = r.le<std::uint32_t>("version");
    if (version != model_format_version)
        throw ModelFormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                               std::to_string(model_format_version) + ")");
    if (bytes.size() < 8 + r.pos())
        throw ModelFormatError("model file truncated");
    const auto payload_end = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (std::size_t i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(bytes[payload_end + i]) << (8 * i);

    ModelDims d;
    d.n_feat = r.le<std::uint32_t>("dims");
    d.d_model = r.le<std::uint32_t>("dims");
    d.heads = r.le<std::uint32_t>("dims");
    d.blocks = r.le<std::uint32_t>("dims");
    d.ffn = r.le<std::uint32_t>("dims");
    d.out_dim = r.le<std::uint32_t>("dims");
    d.learnable_lambda = r.le<std::uint8_t>("flags") != 0;
    d.literal_blocks = r.le<std::uint8_t>("flags") != 0;
    const auto act = r.le<std::uint8_t>("flags");
    if (act > 1)
        throw ModelFormatError("unknown activation code " + std::to_string(act));
    d.activation = static_cast<Activation>(act);
    try {
        d.validate();
    } catch (const ConfigError& e) {
        throw ModelShapeError(std::string("model file dims invalid: ") + e.what());
    }
    // Guards the allocation below against absurd header values.
    if (d.blocks > 64 || d.heads > 64 || d.d_model > 8192 || d.ffn > 65536 || d.n_feat > 65536 || d.out_dim > 65536)
        throw ModelShapeError("model file dims out of range");

    ReceiverModel model = ReceiverModel::initialize(d, 0);
    auto params = model.parameters();
    const auto count = r.le<std::uint32_t>("tensor count");
    if (count != params.size())
        throw ModelShapeError("shape table lists " + std::to_string(count) + " tensors, dims imply " +
                              std::to_string(params.size()));
    for (auto& [name, t] : params) {
        const auto len = r.le<std::uint16_t>("shape table");
        const auto nm = r.take(len, "shape table");
        const std::string file_name(nm.begin(), nm.end());
        if (file_name != name)
            throw ModelShapeError("shape table entry '" + file_name + "' where '" + name + "' was expected");
        const auto rank = r.le<std::uint8_t>("shape table");
        ad::Shape shape(rank);
        for (auto& n : shape)
            n = r.le<std::uint32_t>("shape table");
        if (shape != t->shape())
            throw ModelShapeError("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                                  shape_str(t->shape()));
    }
    for (auto& [name, t] : params)
        for (double& v : t->values())
            v = r.f64("parameters");
    if (r.pos() != payload_end)
        throw ModelFormatError(r.pos() > payload_end ? "model file truncated" : "trailing bytes in model file");
    if (fnv1a(bytes.first(payload_end)) != stored)
        throw ModelFormatError("model file checksum mismatch");
    for (const auto& [name, t] : params)
        if (!t->all_finite())
            throw ModelFormatError("tensor '" + name + "' contains non-finite values");
    return model;
}

void save_model(const ReceiverModel& model, const std::filesystem::path& path)
{
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("failed writing '" + path.string() + "'");
}

ReceiverModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open model file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace dtrx::nrx
