#include "dtrx/diff_receiver.hpp"
#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"
#include "dtrx/training.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

using namespace dtrx;
using namespace dtrx::nrx;
using ad::Shape;
using ofdm::FrameConfig;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0)
{
    std::normal_distribution<double> g(0.0, sd);
    Tensor t(std::move(shape));
    for (auto& v : t.data())
        v = g(rng);
    return t;
}

std::vector<cplx> random_grid(const FrameConfig& cfg, Rng& rng)
{
    std::normal_distribution<double> g;
    std::vector<cplx> v(cfg.resource_elements());
    for (auto& x : v)
        x = {g(rng), g(rng)};
    return v;
}

FrameConfig small_frame()
{
    FrameConfig cfg;
    cfg.num_subcarriers = 16;
    cfg.fft_size = 16;
    cfg.cp_length = 12;
    return cfg;
}

ModelDims dims_for(const FrameConfig& cfg, std::size_t q, std::size_t d_model, std::size_t blocks)
{
    ModelDims d;
    d.n_feat = ModelDims::features_for(cfg);
    d.out_dim = ModelDims::outputs_for(cfg, q);
    d.d_model = d_model;
    d.blocks = blocks;
    return d;
}

// Plain-loop Y = X W^T.
std::vector<std::vector<double>> project(const Tensor& x, const Tensor& w)
{
    std::vector<std::vector<double>> y(x.dim(0), std::vector<double>(w.dim(0)));
    for (std::size_t i = 0; i < x.dim(0); ++i)
        for (std::size_t o = 0; o < w.dim(0); ++o)
            for (std::size_t k = 0; k < x.dim(1); ++k)
                y[i][o] += x.at(i, k) * w.at(o, k);
    return y;
}

std::vector<std::vector<double>> softmax_scores(const std::vector<std::vector<double>>& q,
                                                const std::vector<std::vector<double>>& k, double d)
{
    const std::size_t n = q.size();
    std::vector<std::vector<double>> s(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < q[i].size(); ++c)
                dot += q[i][c] * k[j][c];
            s[i][j] = std::exp(dot / std::sqrt(d));
            z += s[i][j];
        }
        for (auto& v : s[i])
            v /= z;
    }
    return s;
}

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void reseal(std::vector<std::uint8_t>& bytes)
{
    const std::uint64_t h = fnv1a(bytes.data(), bytes.size() - 8);
    for (int i = 0; i < 8; ++i)
        bytes[bytes.size() - 8 + i] = static_cast<std::uint8_t>(h >> (8 * i));
}

} // namespace

TEST_CASE("tokenize layout")
{
    const FrameConfig cfg;
    ofdm::PilotPattern zero_pilots{std::vector<std::uint8_t>(cfg.resource_elements()),
                                   std::vector<cplx>(cfg.resource_elements())};
    const auto t = tokenize(cfg, std::vector<cplx>(cfg.resource_elements()), zero_pilots, 0.25);
    REQUIRE(t.shape() == Shape{128, 57});
    for (std::size_t m = 0; m < 128; ++m) {
        for (std::size_t f = 0; f < 56; ++f)
            CHECK(t.at(m, f) == 0.0);
        CHECK(t.at(m, 56) == 0.25);
    }

    Rng rng(2);
    const auto rx = random_grid(cfg, rng);
    const auto pilots = ofdm::kronecker_pilot_mask(cfg);
    const auto u = tokenize(cfg, rx, pilots, 0.5);
    for (std::size_t m : {0u, 77u})
        for (std::size_t n = 0; n < 14; ++n) {
            CHECK(u.at(m, n) == rx[m + n * 128].real());
            CHECK(u.at(m, 14 + n) == rx[m + n * 128].imag());
            CHECK(u.at(m, 28 + n) == pilots.values[m + n * 128].real());
            CHECK(u.at(m, 42 + n) == pilots.values[m + n * 128].imag());
        }
    CHECK_THROWS_AS(tokenize(cfg, std::vector<cplx>(10), pilots, 0.5), DimensionError);
}

TEST_CASE("swapping two subcarriers swaps their tokens only")
{
    const FrameConfig cfg;
    Rng rng(3);
    auto rx = random_grid(cfg, rng);
    auto pilots = ofdm::kronecker_pilot_mask(cfg);
    const auto before = tokenize(cfg, rx, pilots, 0.1);
    for (std::size_t n = 0; n < 14; ++n) {
        std::swap(rx[5 + n * 128], rx[90 + n * 128]);
        std::swap(pilots.values[5 + n * 128], pilots.values[90 + n * 128]);
    }
    const auto after = tokenize(cfg, rx, pilots, 0.1);
    for (std::size_t m = 0; m < 128; ++m) {
        const std::size_t src = m == 5 ? 90 : (m == 90 ? 5 : m);
        for (std::size_t f = 0; f < 57; ++f)
            CHECK(after.at(m, f) == before.at(src, f));
    }
}

TEST_CASE("differential attention zero cases")
{
    Rng rng(4);
    const std::size_t dm = 16, dh = 4;
    const Tensor x = random_tensor({9, dm}, rng);
    const Tensor wq = random_tensor({dh, dm}, rng), wk = random_tensor({dh, dm}, rng);
    const Tensor wv = random_tensor({2 * dh, dm}, rng);
    {
        ad::Tape tape;
        const HeadNodes h{tape.input(wq), tape.input(wq), tape.input(wk), tape.input(wk), tape.input(wv)};
        const auto a = diff_attention(tape, tape.input(x), h, dh);
        for (double v : tape.value(a.output).data())
            CHECK(v == 0.0);
    }
    {
        ad::Tape tape;
        const HeadNodes h{tape.input(random_tensor({dh, dm}, rng)), tape.input(random_tensor({dh, dm}, rng)),
                          tape.input(random_tensor({dh, dm}, rng)), tape.input(random_tensor({dh, dm}, rng)),
                          tape.input(wv)};
        const auto a = diff_attention(tape, tape.input(random_tensor({1, dm}, rng)), h, dh);
        CHECK(tape.value(a.output).shape() == Shape{1, 2 * dh});
        for (double v : tape.value(a.output).data())
            CHECK(v == 0.0);
    }
}

TEST_CASE("differential attention rows sum to zero")
{
    Rng rng(5);
    const std::size_t dm = 32, dh = 4;
    ad::Tape tape;
    HeadNodes h{};
    h.wq1 = tape.input(random_tensor({dh, dm}, rng));
    h.wq2 = tape.input(random_tensor({dh, dm}, rng));
    h.wk1 = tape.input(random_tensor({dh, dm}, rng));
    h.wk2 = tape.input(random_tensor({dh, dm}, rng));
    h.wv = tape.input(random_tensor({2 * dh, dm}, rng));
    const auto a = diff_attention(tape, tape.input(random_tensor({40, dm}, rng)), h, dh);
    const Tensor& map = tape.value(a.map);
    for (std::size_t i = 0; i < 40; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 40; ++j)
            s += map.at(i, j);
        CHECK(std::abs(s) < 1e-12);
    }
}

TEST_CASE("two-token differential attention matches a direct evaluation")
{
    Rng rng(6);
    const std::size_t dm = 6, dh = 3;
    const Tensor x = random_tensor({2, dm}, rng);
    const Tensor wq1 = random_tensor({dh, dm}, rng), wq2 = random_tensor({dh, dm}, rng);
    const Tensor wk1 = random_tensor({dh, dm}, rng), wk2 = random_tensor({dh, dm}, rng);
    const Tensor wv = random_tensor({2 * dh, dm}, rng);

    const auto s1 = softmax_scores(project(x, wq1), project(x, wk1), dh);
    const auto s2 = softmax_scores(project(x, wq2), project(x, wk2), dh);
    const auto v = project(x, wv);

    for (double lambda : {1.0, 0.8}) {
        ad::Tape tape;
        const HeadNodes h{tape.input(wq1), tape.input(wq2), tape.input(wk1), tape.input(wk2), tape.input(wv)};
        const NodeId lam = tape.input(Tensor::scalar(lambda));
        const auto a = diff_attention(tape, tape.input(x), h, dh, lambda == 1.0 ? nullptr : &lam);
        const Tensor& out = tape.value(a.output);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t c = 0; c < 2 * dh; ++c) {
                double expect = 0.0;
                for (std::size_t j = 0; j < 2; ++j)
                    expect += (s1[i][j] - lambda * s2[i][j]) * v[j][c];
                CHECK(std::abs(out.at(i, c) - expect) < 1e-12);
            }
    }
}

TEST_CASE("parameter shapes and order")
{
    const FrameConfig cfg;
    const ModelDims d = dims_for(cfg, 6, 128, 4);
    CHECK(d.d_head() == 16);
    CHECK(d.n_feat == 57);
    CHECK(d.out_dim == 84);
    const auto m = ReceiverModel::initialize(d, 1);
    const auto params = m.parameters();
    CHECK(params.size() == 4 + 4 * (5 * 4 + 11));
    CHECK(params.front().first == "input.w");
    CHECK(m.w0.shape() == Shape{128, 57});
    CHECK(m.b0.shape() == Shape{128});
    for (const auto& b : m.blocks) {
        REQUIRE(b.heads.size() == 4);
        for (const auto& h : b.heads) {
            CHECK(h.wq1.shape() == Shape{16, 128});
            CHECK(h.wk2.shape() == Shape{16, 128});
            CHECK(h.wv.shape() == Shape{32, 128});
        }
        CHECK(b.wo.shape() == Shape{128, 128});
        CHECK(b.ffn_w1.shape() == Shape{128, 128});
        CHECK(b.ffn_w2.shape() == Shape{128, 128});
        for (double g : b.ln1_gain.data())
            CHECK(g == 1.0);
        for (double v : b.bo.data())
            CHECK(v == 0.0);
    }
    CHECK(m.w_llr.shape() == Shape{84, 128});

    // Xavier-uniform bound.
    const double limit = std::sqrt(6.0 / (128.0 + 57.0));
    for (double v : m.w0.data())
        CHECK(std::abs(v) <= limit);

    ModelDims bad = d;
    bad.heads = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward output size and sanity bound")
{
    const FrameConfig cfg;
    const ModelDims d = dims_for(cfg, 6, 128, 4);
    const auto m = ReceiverModel::initialize(d, 2);
    const auto idx = llr_gather_indices(cfg, 6);
    CHECK(idx.size() == 9216);
    const auto tokens = tokenize(cfg, std::vector<cplx>(cfg.resource_elements()), ofdm::kronecker_pilot_mask(cfg), 0.0);
    const auto out = infer(m, tokens, idx, 6);
    CHECK(out.llrs.size() == 9216);
    CHECK(out.bits_per_symbol == 6);
    for (double l : out.llrs) {
        CHECK(std::isfinite(l));
        CHECK(std::abs(l) < 100.0);
    }
}

TEST_CASE("forward is permutation consistent before flattening")
{
    const FrameConfig cfg = small_frame();
    const ModelDims d = dims_for(cfg, 2, 32, 2);
    const auto m = ReceiverModel::initialize(d, 3);
    Rng rng(7);
    const Tensor tokens = random_tensor({16, d.n_feat}, rng);
    std::vector<std::size_t> perm(16);
    for (std::size_t i = 0; i < 16; ++i)
        perm[i] = (i * 5 + 3) % 16;
    Tensor permuted({16, d.n_feat});
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t f = 0; f < d.n_feat; ++f)
            permuted.at(i, f) = tokens.at(perm[i], f);

    const auto idx = llr_gather_indices(cfg, 2);
    ad::Tape ta, tb;
    const auto ga = build_forward(ta, m, tokens, idx);
    const auto gb = build_forward(tb, m, permuted, idx);
    const Tensor& ha = ta.value(ga.head_output);
    const Tensor& hb = tb.value(gb.head_output);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t c = 0; c < d.out_dim; ++c)
            CHECK(hb.at(i, c) == doctest::Approx(ha.at(perm[i], c)).epsilon(1e-12));
}

TEST_CASE("batched forward equals per-frame inference")
{
    const FrameConfig cfg = small_frame();
    const ModelDims d = dims_for(cfg, 2, 32, 2);
    const auto m = ReceiverModel::initialize(d, 4);
    Rng rng(8);
    std::vector<Tensor> frames;
    for (int i = 0; i < 3; ++i)
        frames.push_back(tokenize(cfg, random_grid(cfg, rng), ofdm::kronecker_pilot_mask(cfg), 0.1));
    const auto idx = llr_gather_indices(cfg, 2);
    const auto batch = make_batch(cfg, frames, std::vector<std::vector<std::uint8_t>>(3, std::vector<std::uint8_t>(idx.size())));
    CHECK(batch.frames() == 3);
    const auto serial = forward(m, batch, cfg, 2, kernels::Exec::serial);
    const auto parallel = forward(m, batch, cfg, 2, kernels::Exec::parallel);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(serial[i].llrs == infer(m, frames[i], idx, 2).llrs);
        CHECK(parallel[i].llrs == serial[i].llrs);
    }
}

TEST_CASE("full-model gradient check")
{
    const FrameConfig cfg = small_frame();
    const ModelDims d = dims_for(cfg, 6, 128, 4);
    auto m = ReceiverModel::initialize(d, 5);
    Rng rng(9);
    // Nudge biases and lambdas off their initial values so every path is live.
    for (auto& [name, t] : m.parameters())
        for (auto& v : t->data())
            v += 0.05 * std::normal_distribution<double>()(rng);
    const auto tokens = tokenize(cfg, random_grid(cfg, rng), ofdm::kronecker_pilot_mask(cfg), 0.3);
    const auto idx = llr_gather_indices(cfg, 6);
    std::vector<std::uint8_t> bits(idx.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
        bits[i] = (i * 7 + 3) % 5 < 2;
    const auto rep = train::model_grad_check(m, tokens, bits, idx, 10, 11);
    MESSAGE("max rel err " << rep.max_rel_error << " over " << rep.probes << " probes");
    CHECK(rep.probes == 10);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("binary cross-entropy")
{
    const std::vector<double> zero(10, 0.0);
    const std::vector<std::uint8_t> bits{0, 1, 0, 1, 1, 0, 0, 1, 1, 1};
    CHECK(loss_bce(zero, bits) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> big{800.0};
    const std::vector<std::uint8_t> b0{0};
    CHECK(loss_bce(big, b0) < 1e-300);
    const std::vector<std::uint8_t> b1{1};
    CHECK(loss_bce(big, b1) == doctest::Approx(800.0));

    Rng rng(10);
    std::normal_distribution<double> g(0.0, 4.0);
    std::vector<double> l(1000);
    std::vector<std::uint8_t> b(1000);
    double direct = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
        l[i] = g(rng);
        b[i] = i % 3 == 0;
        const double p1 = 1.0 / (1.0 + std::exp(l[i]));
        direct += -(b[i] ? std::log(p1) : std::log(1.0 - p1));
    }
    CHECK(std::abs(loss_bce(l, b) - direct / 1000.0) < 1e-12);
}

TEST_CASE("model file round trip and rejection")
{
    const FrameConfig cfg = small_frame();
    ModelDims d = dims_for(cfg, 2, 32, 2);
    d.learnable_lambda = true;
    const auto m = ReceiverModel::initialize(d, 6);
    const auto bytes = serialize_model(m);
    const auto back = deserialize_model(bytes);
    CHECK(back.dims == m.dims);
    CHECK(serialize_model(back) == bytes);
    const auto pa = m.parameters();
    const auto pb = back.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second->data()[0] == pb[i].second->data()[0]);
    }

    const auto path = std::filesystem::temp_directory_path() / "dtrx_test_model.bin";
    save_model(m, path);
    const auto loaded = load_model(path);
    save_model(loaded, path);
    std::ifstream in(path, std::ios::binary);
    const std::vector<std::uint8_t> disk((std::istreambuf_iterator<char>(in)), {});
    CHECK(disk == bytes);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_model(path), Error);

    for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(deserialize_model(t), ModelFormatError);
    }

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ModelFormatError);

    auto bad_version = bytes;
    bad_version[8] = 2;
    reseal(bad_version);
    CHECK_THROWS_AS(deserialize_model(bad_version), ModelFormatError);

    auto flipped = bytes;
    flipped[bytes.size() - 20] ^= 1;
    CHECK_THROWS_AS(deserialize_model(flipped), ModelFormatError);

    // First shape-table entry: u16 name length at 43, then name, rank, dims.
    auto bad_shape = bytes;
    const std::size_t len = bad_shape[43] | (bad_shape[44] << 8);
    const std::size_t dim0 = 45 + len + 1;
    bad_shape[dim0] += 1;
    reseal(bad_shape);
    CHECK_THROWS_AS(deserialize_model(bad_shape), ModelShapeError);

    auto bad_name = bytes;
    bad_name[45] = 'z';
    reseal(bad_name);
    CHECK_THROWS_AS(deserialize_model(bad_name), ModelShapeError);
}
