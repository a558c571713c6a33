#include "dtrx/error.hpp"
#include "dtrx/link.hpp"
#include "dtrx/link_config.hpp"
#include "dtrx/rng.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

using namespace dtrx;
using namespace dtrx::link;

namespace {

const double inf = std::numeric_limits<double>::infinity();

LinkConfig toy()
{
    return load_config(std::string(DTRX_SOURCE_DIR) + "/configs/toy.cfg");
}

} // namespace

TEST_CASE("default frame capacity")
{
    const LinkConfig cfg;
    CHECK(cfg.bits_per_symbol() == 6);
    CHECK(cfg.frame_bits() == 9216);
    CHECK(cfg.codewords_per_frame() == 7);
    CHECK(cfg.filler_bits() == 144);
    CHECK(cfg.frame.num_subcarriers == 128);
    CHECK(cfg.frame.subcarrier_spacing_hz == 240e3);
    CHECK(cfg.frame.num_symbols == 14);
}

TEST_CASE("capacity identity holds for every valid config")
{
    for (std::size_t s : {16u, 64u, 128u})
        for (std::size_t order : {4u, 16u, 64u})
            for (std::size_t n : {96u, 192u, 648u, 1296u}) {
                LinkConfig cfg;
                cfg.frame.num_subcarriers = s;
                cfg.frame.fft_size = 128;
                cfg.modulation_order = order;
                cfg.ldpc_n = n;
                try {
                    cfg.validate();
                } catch (const ConfigError&) {
                    continue;
                }
                CHECK(cfg.codewords_per_frame() * n + cfg.filler_bits() == cfg.frame.data_count() * cfg.bits_per_symbol());
                CHECK(cfg.codewords_per_frame() >= 1);
            }
    LinkConfig bad;
    bad.ldpc_n = 100; // not a multiple of 6 bits per symbol
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = LinkConfig{};
    bad.frame.num_subcarriers = 4;
    bad.frame.pilot_symbols = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    CHECK_THROWS_AS(bad.validate(), ConfigError); // codeword does not fit
}

TEST_CASE("config text parsing")
{
    const auto cfg = parse_config("# comment\nsubcarriers = 64\nmodulation=16\npilot_symbols = 1, 9\n"
                                  "receiver = perfect-csi\nlearnable_lambda = true\n",
                                  "inline");
    CHECK(cfg.frame.num_subcarriers == 64);
    CHECK(cfg.modulation_order == 16);
    CHECK(cfg.frame.pilot_symbols == std::vector<std::size_t>{1, 9});
    CHECK(cfg.receiver == ReceiverType::perfect_csi);
    CHECK(cfg.learnable_lambda);
    CHECK_THROWS_WITH_AS(parse_config("subcarriers = 64\nbogus = 1\n", "f.cfg"), doctest::Contains("f.cfg:2"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config("seed = abc\n", "x"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n", "x"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/dtrx.cfg"), ConfigError);

    // describe() output parses back to the same configuration.
    const auto again = parse_config(cfg.describe(), "describe");
    CHECK(again.describe() == cfg.describe());
    CHECK(parse_receiver("baseline-ls") == ReceiverType::baseline_ls);
    CHECK(receiver_name(ReceiverType::neural) == std::string("neural"));
}

TEST_CASE("frame seeds are distinct per point and frame")
{
    std::set<std::uint64_t> seen;
    for (std::size_t s = 0; s < 20; ++s)
        for (std::size_t f = 0; f < 200; ++f)
            seen.insert(frame_seed(1, s, f));
    CHECK(seen.size() == 4000);
    CHECK(frame_seed(1, 0, 0) != frame_seed(2, 0, 0));
}

TEST_CASE("noiseless static channel decodes exactly")
{
    for (auto cfg : {toy(), LinkConfig{}}) {
        Link lk(cfg);
        lk.set_profile(channel::preset("awgn"));
        for (auto kind : {ReceiverType::baseline_ls, ReceiverType::perfect_csi})
            for (std::uint64_t s = 0; s < 3; ++s) {
                const auto r = lk.run_frame(inf, s, kind);
                CHECK(r.decoded_info == r.tx_info);
                CHECK(r.bit_errors == 0);
                CHECK(r.block_errors == 0);
                CHECK(r.codewords == cfg.codewords_per_frame());
            }
    }
}

TEST_CASE("frame trace and transmit layout")
{
    const LinkConfig cfg;
    Link lk(cfg);
    const auto r = lk.run_frame(20.0, 5, ReceiverType::perfect_csi);
    std::map<std::string, std::size_t> t(r.trace.begin(), r.trace.end());
    CHECK(t.at("info_bits") == lk.info_bits());
    CHECK(t.at("coded_bits") == 9216);
    CHECK(t.at("time_samples") == 14 * 144);
    CHECK(t.at("received_res") == 128 * 14);
    CHECK(t.at("llrs") == 9216);
    CHECK(t.at("decoded_bits") == lk.info_bits());

    const auto tx = lk.transmit(5);
    CHECK(tx.info.size() == 7 * lk.code().k());
    CHECK(tx.coded.size() == 9216);
    // Codewords are valid and carry the info bits systematically or not, but
    // each block satisfies the parity checks.
    for (std::size_t c = 0; c < 7; ++c) {
        std::vector<std::uint8_t> word(tx.coded.begin() + long(c * 1296), tx.coded.begin() + long((c + 1) * 1296));
        CHECK(lk.code().h().is_codeword(word));
    }
}

TEST_CASE("run_frame is deterministic")
{
    Link lk(toy());
    const auto a = lk.run_frame(4.0, 123, ReceiverType::baseline_ls);
    const auto b = lk.run_frame(4.0, 123, ReceiverType::baseline_ls);
    CHECK(a.decoded_info == b.decoded_info);
    CHECK(a.tx_info == b.tx_info);
    CHECK(a.bit_errors == b.bit_errors);
    const auto c = lk.run_frame(4.0, 124, ReceiverType::baseline_ls);
    CHECK(c.tx_info != a.tx_info);
}

TEST_CASE("stage errors carry the stage name")
{
    Link lk(toy());
    try {
        lk.run_frame(10.0, 1, ReceiverType::neural);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "receiver");
    }
    const std::vector<std::uint8_t> short_info(3);
    try {
        lk.run_frame(10.0, 1, ReceiverType::baseline_ls, short_info);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "transmit");
    }

    auto d = toy().model_dims();
    d.out_dim += 1;
    auto bad = std::make_shared<const nrx::ReceiverModel>(nrx::ReceiverModel::initialize(d, 1));
    CHECK_THROWS_AS(Link(toy(), bad), ModelShapeError);
}

TEST_CASE("snr ranges")
{
    CHECK(snr_range(0, 10, 2.5) == std::vector<double>{0, 2.5, 5, 7.5, 10});
    CHECK(snr_range(0, 1, 0.1).size() == 11);
    CHECK(snr_range(5, 4, 1).empty());
    CHECK_THROWS_AS(snr_range(0, 1, 0), ConfigError);
}

TEST_CASE("sweep stop rules")
{
    // Perfect CSI: LS has a Doppler error floor on the short toy frame.
    Link lk(toy());
    StopRule stop{10, 200, 100};
    const std::vector<double> snrs{-5.0, 40.0};
    const auto r = run_ber_sweep(lk, ReceiverType::perfect_csi, snrs, stop);
    REQUIRE(r.rows.size() == 2);
    const auto& low = r.rows[0];
    CHECK(low.snr_db == -5.0);
    CHECK(low.bit_errors >= 100);
    CHECK(low.frames >= 10);
    CHECK(low.frames < 200);
    CHECK(low.early_stop);
    // No errors to count: the point runs to max_frames and reports zero.
    const auto& high = r.rows[1];
    CHECK(high.frames == 200);
    CHECK(high.bit_errors == 0);
    CHECK(high.ber == 0.0);
    CHECK_FALSE(high.early_stop);
    for (const auto& row : r.rows) {
        CHECK(row.bits == row.frames * lk.info_bits());
        CHECK(row.ber == double(row.bit_errors) / double(row.bits));
        CHECK(row.bler == double(row.block_errors) / double(row.frames * lk.config().codewords_per_frame()));
        CHECK(row.receiver == "perfect-csi");
        CHECK(row.seed == lk.config().seed);
    }

    CHECK_THROWS_AS(run_ber_sweep(lk, ReceiverType::baseline_ls, {}, stop), ConfigError);
    CHECK_THROWS_AS(run_ber_sweep(lk, ReceiverType::baseline_ls, snrs, StopRule{5, 4, 1}), ConfigError);
}

TEST_CASE("sweeps reproduce and parallel equals serial")
{
    omp_set_num_threads(3);
    Link lk(toy());
    StopRule stop{20, 60, 50};
    const std::vector<double> snrs{2.0, 6.0};
    const auto a = run_ber_sweep(lk, ReceiverType::baseline_ls, snrs, stop, kernels::Exec::serial);
    const auto b = run_ber_sweep(lk, ReceiverType::baseline_ls, snrs, stop, kernels::Exec::serial);
    const auto c = run_ber_sweep(lk, ReceiverType::baseline_ls, snrs, stop, kernels::Exec::parallel);
    CHECK(a.rows == b.rows);
    CHECK(a.rows == c.rows);
}

TEST_CASE("perfect CSI lower-bounds LS within three sigma")
{
    Link lk(toy());
    StopRule stop{150, 150, 1};
    const std::vector<double> snrs{0.0, 5.0, 10.0};
    const auto ls = run_ber_sweep(lk, ReceiverType::baseline_ls, snrs, stop);
    const auto pc = run_ber_sweep(lk, ReceiverType::perfect_csi, snrs, stop);
    for (std::size_t i = 0; i < snrs.size(); ++i) {
        const double n = double(ls.rows[i].bits);
        MESSAGE(snrs[i] << " dB: perfect " << pc.rows[i].ber << " ls " << ls.rows[i].ber);
        CHECK(pc.rows[i].ber <= ls.rows[i].ber + oracle::three_sigma(ls.rows[i].ber, n));
    }
}

TEST_CASE("CSV header and lossless round trip")
{
    SweepResult r;
    r.rows.push_back({0.1, 3, 300, 7, 7.0 / 300.0, 1, 1.0 / 3.0, "baseline-ls", 42});
    r.rows.push_back({-2.5, 10, 1000, 0, 0.0, 0, 0.0, "neural", 18446744073709551615ULL});
    std::stringstream ss;
    write_csv(ss, r);
    std::string first;
    std::getline(ss, first);
    CHECK(first == "snr_db,frames,bits,bit_errors,ber,block_errors,bler,receiver,seed");
    ss.seekg(0);
    const auto back = parse_csv(ss);
    CHECK(back.rows == r.rows);

    std::istringstream bad("snr,frames\n");
    CHECK_THROWS_AS(parse_csv(bad), Error);
    std::istringstream short_row(std::string(csv_header) + "\n1,2,3\n");
    CHECK_THROWS_AS(parse_csv(short_row), Error);
}

TEST_CASE("payload transport")
{
    auto cfg = toy();
    cfg.receiver = ReceiverType::perfect_csi;
    Link lk(cfg);
    std::vector<std::uint8_t> payload(3000);
    Rng rng(1);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : payload)
        b = static_cast<std::uint8_t>(byte(rng));

    const auto clean = payload_roundtrip(lk, payload, 40.0, 9);
    CHECK(clean.bytes == payload);
    CHECK(clean.bit_errors == 0);
    CHECK(clean.bits % lk.code().k() == 0);
    CHECK(clean.bits <= clean.frames * lk.info_bits());
    CHECK(clean.bits > (clean.frames - 1) * lk.info_bits());
    CHECK(clean.bits >= (payload.size() + 12) * 8);

    CHECK_THROWS_AS(payload_roundtrip(lk, {}, 40.0, 9), Error);

    // Serial and parallel agree.
    omp_set_num_threads(3);
    const auto noisy = payload_roundtrip(lk, payload, 3.0, 9, kernels::Exec::serial);
    const auto noisy_par = payload_roundtrip(lk, payload, 3.0, 9, kernels::Exec::parallel);
    CHECK(noisy.bytes == noisy_par.bytes);
    CHECK(noisy.bit_errors == noisy_par.bit_errors);
}
