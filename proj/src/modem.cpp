#include "dtrx/modem.hpp"

#include "dtrx/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace dtrx::modem {

namespace {

// Per-axis Gray amplitude from the axis bits (first bit = sign).
int axis_level(std::span<const int> axis_bits)
{
    int level = 1;
    for (std::size_t i = axis_bits.size(); i-- > 1;)
        level = (1 << (axis_bits.size() - i)) - (1 - 2 * axis_bits[i]) * level;
    return (1 - 2 * axis_bits[0]) * level;
}

void check_demap_args(cplx h, double noise_var)
{
    if (h == cplx{0.0, 0.0})
        throw Error("demap: channel coefficient must be nonzero");
    if (!(noise_var > 0.0))
        throw Error("demap: noise variance must be positive");
}

} // namespace

Constellation::Constellation(std::vector<cplx> points, std::size_t bits) : points_(std::move(points)), bits_(bits) {}

Constellation Constellation::qam(std::size_t order)
{
    if (order != 4 && order != 16 && order != 64)
        throw Error("unsupported QAM order " + std::to_string(order) + " (expected 4, 16 or 64)");
    const std::size_t q = static_cast<std::size_t>(std::countr_zero(order));
    const std::size_t half = q / 2;
    std::vector<cplx> pts(order);
    std::vector<int> ib(half), qb(half);
    for (std::size_t label = 0; label < order; ++label) {
        for (std::size_t a = 0; a < half; ++a) {
            ib[a] = static_cast<int>((label >> (q - 1 - 2 * a)) & 1u);
            qb[a] = static_cast<int>((label >> (q - 2 - 2 * a)) & 1u);
        }
        pts[label] = cplx(axis_level(ib), axis_level(qb));
    }
    // Mean energy of the integer grid is 2(M-1)/3.
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(order) - 1.0) / 3.0);
    for (auto& p : pts)
        p *= scale;
    return Constellation(std::move(pts), q);
}

Constellation Constellation::custom(std::vector<cplx> points)
{
    const std::size_t m = points.size();
    if (m < 2 || !std::has_single_bit(m))
        throw Error("custom constellation size must be a power of two >= 2");
    double e = 0.0;
    for (const auto& p : points)
        e += std::norm(p);
    e /= static_cast<double>(m);
    if (!(e > 0.0))
        throw Error("custom constellation has zero energy");
    const double scale = 1.0 / std::sqrt(e);
    for (auto& p : points)
        p *= scale;
    return Constellation(std::move(points), static_cast<std::size_t>(std::countr_zero(m)));
}

cplx map_bits(const Constellation& cons, std::span<const std::uint8_t> bits)
{
    if (bits.size() != cons.bits_per_symbol())
        throw DimensionError("map_bits: expected " + std::to_string(cons.bits_per_symbol()) + " bits, got " +
                             std::to_string(bits.size()));
    std::size_t label = 0;
    for (auto b : bits)
        label = (label << 1) | (b & 1u);
    return cons.points()[label];
}

std::vector<cplx> map_stream(const Constellation& cons, std::span<const std::uint8_t> bits)
{
    const std::size_t q = cons.bits_per_symbol();
    if (bits.size() % q != 0)
        throw DimensionError("map_stream: bit count " + std::to_string(bits.size()) + " not a multiple of " +
                             std::to_string(q));
    std::vector<cplx> out(bits.size() / q);
    for (std::size_t s = 0; s < out.size(); ++s)
        out[s] = map_bits(cons, bits.subspan(s * q, q));
    return out;
}

void demap_maxlog(const Constellation& cons, cplx y, cplx h, double noise_var, std::span<double> llrs)
{
    check_demap_args(h, noise_var);
    const std::size_t q = cons.bits_per_symbol();
    if (llrs.size() != q)
        throw DimensionError("demap_maxlog: output span must hold q llrs");
    constexpr double inf = std::numeric_limits<double>::infinity();
    double min0[8], min1[8];
    std::fill_n(min0, q, inf);
    std::fill_n(min1, q, inf);
    const auto& pts = cons.points();
    for (std::size_t l = 0; l < pts.size(); ++l) {
        const double d = std::norm(y - h * pts[l]);
        for (std::size_t b = 0; b < q; ++b) {
            double& slot = cons.label_bit(l, b) ? min1[b] : min0[b];
            slot = std::min(slot, d);
        }
    }
    for (std::size_t b = 0; b < q; ++b)
        llrs[b] = (min1[b] - min0[b]) / noise_var;
}

std::vector<double> demap_maxlog(const Constellation& cons, cplx y, cplx h, double noise_var)
{
    std::vector<double> out(cons.bits_per_symbol());
    demap_maxlog(cons, y, h, noise_var, out);
    return out;
}

std::vector<double> exact_app_demap(const Constellation& cons, cplx y, cplx h, double noise_var)
{
    check_demap_args(h, noise_var);
    const std::size_t q = cons.bits_per_symbol();
    const auto& pts = cons.points();
    std::vector<double> metric(pts.size());
    for (std::size_t l = 0; l < pts.size(); ++l)
        metric[l] = -std::norm(y - h * pts[l]) / noise_var;
    std::vector<double> out(q);
    for (std::size_t b = 0; b < q; ++b) {
        double m0 = -std::numeric_limits<double>::infinity(), m1 = m0;
        for (std::size_t l = 0; l < pts.size(); ++l) {
            double& m = cons.label_bit(l, b) ? m1 : m0;
            m = std::max(m, metric[l]);
        }
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t l = 0; l < pts.size(); ++l) {
            if (cons.label_bit(l, b))
                s1 += std::exp(metric[l] - m1);
            else
                s0 += std::exp(metric[l] - m0);
        }
        out[b] = (m0 + std::log(s0)) - (m1 + std::log(s1));
    }
    return out;
}

std::size_t nearest_point(const Constellation& cons, cplx y)
{
    const auto& pts = cons.points();
    std::size_t best = 0;
    double best_d = std::norm(y - pts[0]);
    for (std::size_t l = 1; l < pts.size(); ++l) {
        const double d = std::norm(y - pts[l]);
        if (d < best_d) {
            best_d = d;
            best = l;
        }
    }
    return best;
}

} // namespace dtrx::modem
