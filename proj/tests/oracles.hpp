#pragma once

// Brute-force reference computations used by the tests. Nothing here calls
// into the library except to read code structure.

#include "dtrx/ldpc.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace oracle {

using Bits = std::vector<std::uint8_t>;

/// Every codeword of a small dense parity-check matrix, by enumeration.
inline std::vector<Bits> codewords(const std::vector<Bits>& h)
{
    const std::size_t n = h.at(0).size();
    std::vector<Bits> out;
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << n); ++v) {
        Bits c(n);
        for (std::size_t i = 0; i < n; ++i)
            c[i] = (v >> i) & 1U;
        bool ok = true;
        for (const auto& row : h) {
            unsigned s = 0;
            for (std::size_t i = 0; i < n; ++i)
                s ^= row[i] & c[i];
            ok = ok && s == 0;
        }
        if (ok)
            out.push_back(c);
    }
    return out;
}

/// Exact bitwise posterior LLRs given channel LLRs (log P(0)/P(1)).
inline std::vector<double> bitwise_map(const std::vector<Bits>& words, const std::vector<double>& llr)
{
    const std::size_t n = llr.size();
    std::vector<double> metric(words.size());
    double top = -1e300;
    for (std::size_t w = 0; w < words.size(); ++w) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            m += (words[w][i] ? -0.5 : 0.5) * llr[i];
        metric[w] = m;
        top = std::max(top, m);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double p0 = 0.0, p1 = 0.0;
        for (std::size_t w = 0; w < words.size(); ++w)
            (words[w][i] ? p1 : p0) += std::exp(metric[w] - top);
        out[i] = std::log(p0) - std::log(p1);
    }
    return out;
}

/// Maximum-likelihood codeword.
inline Bits ml_decode(const std::vector<Bits>& words, const std::vector<double>& llr)
{
    std::size_t best = 0;
    double best_m = -1e300;
    for (std::size_t w = 0; w < words.size(); ++w) {
        double m = 0.0;
        for (std::size_t i = 0; i < llr.size(); ++i)
            m += (words[w][i] ? -1.0 : 1.0) * llr[i];
        if (m > best_m) {
            best_m = m;
            best = w;
        }
    }
    return words[best];
}

inline std::vector<Bits> hamming74()
{
    return {{1, 1, 0, 1, 1, 0, 0}, {1, 0, 1, 1, 0, 1, 0}, {0, 1, 1, 1, 0, 0, 1}};
}

/// All seven nonzero words of the dual code as checks. Same code as
/// hamming74(), but a Tanner graph on which BP is much closer to ML.
inline std::vector<Bits> hamming74_redundant()
{
    const auto h = hamming74();
    std::vector<Bits> out;
    for (unsigned m = 1; m < 8; ++m) {
        Bits r(7, 0);
        for (std::size_t j = 0; j < 3; ++j)
            if ((m >> j) & 1U)
                for (std::size_t i = 0; i < 7; ++i)
                    r[i] ^= h[j][i];
        out.push_back(r);
    }
    return out;
}

/// Closed-form symbol error rate of square M-QAM with unit average energy
/// on AWGN at Es/N0 = snr (linear).
inline double square_qam_ser(std::size_t m, double snr)
{
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double arg = std::sqrt(3.0 * snr / (static_cast<double>(m) - 1.0));
    const double p = 2.0 * (1.0 - 1.0 / sqrt_m) * 0.5 * std::erfc(arg / std::sqrt(2.0));
    return 1.0 - (1.0 - p) * (1.0 - p);
}

/// Three binomial standard deviations of a rate p estimated from n trials.
inline double three_sigma(double p, double n)
{
    return 3.0 * std::sqrt(std::max(p * (1.0 - p), 1e-300) / n);
}

} // namespace oracle
