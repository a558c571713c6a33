#pragma once

#include "dtrx/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dtrx::ldpc {

using Bits = std::vector<std::uint8_t>;

/// Sparse binary parity-check matrix with row and column adjacency.
class ParityCheckMatrix {
public:
    struct Edge {
        std::uint32_t row;
        std::uint32_t col;
    };

    ParityCheckMatrix() = default;
    /// Edges may come in any order; duplicates are rejected.
    ParityCheckMatrix(std::size_t rows, std::size_t cols, std::vector<Edge> edges);
    static ParityCheckMatrix from_dense(const std::vector<Bits>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Edges sorted by (row, col). Edge index e refers to this order.
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    /// Edge indices of check j, ascending by column.
    const std::vector<std::uint32_t>& row_edges(std::size_t j) const { return row_edges_.at(j); }
    /// Edge indices touching variable i (the check set of i), ascending by row.
    const std::vector<std::uint32_t>& col_edges(std::size_t i) const { return col_edges_.at(i); }

    std::size_t row_weight(std::size_t j) const { return row_edges_.at(j).size(); }
    std::size_t col_weight(std::size_t i) const { return col_edges_.at(i).size(); }

    /// H * c over GF(2).
    Bits syndrome(std::span<const std::uint8_t> c) const;
    bool is_codeword(std::span<const std::uint8_t> c) const;
    /// Number of length-4 cycles in the Tanner graph.
    std::size_t count_four_cycles() const;

    friend bool operator==(const ParityCheckMatrix& a, const ParityCheckMatrix& b)
    {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.edges_.size() != b.edges_.size())
            return false;
        for (std::size_t e = 0; e < a.edges_.size(); ++e)
            if (a.edges_[e].row != b.edges_[e].row || a.edges_[e].col != b.edges_[e].col)
                return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::uint32_t>> row_edges_;
    std::vector<std::vector<std::uint32_t>> col_edges_;
};

/// (col_weight, row_weight)-regular random construction. 4-cycles are
/// avoided where the greedy placement can manage it.
ParityCheckMatrix construct_regular(std::size_t n, std::size_t col_weight, std::size_t row_weight,
                                    std::uint64_t seed);

class LdpcCode {
public:
    /// Derives a systematic generator by Gaussian elimination over GF(2).
    /// Dependent rows of H are dropped, so k = n - rank(H).
    explicit LdpcCode(ParityCheckMatrix h);

    const ParityCheckMatrix& h() const noexcept { return h_; }
    std::size_t n() const noexcept { return h_.cols(); }
    std::size_t k() const noexcept { return info_positions_.size(); }
    std::size_t rank() const noexcept { return n() - k(); }
    double rate() const noexcept { return static_cast<double>(k()) / static_cast<double>(n()); }

    /// Codeword positions that carry the information bits, in order.
    const std::vector<std::uint32_t>& info_positions() const noexcept { return info_positions_; }
    /// Row r of G as n bits.
    Bits generator_row(std::size_t r) const;

    /// c = b G. Throws DimensionError unless |b| = k.
    Bits encode(std::span<const std::uint8_t> info) const;
    /// Reads the systematic positions of a codeword.
    Bits extract_info(std::span<const std::uint8_t> codeword) const;

private:
    ParityCheckMatrix h_;
    std::vector<std::uint32_t> info_positions_;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> g_; // k rows of `words_` packed words
};

/// Same as constructing LdpcCode from h.
LdpcCode derive_generator(ParityCheckMatrix h);

enum class CheckRule { sum_product, min_sum };

struct DecodeOptions {
    std::size_t max_iterations = 20;
    CheckRule rule = CheckRule::sum_product;
    /// Stop as soon as the hard decision satisfies every check.
    bool early_exit = true;
    kernels::Exec exec = kernels::Exec::serial;
};

struct DecodeResult {
    Bits bits;                   // hard decision on the full codeword
    std::size_t iterations = 0;  // 0 when the channel LLRs already decode to a codeword
    bool converged = false;      // zero syndrome
    std::vector<double> llrs;    // final posterior LLRs
};

/// Flooding sum-product (or min-sum) decoding. LLR > 0 favours bit 0; a
/// posterior of exactly 0 decides 0.
DecodeResult bp_decode(const LdpcCode& code, std::span<const double> llrs, const DecodeOptions& opts = {});

/// Hard decision of a single LLR.
inline std::uint8_t hard_decision(double llr) noexcept { return llr < 0.0 ? 1 : 0; }

} // namespace dtrx::ldpc
