#include "dtrx/ldpc.hpp"

#include "dtrx/error.hpp"
#include "dtrx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dtrx::ldpc {

// ---------------------------------------------------------------------------
// ParityCheckMatrix

ParityCheckMatrix::ParityCheckMatrix(std::size_t rows, std::size_t cols, std::vector<Edge> edges)
    : rows_(rows), cols_(cols), edges_(std::move(edges)), row_edges_(rows), col_edges_(cols)
{
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto& ed = edges_[e];
        if (ed.row >= rows_ || ed.col >= cols_)
            throw DimensionError("parity-check edge (" + std::to_string(ed.row) + "," + std::to_string(ed.col) +
                                 ") outside " + std::to_string(rows_) + "x" + std::to_string(cols_));
        if (e > 0 && edges_[e - 1].row == ed.row && edges_[e - 1].col == ed.col)
            throw Error("duplicate parity-check edge");
        row_edges_[ed.row].push_back(static_cast<std::uint32_t>(e));
    }
    // Walking rows in order leaves every column list sorted by row.
    for (std::size_t e = 0; e < edges_.size(); ++e)
        col_edges_[edges_[e].col].push_back(static_cast<std::uint32_t>(e));
}

ParityCheckMatrix ParityCheckMatrix::from_dense(const std::vector<Bits>& rows)
{
    if (rows.empty())
        throw DimensionError("parity-check matrix needs at least one row");
    const std::size_t n = rows[0].size();
    std::vector<Edge> edges;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != n)
            throw DimensionError("ragged parity-check rows");
        for (std::size_t i = 0; i < n; ++i)
            if (rows[j][i])
                edges.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
    }
    return ParityCheckMatrix(rows.size(), n, std::move(edges));
}

Bits ParityCheckMatrix::syndrome(std::span<const std::uint8_t> c) const
{
    if (c.size() != cols_)
        throw DimensionError("syndrome: word length " + std::to_string(c.size()) + " != " + std::to_string(cols_));
    Bits s(rows_, 0);
    for (const auto& e : edges_)
        s[e.row] ^= (c[e.col] & 1u);
    return s;
}

bool ParityCheckMatrix::is_codeword(std::span<const std::uint8_t> c) const
{
    const Bits s = syndrome(c);
    return std::all_of(s.begin(), s.end(), [](std::uint8_t v) { return v == 0; });
}

std::size_t ParityCheckMatrix::count_four_cycles() const
{
    // Each pair of columns sharing t >= 2 rows contributes C(t, 2) cycles.
    std::size_t cycles = 0;
    std::vector<std::size_t> shared(cols_, 0);
    for (std::size_t i = 0; i < cols_; ++i) {
        std::fill(shared.begin(), shared.end(), 0);
        for (auto e : col_edges_[i])
            for (auto f : row_edges_[edges_[e].row])
                if (edges_[f].col > i)
                    ++shared[edges_[f].col];
        for (std::size_t c = i + 1; c < cols_; ++c)
            cycles += shared[c] * (shared[c] - (shared[c] > 0 ? 1 : 0)) / 2;
    }
    return cycles;
}

// ---------------------------------------------------------------------------
// construction

namespace {

// One greedy placement pass. Returns false when a column cannot find enough
// distinct rows with spare capacity.
bool place_edges(std::size_t n, std::size_t m, std::size_t col_weight, std::size_t row_weight, Rng& rng,
                 std::vector<ParityCheckMatrix::Edge>& edges)
{
    edges.clear();
    std::vector<std::size_t> capacity(m, row_weight);
    const std::size_t words = (m + 63) / 64;
    std::vector<std::uint64_t> share(m * words, 0); // rows already joined by a column
    auto shares = [&](std::size_t a, std::size_t b) { return (share[a * words + b / 64] >> (b % 64)) & 1u; };
    auto mark = [&](std::size_t a, std::size_t b) {
        share[a * words + b / 64] |= std::uint64_t{1} << (b % 64);
        share[b * words + a / 64] |= std::uint64_t{1} << (a % 64);
    };

    std::vector<std::size_t> chosen;
    std::vector<std::size_t> pool;
    for (std::size_t col = 0; col < n; ++col) {
        chosen.clear();
        const std::size_t cols_left = n - col;
        for (std::size_t slot = 0; slot < col_weight; ++slot) {
            auto is_free = [&](std::size_t r) {
                return capacity[r] > 0 && std::find(chosen.begin(), chosen.end(), r) == chosen.end();
            };
            std::size_t top = 0;
            for (std::size_t r = 0; r < m; ++r)
                if (is_free(r))
                    top = std::max(top, capacity[r]);
            if (top == 0)
                return false;
            // Near the end only the fullest rows are eligible so the
            // remaining capacity stays placeable.
            const std::size_t floor_cap = (cols_left > 2 * row_weight && top > 1) ? top - 1 : top;
            std::size_t picked = m;
            for (std::size_t tier = top; tier >= floor_cap && picked == m; --tier) {
                pool.clear();
                for (std::size_t r = 0; r < m; ++r) {
                    if (!is_free(r) || capacity[r] != tier)
                        continue;
                    bool cycle = false;
                    for (auto c : chosen)
                        cycle = cycle || shares(r, c);
                    if (!cycle)
                        pool.push_back(r);
                }
                if (!pool.empty())
                    picked = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
                if (tier == 0)
                    break;
            }
            if (picked == m) {
                pool.clear();
                for (std::size_t r = 0; r < m; ++r)
                    if (is_free(r) && capacity[r] == top)
                        pool.push_back(r);
                picked = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            }
            chosen.push_back(picked);
        }
        for (std::size_t a = 0; a < chosen.size(); ++a) {
            --capacity[chosen[a]];
            edges.push_back({static_cast<std::uint32_t>(chosen[a]), static_cast<std::uint32_t>(col)});
            for (std::size_t b = a + 1; b < chosen.size(); ++b)
                mark(chosen[a], chosen[b]);
        }
    }
    return true;
}

} // namespace

ParityCheckMatrix construct_regular(std::size_t n, std::size_t col_weight, std::size_t row_weight,
                                    std::uint64_t seed)
{
    if (col_weight < 2 || row_weight < 2)
        throw ConfigError("construct_regular: column and row weights must be at least 2");
    if (n == 0 || (n * col_weight) % row_weight != 0)
        throw ConfigError("construct_regular: n * col_weight must be divisible by row_weight");
    const std::size_t m = n * col_weight / row_weight;
    if (col_weight > m || row_weight > n)
        throw ConfigError("construct_regular: weights exceed matrix dimensions");

    std::vector<ParityCheckMatrix::Edge> edges;
    constexpr std::uint64_t max_attempts = 200;
    for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
        Rng rng(derive_seed(seed, {attempt}));
        if (place_edges(n, m, col_weight, row_weight, rng, edges))
            return ParityCheckMatrix(m, n, std::move(edges));
    }
    throw Error("construct_regular: no regular placement found after " + std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// generator

LdpcCode::LdpcCode(ParityCheckMatrix h) : h_(std::move(h))
{
    const std::size_t m = h_.rows();
    const std::size_t n = h_.cols();
    words_ = (n + 63) / 64;
    std::vector<std::uint64_t> rows(m * words_, 0);
    for (const auto& e : h_.edges())
        rows[e.row * words_ + e.col / 64] |= std::uint64_t{1} << (e.col % 64);
    auto bit = [&](std::size_t r, std::size_t c) { return (rows[r * words_ + c / 64] >> (c % 64)) & 1u; };

    // Reduced row echelon form, pivots taken from the rightmost columns so
    // parity bits land at the end of the codeword where possible.
    std::vector<std::pair<std::size_t, std::size_t>> pivots; // (row, col)
    std::vector<bool> is_pivot(n, false);
    std::size_t next = 0;
    for (std::size_t col = n; col-- > 0 && next < m;) {
        std::size_t p = next;
        while (p < m && !bit(p, col))
            ++p;
        if (p == m)
            continue;
        if (p != next)
            std::swap_ranges(rows.begin() + p * words_, rows.begin() + (p + 1) * words_, rows.begin() + next * words_);
        for (std::size_t r = 0; r < m; ++r)
            if (r != next && bit(r, col))
                for (std::size_t w = 0; w < words_; ++w)
                    rows[r * words_ + w] ^= rows[next * words_ + w];
        pivots.emplace_back(next, col);
        is_pivot[col] = true;
        ++next;
    }
    if (pivots.empty())
        throw Error("derive_generator: parity-check matrix has rank 0");

    for (std::size_t c = 0; c < n; ++c)
        if (!is_pivot[c])
            info_positions_.push_back(static_cast<std::uint32_t>(c));

    const std::size_t k = info_positions_.size();
    g_.assign(k * words_, 0);
    for (std::size_t t = 0; t < k; ++t) {
        const std::size_t j = info_positions_[t];
        std::uint64_t* g = g_.data() + t * words_;
        g[j / 64] |= std::uint64_t{1} << (j % 64);
        for (const auto& [r, pc] : pivots)
            if (bit(r, j))
                g[pc / 64] |= std::uint64_t{1} << (pc % 64);
    }
}

LdpcCode derive_generator(ParityCheckMatrix h)
{
    return LdpcCode(std::move(h));
}

Bits LdpcCode::generator_row(std::size_t r) const
{
    if (r >= k())
        throw DimensionError("generator row out of range");
    Bits out(n());
    for (std::size_t i = 0; i < n(); ++i)
        out[i] = static_cast<std::uint8_t>((g_[r * words_ + i / 64] >> (i % 64)) & 1u);
    return out;
}

Bits LdpcCode::encode(std::span<const std::uint8_t> info) const
{
    if (info.size() != k())
        throw DimensionError("encode: expected " + std::to_string(k()) + " info bits, got " +
                             std::to_string(info.size()));
    std::vector<std::uint64_t> acc(words_, 0);
    for (std::size_t t = 0; t < info.size(); ++t)
        if (info[t] & 1u)
            for (std::size_t w = 0; w < words_; ++w)
                acc[w] ^= g_[t * words_ + w];
    Bits c(n());
    for (std::size_t i = 0; i < n(); ++i)
        c[i] = static_cast<std::uint8_t>((acc[i / 64] >> (i % 64)) & 1u);
    return c;
}

Bits LdpcCode::extract_info(std::span<const std::uint8_t> codeword) const
{
    if (codeword.size() != n())
        throw DimensionError("extract_info: expected " + std::to_string(n()) + " bits");
    Bits out(k());
    for (std::size_t t = 0; t < k(); ++t)
        out[t] = codeword[info_positions_[t]];
    return out;
}

// ---------------------------------------------------------------------------
// belief propagation

namespace {

constexpr double tanh_clip = 1.0 - 1e-12;

void check_update_sum_product(const ParityCheckMatrix& h, std::size_t j, const std::vector<double>& v2c,
                              std::vector<double>& c2v)
{
    thread_local std::vector<double> t, fwd, bwd;
    const auto& row = h.row_edges(j);
    const std::size_t w = row.size();
    t.resize(w);
    fwd.resize(w + 1);
    bwd.resize(w + 1);
    for (std::size_t a = 0; a < w; ++a)
        t[a] = std::tanh(0.5 * v2c[row[a]]);
    fwd[0] = 1.0;
    for (std::size_t a = 0; a < w; ++a)
        fwd[a + 1] = fwd[a] * t[a];
    bwd[w] = 1.0;
    for (std::size_t a = w; a-- > 0;)
        bwd[a] = bwd[a + 1] * t[a];
    for (std::size_t a = 0; a < w; ++a) {
        const double p = std::clamp(fwd[a] * bwd[a + 1], -tanh_clip, tanh_clip);
        c2v[row[a]] = 2.0 * std::atanh(p);
    }
}

void check_update_min_sum(const ParityCheckMatrix& h, std::size_t j, const std::vector<double>& v2c,
                          std::vector<double>& c2v)
{
    const auto& row = h.row_edges(j);
    double min1 = std::numeric_limits<double>::infinity();
    double min2 = min1;
    std::size_t arg = 0;
    bool negative = false;
    for (std::size_t a = 0; a < row.size(); ++a) {
        const double v = v2c[row[a]];
        negative ^= (v < 0.0);
        const double mag = std::abs(v);
        if (mag < min1) {
            min2 = min1;
            min1 = mag;
            arg = a;
        } else if (mag < min2) {
            min2 = mag;
        }
    }
    for (std::size_t a = 0; a < row.size(); ++a) {
        const double v = v2c[row[a]];
        const bool neg = negative ^ (v < 0.0);
        const double mag = (a == arg) ? min2 : min1;
        c2v[row[a]] = neg ? -mag : mag;
    }
}

} // namespace

DecodeResult bp_decode(const LdpcCode& code, std::span<const double> llrs, const DecodeOptions& opts)
{
    const ParityCheckMatrix& h = code.h();
    const std::size_t n = h.cols();
    if (llrs.size() != n)
        throw DimensionError("bp_decode: expected " + std::to_string(n) + " llrs, got " + std::to_string(llrs.size()));

    DecodeResult res;
    res.llrs.assign(llrs.begin(), llrs.end());
    res.bits.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.bits[i] = hard_decision(llrs[i]);
    res.converged = h.is_codeword(res.bits);
    if (res.converged && opts.early_exit)
        return res;

    std::vector<double> v2c(h.edge_count());
    std::vector<double> c2v(h.edge_count(), 0.0);
    for (std::size_t e = 0; e < v2c.size(); ++e)
        v2c[e] = llrs[h.edges()[e].col];

    for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
        if (opts.rule == CheckRule::sum_product)
            kernels::for_each_index(h.rows(), opts.exec,
                                    [&](std::size_t j) { check_update_sum_product(h, j, v2c, c2v); });
        else
            kernels::for_each_index(h.rows(), opts.exec,
                                    [&](std::size_t j) { check_update_min_sum(h, j, v2c, c2v); });

        kernels::for_each_index(n, opts.exec, [&](std::size_t i) {
            double total = llrs[i];
            for (auto e : h.col_edges(i))
                total += c2v[e];
            res.llrs[i] = total;
            res.bits[i] = hard_decision(total);
            for (auto e : h.col_edges(i))
                v2c[e] = total - c2v[e];
        });

        res.iterations = it;
        res.converged = h.is_codeword(res.bits);
        if (res.converged && opts.early_exit)
            break;
    }
    return res;
}

} // namespace dtrx::ldpc
