#include "dtrx/tensor.hpp"

#include "dtrx/error.hpp"
#include "dtrx/kernels.hpp"
#include "dtrx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dtrx::ad {

namespace {

std::string shape_str(const Shape& s)
{
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i)
            out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void require(bool ok, const char* op, const Shape& a, const Shape& b)
{
    if (!ok)
        throw DimensionError(std::string(op) + ": dimension mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_matrix(const Tensor& t, const char* op)
{
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

// Neumaier compensated sum. Loss reductions run over thousands of terms and
// finite-difference checks difference two of them.
struct CompensatedSum {
    double s = 0.0, c = 0.0;
    void add(double v)
    {
        const double t = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x)
{
    if (x >= 0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void add_into(Tensor& dst, const Tensor& src, double factor = 1.0)
{
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += factor * s[i];
}

} // namespace

std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape))
{
    if (shape_.empty() || shape_.size() > 3)
        throw DimensionError("tensor rank must be 1..3, got " + std::to_string(shape_.size()));
    for (auto d : shape_)
        if (d == 0)
            throw DimensionError("tensor dimensions must be positive: " + shape_str(shape_));
    values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : Tensor(std::move(shape))
{
    if (values.size() != values_.size())
        throw DimensionError("tensor " + shape_str(shape_) + " given " + std::to_string(values.size()) + " values");
    values_ = std::move(values);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
{
    return Tensor({rows, cols}, std::vector<double>(values));
}

bool Tensor::all_finite() const noexcept
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v)
{
    std::fill(values_.begin(), values_.end(), v);
}

const Tensor& GradientMap::operator[](NodeId id) const
{
    if (!has(id))
        throw Error("no gradient recorded for node " + std::to_string(id));
    return grads_[id];
}

// ---------------------------------------------------------------------------
// forward

NodeId Tape::push(Node n)
{
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const
{
    if (id >= nodes_.size())
        throw Error("unknown tape node " + std::to_string(id));
    return nodes_[id];
}

const Tensor& Tape::value(NodeId id) const
{
    return node(id).val();
}

NodeId Tape::input(Tensor value)
{
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::parameter(const Tensor& value)
{
    Node n;
    n.borrowed = &value;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_matrix(A, "matmul");
    require_matrix(B, "matmul");
    require(A.dim(1) == B.dim(0), "matmul", A.shape(), B.shape());
    const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
    Tensor C({n, m});
    kernels::gemm_nn(A.data(), B.data(), C.data(), n, k, m, false, kernels::auto_exec(n * k * m));
    Node node;
    node.op = Op::matmul;
    node.parents = {a, b};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::matmul_nt(NodeId a, NodeId b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_matrix(A, "matmul_nt");
    require_matrix(B, "matmul_nt");
    require(A.dim(1) == B.dim(1), "matmul_nt", A.shape(), B.shape());
    const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(0);
    Tensor C({n, m});
    kernels::gemm_nt(A.data(), B.data(), C.data(), n, k, m, false, kernels::auto_exec(n * k * m));
    Node node;
    node.op = Op::matmul_nt;
    node.parents = {a, b};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::add(NodeId a, NodeId b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.shape() == B.shape(), "add", A.shape(), B.shape());
    Tensor C = A;
    add_into(C, B);
    Node node;
    node.op = Op::add;
    node.parents = {a, b};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::sub(NodeId a, NodeId b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.shape() == B.shape(), "sub", A.shape(), B.shape());
    Tensor C = A;
    add_into(C, B, -1.0);
    Node node;
    node.op = Op::sub;
    node.parents = {a, b};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::mul(NodeId a, NodeId b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.shape() == B.shape(), "mul", A.shape(), B.shape());
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i)
        C[i] *= B[i];
    Node node;
    node.op = Op::mul;
    node.parents = {a, b};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::scale(NodeId a, double factor)
{
    Tensor C = value(a);
    for (auto& v : C.values())
        v *= factor;
    Node node;
    node.op = Op::scale;
    node.parents = {a};
    node.factor = factor;
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::scale_by(NodeId a, NodeId s)
{
    const Tensor& S = value(s);
    if (S.size() != 1)
        throw DimensionError("scale_by: factor must be a scalar, got " + shape_str(S.shape()));
    Tensor C = value(a);
    for (auto& v : C.values())
        v *= S[0];
    Node node;
    node.op = Op::scale_by;
    node.parents = {a, s};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::add_bias(NodeId a, NodeId bias)
{
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    require_matrix(A, "add_bias");
    require(B.rank() == 1 && B.dim(0) == A.dim(1), "add_bias", A.shape(), B.shape());
    Tensor C = A;
    const std::size_t m = A.dim(1);
    for (std::size_t i = 0; i < A.dim(0); ++i)
        for (std::size_t j = 0; j < m; ++j)
            C[i * m + j] += B[j];
    Node node;
    node.op = Op::add_bias;
    node.parents = {a, bias};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::relu(NodeId a)
{
    Tensor C = value(a);
    std::uint64_t h = relu_signature_;
    for (auto& v : C.values()) {
        const bool on = v > 0.0;
        if (!on)
            v = 0.0;
        h = (h ^ static_cast<std::uint64_t>(on)) * 0x100000001b3ULL;
    }
    relu_signature_ = h;
    Node node;
    node.op = Op::relu;
    node.parents = {a};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::sigmoid(NodeId a)
{
    Tensor C = value(a);
    for (auto& v : C.values())
        v = logistic(v);
    Node node;
    node.op = Op::sigmoid;
    node.parents = {a};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::softmax_rows(NodeId a)
{
    const Tensor& A = value(a);
    require_matrix(A, "softmax_rows");
    Tensor C = A;
    const std::size_t n = A.dim(0), m = A.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = C.data().data() + i * m;
        const double mx = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < m; ++j)
            row[j] /= z;
    }
    Node node;
    node.op = Op::softmax_rows;
    node.parents = {a};
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::layer_norm(NodeId a, NodeId gain, NodeId bias, double eps)
{
    if (!(eps > 0.0))
        throw Error("layer_norm: eps must be positive");
    const Tensor& A = value(a);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    require_matrix(A, "layer_norm");
    require(G.rank() == 1 && G.dim(0) == A.dim(1), "layer_norm gain", A.shape(), G.shape());
    require(B.rank() == 1 && B.dim(0) == A.dim(1), "layer_norm bias", A.shape(), B.shape());
    const std::size_t n = A.dim(0), m = A.dim(1);
    Tensor xhat({n, m});
    Tensor inv_std({n});
    Tensor C({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = A.data().data() + i * m;
        double mu = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            mu += x[j];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(m);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < m; ++j) {
            const double xh = (x[j] - mu) * is;
            xhat[i * m + j] = xh;
            C[i * m + j] = xh * G[j] + B[j];
        }
    }
    Node node;
    node.op = Op::layer_norm;
    node.parents = {a, gain, bias};
    node.value = std::move(C);
    node.saved = std::move(xhat);
    node.saved_aux = std::move(inv_std);
    return push(std::move(node));
}

NodeId Tape::concat_cols(std::span<const NodeId> parts)
{
    if (parts.empty())
        throw DimensionError("concat_cols: no inputs");
    const Tensor& first = value(parts[0]);
    require_matrix(first, "concat_cols");
    const std::size_t n = first.dim(0);
    std::size_t total = 0;
    for (auto p : parts) {
        const Tensor& t = value(p);
        require_matrix(t, "concat_cols");
        require(t.dim(0) == n, "concat_cols", first.shape(), t.shape());
        total += t.dim(1);
    }
    Tensor C({n, total});
    std::size_t offset = 0;
    for (auto p : parts) {
        const Tensor& t = value(p);
        const std::size_t w = t.dim(1);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(t.data().data() + i * w, w, C.data().data() + i * total + offset);
        offset += w;
    }
    Node node;
    node.op = Op::concat_cols;
    node.parents.assign(parts.begin(), parts.end());
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::gather(NodeId a, std::vector<std::size_t> flat_indices)
{
    const Tensor& A = value(a);
    if (flat_indices.empty())
        throw DimensionError("gather: empty index list");
    Tensor C({flat_indices.size()});
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
        if (flat_indices[i] >= A.size())
            throw DimensionError("gather: index " + std::to_string(flat_indices[i]) + " out of range for " +
                                 shape_str(A.shape()));
        C[i] = A[flat_indices[i]];
    }
    Node node;
    node.op = Op::gather;
    node.parents = {a};
    node.indices = std::move(flat_indices);
    node.value = std::move(C);
    return push(std::move(node));
}

NodeId Tape::sum(NodeId a)
{
    const Tensor& A = value(a);
    CompensatedSum s;
    for (double v : A.data())
        s.add(v);
    Node node;
    node.op = Op::sum;
    node.parents = {a};
    node.value = Tensor::scalar(s.value());
    return push(std::move(node));
}

NodeId Tape::mean(NodeId a)
{
    const Tensor& A = value(a);
    CompensatedSum s;
    for (double v : A.data())
        s.add(v);
    Node node;
    node.op = Op::mean;
    node.parents = {a};
    node.value = Tensor::scalar(s.value() / static_cast<double>(A.size()));
    return push(std::move(node));
}

NodeId Tape::bce_llr(NodeId llrs, std::span<const std::uint8_t> bits)
{
    const Tensor& L = value(llrs);
    if (L.size() != bits.size())
        throw DimensionError("bce_llr: " + std::to_string(L.size()) + " llrs vs " + std::to_string(bits.size()) +
                             " bits");
    CompensatedSum s;
    for (std::size_t i = 0; i < bits.size(); ++i)
        s.add(bits[i] ? softplus(L[i]) : softplus(-L[i]));
    Node node;
    node.op = Op::bce_llr;
    node.parents = {llrs};
    node.bits.assign(bits.begin(), bits.end());
    node.value = Tensor::scalar(s.value() / static_cast<double>(bits.size()));
    return push(std::move(node));
}

// ---------------------------------------------------------------------------
// backward

GradientMap Tape::backward(NodeId loss) const
{
    const Tensor& lv = value(loss);
    if (lv.rank() != 1 || lv.size() != 1)
        throw DimensionError("backward: loss must have shape [1], got " + shape_str(lv.shape()));

    std::vector<Tensor> g(nodes_.size());
    g[loss] = Tensor({1}, 1.0);

    auto grad_of = [&](NodeId id) -> Tensor& {
        if (g[id].empty())
            g[id] = Tensor(value(id).shape(), 0.0);
        return g[id];
    };

    for (std::size_t idx = loss + 1; idx-- > 0;) {
        if (g[idx].empty())
            continue;
        const Node& nd = nodes_[idx];
        const Tensor& dC = g[idx];
        switch (nd.op) {
        case Op::leaf:
            break;
        case Op::matmul: {
            const Tensor& A = value(nd.parents[0]);
            const Tensor& B = value(nd.parents[1]);
            const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
            const auto ex = kernels::auto_exec(n * k * m);
            kernels::gemm_nt(dC.data(), B.data(), grad_of(nd.parents[0]).data(), n, m, k, true, ex);
            kernels::gemm_tn(A.data(), dC.data(), grad_of(nd.parents[1]).data(), k, n, m, true, ex);
            break;
        }
        case Op::matmul_nt: {
            const Tensor& A = value(nd.parents[0]);
            const Tensor& B = value(nd.parents[1]);
            const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(0);
            const auto ex = kernels::auto_exec(n * k * m);
            kernels::gemm_nn(dC.data(), B.data(), grad_of(nd.parents[0]).data(), n, m, k, true, ex);
            kernels::gemm_tn(dC.data(), A.data(), grad_of(nd.parents[1]).data(), m, n, k, true, ex);
            break;
        }
        case Op::add:
            add_into(grad_of(nd.parents[0]), dC);
            add_into(grad_of(nd.parents[1]), dC);
            break;
        case Op::sub:
            add_into(grad_of(nd.parents[0]), dC);
            add_into(grad_of(nd.parents[1]), dC, -1.0);
            break;
        case Op::mul: {
            const Tensor& A = value(nd.parents[0]);
            const Tensor& B = value(nd.parents[1]);
            Tensor& gA = grad_of(nd.parents[0]);
            for (std::size_t i = 0; i < dC.size(); ++i)
                gA[i] += dC[i] * B[i];
            Tensor& gB = grad_of(nd.parents[1]);
            for (std::size_t i = 0; i < dC.size(); ++i)
                gB[i] += dC[i] * A[i];
            break;
        }
        case Op::scale:
            add_into(grad_of(nd.parents[0]), dC, nd.factor);
            break;
        case Op::scale_by: {
            const Tensor& A = value(nd.parents[0]);
            const double s = value(nd.parents[1])[0];
            add_into(grad_of(nd.parents[0]), dC, s);
            double ds = 0.0;
            for (std::size_t i = 0; i < dC.size(); ++i)
                ds += dC[i] * A[i];
            grad_of(nd.parents[1])[0] += ds;
            break;
        }
        case Op::add_bias: {
            add_into(grad_of(nd.parents[0]), dC);
            Tensor& gb = grad_of(nd.parents[1]);
            const std::size_t m = gb.size();
            const std::size_t n = dC.size() / m;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    gb[j] += dC[i * m + j];
            break;
        }
        case Op::relu: {
            const Tensor& y = nd.value;
            Tensor& gA = grad_of(nd.parents[0]);
            for (std::size_t i = 0; i < dC.size(); ++i)
                if (y[i] > 0.0)
                    gA[i] += dC[i];
            break;
        }
        case Op::sigmoid: {
            const Tensor& y = nd.value;
            Tensor& gA = grad_of(nd.parents[0]);
            for (std::size_t i = 0; i < dC.size(); ++i)
                gA[i] += dC[i] * y[i] * (1.0 - y[i]);
            break;
        }
        case Op::softmax_rows: {
            const Tensor& y = nd.value;
            Tensor& gA = grad_of(nd.parents[0]);
            const std::size_t n = y.dim(0), m = y.dim(1);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    dot += dC[i * m + j] * y[i * m + j];
                for (std::size_t j = 0; j < m; ++j)
                    gA[i * m + j] += y[i * m + j] * (dC[i * m + j] - dot);
            }
            break;
        }
        case Op::layer_norm: {
            const Tensor& xhat = nd.saved;
            const Tensor& inv_std = nd.saved_aux;
            const Tensor& G = value(nd.parents[1]);
            const std::size_t n = xhat.dim(0), m = xhat.dim(1);
            Tensor& gA = grad_of(nd.parents[0]);
            Tensor& gG = grad_of(nd.parents[1]);
            Tensor& gB = grad_of(nd.parents[2]);
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < n; ++i) {
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const double dy = dC[i * m + j];
                    const double dxh = dy * G[j];
                    gG[j] += dy * xhat[i * m + j];
                    gB[j] += dy;
                    s1 += dxh;
                    s2 += dxh * xhat[i * m + j];
                }
                for (std::size_t j = 0; j < m; ++j) {
                    const double dxh = dC[i * m + j] * G[j];
                    gA[i * m + j] += inv_std[i] * (dxh - inv_m * s1 - xhat[i * m + j] * inv_m * s2);
                }
            }
            break;
        }
        case Op::concat_cols: {
            const std::size_t n = dC.dim(0), total = dC.dim(1);
            std::size_t offset = 0;
            for (auto p : nd.parents) {
                Tensor& gp = grad_of(p);
                const std::size_t w = gp.dim(1);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        gp[i * w + j] += dC[i * total + offset + j];
                offset += w;
            }
            break;
        }
        case Op::gather: {
            Tensor& gA = grad_of(nd.parents[0]);
            for (std::size_t i = 0; i < nd.indices.size(); ++i)
                gA[nd.indices[i]] += dC[i];
            break;
        }
        case Op::sum: {
            Tensor& gA = grad_of(nd.parents[0]);
            for (auto& v : gA.values())
                v += dC[0];
            break;
        }
        case Op::mean: {
            Tensor& gA = grad_of(nd.parents[0]);
            const double d = dC[0] / static_cast<double>(gA.size());
            for (auto& v : gA.values())
                v += d;
            break;
        }
        case Op::bce_llr: {
            const Tensor& L = value(nd.parents[0]);
            Tensor& gL = grad_of(nd.parents[0]);
            const double w = dC[0] / static_cast<double>(nd.bits.size());
            for (std::size_t i = 0; i < nd.bits.size(); ++i)
                gL[i] += w * (nd.bits[i] ? logistic(L[i]) : -logistic(-L[i]));
            break;
        }
        }
    }
    return GradientMap(std::move(g));
}

// ---------------------------------------------------------------------------
// gradient check

namespace {

struct Evaluation {
    double loss;
    std::uint64_t signature;
};

Evaluation evaluate(const LossBuilder& f, const std::vector<Tensor>& inputs)
{
    Tape tape;
    std::vector<NodeId> ids;
    ids.reserve(inputs.size());
    for (const auto& t : inputs)
        ids.push_back(tape.parameter(t));
    const NodeId loss = f(tape, ids);
    return {tape.value(loss)[0], tape.activation_signature()};
}

std::vector<Tensor> analytic_gradients(const LossBuilder& f, const std::vector<Tensor>& inputs,
                                       std::uint64_t& signature)
{
    Tape tape;
    std::vector<NodeId> ids;
    for (const auto& t : inputs)
        ids.push_back(tape.parameter(t));
    const NodeId loss = f(tape, ids);
    signature = tape.activation_signature();
    const GradientMap grads = tape.backward(loss);
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        out.push_back(grads.has(ids[i]) ? grads[ids[i]] : Tensor(inputs[i].shape(), 0.0));
    return out;
}

// Returns false when the probe straddles a relu kink.
bool probe(const LossBuilder& f, std::vector<Tensor>& work, std::size_t t, std::size_t e, double step,
           double analytic, std::uint64_t base_sig, double& rel_err)
{
    const double orig = work[t][e];
    work[t][e] = orig + step;
    const Evaluation plus = evaluate(f, work);
    work[t][e] = orig - step;
    const Evaluation minus = evaluate(f, work);
    work[t][e] = orig;
    if (plus.signature != base_sig || minus.signature != base_sig)
        return false;
    const double numeric = (plus.loss - minus.loss) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    rel_err = std::abs(analytic - numeric) / denom;
    return true;
}

} // namespace

GradCheckReport grad_check(const LossBuilder& f, const std::vector<Tensor>& inputs, double step)
{
    if (!(step > 0.0))
        throw Error("grad_check: step must be positive");
    std::uint64_t sig = 0;
    const auto analytic = analytic_gradients(f, inputs, sig);
    std::vector<Tensor> work = inputs;
    GradCheckReport report;
    for (std::size_t t = 0; t < work.size(); ++t)
        for (std::size_t e = 0; e < work[t].size(); ++e) {
            double err = 0.0;
            if (!probe(f, work, t, e, step, analytic[t][e], sig, err)) {
                ++report.kink_skips;
                continue;
            }
            ++report.probes;
            report.max_rel_error = std::max(report.max_rel_error, err);
        }
    return report;
}

GradCheckReport grad_check_sampled(const LossBuilder& f, const std::vector<Tensor>& inputs, double step,
                                   std::size_t probes, std::uint64_t seed)
{
    if (!(step > 0.0))
        throw Error("grad_check: step must be positive");
    if (inputs.empty())
        throw Error("grad_check: no inputs");
    std::uint64_t sig = 0;
    const auto analytic = analytic_gradients(f, inputs, sig);
    std::vector<Tensor> work = inputs;
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick_tensor(0, inputs.size() - 1);
    GradCheckReport report;
    const std::size_t max_attempts = 20 * probes + 20;
    for (std::size_t attempt = 0; attempt < max_attempts && report.probes < probes; ++attempt) {
        const std::size_t t = pick_tensor(rng);
        std::uniform_int_distribution<std::size_t> pick_elem(0, inputs[t].size() - 1);
        const std::size_t e = pick_elem(rng);
        double err = 0.0;
        if (!probe(f, work, t, e, step, analytic[t][e], sig, err)) {
            ++report.kink_skips;
            continue;
        }
        ++report.probes;
        report.max_rel_error = std::max(report.max_rel_error, err);
    }
    return report;
}

} // namespace dtrx::ad
