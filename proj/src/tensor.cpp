#include "eiu/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace eiu {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;    // empty until first accumulation
    std::uint64_t tape_id = 0;   // 0 = not attached to any tape
    std::int64_t node = -1;

    std::size_t size() const { return data.size(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

using detail::TensorImpl;

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{1};

void check_positive_dims(const Shape& s) {
    for (auto d : s) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    check_positive_dims(shape);
    if (shape_size(shape) != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    std::vector<double> d(n);
    for (auto& x : d) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::data() { return impl_->data; }

double Tensor::at(std::size_t flat) const {
    if (flat >= impl_->data.size()) throw ShapeError("flat index out of range");
    return impl_->data[flat];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ShapeError("2-D indexing on tensor of shape " + shape_str(shape()));
    return impl_->data[i * impl_->shape[1] + j];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool rg) {
    impl_->requires_grad = rg;
    if (!rg) impl_->grad.clear();
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad() called before any backward populated it");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::clone() const {
    return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

Tensor Tensor::detach() const {
    return Tensor(impl_->shape, impl_->data, false);
}

// ---------------------------------------------------------------------------
// Tape

struct Tape::Node {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;  // saved activations
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward_fn;  // reads output->grad, accumulates into inputs
};

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

std::size_t Tape::node_count() const { return nodes_.size(); }

Tape::NodeInfo Tape::info(std::size_t node) const {
    if (node >= nodes_.size()) throw ContractError("tape node index out of range");
    NodeInfo ni;
    ni.op = nodes_[node].op;
    for (const auto& in : nodes_[node].inputs) {
        ni.inputs.push_back(in->tape_id == id_ ? in->node : -1);
    }
    return ni;
}

void Tape::record(const char* op, const std::vector<Tensor>& inputs, Tensor& out,
                  std::function<void()> backward_fn) {
    // Register leaf nodes for grad-bearing inputs that the tape has not seen.
    for (const auto& in : inputs) {
        auto& impl = *in.impl();
        if (impl.requires_grad && impl.tape_id != id_) {
            impl.tape_id = id_;
            impl.node = static_cast<std::int64_t>(nodes_.size());
            nodes_.push_back(Node{"leaf", {}, in.impl(), nullptr});
        }
    }
    Node n;
    n.op = op;
    for (const auto& in : inputs) n.inputs.push_back(in.impl());
    n.output = out.impl();
    n.backward_fn = std::move(backward_fn);

    auto& oimpl = *out.impl();
    oimpl.requires_grad = true;
    oimpl.tape_id = id_;
    oimpl.node = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back(std::move(n));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    auto& limpl = *loss.impl();
    if (limpl.tape_id != id_ || limpl.node < 0) {
        throw ContractError("backward: loss is not on the current tape");
    }

    // Each backward call contributes exactly one gradient unit, so existing
    // grads are stashed, the sweep runs on clean buffers, and the stash is
    // added back at the end. Leaf and intermediate grads both accumulate
    // across calls this way.
    std::unordered_set<TensorImpl*> touched;
    for (auto& n : nodes_) {
        if (n.output && n.output->requires_grad) touched.insert(n.output.get());
        for (auto& in : n.inputs) {
            if (in->requires_grad) touched.insert(in.get());
        }
    }
    std::vector<std::pair<TensorImpl*, std::vector<double>>> stash;
    stash.reserve(touched.size());
    for (auto* t : touched) {
        if (!t->grad.empty()) {
            stash.emplace_back(t, std::move(t->grad));
            t->grad.clear();
        }
    }

    limpl.ensure_grad();
    limpl.grad[0] += 1.0;

    std::vector<char> needed(nodes_.size(), 0);
    needed[static_cast<std::size_t>(limpl.node)] = 1;
    for (std::size_t i = static_cast<std::size_t>(limpl.node) + 1; i-- > 0;) {
        if (!needed[i]) continue;
        auto& n = nodes_[i];
        if (n.backward_fn) n.backward_fn();
        for (auto& in : n.inputs) {
            if (in->requires_grad && in->tape_id == id_ && in->node >= 0) {
                needed[static_cast<std::size_t>(in->node)] = 1;
            }
        }
    }

    // Unreachable grad-bearing tensors on this tape get zero grads.
    for (auto* t : touched) t->ensure_grad();

    for (auto& [t, g] : stash) {
        for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
    }
}

// ---------------------------------------------------------------------------
// op plumbing

namespace {

// Records the node when a tape is active and any input carries grad;
// otherwise leaves the output as a plain value.
void maybe_record(const char* op, const std::vector<Tensor>& inputs, Tensor& out,
                  const std::function<void()>& backward_fn) {
    Tape* t = Tape::active();
    if (!t) return;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return;
    t->record(op, inputs, out, backward_fn);
}

void accumulate(TensorImpl& dst, const std::vector<double>& g) {
    dst.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

// raw matrix kernels, row-major
void mm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
        bool accumulate_out) {
    if (!accumulate_out) std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x n] += a[k x m]^T * b[k x n]
void mm_at(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x k] += a[m x n] * b[k x n]^T
void mm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* brow = b + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

struct AxisView {
    std::size_t outer, n, inner;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
    if (axis >= s.size()) {
        throw DomainError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    AxisView v{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n);
    mm(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    Tensor c(Shape{m, n}, std::move(out));

    auto ai = a.impl(), bi = b.impl(), ci = c.impl();
    maybe_record("matmul", {a, b}, c, [ai, bi, ci, m, k, n]() {
        const auto& g = ci->grad;
        if (ai->requires_grad) {
            ai->ensure_grad();
            mm_bt(g.data(), bi->data.data(), ai->grad.data(), m, n, k);
        }
        if (bi->requires_grad) {
            bi->ensure_grad();
            mm_at(ai->data.data(), g.data(), bi->grad.data(), m, k, n);
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// elementwise binary

Tensor ew(Binary kind, const Tensor& a, const Tensor& b) {
    const bool b_scalar = b.size() == 1 && b.shape() != a.shape();
    if (!b_scalar && a.shape() != b.shape()) {
        throw ShapeError("elementwise op: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t n = a.size();
    std::vector<double> out(n);
    const auto& ad = a.data();
    const auto& bd = b.data();
    switch (kind) {
        case Binary::add:
            for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] + bd[b_scalar ? 0 : i];
            break;
        case Binary::sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] - bd[b_scalar ? 0 : i];
            break;
        case Binary::mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] * bd[b_scalar ? 0 : i];
            break;
    }
    Tensor c(a.shape(), std::move(out));

    auto ai = a.impl(), bi = b.impl(), ci = c.impl();
    const char* name = kind == Binary::add ? "add" : kind == Binary::sub ? "sub" : "mul";
    maybe_record(name, {a, b}, c, [kind, ai, bi, ci, b_scalar, n]() {
        const auto& g = ci->grad;
        if (ai->requires_grad) {
            ai->ensure_grad();
            switch (kind) {
                case Binary::add:
                    for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
                    break;
                case Binary::sub:
                    for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
                    break;
                case Binary::mul:
                    for (std::size_t i = 0; i < n; ++i)
                        ai->grad[i] += g[i] * bi->data[b_scalar ? 0 : i];
                    break;
            }
        }
        if (bi->requires_grad) {
            bi->ensure_grad();
            switch (kind) {
                case Binary::add:
                    if (b_scalar) {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[0] += g[i];
                    } else {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[i] += g[i];
                    }
                    break;
                case Binary::sub:
                    if (b_scalar) {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[0] -= g[i];
                    } else {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[i] -= g[i];
                    }
                    break;
                case Binary::mul:
                    if (b_scalar) {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[0] += g[i] * ai->data[i];
                    } else {
                        for (std::size_t i = 0; i < n; ++i) bi->grad[i] += g[i] * ai->data[i];
                    }
                    break;
            }
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// elementwise unary

Tensor ew(Unary kind, const Tensor& a) {
    const std::size_t n = a.size();
    const auto& ad = a.data();
    std::vector<double> out(n);
    switch (kind) {
        case Unary::sigmoid:
            for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-ad[i]));
            break;
        case Unary::tanh:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(ad[i]);
            break;
        case Unary::relu:
            for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] > 0.0 ? ad[i] : 0.0;
            break;
        case Unary::exp:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(ad[i]);
            break;
        case Unary::log:
            for (std::size_t i = 0; i < n; ++i) {
                if (!(ad[i] > 0.0)) {
                    throw DomainError("log of non-positive entry at flat index " + std::to_string(i));
                }
                out[i] = std::log(ad[i]);
            }
            break;
        case Unary::neg:
            for (std::size_t i = 0; i < n; ++i) out[i] = -ad[i];
            break;
        case Unary::square:
            for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] * ad[i];
            break;
        case Unary::sqrt:
            for (std::size_t i = 0; i < n; ++i) {
                if (ad[i] < 0.0) {
                    throw DomainError("sqrt of negative entry at flat index " + std::to_string(i));
                }
                out[i] = std::sqrt(ad[i]);
            }
            break;
        case Unary::recip:
            for (std::size_t i = 0; i < n; ++i) {
                if (ad[i] == 0.0) {
                    throw DomainError("reciprocal of zero entry at flat index " + std::to_string(i));
                }
                out[i] = 1.0 / ad[i];
            }
            break;
    }
    Tensor c(a.shape(), std::move(out));

    static const char* names[] = {"sigmoid", "tanh", "relu", "exp", "log",
                                  "neg",     "square", "sqrt", "recip"};
    auto ai = a.impl(), ci = c.impl();
    maybe_record(names[static_cast<int>(kind)], {a}, c, [kind, ai, ci, n]() {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const auto& g = ci->grad;
        const auto& x = ai->data;
        const auto& y = ci->data;
        switch (kind) {
            case Unary::sigmoid:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            case Unary::tanh:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
            case Unary::relu:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += x[i] > 0.0 ? g[i] : 0.0;
                break;
            case Unary::exp:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * y[i];
                break;
            case Unary::log:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] / x[i];
                break;
            case Unary::neg:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] -= g[i];
                break;
            case Unary::square:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * 2.0 * x[i];
                break;
            case Unary::sqrt:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * 0.5 / y[i];
                break;
            case Unary::recip:
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] -= g[i] * y[i] * y[i];
                break;
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// concat / slice

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) {
        throw DomainError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                          shape_str(s0));
    }
    std::size_t total_axis = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size()) {
            throw ShapeError("concat: rank mismatch between " + shape_str(s0) + " and " +
                             shape_str(s));
        }
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (d != axis && s[d] != s0[d]) {
                throw ShapeError("concat: off-axis dimension mismatch between " + shape_str(s0) +
                                 " and " + shape_str(s));
            }
        }
        total_axis += s[axis];
    }
    Shape out_shape = s0;
    out_shape[axis] = total_axis;
    const AxisView v = axis_view(out_shape, axis);
    std::vector<double> out(shape_size(out_shape));

    std::size_t offset = 0;  // along the axis
    for (const auto& p : parts) {
        const std::size_t pn = p.shape()[axis];
        const auto& pd = p.data();
        for (std::size_t o = 0; o < v.outer; ++o) {
            const double* src = pd.data() + o * pn * v.inner;
            double* dst = out.data() + (o * v.n + offset) * v.inner;
            std::copy(src, src + pn * v.inner, dst);
        }
        offset += pn;
    }
    Tensor c(std::move(out_shape), std::move(out));

    std::vector<std::shared_ptr<TensorImpl>> pimpls;
    for (const auto& p : parts) pimpls.push_back(p.impl());
    auto ci = c.impl();
    maybe_record("concat", parts, c, [pimpls, ci, v]() {
        const auto& g = ci->grad;
        std::size_t offset = 0;
        for (auto& pi : pimpls) {
            const std::size_t part_axis = pi->size() / (v.outer * v.inner);
            if (pi->requires_grad) {
                pi->ensure_grad();
                for (std::size_t o = 0; o < v.outer; ++o) {
                    const double* src = g.data() + (o * v.n + offset) * v.inner;
                    double* dst = pi->grad.data() + o * part_axis * v.inner;
                    for (std::size_t i = 0; i < part_axis * v.inner; ++i) dst[i] += src[i];
                }
            }
            offset += part_axis;
        }
    });
    return c;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
    const AxisView v = axis_view(a.shape(), axis);
    if (len == 0 || start + len > v.n) {
        throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for axis length " +
                         std::to_string(v.n));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    std::vector<double> out(shape_size(out_shape));
    const auto& ad = a.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = ad.data() + (o * v.n + start) * v.inner;
        double* dst = out.data() + o * len * v.inner;
        std::copy(src, src + len * v.inner, dst);
    }
    Tensor c(std::move(out_shape), std::move(out));

    auto ai = a.impl(), ci = c.impl();
    maybe_record("slice", {a}, c, [ai, ci, v, start, len]() {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const auto& g = ci->grad;
        for (std::size_t o = 0; o < v.outer; ++o) {
            const double* src = g.data() + o * len * v.inner;
            double* dst = ai->grad.data() + (o * v.n + start) * v.inner;
            for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// reduce

Tensor reduce(Reduction kind, const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis);
    Shape out_shape;
    for (std::size_t d = 0; d < a.rank(); ++d) {
        if (d != axis) out_shape.push_back(a.shape()[d]);
    }
    const std::size_t out_n = v.outer * v.inner;
    std::vector<double> out(out_n, 0.0);
    std::vector<std::size_t> argmax;
    const auto& ad = a.data();

    if (kind == Reduction::max) argmax.assign(out_n, 0);
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t oi = o * v.inner + in;
            if (kind == Reduction::max) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_j = 0;
                for (std::size_t j = 0; j < v.n; ++j) {
                    const double x = ad[(o * v.n + j) * v.inner + in];
                    if (x > best) {  // ties keep the lowest index
                        best = x;
                        best_j = j;
                    }
                }
                out[oi] = best;
                argmax[oi] = best_j;
            } else {
                double acc = 0.0;
                for (std::size_t j = 0; j < v.n; ++j) acc += ad[(o * v.n + j) * v.inner + in];
                out[oi] = kind == Reduction::mean ? acc / static_cast<double>(v.n) : acc;
            }
        }
    }
    Tensor c(std::move(out_shape), std::move(out));

    auto ai = a.impl(), ci = c.impl();
    const char* name = kind == Reduction::sum ? "sum" : kind == Reduction::mean ? "mean" : "max";
    maybe_record(name, {a}, c, [kind, ai, ci, v, argmax = std::move(argmax)]() {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const auto& g = ci->grad;
        for (std::size_t o = 0; o < v.outer; ++o) {
            for (std::size_t in = 0; in < v.inner; ++in) {
                const std::size_t oi = o * v.inner + in;
                if (kind == Reduction::max) {
                    ai->grad[(o * v.n + argmax[oi]) * v.inner + in] += g[oi];
                } else {
                    const double gv =
                        kind == Reduction::mean ? g[oi] / static_cast<double>(v.n) : g[oi];
                    for (std::size_t j = 0; j < v.n; ++j) {
                        ai->grad[(o * v.n + j) * v.inner + in] += gv;
                    }
                }
            }
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// softmax

Tensor softmax(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        if (std::isnan(ad[i])) {
            throw NumericError("softmax: NaN input at flat index " + std::to_string(i));
        }
    }
    std::vector<double> out(ad.size());
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < v.n; ++j) {
                mx = std::max(mx, ad[(o * v.n + j) * v.inner + in]);
            }
            double s = 0.0;
            for (std::size_t j = 0; j < v.n; ++j) {
                const std::size_t idx = (o * v.n + j) * v.inner + in;
                out[idx] = std::exp(ad[idx] - mx);
                s += out[idx];
            }
            for (std::size_t j = 0; j < v.n; ++j) out[(o * v.n + j) * v.inner + in] /= s;
        }
    }
    Tensor c(a.shape(), std::move(out));

    auto ai = a.impl(), ci = c.impl();
    maybe_record("softmax", {a}, c, [ai, ci, v]() {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const auto& g = ci->grad;
        const auto& y = ci->data;
        for (std::size_t o = 0; o < v.outer; ++o) {
            for (std::size_t in = 0; in < v.inner; ++in) {
                double dot = 0.0;
                for (std::size_t j = 0; j < v.n; ++j) {
                    const std::size_t idx = (o * v.n + j) * v.inner + in;
                    dot += g[idx] * y[idx];
                }
                for (std::size_t j = 0; j < v.n; ++j) {
                    const std::size_t idx = (o * v.n + j) * v.inner + in;
                    ai->grad[idx] += y[idx] * (g[idx] - dot);
                }
            }
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// transpose / reshape

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(a.shape()));
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(m * n);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
    }
    Tensor c(Shape{n, m}, std::move(out));

    auto ai = a.impl(), ci = c.impl();
    maybe_record("transpose", {a}, c, [ai, ci, m, n]() {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const auto& g = ci->grad;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) ai->grad[i * n + j] += g[j * m + i];
        }
    });
    return c;
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_positive_dims(shape);
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape: size mismatch between " + shape_str(a.shape()) + " and " +
                         shape_str(shape));
    }
    Tensor c(std::move(shape), a.data());

    auto ai = a.impl(), ci = c.impl();
    maybe_record("reshape", {a}, c, [ai, ci]() {
        if (!ai->requires_grad) return;
        accumulate(*ai, ci->grad);
    });
    return c;
}

// ---------------------------------------------------------------------------
// rowwise / colwise broadcasts

Tensor rowwise(Binary kind, const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || v.shape()[0] != m.shape()[1]) {
        throw ShapeError("rowwise: expected [r x c] and [c], got " + shape_str(m.shape()) +
                         " and " + shape_str(v.shape()));
    }
    const std::size_t r = m.shape()[0], c = m.shape()[1];
    std::vector<double> out(r * c);
    const auto& md = m.data();
    const auto& vd = v.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double a = md[i * c + j], b = vd[j];
            out[i * c + j] = kind == Binary::add ? a + b : kind == Binary::sub ? a - b : a * b;
        }
    }
    Tensor o(m.shape(), std::move(out));

    auto mi = m.impl(), vi = v.impl(), oi = o.impl();
    const char* name = kind == Binary::add   ? "rowwise_add"
                       : kind == Binary::sub ? "rowwise_sub"
                                             : "rowwise_mul";
    maybe_record(name, {m, v}, o, [kind, mi, vi, oi, r, c]() {
        const auto& g = oi->grad;
        if (mi->requires_grad) {
            mi->ensure_grad();
            for (std::size_t i = 0; i < r * c; ++i) {
                mi->grad[i] += kind == Binary::mul ? g[i] * vi->data[i % c] : g[i];
            }
        }
        if (vi->requires_grad) {
            vi->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double gv = g[i * c + j];
                    switch (kind) {
                        case Binary::add: vi->grad[j] += gv; break;
                        case Binary::sub: vi->grad[j] -= gv; break;
                        case Binary::mul: vi->grad[j] += gv * mi->data[i * c + j]; break;
                    }
                }
            }
        }
    });
    return o;
}

Tensor colwise(Binary kind, const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || v.shape()[0] != m.shape()[0]) {
        throw ShapeError("colwise: expected [r x c] and [r], got " + shape_str(m.shape()) +
                         " and " + shape_str(v.shape()));
    }
    const std::size_t r = m.shape()[0], c = m.shape()[1];
    std::vector<double> out(r * c);
    const auto& md = m.data();
    const auto& vd = v.data();
    for (std::size_t i = 0; i < r; ++i) {
        const double b = vd[i];
        for (std::size_t j = 0; j < c; ++j) {
            const double a = md[i * c + j];
            out[i * c + j] = kind == Binary::add ? a + b : kind == Binary::sub ? a - b : a * b;
        }
    }
    Tensor o(m.shape(), std::move(out));

    auto mi = m.impl(), vi = v.impl(), oi = o.impl();
    const char* name = kind == Binary::add   ? "colwise_add"
                       : kind == Binary::sub ? "colwise_sub"
                                             : "colwise_mul";
    maybe_record(name, {m, v}, o, [kind, mi, vi, oi, r, c]() {
        const auto& g = oi->grad;
        if (mi->requires_grad) {
            mi->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    mi->grad[i * c + j] +=
                        kind == Binary::mul ? g[i * c + j] * vi->data[i] : g[i * c + j];
                }
            }
        }
        if (vi->requires_grad) {
            vi->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double gv = g[i * c + j];
                    switch (kind) {
                        case Binary::add: vi->grad[i] += gv; break;
                        case Binary::sub: vi->grad[i] -= gv; break;
                        case Binary::mul: vi->grad[i] += gv * mi->data[i * c + j]; break;
                    }
                }
            }
        }
    });
    return o;
}

// ---------------------------------------------------------------------------
// im2row

Tensor im2row(const Tensor& x, std::size_t width) {
    if (x.rank() != 2) throw ShapeError("im2row: expected 2-D, got " + shape_str(x.shape()));
    const std::size_t L = x.shape()[0], d = x.shape()[1];
    if (width == 0 || width > L) {
        throw ShapeError("im2row: window width " + std::to_string(width) +
                         " invalid for length " + std::to_string(L));
    }
    const std::size_t rows = L - width + 1;
    std::vector<double> out(rows * width * d);
    const auto& xd = x.data();
    for (std::size_t p = 0; p < rows; ++p) {
        std::copy(xd.data() + p * d, xd.data() + (p + width) * d, out.data() + p * width * d);
    }
    Tensor c(Shape{rows, width * d}, std::move(out));

    auto xi = x.impl(), ci = c.impl();
    maybe_record("im2row", {x}, c, [xi, ci, rows, width, d]() {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        const auto& g = ci->grad;
        for (std::size_t p = 0; p < rows; ++p) {
            for (std::size_t i = 0; i < width * d; ++i) {
                xi->grad[p * d + i] += g[p * width * d + i];
            }
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// powc

Tensor powc(const Tensor& x, double p) {
    const std::size_t n = x.size();
    const auto& xd = x.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (xd[i] < 0.0) {
            throw DomainError("powc of negative entry at flat index " + std::to_string(i));
        }
        out[i] = std::pow(xd[i], p);
    }
    Tensor c(x.shape(), std::move(out));

    auto xi = x.impl(), ci = c.impl();
    maybe_record("powc", {x}, c, [xi, ci, p, n]() {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        const auto& g = ci->grad;
        for (std::size_t i = 0; i < n; ++i) {
            const double x0 = xi->data[i];
            double d;
            if (x0 == 0.0) {
                d = p == 1.0 ? 1.0 : 0.0;  // subgradient pick at the boundary
            } else {
                d = p * std::pow(x0, p - 1.0);
            }
            xi->grad[i] += g[i] * d;
        }
    });
    return c;
}

// ---------------------------------------------------------------------------
// grad_check

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps, bool refine) {
    if (eps < 1e-6 || eps > 1e-3) {
        throw ContractError("grad_check: eps must lie in [1e-6, 1e-3]");
    }
    for (auto& [name, t] : params) {
        if (!t.requires_grad()) {
            throw ContractError("grad_check: parameter '" + name + "' does not require grad");
        }
        const_cast<Tensor&>(t).zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = f();
        if (loss.size() != 1) throw ContractError("grad_check: function must be scalar-valued");
        tape.backward(loss);
        for (auto& [name, t] : params) {
            analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.size(), 0.0));
        }
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor t = params[pi].second;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double a = analytic[pi][i];
            auto rel_at = [&](double step) {
                const double saved = t.data()[i];
                t.data()[i] = saved + step;
                const double fp = f().item();
                t.data()[i] = saved - step;
                const double fm = f().item();
                t.data()[i] = saved;
                const double numeric = (fp - fm) / (2.0 * step);
                const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
                return std::fabs(a - numeric) / denom;
            };
            double rel = rel_at(eps);
            if (refine && rel > 1e-5) {
                for (double step : {eps / 4.0, eps / 16.0}) {
                    if (step < 1e-6) break;
                    rel = std::min(rel, rel_at(step));
                    if (rel <= 1e-5) break;
                }
            }
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = params[pi].first;
                result.worst_index = i;
            }
        }
    }
    for (auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
    return result;
}

}  // namespace eiu
