#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eiu/errors.hpp"
#include "eiu/rng.hpp"

namespace eiu {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);  // product; 1 for rank-0

namespace detail {
struct TensorImpl;
}

// Dense row-major double tensor. Values are immutable while a tape holding
// the tensor is alive; gradients accumulate in-place across backward calls
// until zero_grad. Rank-0 tensors (shape {}) hold a single scalar.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;

    const std::vector<double>& data() const;
    std::vector<double>& data();  // mutation is only legal between tapes

    double at(std::size_t flat) const;
    double operator()(std::size_t i, std::size_t j) const;
    double item() const;  // size-1 tensors

    bool requires_grad() const;
    Tensor& set_requires_grad(bool rg);

    bool has_grad() const;
    const std::vector<double>& grad() const;  // throws if no grad populated
    void zero_grad();

    Tensor clone() const;   // deep copy of values, no graph linkage, keeps requires_grad
    Tensor detach() const;  // shares nothing with the graph; requires_grad=false

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Reverse-mode tape. Constructing a Tape makes it the active tape for the
// current thread (stack discipline, restored on destruction). Operations
// record nodes only while a tape is active and some input requires grad.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse. Each call
    // contributes one full gradient; repeated calls accumulate additively.
    // Tensors on the tape that the loss does not reach get zero-filled grads.
    void backward(const Tensor& loss);

    std::size_t node_count() const;

    struct NodeInfo {
        std::string op;
        std::vector<std::int64_t> inputs;  // node ids of the inputs
    };
    NodeInfo info(std::size_t node) const;

    // internal: used by op implementations
    void record(const char* op, const std::vector<Tensor>& inputs, Tensor& out,
                std::function<void()> backward_fn);

private:
    struct Node;
    std::uint64_t id_;
    std::vector<Node> nodes_;
    Tape* prev_ = nullptr;
};

enum class Binary { add, sub, mul };
enum class Unary { sigmoid, tanh, relu, exp, log, neg, square, sqrt, recip };
enum class Reduction { sum, mean, max };

// Core differentiable operations. All of them record on the active tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor ew(Binary kind, const Tensor& a, const Tensor& b);  // equal shapes, or b scalar
Tensor ew(Unary kind, const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reduce(Reduction kind, const Tensor& a, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor transpose(const Tensor& a);  // 2-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor rowwise(Binary kind, const Tensor& m, const Tensor& v);  // v broadcast over rows, len = cols
Tensor colwise(Binary kind, const Tensor& m, const Tensor& v);  // v[i] applied to row i
Tensor im2row(const Tensor& x, std::size_t width);  // [L x d] -> [L-w+1 x w*d] sliding windows
Tensor powc(const Tensor& x, double p);             // x^p elementwise, x >= 0

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ew(Binary::add, a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ew(Binary::sub, a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ew(Binary::mul, a, b); }

// Central finite-difference audit of the tape gradient of a scalar-valued
// closure. Returns the worst relative error over every coordinate of every
// parameter, with denominator max(|analytic|, |numeric|, 1e-8).
//
// With refine=true, a coordinate whose error at the primary step exceeds
// 1e-5 is re-probed at smaller steps inside the legal range and keeps its
// best reading: cancellation noise and relu-kink crossings are step-size
// artifacts that move, a wrong gradient fails at every step.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps = 1e-4, bool refine = false);

}  // namespace eiu
