#pragma once

// Minimal reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records every primitive in creation order, which is already a
// topological order; backward() walks it once in reverse. Index-selecting
// primitives (gather) treat their indices as constants, so nearest-neighbour
// correspondences are recomputed by the caller on each forward pass and
// differentiated as fixed selections.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace skelmorph::ad {

// Row-major matrix; column vectors are (n x 1), scalars (1 x 1).
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(1, 1, v); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double item() const;

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const noexcept;

    Tensor transposed() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

class Tape;

// Handle to a node on a tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape& tape() const { return *tape_; }
    std::uint32_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);

    // Reverse sweep from a (1 x 1) output. Gradients of earlier sweeps are
    // discarded.
    void backward(Var output);

    const Tensor& value(Var v) const { return nodes_[v.id()].value; }
    const Tensor& grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

    // Hash of every branch taken so far (relu signs, clamp regions, gather
    // indices). Two forward passes with equal signatures evaluate the same
    // smooth piece of the function.
    std::uint64_t branch_signature() const noexcept { return signature_; }
    void record_branch(std::uint64_t token) noexcept;
    void record_branches(std::span<const std::uint32_t> tokens) noexcept;

    // Used by primitives. `backward` receives the output gradient and adds
    // into parent gradients through accumulate().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
    Var push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op);

    bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
    Tensor& grad_buffer(Var v);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
        const char* op = "leaf";
    };

    std::deque<Node> nodes_;
    std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

// --- primitives -----------------------------------------------------------
// Binary elementwise ops take b either with a's shape, as a column (rows x 1),
// a row (1 x cols) or a scalar (1 x 1), broadcast over a.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var abs(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var clamp(Var a, double lo, double hi);
Var column_softmax(Var a);
Var row_sum(Var a);   // (r x c) -> (r x 1)
Var col_sum(Var a);   // (r x c) -> (1 x c)
Var sum(Var a);       // -> (1 x 1)
Var mean(Var a);      // -> (1 x 1)
Var l2_norm(Var a, double eps = 0.0);  // row norms sqrt(sum a^2 + eps), (r x 1)
Var dot(Var a, Var b);                 // row-wise, (r x 1)
Var gather_rows(Var a, std::span<const std::uint32_t> rows);
Var gather(Var a, std::span<const std::uint32_t> flat_indices);  // (n x 1)
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

// --- gradient checking ----------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::vector<std::size_t> skipped;  // coordinates next to a kink
};

// Compares reverse-mode gradients of a scalar function with central finite
// differences. Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
// Coordinates whose +-eps perturbations land on different branches are
// skipped and reported.
GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps = 1e-5);

// --- optimizer --------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    // Descent step; params and grads pair up by position and keep their
    // shapes across calls.
    void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

    std::size_t steps() const noexcept { return t_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace skelmorph::ad
