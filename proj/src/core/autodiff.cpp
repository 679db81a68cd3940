#include "skelmorph/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "skelmorph/error.hpp"
#include "skelmorph/kernels.hpp"

namespace skelmorph::ad {

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols)
        fail(ErrorCode::shape, "tensor value count " + std::to_string(data_.size()) + " does not match " +
                                   std::to_string(rows) + "x" + std::to_string(cols));
}

double Tensor::item() const {
    if (data_.size() != 1) fail(ErrorCode::shape, "item() on a tensor with " + std::to_string(data_.size()) + " values");
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::transposed() const {
    Tensor t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) fail(ErrorCode::numeric, "non-finite constant");
    nodes_.push_back(Node{std::move(value), {}, false, {}, "constant"});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
    if (!value.all_finite()) fail(ErrorCode::numeric, "non-finite variable");
    nodes_.push_back(Node{std::move(value), {}, true, {}, "variable"});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op) {
    if (!value.all_finite()) fail(ErrorCode::numeric, std::string("non-finite result in ") + op);
    bool needs = false;
    for (const Var& p : parents) {
        if (&p.tape() != this) fail(ErrorCode::parameter, std::string(op) + ": operands belong to different tapes");
        needs = needs || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}, op});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::grad(Var v) const {
    return nodes_[v.id()].grad;
}

Tensor& Tape::grad_buffer(Var v) {
    Node& n = nodes_[v.id()];
    if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var output) {
    if (output.value().size() != 1) fail(ErrorCode::shape, "backward() needs a scalar output");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(output)[0] = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
        n.backward(*this, n.grad);
    }
}

void Tape::record_branch(std::uint64_t token) noexcept {
    signature_ ^= token + 0x9E3779B97F4A7C15ULL + (signature_ << 6) + (signature_ >> 2);
}

void Tape::record_branches(std::span<const std::uint32_t> tokens) noexcept {
    for (auto t : tokens) record_branch(t);
}

// ---------------------------------------------------------------------------
// primitives

namespace {

enum class Bcast { same, column, row, scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return Bcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
    if (b.rows() == a.rows() && b.cols() == 1) return Bcast::column;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    fail(ErrorCode::shape, std::string(op) + ": cannot broadcast " + std::to_string(b.rows()) + "x" +
                               std::to_string(b.cols()) + " over " + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()));
}

inline std::size_t b_index(Bcast k, std::size_t r, std::size_t c, std::size_t cols) {
    switch (k) {
        case Bcast::same: return r * cols + c;
        case Bcast::column: return r;
        case Bcast::row: return c;
        case Bcast::scalar: return 0;
    }
    return 0;
}

// Elementwise binary op with broadcasting. fwd(a, b) -> out;
// da(a, b, out) and db(a, b, out) are the local partials.
template <class Fwd, class Da, class Db>
Var binary(Var a, Var b, const char* op, Fwd fwd, Da da, Db db) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Bcast k = broadcast_kind(av, bv, op);
    Tensor out(av.rows(), av.cols());
    const std::size_t cols = av.cols();
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = fwd(av(r, c), bv[b_index(k, r, c, cols)]);
    Tape& tape = a.tape();
    return tape.push(std::move(out), {a, b},
                     [a, b, k, da, db](Tape& t, const Tensor& g) {
                         const Tensor& av = t.value(a);
                         const Tensor& bv = t.value(b);
                         const std::size_t cols = av.cols();
                         const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
                         Tensor* gA = ga ? &t.grad_buffer(a) : nullptr;
                         Tensor* gB = gb ? &t.grad_buffer(b) : nullptr;
                         for (std::size_t r = 0; r < av.rows(); ++r)
                             for (std::size_t c = 0; c < cols; ++c) {
                                 const std::size_t bi = b_index(k, r, c, cols);
                                 const double x = av(r, c), y = bv[bi], gv = g(r, c);
                                 if (gA) (*gA)(r, c) += gv * da(x, y);
                                 if (gB) (*gB)[bi] += gv * db(x, y);
                             }
                     },
                     op);
}

template <class Fwd, class Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv) {
    const Tensor& av = a.value();
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    return a.tape().push(std::move(out), {a},
                         [a, deriv](Tape& t, const Tensor& g) {
                             const Tensor& av = t.value(a);
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[i] * deriv(av[i]);
                         },
                         op);
}

void gemm(const Tensor& a, const Tensor& b, Tensor& c) {
    kernels::active().gemm_acc(a.values().data(), b.values().data(), c.values().data(), a.rows(), a.cols(), b.cols());
}

}  // namespace

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows())
        fail(ErrorCode::shape, "matmul: " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) + " times " +
                                   std::to_string(bv.rows()) + "x" + std::to_string(bv.cols()));
    Tensor out(av.rows(), bv.cols());
    gemm(av, bv, out);
    return a.tape().push(std::move(out), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                             if (t.requires_grad(a)) gemm(g, t.value(b).transposed(), t.grad_buffer(a));
                             if (t.requires_grad(b)) gemm(t.value(a).transposed(), g, t.grad_buffer(b));
                         },
                         "matmul");
}

Var transpose(Var a) {
    return a.tape().push(a.value().transposed(), {a},
                         [a](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t r = 0; r < g.rows(); ++r)
                                 for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
                         },
                         "transpose");
}

Var add(Var a, Var b) {
    return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                  [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                  [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                  [](double x, double) { return x; });
}

Var div(Var a, Var b) {
    return binary(a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Var scale(Var a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double) { return s; });
}

Var add_scalar(Var a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var relu(Var a) {
    for (double v : a.value().values()) a.tape().record_branch(v > 0.0 ? 0x52u : 0x53u);
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var abs(Var a) {
    for (double v : a.value().values()) a.tape().record_branch(v > 0.0 ? 0x71u : (v < 0.0 ? 0x72u : 0x73u));
    return unary(a, "abs", [](double x) { return std::abs(x); },
                 [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softplus(Var a) {
    return unary(a, "softplus", [](double x) { return softplus(x); }, [](double x) { return sigmoid(x); });
}

Var sigmoid(Var a) {
    return unary(a, "sigmoid", [](double x) { return sigmoid(x); },
                 [](double x) {
                     const double s = sigmoid(x);
                     return s * (1.0 - s);
                 });
}

Var clamp(Var a, double lo, double hi) {
    for (double v : a.value().values()) a.tape().record_branch(v < lo ? 0x61u : (v > hi ? 0x62u : 0x63u));
    return unary(a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var column_softmax(Var a) {
    const Tensor& av = a.value();
    Tensor out(av.rows(), av.cols());
    for (std::size_t c = 0; c < av.cols(); ++c) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < av.rows(); ++r) mx = std::max(mx, av(r, c));
        double s = 0.0;
        for (std::size_t r = 0; r < av.rows(); ++r) s += (out(r, c) = std::exp(av(r, c) - mx));
        for (std::size_t r = 0; r < av.rows(); ++r) out(r, c) /= s;
    }
    Tensor y = out;
    return a.tape().push(std::move(out), {a},
                         [a, y](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t c = 0; c < y.cols(); ++c) {
                                 double s = 0.0;
                                 for (std::size_t r = 0; r < y.rows(); ++r) s += g(r, c) * y(r, c);
                                 for (std::size_t r = 0; r < y.rows(); ++r) ga(r, c) += y(r, c) * (g(r, c) - s);
                             }
                         },
                         "column_softmax");
}

Var row_sum(Var a) {
    const Tensor& av = a.value();
    Tensor out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out[r] += av(r, c);
    return a.tape().push(std::move(out), {a},
                         [a](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t r = 0; r < ga.rows(); ++r)
                                 for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[r];
                         },
                         "row_sum");
}

Var col_sum(Var a) {
    const Tensor& av = a.value();
    Tensor out(1, av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out[c] += av(r, c);
    return a.tape().push(std::move(out), {a},
                         [a](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t r = 0; r < ga.rows(); ++r)
                                 for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c];
                         },
                         "col_sum");
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return a.tape().push(Tensor::scalar(s), {a},
                         [a](Tape& t, const Tensor& g) {
                             for (double& v : t.grad_buffer(a).values()) v += g[0];
                         },
                         "sum");
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) fail(ErrorCode::empty_input, "mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var l2_norm(Var a, double eps) {
    const Tensor& av = a.value();
    Tensor out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * av(r, c);
        out[r] = std::sqrt(s + eps);
    }
    Tensor norms = out;
    return a.tape().push(std::move(out), {a},
                         [a, norms](Tape& t, const Tensor& g) {
                             const Tensor& av = t.value(a);
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t r = 0; r < av.rows(); ++r) {
                                 if (norms[r] == 0.0) continue;  // subgradient 0 at the cusp
                                 const double f = g[r] / norms[r];
                                 for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += f * av(r, c);
                             }
                         },
                         "l2_norm");
}

Var dot(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) fail(ErrorCode::shape, "dot: operand shapes differ");
    Tensor out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out[r] += av(r, c) * bv(r, c);
    return a.tape().push(std::move(out), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                             const Tensor& av = t.value(a);
                             const Tensor& bv = t.value(b);
                             if (t.requires_grad(a)) {
                                 Tensor& ga = t.grad_buffer(a);
                                 for (std::size_t r = 0; r < av.rows(); ++r)
                                     for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += g[r] * bv(r, c);
                             }
                             if (t.requires_grad(b)) {
                                 Tensor& gb = t.grad_buffer(b);
                                 for (std::size_t r = 0; r < av.rows(); ++r)
                                     for (std::size_t c = 0; c < av.cols(); ++c) gb(r, c) += g[r] * av(r, c);
                             }
                         },
                         "dot");
}

Var gather_rows(Var a, std::span<const std::uint32_t> rows) {
    const Tensor& av = a.value();
    Tensor out(rows.size(), av.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= av.rows()) fail(ErrorCode::shape, "gather_rows: row index out of range");
        for (std::size_t c = 0; c < av.cols(); ++c) out(i, c) = av(rows[i], c);
    }
    a.tape().record_branches(rows);
    std::vector<std::uint32_t> idx(rows.begin(), rows.end());
    return a.tape().push(std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t c = 0; c < ga.cols(); ++c) ga(idx[i], c) += g(i, c);
                         },
                         "gather_rows");
}

Var gather(Var a, std::span<const std::uint32_t> flat_indices) {
    const Tensor& av = a.value();
    Tensor out(flat_indices.size(), 1);
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
        if (flat_indices[i] >= av.size()) fail(ErrorCode::shape, "gather: index out of range");
        out[i] = av[flat_indices[i]];
    }
    a.tape().record_branches(flat_indices);
    std::vector<std::uint32_t> idx(flat_indices.begin(), flat_indices.end());
    return a.tape().push(std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
                             Tensor& ga = t.grad_buffer(a);
                             for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
                         },
                         "gather");
}

namespace {

// Chains a variable-arity concatenation as a sequence of binary ones so the
// tape keeps fixed-arity parent lists.
Var concat_pair(Var a, Var b, bool columns) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (columns ? av.rows() != bv.rows() : av.cols() != bv.cols())
        fail(ErrorCode::shape, columns ? "concat_cols: row counts differ" : "concat_rows: column counts differ");
    Tensor out = columns ? Tensor(av.rows(), av.cols() + bv.cols()) : Tensor(av.rows() + bv.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
    const std::size_t ro = columns ? 0 : av.rows(), co = columns ? av.cols() : 0;
    for (std::size_t r = 0; r < bv.rows(); ++r)
        for (std::size_t c = 0; c < bv.cols(); ++c) out(r + ro, c + co) = bv(r, c);
    return a.tape().push(std::move(out), {a, b},
                         [a, b, ro, co](Tape& t, const Tensor& g) {
                             if (t.requires_grad(a)) {
                                 Tensor& ga = t.grad_buffer(a);
                                 for (std::size_t r = 0; r < ga.rows(); ++r)
                                     for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, c);
                             }
                             if (t.requires_grad(b)) {
                                 Tensor& gb = t.grad_buffer(b);
                                 for (std::size_t r = 0; r < gb.rows(); ++r)
                                     for (std::size_t c = 0; c < gb.cols(); ++c) gb(r, c) += g(r + ro, c + co);
                             }
                         },
                         columns ? "concat_cols" : "concat_rows");
}

Var concat(std::span<const Var> parts, bool columns) {
    if (parts.empty()) fail(ErrorCode::empty_input, "concat of zero tensors");
    Var acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) acc = concat_pair(acc, parts[i], columns);
    return acc;
}

}  // namespace

Var concat_cols(std::span<const Var> parts) { return concat(parts, true); }
Var concat_rows(std::span<const Var> parts) { return concat(parts, false); }

// ---------------------------------------------------------------------------
// grad_check

GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) fail(ErrorCode::parameter, "grad_check eps must lie in [1e-7, 1e-3]");
    Tensor analytic;
    {
        Tape tape;
        Var xv = tape.variable(x);
        Var out = f(tape, xv);
        if (out.value().size() != 1) fail(ErrorCode::shape, "grad_check needs a scalar function");
        tape.backward(out);
        analytic = xv.grad().empty() ? Tensor(x.rows(), x.cols()) : xv.grad();
    }
    auto eval = [&](const Tensor& at, std::uint64_t& signature) {
        Tape tape;
        Var out = f(tape, tape.variable(at));
        signature = tape.branch_signature();
        const double v = out.value().item();
        if (!std::isfinite(v)) fail(ErrorCode::numeric, "grad_check: non-finite forward value");
        return v;
    };

    GradCheckReport report;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        std::uint64_t s_plus = 0, s_minus = 0, s_mid = 0;
        probe[i] = orig + eps;
        const double fp = eval(probe, s_plus);
        probe[i] = orig - eps;
        const double fm = eval(probe, s_minus);
        probe[i] = orig;
        eval(probe, s_mid);
        if (s_plus != s_minus || s_plus != s_mid) {
            report.skipped.push_back(i);
            continue;
        }
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
    if (params.size() != grads.size()) fail(ErrorCode::shape, "Adam: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }
    if (m_.size() != params.size()) fail(ErrorCode::shape, "Adam: parameter set changed between steps");
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        if (g.empty()) continue;  // parameter did not influence the loss
        if (!g.same_shape(p)) fail(ErrorCode::shape, "Adam: gradient shape differs from parameter");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g[i];
            v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= config_.learning_rate * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + config_.epsilon);
        }
    }
}

}  // namespace skelmorph::ad
