#pragma once

#include "copresence/errors.hpp"
#include "copresence/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace copresence {

/// A named trainable tensor and its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Ordered collection of parameters. Order is insertion order and is part of the checkpoint format.
class ParameterSet {
  public:
    Parameter& add(std::string name, Tensor value) {
        if (index_.contains(name)) {
            throw ConfigError("duplicate parameter name '" + name + "'");
        }
        index_.emplace(name, params_.size());
        params_.emplace_back(std::move(name), std::move(value));
        return params_.back();
    }

    [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }

    [[nodiscard]] Parameter& at(const std::string& name) {
        const auto it = index_.find(name);
        if (it == index_.end()) {
            throw ConfigError("unknown parameter '" + name + "'");
        }
        return params_[it->second];
    }
    [[nodiscard]] const Parameter& at(const std::string& name) const {
        return const_cast<ParameterSet*>(this)->at(name);
    }

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] std::size_t scalar_count() const noexcept {
        std::size_t total = 0;
        for (const auto& p : params_) {
            total += p.value.size();
        }
        return total;
    }

    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    void zero_grad() {
        for (auto& p : params_) {
            p.zero_grad();
        }
    }

  private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] std::uint32_t id() const noexcept { return id_; }
    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }
    /// Value of a 1×1 node.
    [[nodiscard]] double item() const;
    /// Gradient after backward; zero tensor when nothing flowed into this node.
    [[nodiscard]] Tensor grad() const;

  private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Records operations in execution order and replays them backward.
///
/// Node ids are indices into the record, so recording order is a topological order and each
/// node is visited once on the way back. A tape is single-use: backward runs at most once.
class Tape {
  public:
    using Backprop = std::function<void(Tape&, std::uint32_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf without gradient tracking.
    Var constant(Tensor value) { return push(std::move(value), {}, false, nullptr); }

    /// Leaf without gradient tracking that reads `value` in place; `value` must outlive the tape.
    Var constant_ref(const Tensor& value) {
        auto id = static_cast<std::uint32_t>(nodes_.size());
        Node node;
        node.ref = &value;
        nodes_.push_back(std::move(node));
        return Var(this, id);
    }

    /// Leaf with gradient tracking; its gradient is readable via Var::grad after backward.
    Var variable(Tensor value) { return push(std::move(value), {}, true, nullptr); }

    /// Leaf bound to a parameter: reads its value in place and adds into Parameter::grad on backward.
    Var param(Parameter& p) {
        auto id = static_cast<std::uint32_t>(nodes_.size());
        Node node;
        node.ref = &p.value;
        node.requires_grad = true;
        node.bound = &p;
        nodes_.push_back(std::move(node));
        return Var(this, id);
    }

    /// Records an op output. `backprop` reads grad(self) and accumulates into its inputs.
    Var record(Tensor value, bool requires_grad, Backprop backprop) {
        return push(std::move(value), std::move(backprop), requires_grad, nullptr);
    }

    [[nodiscard]] const Tensor& value(std::uint32_t id) const {
        const Node& n = nodes_.at(id);
        return n.ref ? *n.ref : n.value;
    }

    [[nodiscard]] bool requires_grad(std::uint32_t id) const { return nodes_.at(id).requires_grad; }

    /// Mutable gradient buffer of node `id`, allocated (zero-filled) on first access.
    std::vector<double>& grad_buffer(std::uint32_t id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) {
            n.grad.assign(value(id).size(), 0.0);
        }
        return n.grad;
    }

    [[nodiscard]] const std::vector<double>& grad_or_empty(std::uint32_t id) const { return nodes_.at(id).grad; }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] bool backward_done() const noexcept { return backward_done_; }

    /// Reverse-mode sweep from a scalar output.
    void backward(const Var& output) {
        if (output.tape() != this) {
            throw Error("backward: output does not belong to this tape");
        }
        if (backward_done_) {
            throw Error("backward: tape already replayed; record a fresh tape");
        }
        const Tensor& out = value(output.id());
        if (out.size() != 1) {
            throw ShapeError("backward: output must be scalar, got " + to_string(out.shape()));
        }
        backward_done_ = true;
        grad_buffer(output.id())[0] = 1.0;
        for (std::uint32_t id = output.id() + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (n.grad.empty() || !n.requires_grad) {
                continue;
            }
            if (n.backprop) {
                n.backprop(*this, id);
            }
            if (n.bound != nullptr) {
                auto g = n.bound->grad.values();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += n.grad[i];
                }
            }
        }
    }

  private:
    struct Node {
        Tensor value;
        const Tensor* ref = nullptr;
        std::vector<double> grad;
        Backprop backprop;
        Parameter* bound = nullptr;
        bool requires_grad = false;
    };

    Var push(Tensor value, Backprop backprop, bool requires_grad, Parameter* bound) {
        auto id = static_cast<std::uint32_t>(nodes_.size());
        Node node;
        node.value = std::move(value);
        node.backprop = std::move(backprop);
        node.requires_grad = requires_grad;
        node.bound = bound;
        nodes_.push_back(std::move(node));
        return Var(this, id);
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

inline const Tensor& Var::value() const {
    if (tape_ == nullptr) {
        throw Error("variable is not attached to a tape");
    }
    return tape_->value(id_);
}

inline double Var::item() const {
    const Tensor& v = value();
    if (v.size() != 1) {
        throw ShapeError("item() on non-scalar " + to_string(v.shape()));
    }
    return v[0];
}

inline Tensor Var::grad() const {
    const Tensor& v = value();
    const auto& g = tape_->grad_or_empty(id_);
    if (g.empty()) {
        return Tensor(v.shape());
    }
    return Tensor(v.shape(), g);
}

/// Reverse sweep from `output`; a Var without a tape is rejected.
inline void backward(const Var& output) {
    if (output.tape() == nullptr) {
        throw Error("backward: variable has no tape");
    }
    output.tape()->backward(output);
}

namespace ops_detail {

inline Tape& tape_of(const Var& a) {
    if (a.tape() == nullptr) {
        throw Error("operation on a variable without a tape");
    }
    return *a.tape();
}

inline Tape& tape_of(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    if (b.tape() != &t) {
        throw Error("operands recorded on different tapes");
    }
    return t;
}

inline void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

inline void require_finite(const char* op, const Tensor& t) {
    for (double v : t.values()) {
        if (std::isnan(v)) {
            throw DomainError(std::string(op) + ": NaN input");
        }
    }
}

/// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    Tape& t = tape_of(a);
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = fwd(x[i]);
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(y), t.requires_grad(ia), [ia, deriv](Tape& tp, std::uint32_t self) {
        const Tensor& xin = tp.value(ia);
        const Tensor& yout = tp.value(self);
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * deriv(xin[i], yout[i]);
        }
    });
}

}  // namespace ops_detail

// ---------------------------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------------------------

/// a[r×k] · b[k×c].
inline Var matmul(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul shape mismatch: " + to_string(av.shape()) + " x " + to_string(bv.shape()));
    }
    const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
    Tensor out(r, c);
    detail::gemm_nn_acc(av.values().data(), bv.values().data(), out.values().data(), r, k, c);
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib, r, k, c](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            detail::gemm_nt_acc(g.data(), tp.value(ib).values().data(), ga.data(), r, c, k);
        }
        if (tp.requires_grad(ib)) {
            auto& gb = tp.grad_buffer(ib);
            detail::gemm_tn_acc(tp.value(ia).values().data(), g.data(), gb.data(), r, k, c);
        }
    });
}

/// a[r×k] · b[c×k]ᵀ.
inline Var matmul_nt(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) {
        throw ShapeError("matmul_nt shape mismatch: " + to_string(av.shape()) + " x " + to_string(bv.shape()) + "^T");
    }
    const std::size_t r = av.rows(), k = av.cols(), c = bv.rows();
    Tensor out(r, c);
    detail::gemm_nt_acc(av.values().data(), bv.values().data(), out.values().data(), r, k, c);
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib, r, k, c](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            // dA = G · B
            auto& ga = tp.grad_buffer(ia);
            detail::gemm_nn_acc(g.data(), tp.value(ib).values().data(), ga.data(), r, c, k);
        }
        if (tp.requires_grad(ib)) {
            // dB = Gᵀ · A
            auto& gb = tp.grad_buffer(ib);
            detail::gemm_tn_acc(g.data(), tp.value(ia).values().data(), gb.data(), r, c, k);
        }
    });
}

inline Var transpose(const Var& a) {
    Tape& t = ops_detail::tape_of(a);
    const std::uint32_t ia = a.id();
    return t.record(copresence::transpose(a.value()), t.requires_grad(ia), [ia](Tape& tp, std::uint32_t self) {
        const Tensor& x = tp.value(ia);
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        const std::size_t r = x.rows(), c = x.cols();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] += g[j * r + i];
            }
        }
    });
}

inline Var reshape(const Var& a, Shape shape) {
    Tape& t = ops_detail::tape_of(a);
    const std::uint32_t ia = a.id();
    return t.record(a.value().reshaped(shape), t.requires_grad(ia), [ia](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
        }
    });
}

/// Stack a above b; column counts must agree.
inline Var concat_rows(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) {
        throw ShapeError("concat_rows shape mismatch: " + to_string(av.shape()) + " vs " + to_string(bv.shape()));
    }
    std::vector<double> data(av.values().begin(), av.values().end());
    data.insert(data.end(), bv.values().begin(), bv.values().end());
    const std::size_t split = av.size();
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(Tensor(Shape{av.rows() + bv.rows(), av.cols()}, std::move(data)), rg,
                    [ia, ib, split](Tape& tp, std::uint32_t self) {
                        const auto& g = tp.grad_buffer(self);
                        if (tp.requires_grad(ia)) {
                            auto& ga = tp.grad_buffer(ia);
                            for (std::size_t i = 0; i < split; ++i) {
                                ga[i] += g[i];
                            }
                        }
                        if (tp.requires_grad(ib)) {
                            auto& gb = tp.grad_buffer(ib);
                            for (std::size_t i = split; i < g.size(); ++i) {
                                gb[i - split] += g[i];
                            }
                        }
                    });
}

/// Place a beside b; row counts must agree.
inline Var concat_cols(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw ShapeError("concat_cols shape mismatch: " + to_string(av.shape()) + " vs " + to_string(bv.shape()));
    }
    const std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols();
    Tensor out(r, ca + cb);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) {
            out(i, j) = av(i, j);
        }
        for (std::size_t j = 0; j < cb; ++j) {
            out(i, ca + j) = bv(i, j);
        }
    }
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib, r, ca, cb](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        const std::size_t w = ca + cb;
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < ca; ++j) {
                    ga[i * ca + j] += g[i * w + j];
                }
            }
        }
        if (tp.requires_grad(ib)) {
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < cb; ++j) {
                    gb[i * cb + j] += g[i * w + ca + j];
                }
            }
        }
    });
}

/// Rows [begin, end) of a.
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    Tape& t = ops_detail::tape_of(a);
    const Tensor& av = a.value();
    if (begin > end || end > av.rows()) {
        throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         to_string(av.shape()));
    }
    const std::size_t c = av.cols();
    std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
                             av.values().begin() + static_cast<std::ptrdiff_t>(end * c));
    const std::uint32_t ia = a.id();
    const std::size_t offset = begin * c;
    return t.record(Tensor(Shape{end - begin, c}, std::move(data)), t.requires_grad(ia),
                    [ia, offset](Tape& tp, std::uint32_t self) {
                        const auto& g = tp.grad_buffer(self);
                        auto& ga = tp.grad_buffer(ia);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            ga[offset + i] += g[i];
                        }
                    });
}

/// Columns [begin, end) of a.
inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    Tape& t = ops_detail::tape_of(a);
    const Tensor& av = a.value();
    if (begin > end || end > av.cols()) {
        throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         to_string(av.shape()));
    }
    const std::size_t r = av.rows(), c = av.cols(), w = end - begin;
    Tensor out(r, w);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            out(i, j) = av(i, begin + j);
        }
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(out), t.requires_grad(ia), [ia, r, c, w, begin](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                ga[i * c + begin + j] += g[i * w + j];
            }
        }
    });
}

// ---------------------------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    ops_detail::require_same_shape("add", a, b);
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        for (std::uint32_t in : {ia, ib}) {
            if (tp.requires_grad(in)) {
                auto& gi = tp.grad_buffer(in);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gi[i] += g[i];
                }
            }
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    ops_detail::require_same_shape("sub", a, b);
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= bv[i];
    }
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (tp.requires_grad(ib)) {
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i];
            }
        }
    });
}

/// Hadamard product.
inline Var mul(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    ops_detail::require_same_shape("mul", a, b);
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= bv[i];
    }
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            const Tensor& bv2 = tp.value(ib);
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv2[i];
            }
        }
        if (tp.requires_grad(ib)) {
            const Tensor& av2 = tp.value(ia);
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * av2[i];
            }
        }
    });
}

/// Elementwise a / b.
inline Var div(const Var& a, const Var& b) {
    Tape& t = ops_detail::tape_of(a, b);
    ops_detail::require_same_shape("div", a, b);
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] /= bv[i];
    }
    const std::uint32_t ia = a.id(), ib = b.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        const Tensor& bv2 = tp.value(ib);
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] / bv2[i];
            }
        }
        if (tp.requires_grad(ib)) {
            const Tensor& y = tp.value(self);
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i] * y[i] / bv2[i];
            }
        }
    });
}

/// Multiply by a constant tensor of the same shape (dropout masks, fixed weights).
inline Var mul_const(const Var& a, const Tensor& mask) {
    Tape& t = ops_detail::tape_of(a);
    if (a.shape() != mask.shape()) {
        throw ShapeError("mul_const shape mismatch: " + to_string(a.shape()) + " vs " + to_string(mask.shape()));
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= mask[i];
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(out), t.requires_grad(ia), [ia, mask](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * mask[i];
        }
    });
}

inline Var scale(const Var& a, double s) {
    return ops_detail::unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(const Var& a, double s) {
    return ops_detail::unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

/// Adds a constant tensor (no gradient to it).
inline Var add_const(const Var& a, const Tensor& c) {
    Tape& t = ops_detail::tape_of(a);
    if (a.shape() != c.shape()) {
        throw ShapeError("add_const shape mismatch: " + to_string(a.shape()) + " vs " + to_string(c.shape()));
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += c[i];
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(out), t.requires_grad(ia), [ia](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
        }
    });
}

/// a[r×c] + bias[1×c] added to every row.
inline Var add_row_bias(const Var& a, const Var& bias) {
    Tape& t = ops_detail::tape_of(a, bias);
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
        throw ShapeError("add_row_bias shape mismatch: " + to_string(av.shape()) + " + " + to_string(bv.shape()));
    }
    Tensor out = av;
    const std::size_t r = av.rows(), c = av.cols();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out(i, j) += bv[j];
        }
    }
    const std::uint32_t ia = a.id(), ib = bias.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib, r, c](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (tp.requires_grad(ib)) {
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    gb[j] += g[i * c + j];
                }
            }
        }
    });
}

/// a[r×c] + bias[r×1]: row i is shifted by bias[i] in every column.
inline Var add_col_bias(const Var& a, const Var& bias) {
    Tape& t = ops_detail::tape_of(a, bias);
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (bv.cols() != 1 || bv.rows() != av.rows()) {
        throw ShapeError("add_col_bias shape mismatch: " + to_string(av.shape()) + " + " + to_string(bv.shape()));
    }
    Tensor out = av;
    const std::size_t r = av.rows(), c = av.cols();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out(i, j) += bv[i];
        }
    }
    const std::uint32_t ia = a.id(), ib = bias.id();
    const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
    return t.record(std::move(out), rg, [ia, ib, r, c](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        if (tp.requires_grad(ia)) {
            auto& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (tp.requires_grad(ib)) {
            auto& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    acc += g[i * c + j];
                }
                gb[i] += acc;
            }
        }
    });
}

// ---------------------------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------------------------

inline Var relu(const Var& a) {
    ops_detail::require_finite("relu", a.value());
    return ops_detail::unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(const Var& a) {
    ops_detail::require_finite("sigmoid", a.value());
    return ops_detail::unary(
        a,
        [](double x) {
            if (x >= 0.0) {
                return 1.0 / (1.0 + std::exp(-x));
            }
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

/// ln(1 + eˣ), evaluated without overflow.
[[nodiscard]] inline double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Var softplus(const Var& a) {
    return ops_detail::unary(
        a, [](double x) { return softplus(x); },
        [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

inline Var exp(const Var& a) {
    return ops_detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

/// Natural log; non-positive inputs are a domain error.
inline Var log(const Var& a) {
    for (double v : a.value().values()) {
        if (!(v > 0.0)) {
            throw DomainError("log: non-positive input");
        }
    }
    return ops_detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var square(const Var& a) {
    return ops_detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

/// |x| with subgradient 0 at the origin.
inline Var abs(const Var& a) {
    return ops_detail::unary(
        a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

/// Clamp into [lo, hi]; gradient passes only strictly inside the interval.
inline Var clamp(const Var& a, double lo, double hi) {
    return ops_detail::unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

/// Softmax along `axis`: axis 1 normalizes each row, axis 0 each column. Max-subtracted.
inline Var softmax(const Var& a, int axis = 1) {
    Tape& t = ops_detail::tape_of(a);
    const Tensor& x = a.value();
    ops_detail::require_finite("softmax", x);
    if (axis != 0 && axis != 1) {
        throw ShapeError("softmax: axis must be 0 or 1");
    }
    const std::size_t r = x.rows(), c = x.cols();
    // Walk "lines" (rows for axis 1, columns for axis 0) through a stride.
    const std::size_t lines = axis == 1 ? r : c;
    const std::size_t len = axis == 1 ? c : r;
    const std::size_t line_stride = axis == 1 ? c : 1;
    const std::size_t elem_stride = axis == 1 ? 1 : c;
    Tensor y(x.shape());
    for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t base = l * line_stride;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < len; ++e) {
            mx = std::max(mx, x[base + e * elem_stride]);
        }
        double total = 0.0;
        for (std::size_t e = 0; e < len; ++e) {
            const double v = std::exp(x[base + e * elem_stride] - mx);
            y[base + e * elem_stride] = v;
            total += v;
        }
        for (std::size_t e = 0; e < len; ++e) {
            y[base + e * elem_stride] /= total;
        }
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(y), t.requires_grad(ia),
                    [ia, lines, len, line_stride, elem_stride](Tape& tp, std::uint32_t self) {
                        const Tensor& yv = tp.value(self);
                        const auto& g = tp.grad_buffer(self);
                        auto& ga = tp.grad_buffer(ia);
                        for (std::size_t l = 0; l < lines; ++l) {
                            const std::size_t base = l * line_stride;
                            double dot = 0.0;
                            for (std::size_t e = 0; e < len; ++e) {
                                const std::size_t i = base + e * elem_stride;
                                dot += g[i] * yv[i];
                            }
                            for (std::size_t e = 0; e < len; ++e) {
                                const std::size_t i = base + e * elem_stride;
                                ga[i] += yv[i] * (g[i] - dot);
                            }
                        }
                    });
}

// ---------------------------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------------------------

/// Global average pooling: a[c×hw] → [c×1], the mean of each row.
inline Var gap(const Var& a) {
    Tape& t = ops_detail::tape_of(a);
    const Tensor& x = a.value();
    const std::size_t r = x.rows(), c = x.cols();
    if (c == 0) {
        throw ShapeError("gap: no spatial positions");
    }
    Tensor out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            acc += x(i, j);
        }
        out[i] = acc / static_cast<double>(c);
    }
    const std::uint32_t ia = a.id();
    return t.record(std::move(out), t.requires_grad(ia), [ia, r, c](Tape& tp, std::uint32_t self) {
        const auto& g = tp.grad_buffer(self);
        auto& ga = tp.grad_buffer(ia);
        const double inv = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] += g[i] * inv;
            }
        }
    });
}

inline Var sum(const Var& a) {
    Tape& t = ops_detail::tape_of(a);
    double acc = 0.0;
    for (double v : a.value().values()) {
        acc += v;
    }
    const std::uint32_t ia = a.id();
    return t.record(Tensor::scalar(acc), t.requires_grad(ia), [ia](Tape& tp, std::uint32_t self) {
        const double g = tp.grad_buffer(self)[0];
        auto& ga = tp.grad_buffer(ia);
        for (double& v : ga) {
            v += g;
        }
    });
}

inline Var mean(const Var& a) {
    const auto n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

/// Σ aᵢbᵢ over all entries.
inline Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

// ---------------------------------------------------------------------------------------------
// Finite-difference checking
// ---------------------------------------------------------------------------------------------

/// Central-difference derivative of a scalar function of one coordinate.
template <typename Eval>
double central_difference(Eval&& eval, double& coord, double h) {
    const double saved = coord;
    coord = saved + h;
    const double fp = eval();
    coord = saved - h;
    const double fm = eval();
    coord = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw DomainError("grad_check: non-finite function value");
    }
    return (fp - fm) / (2.0 * h);
}

[[nodiscard]] inline double relative_gradient_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) / (std::abs(numeric) + 1e-8);
}

/// Max over coordinates of |analytic − central difference| / (|central difference| + 1e-8).
///
/// `f` records a scalar on the given tape from the input variable.
inline double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x, double h = 1e-5) {
    if (!(h > 0.0)) {
        throw DomainError("grad_check: step must be positive");
    }
    Tensor analytic;
    {
        Tape tape;
        Var in = tape.variable(x);
        Var out = f(tape, in);
        if (!std::isfinite(out.item())) {
            throw DomainError("grad_check: non-finite function value");
        }
        tape.backward(out);
        analytic = in.grad();
    }
    Tensor probe = x;
    auto eval = [&] {
        Tape tape;
        Var in = tape.constant(probe);
        return f(tape, in).item();
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double numeric = central_difference(eval, probe[i], h);
        worst = std::max(worst, relative_gradient_error(analytic[i], numeric));
    }
    return worst;
}

/// Same check over every scalar of every parameter in `params`; `loss` records the objective.
inline double grad_check_parameters(ParameterSet& params, const std::function<Var(Tape&)>& loss, double h = 1e-5) {
    if (!(h > 0.0)) {
        throw DomainError("grad_check: step must be positive");
    }
    params.zero_grad();
    {
        Tape tape;
        Var out = loss(tape);
        if (!std::isfinite(out.item())) {
            throw DomainError("grad_check: non-finite function value");
        }
        tape.backward(out);
    }
    auto eval = [&] {
        Tape tape;
        return loss(tape).item();
    };
    double worst = 0.0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double numeric = central_difference(eval, p.value[i], h);
            worst = std::max(worst, relative_gradient_error(p.grad[i], numeric));
        }
    }
    return worst;
}


struct GradCheckReport {
    double max_error = 0.0;
    std::string worst;           // "name[index]" of the worst smooth coordinate
    std::size_t checked = 0;     // coordinates compared
    std::size_t nonsmooth = 0;   // coordinates excluded as non-differentiable on the scale of h
};

/// Parameter check that skips coordinates where a kink (ReLU, abs, clamp) lies within ±h.
/// A coordinate counts as non-smooth when its central differences at h and h/10 disagree by more
/// than 1e-3 relative (plus 1e-8 absolute); on smooth coordinates that gap is O(h²).
inline GradCheckReport grad_check_parameters_report(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                                                    double h = 1e-4) {
    if (!(h > 0.0)) {
        throw DomainError("grad_check: step must be positive");
    }
    params.zero_grad();
    {
        Tape tape;
        Var out = loss(tape);
        if (!std::isfinite(out.item())) {
            throw DomainError("grad_check: non-finite function value");
        }
        tape.backward(out);
    }
    auto eval = [&] {
        Tape tape;
        return loss(tape).item();
    };
    GradCheckReport r;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double coarse = central_difference(eval, p.value[i], h);
            const double fine = central_difference(eval, p.value[i], h / 10.0);
            if (std::abs(coarse - fine) > 1e-3 * std::abs(fine) + 1e-8) {
                ++r.nonsmooth;
                continue;
            }
            ++r.checked;
            const double err = relative_gradient_error(p.grad[i], coarse);
            if (err > r.max_error) {
                r.max_error = err;
                r.worst = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return r;
}

}  // namespace copresence
