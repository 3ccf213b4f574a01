// SPDX-License-Identifier: Apache-2.0
//
// wedt: wireless environment digital twin calibration toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

// Reverse-mode automatic differentiation over real scalars. Complex values
// are carried as (re, im) pairs of real tape values.
namespace wedt::ad
{

enum class Op : std::uint8_t
{
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    PowConst,
    MinConstClamp,
    Sigmoid,
    Custom
};

class DomainError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

class Tape;

/// Scalar that is either a constant (id < 0) or a node on a tape.
struct Var
{
    double v = 0.0;
    std::int32_t id = -1;
    Tape *tape = nullptr;

    Var() = default;
    Var(double value) : v(value) {} // NOLINT: implicit on purpose, constants mix freely with tape values
    Var(double value, std::int32_t node, Tape *t) : v(value), id(node), tape(t) {}

    double value() const { return v; }
    bool is_const() const { return id < 0; }
};

/// Append-only recording of operations; parents always precede children.
class Tape
{
  public:
    Tape() { offsets_.push_back(0); }

    Var leaf(double value) { return push(Op::Leaf, value, {}, {}); }

    Var push(Op op, double value, std::initializer_list<std::int32_t> parents, std::initializer_list<double> partials)
    {
        return push_span(op, value, std::span<const std::int32_t>(parents.begin(), parents.size()),
                         std::span<const double>(partials.begin(), partials.size()));
    }

    Var push_span(Op op, double value, std::span<const std::int32_t> parents, std::span<const double> partials)
    {
        const auto id = static_cast<std::int32_t>(ops_.size());
        ops_.push_back(op);
        values_.push_back(value);
        for (std::size_t i = 0; i < parents.size(); ++i)
        {
            parents_.push_back(parents[i]);
            partials_.push_back(partials[i]);
        }
        offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
        return Var(value, id, this);
    }

    std::size_t size() const { return ops_.size(); }
    Op op(std::int32_t id) const { return ops_[static_cast<std::size_t>(id)]; }
    double value(std::int32_t id) const { return values_[static_cast<std::size_t>(id)]; }
    std::span<const std::int32_t> parents(std::int32_t id) const
    {
        const auto b = offsets_[static_cast<std::size_t>(id)], e = offsets_[static_cast<std::size_t>(id) + 1];
        return {parents_.data() + b, e - b};
    }
    std::span<const double> partials(std::int32_t id) const
    {
        const auto b = offsets_[static_cast<std::size_t>(id)], e = offsets_[static_cast<std::size_t>(id) + 1];
        return {partials_.data() + b, e - b};
    }

    void reserve(std::size_t nodes, std::size_t edges)
    {
        ops_.reserve(nodes);
        values_.reserve(nodes);
        offsets_.reserve(nodes + 1);
        parents_.reserve(edges);
        partials_.reserve(edges);
    }

    void clear()
    {
        ops_.clear();
        values_.clear();
        parents_.clear();
        partials_.clear();
        offsets_.assign(1, 0);
    }

  private:
    std::vector<Op> ops_;
    std::vector<double> values_;
    std::vector<std::uint32_t> offsets_;
    std::vector<std::int32_t> parents_;
    std::vector<double> partials_;
};

/// Adjoints of every node with respect to one root.
class Gradient
{
  public:
    Gradient() = default;
    explicit Gradient(std::vector<double> adj) : adj_(std::move(adj)) {}

    double operator[](const Var &x) const
    {
        if (x.is_const() || static_cast<std::size_t>(x.id) >= adj_.size())
            return 0.0;
        return adj_[static_cast<std::size_t>(x.id)];
    }
    double at(std::int32_t id) const { return adj_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return adj_.size(); }

  private:
    std::vector<double> adj_;
};

/// Reverse accumulation from `root` (seed 1) over the recorded tape.
Gradient backward(const Tape &tape, const Var &root);

/// Reverse accumulation with caller-supplied seeds (node id -> adjoint); reuses `adj` storage.
void backward_seeded(const Tape &tape, std::span<const std::pair<std::int32_t, double>> seeds, std::vector<double> &adj);

namespace detail
{
inline Tape *tape_of(const Var &a, const Var &b)
{
    if (a.tape && b.tape && a.tape != b.tape)
        throw std::logic_error("operands live on different tapes");
    return a.tape ? a.tape : b.tape;
}

inline Var unary(const Var &a, Op op, double value, double partial)
{
    if (a.is_const())
        return Var(value);
    return a.tape->push(op, value, {a.id}, {partial});
}

inline Var binary(const Var &a, const Var &b, Op op, double value, double da, double db)
{
    if (a.is_const() && b.is_const())
        return Var(value);
    Tape *t = tape_of(a, b);
    if (a.is_const())
        return t->push(op, value, {b.id}, {db});
    if (b.is_const())
        return t->push(op, value, {a.id}, {da});
    return t->push(op, value, {a.id, b.id}, {da, db});
}
} // namespace detail

inline Var operator+(const Var &a, const Var &b) { return detail::binary(a, b, Op::Add, a.v + b.v, 1.0, 1.0); }
inline Var operator-(const Var &a, const Var &b) { return detail::binary(a, b, Op::Sub, a.v - b.v, 1.0, -1.0); }
inline Var operator*(const Var &a, const Var &b) { return detail::binary(a, b, Op::Mul, a.v * b.v, b.v, a.v); }
inline Var operator/(const Var &a, const Var &b)
{
    if (b.v == 0.0)
        throw DomainError("division by zero on tape");
    const double q = a.v / b.v;
    return detail::binary(a, b, Op::Div, q, 1.0 / b.v, -q / b.v);
}
inline Var operator-(const Var &a) { return detail::unary(a, Op::Neg, -a.v, -1.0); }
inline Var &operator+=(Var &a, const Var &b) { return a = a + b; }
inline Var &operator-=(Var &a, const Var &b) { return a = a - b; }
inline Var &operator*=(Var &a, const Var &b) { return a = a * b; }

inline Var exp(const Var &a)
{
    const double e = std::exp(a.v);
    return detail::unary(a, Op::Exp, e, e);
}
inline Var log(const Var &a)
{
    if (!(a.v > 0.0))
        throw DomainError("log of non-positive value");
    return detail::unary(a, Op::Log, std::log(a.v), 1.0 / a.v);
}
/// sqrt(0) records a zero partial (one-sided subgradient convention).
inline Var sqrt(const Var &a)
{
    if (a.v < 0.0)
        throw DomainError("sqrt of negative value");
    const double r = std::sqrt(a.v);
    return detail::unary(a, Op::Sqrt, r, r > 0.0 ? 0.5 / r : 0.0);
}
inline Var sin(const Var &a) { return detail::unary(a, Op::Sin, std::sin(a.v), std::cos(a.v)); }
inline Var cos(const Var &a) { return detail::unary(a, Op::Cos, std::cos(a.v), -std::sin(a.v)); }
inline Var pow(const Var &a, double k)
{
    const double r = std::pow(a.v, k);
    const double d = k == 0.0 ? 0.0 : k * std::pow(a.v, k - 1.0);
    return detail::unary(a, Op::PowConst, r, d);
}
/// min(a, cap); the unclamped branch (a <= cap) carries slope 1.
inline Var min_clamp(const Var &a, double cap)
{
    return a.v <= cap ? detail::unary(a, Op::MinConstClamp, a.v, 1.0)
                      : detail::unary(a, Op::MinConstClamp, cap, 0.0);
}
inline Var sigmoid(const Var &a)
{
    const double s = a.v >= 0.0 ? 1.0 / (1.0 + std::exp(-a.v)) : std::exp(a.v) / (1.0 + std::exp(a.v));
    return detail::unary(a, Op::Sigmoid, s, s * (1.0 - s));
}

/// Fused node with arbitrary parents and caller-computed local partials.
Var custom(Tape &tape, double value, std::span<const Var> parents, std::span<const double> partials);

struct CVar
{
    Var re, im;

    CVar() = default;
    CVar(Var r, Var i = Var(0.0)) : re(r), im(i) {} // NOLINT
    CVar(double r, double i) : re(r), im(i) {}
};

inline CVar operator+(const CVar &a, const CVar &b) { return {a.re + b.re, a.im + b.im}; }
inline CVar operator-(const CVar &a, const CVar &b) { return {a.re - b.re, a.im - b.im}; }
inline CVar operator*(const CVar &a, const CVar &b)
{
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline CVar operator*(const CVar &a, const Var &s) { return {a.re * s, a.im * s}; }
inline CVar operator*(const Var &s, const CVar &a) { return {a.re * s, a.im * s}; }
inline CVar conj(const CVar &a) { return {a.re, -a.im}; }
inline Var abs2(const CVar &a) { return a.re * a.re + a.im * a.im; }
inline Var abs(const CVar &a) { return sqrt(abs2(a)); }
inline CVar operator/(const CVar &a, const CVar &b)
{
    const Var d = abs2(b);
    return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
}
/// exp(j*theta)
inline CVar expj(const Var &theta) { return {cos(theta), sin(theta)}; }

/// Principal square root; the branch is chosen on values so both parts stay smooth away from the negative real axis.
inline CVar csqrt(const CVar &z)
{
    const Var r = abs(z);
    if (z.re.v >= 0.0)
    {
        const Var re = sqrt((r + z.re) * 0.5);
        if (re.v == 0.0)
            return {re, Var(0.0)};
        return {re, z.im / (re * 2.0)};
    }
    Var im = sqrt((r - z.re) * 0.5);
    if (z.im.v < 0.0)
        im = -im;
    return {z.im / (im * 2.0), im};
}

struct FdReport
{
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

using ScalarFn = std::function<Var(std::span<const Var>)>;

/// Compares tape gradients of f at `point` against central differences with step h.
/// Relative error per component is |g - fd| / max(|g|, |fd|); components with both below 1e-300 count as exact.
FdReport finite_diff_check(const ScalarFn &f, std::span<const double> point, double h);

} // namespace wedt::ad
