#pragma once

// Forward-mode dual numbers and a reverse-mode tape. Dual<Var, N> gives
// forward-over-reverse: input derivatives are carried as tangents whose
// entries are themselves recorded on the tape, so parameter gradients of
// expressions containing input derivatives are exact.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace npm::ad {

class Tape;

/// Scalar recorded on a Tape. A Var without a tape is a constant.
class Var {
public:
    static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

    double value() const noexcept { return value_; }
    std::uint32_t index() const noexcept { return index_; }
    Tape* tape() const noexcept { return tape_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::uint32_t index_ = npos;
    double value_ = 0.0;
};

/// Replay hit a non-finite adjoint or local partial.
class ReplayError : public std::runtime_error {
public:
    ReplayError(std::uint32_t node, const std::string& what)
        : std::runtime_error(what), node_(node) {}
    std::uint32_t node() const noexcept { return node_; }

private:
    std::uint32_t node_;
};

class Tape {
public:
    enum class Op : std::uint8_t { leaf, add, sub, mul, div, neg, tanh, scale, offset };

    struct Node {
        std::uint32_t lhs = Var::npos;
        std::uint32_t rhs = Var::npos;
        double d_lhs = 0.0;
        double d_rhs = 0.0;
        Op op = Op::leaf;
    };

    Var variable(double value);
    std::vector<Var> variables(std::span<const double> values);

    /// Records a node with up to two operands (constants are dropped).
    Var record(Op op, double value, const Var& lhs, double d_lhs, const Var& rhs, double d_rhs);
    Var record(Op op, double value, const Var& operand, double d_operand);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t i) const { return nodes_.at(i); }
    bool owns(const Var& v) const noexcept { return v.tape() == this && v.index() < nodes_.size(); }

    void clear() noexcept { nodes_.clear(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }

    /// Adjoints of every node with respect to `output`, in node order.
    std::vector<double> adjoints(const Var& output) const;

private:
    std::vector<Node> nodes_;
};

// ---- Var arithmetic -------------------------------------------------------

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
    if (a.tape() && b.tape() && a.tape() != b.tape()) {
        throw std::invalid_argument("operands recorded on different tapes");
    }
    return a.tape() ? a.tape() : b.tape();
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (!t) return Var(a.value() + b.value());
    return t->record(Tape::Op::add, a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (!t) return Var(a.value() - b.value());
    return t->record(Tape::Op::sub, a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (!t) return Var(a.value() * b.value());
    return t->record(Tape::Op::mul, a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    const double q = a.value() / b.value();
    if (!t) return Var(q);
    return t->record(Tape::Op::div, q, a, 1.0 / b.value(), b, -q / b.value());
}
inline Var operator-(const Var& a) {
    if (!a.tape()) return Var(-a.value());
    return a.tape()->record(Tape::Op::neg, -a.value(), a, -1.0);
}
inline Var operator+(const Var& a) { return a; }

inline Var tanh(const Var& a) {
    const double t = std::tanh(a.value());
    if (!a.tape()) return Var(t);
    return a.tape()->record(Tape::Op::tanh, t, a, 1.0 - t * t);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Var& x) noexcept { return x.value(); }

/// d output / d wrt[k] for each k. Parameters that do not influence the
/// output receive exactly zero.
std::vector<double> reverse_grad(const Tape& tape, const Var& output, std::span<const Var> wrt);

// ---- Forward mode -----------------------------------------------------------

/// Value plus N tangent slots; T may be double or Var.
template <typename T, std::size_t N>
struct Dual {
    T value{};
    std::array<T, N> tangent{};

    Dual() = default;
    Dual(const T& v) : value(v) {}  // NOLINT(google-explicit-constructor)
    Dual(const T& v, const std::array<T, N>& t) : value(v), tangent(t) {}

    static Dual seeded(const T& v, std::size_t direction) {
        Dual d(v);
        d.tangent[direction] = T(1.0);
        return d;
    }
};

template <typename T, std::size_t N>
Dual<T, N> operator+(const Dual<T, N>& a, const Dual<T, N>& b) {
    Dual<T, N> r(a.value + b.value);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = a.tangent[k] + b.tangent[k];
    return r;
}
template <typename T, std::size_t N>
Dual<T, N> operator-(const Dual<T, N>& a, const Dual<T, N>& b) {
    Dual<T, N> r(a.value - b.value);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = a.tangent[k] - b.tangent[k];
    return r;
}
template <typename T, std::size_t N>
Dual<T, N> operator-(const Dual<T, N>& a) {
    Dual<T, N> r(-a.value);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = -a.tangent[k];
    return r;
}
template <typename T, std::size_t N>
Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
    Dual<T, N> r(a.value * b.value);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = a.tangent[k] * b.value + a.value * b.tangent[k];
    return r;
}
template <typename T, std::size_t N>
Dual<T, N> operator/(const Dual<T, N>& a, const Dual<T, N>& b) {
    const T q = a.value / b.value;
    Dual<T, N> r(q);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = (a.tangent[k] - q * b.tangent[k]) / b.value;
    return r;
}
template <typename T, std::size_t N>
Dual<T, N> tanh(const Dual<T, N>& a) {
    using std::tanh;
    const T t = tanh(a.value);
    const T slope = T(1.0) - t * t;
    Dual<T, N> r(t);
    for (std::size_t k = 0; k < N; ++k) r.tangent[k] = slope * a.tangent[k];
    return r;
}
template <typename T, std::size_t N>
Dual<T, N>& operator+=(Dual<T, N>& a, const Dual<T, N>& b) { return a = a + b; }
template <typename T, std::size_t N>
Dual<T, N>& operator-=(Dual<T, N>& a, const Dual<T, N>& b) { return a = a - b; }
template <typename T, std::size_t N>
Dual<T, N>& operator*=(Dual<T, N>& a, const Dual<T, N>& b) { return a = a * b; }

// ---- Programs ---------------------------------------------------------------

enum class Primitive { add, sub, mul, div, tanh, matvec };

/// Throws std::invalid_argument for names outside the supported set.
Primitive parse_primitive(std::string_view name);
std::string_view primitive_name(Primitive p) noexcept;

/// A straight-line computation over scalar registers built only from the
/// supported primitives. Registers 0..inputs-1 hold inputs, the next block
/// holds parameters.
class Program {
public:
    Program(std::size_t num_inputs, std::size_t num_params);

    std::size_t num_inputs() const noexcept { return num_inputs_; }
    std::size_t num_params() const noexcept { return num_params_; }
    std::size_t input(std::size_t i) const;
    std::size_t param(std::size_t i) const;
    std::size_t constant(double c);

    /// Elementwise primitive by name; unknown names are rejected here.
    std::size_t apply(std::string_view op, std::span<const std::size_t> operands);
    std::size_t apply(std::string_view op, std::initializer_list<std::size_t> operands) {
        return apply(op, std::span<const std::size_t>(operands.begin(), operands.size()));
    }
    /// y = M x with M row-major (rows x cols registers).
    std::vector<std::size_t> matvec(std::size_t rows, std::size_t cols,
                                    std::span<const std::size_t> matrix,
                                    std::span<const std::size_t> vec);

    void set_outputs(std::vector<std::size_t> outputs);
    const std::vector<std::size_t>& outputs() const noexcept { return outputs_; }

    template <typename T>
    std::vector<T> evaluate(std::span<const T> inputs, std::span<const T> params) const;

private:
    struct Instruction {
        Primitive op;
        std::vector<std::size_t> operands;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::size_t first_result = 0;
    };
    std::size_t next_register(std::size_t count = 1);
    void check_register(std::size_t r) const;

    std::size_t num_inputs_;
    std::size_t num_params_;
    std::size_t num_registers_;
    std::vector<std::pair<std::size_t, double>> constants_;
    std::vector<Instruction> code_;
    std::vector<std::size_t> outputs_;
};

template <typename T>
std::vector<T> Program::evaluate(std::span<const T> inputs, std::span<const T> params) const {
    using std::tanh;
    if (inputs.size() != num_inputs_ || params.size() != num_params_) {
        throw std::invalid_argument("program argument count mismatch");
    }
    std::vector<T> reg(num_registers_, T(0.0));
    for (std::size_t i = 0; i < num_inputs_; ++i) reg[i] = inputs[i];
    for (std::size_t i = 0; i < num_params_; ++i) reg[num_inputs_ + i] = params[i];
    for (const auto& [r, c] : constants_) reg[r] = T(c);
    for (const Instruction& ins : code_) {
        const auto& o = ins.operands;
        switch (ins.op) {
            case Primitive::add: reg[ins.first_result] = reg[o[0]] + reg[o[1]]; break;
            case Primitive::sub: reg[ins.first_result] = reg[o[0]] - reg[o[1]]; break;
            case Primitive::mul: reg[ins.first_result] = reg[o[0]] * reg[o[1]]; break;
            case Primitive::div: reg[ins.first_result] = reg[o[0]] / reg[o[1]]; break;
            case Primitive::tanh: reg[ins.first_result] = tanh(reg[o[0]]); break;
            case Primitive::matvec: {
                const std::size_t vec0 = ins.rows * ins.cols;
                for (std::size_t r = 0; r < ins.rows; ++r) {
                    T acc = reg[o[r * ins.cols]] * reg[o[vec0]];
                    for (std::size_t c = 1; c < ins.cols; ++c) acc = acc + reg[o[r * ins.cols + c]] * reg[o[vec0 + c]];
                    reg[ins.first_result + r] = acc;
                }
                break;
            }
        }
    }
    std::vector<T> out;
    out.reserve(outputs_.size());
    for (std::size_t r : outputs_) out.push_back(reg[r]);
    return out;
}

struct JvpResult {
    std::vector<double> value;
    std::vector<double> derivative;
};

/// Directional derivative of every program output along `seed` (input space).
JvpResult forward_jvp(const Program& program, std::span<const double> inputs,
                      std::span<const double> params, std::span<const double> seed);

struct ValueAndGradient {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Records `f(tape, params)` and returns its value and parameter gradient.
/// `f` may evaluate input derivatives with Dual<Var, N> internally; the
/// result is then the exact forward-over-reverse gradient.
template <typename F>
ValueAndGradient value_and_grad(F&& f, std::span<const double> params) {
    Tape tape;
    const std::vector<Var> vars = tape.variables(params);
    const Var out = f(tape, std::span<const Var>(vars));
    ValueAndGradient r;
    r.value = out.value();
    if (out.is_constant()) {
        r.gradient.assign(params.size(), 0.0);
    } else {
        r.gradient = reverse_grad(tape, out, vars);
    }
    return r;
}

/// Same contract as value_and_grad; named for losses that contain forward
/// tangents (Dual<Var, N>) of network outputs.
template <typename F>
ValueAndGradient nested_grad(F&& f, std::span<const double> params) {
    return value_and_grad(std::forward<F>(f), params);
}

/// Gradient of output `output_index` of `program` with respect to its
/// parameters.
ValueAndGradient program_gradient(const Program& program, std::span<const double> inputs,
                                  std::span<const double> params, std::size_t output_index);

}  // namespace npm::ad
