#include "npm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace npm::ad {

Var Tape::variable(double value) {
    if (nodes_.size() >= Var::npos) throw std::length_error("tape full");
    nodes_.push_back(Node{});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

std::vector<Var> Tape::variables(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(variable(v));
    return out;
}

Var Tape::record(Op op, double value, const Var& lhs, double d_lhs, const Var& rhs, double d_rhs) {
    Node n;
    n.op = op;
    if (!lhs.is_constant()) {
        n.lhs = lhs.index();
        n.d_lhs = d_lhs;
    }
    if (!rhs.is_constant()) {
        n.rhs = rhs.index();
        n.d_rhs = d_rhs;
    }
    nodes_.push_back(n);
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Var Tape::record(Op op, double value, const Var& operand, double d_operand) {
    return record(op, value, operand, d_operand, Var(), 0.0);
}

std::vector<double> Tape::adjoints(const Var& output) const {
    if (!owns(output)) throw std::invalid_argument("output is not recorded on this tape");
    std::vector<double> adj(output.index() + 1, 0.0);
    adj[output.index()] = 1.0;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const double a = adj[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        if (!std::isfinite(a) || !std::isfinite(n.d_lhs) || !std::isfinite(n.d_rhs)) {
            std::ostringstream msg;
            msg << "non-finite value during reverse replay at node " << i;
            throw ReplayError(static_cast<std::uint32_t>(i), msg.str());
        }
        if (n.lhs != Var::npos) adj[n.lhs] += a * n.d_lhs;
        if (n.rhs != Var::npos) adj[n.rhs] += a * n.d_rhs;
    }
    return adj;
}

std::vector<double> reverse_grad(const Tape& tape, const Var& output, std::span<const Var> wrt) {
    const std::vector<double> adj = tape.adjoints(output);
    std::vector<double> g(wrt.size(), 0.0);
    for (std::size_t k = 0; k < wrt.size(); ++k) {
        const Var& w = wrt[k];
        if (w.is_constant()) continue;
        if (!tape.owns(w)) throw std::invalid_argument("parameter is not recorded on this tape");
        if (w.index() < adj.size()) g[k] = adj[w.index()];
    }
    return g;
}

// ---- Program ------------------------------------------------------------------

Primitive parse_primitive(std::string_view name) {
    if (name == "add" || name == "+") return Primitive::add;
    if (name == "sub" || name == "-") return Primitive::sub;
    if (name == "mul" || name == "*") return Primitive::mul;
    if (name == "div" || name == "/") return Primitive::div;
    if (name == "tanh") return Primitive::tanh;
    if (name == "matvec") return Primitive::matvec;
    throw std::invalid_argument("unsupported primitive: " + std::string(name));
}

std::string_view primitive_name(Primitive p) noexcept {
    switch (p) {
        case Primitive::add: return "add";
        case Primitive::sub: return "sub";
        case Primitive::mul: return "mul";
        case Primitive::div: return "div";
        case Primitive::tanh: return "tanh";
        case Primitive::matvec: return "matvec";
    }
    return "?";
}

Program::Program(std::size_t num_inputs, std::size_t num_params)
    : num_inputs_(num_inputs), num_params_(num_params), num_registers_(num_inputs + num_params) {}

std::size_t Program::input(std::size_t i) const {
    if (i >= num_inputs_) throw std::out_of_range("program input index");
    return i;
}

std::size_t Program::param(std::size_t i) const {
    if (i >= num_params_) throw std::out_of_range("program parameter index");
    return num_inputs_ + i;
}

std::size_t Program::next_register(std::size_t count) {
    const std::size_t r = num_registers_;
    num_registers_ += count;
    return r;
}

void Program::check_register(std::size_t r) const {
    if (r >= num_registers_) throw std::out_of_range("program register not yet defined");
}

std::size_t Program::constant(double c) {
    const std::size_t r = next_register();
    constants_.emplace_back(r, c);
    return r;
}

std::size_t Program::apply(std::string_view op, std::span<const std::size_t> operands) {
    const Primitive p = parse_primitive(op);
    const std::size_t arity = p == Primitive::tanh ? 1 : 2;
    if (p == Primitive::matvec) throw std::invalid_argument("matvec needs a shape; use Program::matvec");
    if (operands.size() != arity) {
        throw std::invalid_argument("wrong operand count for " + std::string(primitive_name(p)));
    }
    for (std::size_t r : operands) check_register(r);
    Instruction ins{p, std::vector<std::size_t>(operands.begin(), operands.end())};
    ins.first_result = next_register();
    code_.push_back(std::move(ins));
    return code_.back().first_result;
}

std::vector<std::size_t> Program::matvec(std::size_t rows, std::size_t cols,
                                         std::span<const std::size_t> matrix,
                                         std::span<const std::size_t> vec) {
    if (rows == 0 || cols == 0 || matrix.size() != rows * cols || vec.size() != cols) {
        throw std::invalid_argument("matvec shape mismatch");
    }
    Instruction ins{Primitive::matvec, {}};
    ins.rows = rows;
    ins.cols = cols;
    ins.operands.assign(matrix.begin(), matrix.end());
    ins.operands.insert(ins.operands.end(), vec.begin(), vec.end());
    for (std::size_t r : ins.operands) check_register(r);
    ins.first_result = next_register(rows);
    code_.push_back(std::move(ins));
    std::vector<std::size_t> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = code_.back().first_result + r;
    return out;
}

void Program::set_outputs(std::vector<std::size_t> outputs) {
    for (std::size_t r : outputs) check_register(r);
    outputs_ = std::move(outputs);
}

JvpResult forward_jvp(const Program& program, std::span<const double> inputs,
                      std::span<const double> params, std::span<const double> seed) {
    using D = Dual<double, 1>;
    if (seed.size() != inputs.size()) throw std::invalid_argument("seed dimension mismatch");
    std::vector<D> in(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) in[i] = D(inputs[i], {seed[i]});
    std::vector<D> par(params.begin(), params.end());
    const std::vector<D> out = program.evaluate<D>(in, par);
    JvpResult r;
    for (const D& d : out) {
        r.value.push_back(d.value);
        r.derivative.push_back(d.tangent[0]);
    }
    return r;
}

ValueAndGradient program_gradient(const Program& program, std::span<const double> inputs,
                                  std::span<const double> params, std::size_t output_index) {
    if (output_index >= program.outputs().size()) throw std::out_of_range("program output index");
    return value_and_grad(
        [&](Tape&, std::span<const Var> p) {
            const std::vector<Var> in(inputs.begin(), inputs.end());
            return program.evaluate<Var>(in, p)[output_index];
        },
        params);
}

}  // namespace npm::ad
