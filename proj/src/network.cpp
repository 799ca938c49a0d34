#include "npm/network.hpp"

#include "npm/fileio.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace npm::nn {

// ---- Layout ---------------------------------------------------------------------

void NetworkLayout::validate() const {
    if (sizes.size() < 2) throw std::invalid_argument("network layout needs at least input and output widths");
    for (std::size_t w : sizes) {
        if (w == 0) throw std::invalid_argument("network layout has a zero-width layer");
    }
}

std::size_t NetworkLayout::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

NetworkLayout NetworkLayout::parse(std::string_view text) {
    NetworkLayout layout;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
            throw std::invalid_argument("bad layer width '" + token + "'");
        }
        layout.sizes.push_back(v);
        token.clear();
    };
    for (char ch : text) {
        if (ch == ',' || ch == ' ' || ch == '[' || ch == ']' || ch == '\t') {
            flush();
        } else {
            token.push_back(ch);
        }
    }
    flush();
    layout.validate();
    return layout;
}

std::string NetworkLayout::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(sizes[i]);
    }
    return s;
}

// ---- Parameters -----------------------------------------------------------------

NetworkParams::NetworkParams(NetworkLayout layout) : layout_(std::move(layout)) {
    layout_.validate();
    std::size_t off = 0;
    for (std::size_t l = 0; l < layout_.num_layers(); ++l) {
        offsets_.push_back(off);
        off += layout_.sizes[l] * layout_.sizes[l + 1] + layout_.sizes[l + 1];
    }
    values_.assign(off, 0.0);
}

std::size_t NetworkParams::bias_offset(std::size_t l) const {
    return offsets_.at(l) + layout_.sizes[l] * layout_.sizes[l + 1];
}

std::span<const double> NetworkParams::weights(std::size_t l) const {
    return std::span<const double>(values_).subspan(offsets_.at(l), layout_.sizes[l] * layout_.sizes[l + 1]);
}
std::span<double> NetworkParams::weights(std::size_t l) {
    return std::span<double>(values_).subspan(offsets_.at(l), layout_.sizes[l] * layout_.sizes[l + 1]);
}
std::span<const double> NetworkParams::bias(std::size_t l) const {
    return std::span<const double>(values_).subspan(bias_offset(l), layout_.sizes[l + 1]);
}
std::span<double> NetworkParams::bias(std::size_t l) {
    return std::span<double>(values_).subspan(bias_offset(l), layout_.sizes[l + 1]);
}

bool NetworkParams::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

NetworkParams init(const NetworkLayout& layout, std::uint64_t seed) {
    NetworkParams p(layout);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < layout.num_layers(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layout.sizes[l] + layout.sizes[l + 1]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : p.weights(l)) w = dist(rng);
    }
    return p;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> x) {
    return forward<double>(params.layout(), params.values(), x);
}

// ---- Output schema --------------------------------------------------------------

OutputSchema OutputSchema::fluid_for_width(std::size_t width, std::size_t dim) {
    if (width <= dim || (width - dim) % (dim + 1) != 0) {
        throw std::invalid_argument("output width " + std::to_string(width) +
                                    " does not fit d(s+1)+s for d = " + std::to_string(dim));
    }
    return fluid((width - dim) / (dim + 1), dim);
}

StageOutputs split(std::span<const double> output, const OutputSchema& schema) {
    if (output.size() != schema.width()) {
        throw std::invalid_argument("output length " + std::to_string(output.size()) +
                                    " does not match schema width " + std::to_string(schema.width()));
    }
    StageOutputs parts;
    const std::size_t nv = schema.stages * schema.dim;
    parts.velocity_stages.assign(output.begin(), output.begin() + static_cast<std::ptrdiff_t>(nv));
    parts.velocity_next.assign(output.begin() + static_cast<std::ptrdiff_t>(nv),
                               output.begin() + static_cast<std::ptrdiff_t>(nv + schema.dim));
    if (schema.pressure) {
        parts.pressure_stages.assign(output.begin() + static_cast<std::ptrdiff_t>(nv + schema.dim), output.end());
    }
    return parts;
}

std::vector<double> reassemble(const StageOutputs& parts, const OutputSchema& schema) {
    if (parts.velocity_stages.size() != schema.stages * schema.dim || parts.velocity_next.size() != schema.dim ||
        parts.pressure_stages.size() != (schema.pressure ? schema.stages : 0)) {
        throw std::invalid_argument("stage outputs do not match schema");
    }
    std::vector<double> out(parts.velocity_stages);
    out.insert(out.end(), parts.velocity_next.begin(), parts.velocity_next.end());
    out.insert(out.end(), parts.pressure_stages.begin(), parts.pressure_stages.end());
    return out;
}

// ---- Batched evaluation ---------------------------------------------------------

BatchEvaluator::BatchEvaluator(NetworkLayout layout, std::size_t batch, std::size_t directions)
    : layout_(std::move(layout)), batch_(batch), directions_(directions) {
    layout_.validate();
    if (batch_ == 0) throw std::invalid_argument("empty batch");
    const std::size_t L = layout_.num_layers();
    act_.resize(L + 1);
    zdot_.resize(L + 1);
    wt_.resize(L + 1);
    std::size_t widest = 0;
    for (std::size_t l = 0; l <= L; ++l) {
        act_[l].assign(rows() * layout_.sizes[l], 0.0);
        if (l > 0 && l < L) zdot_[l].assign(batch_ * directions_ * layout_.sizes[l], 0.0);
        if (l > 0) wt_[l].assign(layout_.sizes[l - 1] * layout_.sizes[l], 0.0);
        widest = std::max(widest, layout_.sizes[l]);
    }
    adj_.assign(rows() * widest, 0.0);
    adj_prev_.assign(rows() * widest, 0.0);
}

void BatchEvaluator::forward(const NetworkParams& params, std::span<const double> inputs, double input_scale) {
    if (!(params.layout() == layout_)) throw std::invalid_argument("parameter layout does not match evaluator");
    const std::size_t n0 = layout_.input_width();
    if (inputs.size() != batch_ * n0) throw std::invalid_argument("input batch shape mismatch");
    if (directions_ > n0) throw std::invalid_argument("more tangent directions than inputs");
    kern_ = &simd::kernels();

    std::vector<double>& x = act_[0];
    for (std::size_t i = 0; i < batch_ * n0; ++i) x[i] = inputs[i] * input_scale;
    for (std::size_t k = 0; k < directions_; ++k) {
        double* block = x.data() + (k + 1) * batch_ * n0;
        std::fill(block, block + batch_ * n0, 0.0);
        for (std::size_t p = 0; p < batch_; ++p) block[p * n0 + k] = input_scale;
    }

    const std::size_t L = layout_.num_layers();
    const std::size_t R = rows();
    for (std::size_t l = 1; l <= L; ++l) {
        const std::size_t n_in = layout_.sizes[l - 1];
        const std::size_t n_out = layout_.sizes[l];
        const auto W = params.weights(l - 1);
        const auto b = params.bias(l - 1);
        std::vector<double>& wt = wt_[l];
        for (std::size_t o = 0; o < n_out; ++o) {
            for (std::size_t i = 0; i < n_in; ++i) wt[i * n_out + o] = W[o * n_in + i];
        }
        std::vector<double>& z = act_[l];
        kern_->gemm_nn(R, n_out, n_in, act_[l - 1].data(), n_in, wt.data(), n_out, z.data(), n_out, false);
        for (std::size_t p = 0; p < batch_; ++p) {
            double* row = z.data() + p * n_out;
            for (std::size_t o = 0; o < n_out; ++o) row[o] += b[o];
        }
        if (l == L) break;
        // Hidden layer: value rows -> tanh, tangent rows -> (1 - a^2) * zdot.
        std::copy(z.begin() + static_cast<std::ptrdiff_t>(batch_ * n_out), z.end(), zdot_[l].begin());
        kern_->tanh(z.data(), z.data(), batch_ * n_out);
        for (std::size_t k = 0; k < directions_; ++k) {
            for (std::size_t p = 0; p < batch_; ++p) {
                const double* a = z.data() + p * n_out;
                const double* zd = zdot_[l].data() + (k * batch_ + p) * n_out;
                double* out = z.data() + ((k + 1) * batch_ + p) * n_out;
                kern_->tanh_backward(a, zd, out, n_out);
            }
        }
    }
    std::fill(adj_.begin(), adj_.end(), 0.0);
}

std::span<const double> BatchEvaluator::values() const {
    return std::span<const double>(act_.back()).subspan(0, batch_ * layout_.output_width());
}

std::span<const double> BatchEvaluator::tangents(std::size_t k) const {
    if (k >= directions_) throw std::out_of_range("tangent direction");
    const std::size_t n = batch_ * layout_.output_width();
    return std::span<const double>(act_.back()).subspan((k + 1) * n, n);
}

std::span<double> BatchEvaluator::value_adjoint() {
    return std::span<double>(adj_).subspan(0, batch_ * layout_.output_width());
}

std::span<double> BatchEvaluator::tangent_adjoint(std::size_t k) {
    if (k >= directions_) throw std::out_of_range("tangent direction");
    const std::size_t n = batch_ * layout_.output_width();
    return std::span<double>(adj_).subspan((k + 1) * n, n);
}

void BatchEvaluator::backward(const NetworkParams& params, std::span<double> gradient) {
    if (gradient.size() != params.size()) throw std::invalid_argument("gradient length mismatch");
    if (!kern_) throw std::logic_error("backward called before forward");
    const std::size_t L = layout_.num_layers();
    const std::size_t R = rows();

    // zbar holds the adjoint of the current layer's pre-activation rows.
    std::vector<double>* zbar = &adj_;
    std::vector<double>* next = &adj_prev_;
    for (std::size_t l = L; l >= 1; --l) {
        const std::size_t n_in = layout_.sizes[l - 1];
        const std::size_t n_out = layout_.sizes[l];
        double* zb = zbar->data();
        if (l < L) {
            const double* a = act_[l].data();
            // Value rows first: they need the tangent-row adjoints before scaling.
            for (std::size_t p = 0; p < batch_; ++p) {
                const double* ap = a + p * n_out;
                double* zv = zb + p * n_out;
                for (std::size_t o = 0; o < n_out; ++o) {
                    const double s1 = 1.0 - ap[o] * ap[o];
                    const double s2 = -2.0 * ap[o] * s1;
                    double acc = zv[o] * s1;
                    for (std::size_t k = 0; k < directions_; ++k) {
                        const double gt = zb[((k + 1) * batch_ + p) * n_out + o];
                        const double zd = zdot_[l][(k * batch_ + p) * n_out + o];
                        acc += gt * zd * s2;
                    }
                    zv[o] = acc;
                }
            }
            for (std::size_t k = 0; k < directions_; ++k) {
                for (std::size_t p = 0; p < batch_; ++p) {
                    double* zt = zb + ((k + 1) * batch_ + p) * n_out;
                    kern_->tanh_backward(a + p * n_out, zt, zt, n_out);
                }
            }
        }
        double* gW = gradient.data() + params.weight_offset(l - 1);
        double* gb = gradient.data() + params.bias_offset(l - 1);
        kern_->gemm_tn(n_out, n_in, R, zb, n_out, act_[l - 1].data(), n_in, gW, n_in);
        for (std::size_t p = 0; p < batch_; ++p) {
            const double* zv = zb + p * n_out;
            for (std::size_t o = 0; o < n_out; ++o) gb[o] += zv[o];
        }
        if (l == 1) break;
        const auto W = params.weights(l - 1);
        kern_->gemm_nn(R, n_in, n_out, zb, n_out, W.data(), n_in, next->data(), n_in, false);
        std::swap(zbar, next);
    }
    // adj_ may have been used as scratch; callers refill it after each forward().
}

// ---- Checkpoints ----------------------------------------------------------------

void write_checkpoint(const NetworkParams& params, std::ostream& os) {
    os << "npm-network 1\n";
    os << "layout";
    for (std::size_t w : params.layout().sizes) os << ' ' << w;
    os << '\n';
    char buf[40];
    for (double v : params.values()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        os << buf;
    }
}

NetworkParams read_checkpoint(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "npm-network" || version != 1) {
        throw std::runtime_error("not an npm-network checkpoint");
    }
    std::string word;
    if (!(is >> word) || word != "layout") throw std::runtime_error("checkpoint missing layout line");
    std::string line;
    std::getline(is, line);
    NetworkLayout layout;
    try {
        layout = NetworkLayout::parse(line);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("checkpoint layout: ") + e.what());
    }
    NetworkParams p(layout);
    for (double& v : p.values()) {
        std::string tok;
        if (!(is >> tok)) throw std::runtime_error("checkpoint truncated");
        char* end = nullptr;
        v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw std::runtime_error("bad checkpoint value '" + tok + "'");
    }
    if (!p.all_finite()) throw std::runtime_error("checkpoint contains non-finite parameters");
    return p;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
    std::ostringstream os;
    write_checkpoint(params, os);
    io::atomic_write(path, os.str());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace npm::nn
