#pragma once

// Feed-forward ansatz: tanh hidden layers, affine output layer. The
// parameter vector is flat so optimizers can treat it as one array; layer
// views index into it.

#include "npm/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace npm::nn {

struct NetworkLayout {
    std::vector<std::size_t> sizes;

    /// Throws std::invalid_argument on fewer than two layers or a zero width.
    void validate() const;

    std::size_t num_layers() const noexcept { return sizes.empty() ? 0 : sizes.size() - 1; }
    std::size_t input_width() const { return sizes.front(); }
    std::size_t output_width() const { return sizes.back(); }
    std::size_t parameter_count() const;

    /// "2,60,60,62" or "[2, 60, 60, 62]"
    static NetworkLayout parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const NetworkLayout&) const = default;
};

class NetworkParams {
public:
    NetworkParams() = default;
    explicit NetworkParams(NetworkLayout layout);

    const NetworkLayout& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    /// Layer l in [0, num_layers): W is sizes[l+1] x sizes[l], row-major.
    std::span<const double> weights(std::size_t l) const;
    std::span<double> weights(std::size_t l);
    std::span<const double> bias(std::size_t l) const;
    std::span<double> bias(std::size_t l);
    std::size_t weight_offset(std::size_t l) const { return offsets_.at(l); }
    std::size_t bias_offset(std::size_t l) const;

    bool all_finite() const noexcept;

private:
    NetworkLayout layout_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

/// Glorot-uniform weights in +-sqrt(6 / (n_in + n_out)), zero biases.
NetworkParams init(const NetworkLayout& layout, std::uint64_t seed);

/// Single-point evaluation for any scalar type (double, ad::Var, ad::Dual<...>).
template <typename T>
std::vector<T> forward(const NetworkLayout& layout, std::span<const T> params, std::span<const T> x) {
    using std::tanh;
    if (x.size() != layout.input_width()) throw std::invalid_argument("network input dimension mismatch");
    if (params.size() != layout.parameter_count()) throw std::invalid_argument("parameter count mismatch");
    std::vector<T> h(x.begin(), x.end());
    std::size_t offset = 0;
    const std::size_t layers = layout.num_layers();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t n_in = layout.sizes[l];
        const std::size_t n_out = layout.sizes[l + 1];
        const std::size_t b_off = offset + n_in * n_out;
        std::vector<T> z(n_out);
        for (std::size_t o = 0; o < n_out; ++o) {
            T acc = params[b_off + o];
            for (std::size_t i = 0; i < n_in; ++i) acc = acc + params[offset + o * n_in + i] * h[i];
            z[o] = (l + 1 < layers) ? tanh(acc) : acc;
        }
        h = std::move(z);
        offset = b_off + n_out;
    }
    return h;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> x);

/// Which output neurons hold velocity stages, the next velocity and the
/// pressure stages.
struct OutputSchema {
    std::size_t stages = 0;
    std::size_t dim = 0;
    bool pressure = false;

    static OutputSchema fluid(std::size_t stages, std::size_t dim = 2) { return {stages, dim, true}; }
    static OutputSchema ode(std::size_t stages) { return {stages, 1, false}; }
    /// Stage count of the fluid schema with the given width; throws if none fits.
    static OutputSchema fluid_for_width(std::size_t width, std::size_t dim = 2);

    std::size_t width() const noexcept { return dim * (stages + 1) + (pressure ? stages : 0); }
    std::size_t velocity_stage(std::size_t i, std::size_t c) const noexcept { return i * dim + c; }
    std::size_t velocity_next(std::size_t c) const noexcept { return stages * dim + c; }
    std::size_t pressure_stage(std::size_t i) const noexcept { return dim * (stages + 1) + i; }
};

struct StageOutputs {
    std::vector<double> velocity_stages;  ///< stages x dim
    std::vector<double> velocity_next;    ///< dim
    std::vector<double> pressure_stages;  ///< stages (empty for the ODE schema)
};

StageOutputs split(std::span<const double> output, const OutputSchema& schema);
std::vector<double> reassemble(const StageOutputs& parts, const OutputSchema& schema);

/// Batched forward-over-reverse evaluation of the network.
///
/// Rows are stacked as [values; d/dx_0; d/dx_1; ...], one row per particle in
/// each block, so every layer is a single GEMM over all rows. Inputs are fed
/// as x * input_scale; tangents are reported with respect to the unscaled x.
class BatchEvaluator {
public:
    BatchEvaluator(NetworkLayout layout, std::size_t batch, std::size_t directions);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t directions() const noexcept { return directions_; }
    const NetworkLayout& layout() const noexcept { return layout_; }

    /// `inputs` is batch x input_width, row-major. Clears the output adjoints.
    void forward(const NetworkParams& params, std::span<const double> inputs, double input_scale = 1.0);

    /// batch x output_width
    std::span<const double> values() const;
    /// d(output)/d(x_k), batch x output_width
    std::span<const double> tangents(std::size_t k) const;

    /// Adjoint buffers matching values() and tangents(k); fill before backward().
    std::span<double> value_adjoint();
    std::span<double> tangent_adjoint(std::size_t k);

    /// Accumulates the parameter gradient of sum(adjoint * output) into `gradient`.
    void backward(const NetworkParams& params, std::span<double> gradient);

private:
    std::size_t rows() const noexcept { return batch_ * (1 + directions_); }

    NetworkLayout layout_;
    std::size_t batch_;
    std::size_t directions_;
    std::vector<std::vector<double>> act_;   // per layer 0..L: rows x width
    std::vector<std::vector<double>> zdot_;  // hidden layers: pre-activation tangents
    std::vector<std::vector<double>> wt_;    // transposed weights per layer
    std::vector<double> adj_;
    std::vector<double> adj_prev_;
    const simd::KernelTable* kern_ = nullptr;
};

/// Text checkpoint: header line, layout line, then one %.17g value per line
/// in the flat parameter order (layer by layer, W row-major then b).
void write_checkpoint(const NetworkParams& params, std::ostream& os);
NetworkParams read_checkpoint(std::istream& is);
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace npm::nn
