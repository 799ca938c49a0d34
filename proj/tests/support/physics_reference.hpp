#pragma once

// Reference loss of a fluid step evaluated particle by particle through the
// generic templates, with the network recorded on a tape via
// forward<Dual<Var, 2>>. Slow, exact, and independent of the batched adjoint.

#include "npm/autodiff.hpp"
#include "npm/network.hpp"
#include "npm/physics.hpp"

#include <vector>

namespace npm::testing {

struct ReferenceLoss {
    double sse_v = 0.0;
    double sse_div = 0.0;
    double sse_pbar = 0.0;
    double total = 0.0;
    std::vector<double> gradient;
};

inline ReferenceLoss reference_loss(const core::ParticleSet& particles, const core::StepContext& ctx,
                                    const nn::NetworkParams& params) {
    using ad::Var;
    using D = ad::Dual<Var, 2>;
    const nn::NetworkLayout& layout = params.layout();
    const auto schema = nn::OutputSchema::fluid_for_width(layout.output_width());
    ReferenceLoss out;
    auto r = ad::value_and_grad(
        [&](ad::Tape&, std::span<const Var> p) {
            std::vector<D> th(p.begin(), p.end());
            Var total = 0.0;
            for (std::size_t b = 0; b < particles.size(); ++b) {
                const D in[] = {D(Var(particles.x[b].x * ctx.input_scale), {Var(ctx.input_scale), Var(0.0)}),
                                D(Var(particles.x[b].y * ctx.input_scale), {Var(0.0), Var(ctx.input_scale)})};
                const auto y = nn::forward<D>(layout, th, in);
                std::vector<Var> val, dx, dy;
                for (const D& d : y) {
                    val.push_back(d.value);
                    dx.push_back(d.tangent[0]);
                    dy.push_back(d.tangent[1]);
                }
                const auto raw = core::unpack_outputs<Var>(schema, val, dx, dy);
                const auto pl = core::particle_loss(ctx, particles.x[b], particles.v[b], particles.tag[b], raw);
                out.sse_v += pl.sse_v.value();
                out.sse_div += pl.sse_div.value();
                out.sse_pbar += pl.sse_pbar.value();
                total = total + ctx.weights.velocity * pl.sse_v + ctx.weights.divergence * pl.sse_div +
                        ctx.weights.pressure * pl.sse_pbar;
            }
            return total;
        },
        params.values());
    out.total = r.value;
    out.gradient = std::move(r.gradient);
    return out;
}

}  // namespace npm::testing
