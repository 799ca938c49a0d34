#pragma once

// Updated-Lagrangian step for the incompressible Euler equations: boundary
// projection of the network velocities, incremental deformation gradients,
// divergence and pushed-forward pressure gradients, penalty contact, and the
// SSE loss of one time step.
//
// The per-particle operations are templates so the same code runs on double
// and on ad::Var; StepProblem is the batched production path with a
// hand-written adjoint.

#include "npm/irk.hpp"
#include "npm/network.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace npm::core {

enum class Tag : std::uint8_t { interior, wall_left, wall_right, wall_bottom, free_surface };

std::string_view tag_name(Tag t) noexcept;
/// Accepts the names produced by tag_name; throws std::invalid_argument otherwise.
Tag parse_tag(std::string_view name);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Outward wall normal for wall tags, zero otherwise.
Vec2 wall_normal(Tag t) noexcept;

struct FluidProperties {
    double rho = 1.0;
    Vec2 body_accel{0.0, -10.0};

    void validate() const;
};

struct ParticleSet {
    std::vector<Vec2> x;
    std::vector<Vec2> v;
    std::vector<Tag> tag;
    std::vector<double> p;  ///< pressure from the last accepted step

    std::size_t size() const noexcept { return x.size(); }
    void add(Vec2 pos, Vec2 vel, Tag t, double pressure = 0.0);
    std::size_t count(Tag t) const noexcept;
};

/// v = D(x_n) o v_hat with D = (D_x(x), D_y(y)).
struct BoundaryProjection {
    enum class Kind { container, linear, none };
    Kind kind = Kind::none;
    double w = 1.0;
    double h = 1.0;

    double dx(double x) const noexcept;
    double dy(double y) const noexcept;
    double ddx(double x) const noexcept;
    double ddy(double y) const noexcept;
};

/// Closed container: D_x = -4x^2/w^2 + 4x/w, D_y = y/h.
BoundaryProjection distance_functions(double w, double h);
/// D_x = x/w, D_y = y/h.
BoundaryProjection linear_projection(double w, double h);
BoundaryProjection identity_projection() noexcept;

struct WallPlane {
    Vec2 point;
    Vec2 normal;  ///< outward unit normal
};

struct ContactSpec {
    double penalty = 1e7;
    std::vector<WallPlane> walls;

    void validate() const;
};

struct LossWeights {
    double velocity = 1.0;
    double divergence = 1.0;
    double pressure = 1.0;
};

/// Raw sums of squares; total applies the weights (a plain sum for unit weights).
struct LossBreakdown {
    double sse_v = 0.0;
    double sse_div = 0.0;
    double sse_pbar = 0.0;
    double total = 0.0;
};

/// Everything the step loss needs besides the particles and the network.
struct StepContext {
    irk::ButcherTableau tableau;
    double dt = 0.1;
    FluidProperties props;
    BoundaryProjection projection;
    ContactSpec contact;
    LossWeights weights;
    double input_scale = 1.0;
};

/// Thrown when an accepted network would fold the particle configuration
/// (det dF <= 0).
class StepRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- Per-particle algebra ---------------------------------------------------

inline double value_of_any(double v) noexcept { return v; }
template <typename T>
double value_of_any(const T& v) {
    return v.value();
}

template <typename T>
struct V2 {
    T x{};
    T y{};
};

/// Row-major 2x2 matrix [[xx, xy], [yx, yy]].
template <typename T>
struct M2 {
    T xx{}, xy{}, yx{}, yy{};

    static M2 identity() { return {T(1.0), T(0.0), T(0.0), T(1.0)}; }
    T det() const { return xx * yy - xy * yx; }
    T trace() const { return xx + yy; }
};

template <typename T>
M2<T> operator*(const M2<T>& a, const M2<T>& b) {
    return {a.xx * b.xx + a.xy * b.yx, a.xx * b.xy + a.xy * b.yy, a.yx * b.xx + a.yy * b.yx,
            a.yx * b.xy + a.yy * b.yy};
}

/// Throws std::domain_error for a singular matrix.
template <typename T>
M2<T> inverse(const M2<T>& m) {
    const T d = m.det();
    if (value_of_any(d) == 0.0) throw std::domain_error("singular deformation gradient");
    return {m.yy / d, -m.xy / d, -m.yx / d, m.xx / d};
}

template <typename T>
V2<T> project_velocity(const BoundaryProjection& proj, Vec2 x_n, const V2<T>& raw) {
    return {proj.dx(x_n.x) * raw.x, proj.dy(x_n.y) * raw.y};
}

/// Velocity gradient of the projected field by the product rule:
/// dv_c/dx_k = delta_ck D'_c v_hat_c + D_c d v_hat_c / dx_k.
template <typename T>
M2<T> projected_velocity_gradient(const BoundaryProjection& proj, Vec2 x_n, const V2<T>& raw,
                                  const M2<T>& raw_gradient) {
    const double Dx = proj.dx(x_n.x), Dy = proj.dy(x_n.y);
    return {proj.ddx(x_n.x) * raw.x + Dx * raw_gradient.xx, Dx * raw_gradient.xy, Dy * raw_gradient.yx,
            proj.ddy(x_n.y) * raw.y + Dy * raw_gradient.yy};
}

/// Rates dF^i (stages, then the final entry) and the IRK-integrated dF.
template <typename T>
struct Kinematics {
    std::vector<M2<T>> rate;  ///< s + 1 entries
    std::vector<M2<T>> grad;  ///< s + 1 entries: dF^j and dF_{n+1}
};

/// `rates` holds s stage rates followed by the rate of v_{n+1}.
template <typename T>
Kinematics<T> stage_kinematics(const irk::ButcherTableau& tab, double dt, std::vector<M2<T>> rates) {
    const std::size_t s = tab.stages;
    if (rates.size() != s + 1) throw std::invalid_argument("expected s + 1 velocity gradients");
    Kinematics<T> k;
    k.rate = std::move(rates);
    k.grad.resize(s + 1);
    for (std::size_t j = 0; j <= s; ++j) {
        M2<T> sum{T(0.0), T(0.0), T(0.0), T(0.0)};
        for (std::size_t i = 0; i < s; ++i) {
            const double w = (j < s) ? tab.coeff(j, i) : tab.b[i];
            sum.xx = sum.xx + w * k.rate[i].xx;
            sum.xy = sum.xy + w * k.rate[i].xy;
            sum.yx = sum.yx + w * k.rate[i].yx;
            sum.yy = sum.yy + w * k.rate[i].yy;
        }
        k.grad[j] = {T(1.0) + dt * sum.xx, dt * sum.xy, dt * sum.yx, T(1.0) + dt * sum.yy};
    }
    return k;
}

/// tr(dF_rate dF^-1)
template <typename T>
T divergence(const M2<T>& rate, const M2<T>& grad) {
    return (rate * inverse(grad)).trace();
}

/// (dp/dx_n) . dF^-1
template <typename T>
V2<T> pressure_gradient(const V2<T>& reference_gradient, const M2<T>& grad) {
    const M2<T> g = inverse(grad);
    return {reference_gradient.x * g.xx + reference_gradient.y * g.yx,
            reference_gradient.x * g.xy + reference_gradient.y * g.yy};
}

/// a = -grad p / rho + b + f_c
template <typename T>
V2<T> stage_acceleration(const V2<T>& grad_p, const FluidProperties& props, const V2<T>& contact) {
    return {-grad_p.x / props.rho + props.body_accel.x + contact.x,
            -grad_p.y / props.rho + props.body_accel.y + contact.y};
}

/// Penalty force for every penetrated wall: with gap g = (x - x_wall) . n,
/// f = -eps g a(g) n, a(g) = (1 + sign g) / 2. The minus sign makes the force
/// push the particle back inside.
template <typename T>
V2<T> contact_force(const V2<T>& x, const ContactSpec& spec) {
    V2<T> f{T(0.0), T(0.0)};
    for (const WallPlane& wall : spec.walls) {
        const T gap = (x.x - wall.point.x) * wall.normal.x + (x.y - wall.point.y) * wall.normal.y;
        const double gv = value_of_any(gap);
        if (gv <= 0.0) continue;
        const T mag = -spec.penalty * gap;
        f.x = f.x + mag * wall.normal.x;
        f.y = f.y + mag * wall.normal.y;
    }
    return f;
}

/// Raw network outputs of one particle split into physical quantities.
/// Gradients are with respect to the particle's position at t_n.
template <typename T>
struct RawParticleOutput {
    std::vector<V2<T>> velocity;           ///< s stages then v_{n+1}
    std::vector<M2<T>> velocity_gradient;  ///< same layout
    std::vector<T> pressure;               ///< s stages
    std::vector<V2<T>> pressure_gradient;  ///< s stages
};

template <typename T>
struct ParticleLoss {
    T sse_v{};
    T sse_div{};
    T sse_pbar{};
    double min_det = 0.0;
};

/// Loss contribution of one particle.
template <typename T>
ParticleLoss<T> particle_loss(const StepContext& ctx, Vec2 x_n, Vec2 v_n, Tag tag, const RawParticleOutput<T>& raw) {
    const irk::ButcherTableau& tab = ctx.tableau;
    const std::size_t s = tab.stages;
    const double dt = ctx.dt;

    std::vector<V2<T>> v(s + 1);
    std::vector<M2<T>> rates(s + 1);
    for (std::size_t i = 0; i <= s; ++i) {
        v[i] = project_velocity(ctx.projection, x_n, raw.velocity[i]);
        rates[i] = projected_velocity_gradient(ctx.projection, x_n, raw.velocity[i], raw.velocity_gradient[i]);
    }
    const Kinematics<T> kin = stage_kinematics(tab, dt, std::move(rates));

    ParticleLoss<T> out;
    out.sse_v = T(0.0);
    out.sse_div = T(0.0);
    out.sse_pbar = T(0.0);
    out.min_det = value_of_any(kin.grad[0].det());
    for (std::size_t i = 0; i <= s; ++i) {
        out.min_det = std::min(out.min_det, value_of_any(kin.grad[i].det()));
        const T div = divergence(kin.rate[i], kin.grad[i]);
        out.sse_div = out.sse_div + div * div;
    }

    std::vector<V2<T>> acc(s);
    for (std::size_t j = 0; j < s; ++j) {
        V2<T> xs{T(x_n.x), T(x_n.y)};
        for (std::size_t i = 0; i < s; ++i) {
            xs.x = xs.x + dt * tab.coeff(j, i) * v[i].x;
            xs.y = xs.y + dt * tab.coeff(j, i) * v[i].y;
        }
        const V2<T> gp = pressure_gradient(raw.pressure_gradient[j], kin.grad[j]);
        acc[j] = stage_acceleration(gp, ctx.props, contact_force(xs, ctx.contact));
    }
    for (std::size_t j = 0; j <= s; ++j) {
        V2<T> e = v[j];
        for (std::size_t i = 0; i < s; ++i) {
            const double w = (j < s) ? tab.coeff(j, i) : tab.b[i];
            e.x = e.x - dt * w * acc[i].x;
            e.y = e.y - dt * w * acc[i].y;
        }
        e.x = e.x - v_n.x;
        e.y = e.y - v_n.y;
        out.sse_v = out.sse_v + e.x * e.x + e.y * e.y;
    }
    if (tag == Tag::free_surface) {
        for (std::size_t i = 0; i < s; ++i) out.sse_pbar = out.sse_pbar + raw.pressure[i] * raw.pressure[i];
    }
    return out;
}

/// Rearranges one particle's network values and input tangents (physical
/// coordinates) using the fluid output schema.
template <typename T>
RawParticleOutput<T> unpack_outputs(const nn::OutputSchema& schema, std::span<const T> values,
                                    std::span<const T> d_dx, std::span<const T> d_dy) {
    const std::size_t s = schema.stages;
    RawParticleOutput<T> r;
    r.velocity.resize(s + 1);
    r.velocity_gradient.resize(s + 1);
    for (std::size_t i = 0; i <= s; ++i) {
        const std::size_t ix = (i < s) ? schema.velocity_stage(i, 0) : schema.velocity_next(0);
        const std::size_t iy = ix + 1;
        r.velocity[i] = {values[ix], values[iy]};
        r.velocity_gradient[i] = {d_dx[ix], d_dy[ix], d_dx[iy], d_dy[iy]};
    }
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t ip = schema.pressure_stage(i);
        r.pressure.push_back(values[ip]);
        r.pressure_gradient.push_back({d_dx[ip], d_dy[ip]});
    }
    return r;
}

// ---- Batched step problem -------------------------------------------------------

/// Network prediction for one step, per particle.
struct StageSolution {
    std::vector<Vec2> x_next;
    std::vector<Vec2> v_next;
    std::vector<double> p_next;
    std::vector<std::vector<Vec2>> v_stages;  ///< particle -> s stage velocities
    std::vector<std::vector<double>> p_stages;
    double min_det = 0.0;
    std::size_t min_det_particle = 0;
};

/// Loss of one time step over all particles as a function of the network
/// parameters, with its exact gradient.
class StepProblem {
public:
    StepProblem(const ParticleSet& particles, StepContext ctx, nn::NetworkLayout layout);

    std::size_t particles() const noexcept { return n_; }
    const StepContext& context() const noexcept { return ctx_; }
    const nn::NetworkLayout& layout() const noexcept { return layout_; }

    /// Loss at `params`; writes the gradient when `grad` is non-empty.
    double evaluate(const nn::NetworkParams& params, std::span<double> grad);
    /// Components of the last evaluation.
    const LossBreakdown& breakdown() const noexcept { return last_; }
    /// Smallest det dF over all particles and entries in the last evaluation.
    double min_det() const noexcept { return min_det_; }
    std::size_t evaluations() const noexcept { return evaluations_; }

    StageSolution solution(const nn::NetworkParams& params);

private:
    void forward_physics();
    void backward_physics();

    StepContext ctx_;
    nn::NetworkLayout layout_;
    nn::OutputSchema schema_;
    std::size_t n_ = 0;
    std::size_t s_ = 0;

    std::vector<double> xn_, yn_, vxn_, vyn_;
    std::vector<double> Dx_, Dy_, dDx_, dDy_;
    std::vector<double> surface_;  ///< 1 for free-surface particles
    std::vector<double> inputs_;

    // Scaled tableau rows: dtA (s x s), dtb (1 x s).
    std::vector<double> dtA_, dtb_;

    // Stage-major SoA buffers; entry e in [0, s] occupies a contiguous block
    // of comps * n_ doubles with component c at offset c * n_.
    std::vector<double> vhat_, jac_, vel_, rate_, grad_, inv_, det_, div_;
    std::vector<double> pres_, dpres_, gradp_, pos_, force_, acc_, est_;
    std::vector<double> active_;  ///< per stage, particle, wall: contact active mask

    // Adjoints.
    std::vector<double> est_b_, acc_b_, pos_b_, vel_b_, rate_b_, grad_b_, inv_b_, dpres_b_, pres_b_, vhat_b_, jac_b_;

    nn::BatchEvaluator eval_;
    LossBreakdown last_;
    double min_det_ = 0.0;
    std::size_t min_det_index_ = 0;
    std::size_t evaluations_ = 0;
};

/// One-shot convenience: loss components of `params` on `particles`.
LossBreakdown assemble_loss(const ParticleSet& particles, const StepContext& ctx, const nn::NetworkParams& params);

/// Throws StepRejected if any det dF <= 0 in `solution`.
void check_step(const StageSolution& solution, double dt);

/// Installs x_{n+1}, v_{n+1}, p_{n+1}; tags are kept.
void advance_step(ParticleSet& particles, const StageSolution& solution);

/// Moves side-wall particles that come within `delta` of the bottom while
/// moving down onto the bottom wall: the particle travels `delta` along the
/// wall, around the corner, and is re-tagged wall-bottom with its speed turned
/// along the floor. Returns the number of particles moved.
std::size_t slip_relax(ParticleSet& particles, double delta, double right_wall_x);

struct Extents {
    double w;
    double h;
};

/// w = max x over wall-bottom particles, h = max y over wall-left particles.
Extents refresh_extents(const ParticleSet& particles);

}  // namespace npm::core
