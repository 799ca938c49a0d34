#include "npm/physics.hpp"

#include "npm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace npm::core {

std::string_view tag_name(Tag t) noexcept {
    switch (t) {
        case Tag::interior: return "interior";
        case Tag::wall_left: return "wall-left";
        case Tag::wall_right: return "wall-right";
        case Tag::wall_bottom: return "wall-bottom";
        case Tag::free_surface: return "free-surface";
    }
    return "interior";
}

Tag parse_tag(std::string_view name) {
    for (Tag t : {Tag::interior, Tag::wall_left, Tag::wall_right, Tag::wall_bottom, Tag::free_surface}) {
        if (tag_name(t) == name) return t;
    }
    throw std::invalid_argument("unknown particle tag '" + std::string(name) + "'");
}

Vec2 wall_normal(Tag t) noexcept {
    switch (t) {
        case Tag::wall_left: return {-1.0, 0.0};
        case Tag::wall_right: return {1.0, 0.0};
        case Tag::wall_bottom: return {0.0, -1.0};
        default: return {0.0, 0.0};
    }
}

void FluidProperties::validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("density must be positive");
}

void ParticleSet::add(Vec2 pos, Vec2 vel, Tag t, double pressure) {
    x.push_back(pos);
    v.push_back(vel);
    tag.push_back(t);
    p.push_back(pressure);
}

std::size_t ParticleSet::count(Tag t) const noexcept {
    return static_cast<std::size_t>(std::count(tag.begin(), tag.end(), t));
}

double BoundaryProjection::dx(double x) const noexcept {
    switch (kind) {
        case Kind::container: {
            const double r = x / w;
            return -4.0 * r * r + 4.0 * r;
        }
        case Kind::linear: return x / w;
        case Kind::none: return 1.0;
    }
    return 1.0;
}

double BoundaryProjection::ddx(double x) const noexcept {
    switch (kind) {
        case Kind::container: return -8.0 * x / (w * w) + 4.0 / w;
        case Kind::linear: return 1.0 / w;
        case Kind::none: return 0.0;
    }
    return 0.0;
}

double BoundaryProjection::dy(double y) const noexcept { return kind == Kind::none ? 1.0 : y / h; }
double BoundaryProjection::ddy(double) const noexcept { return kind == Kind::none ? 0.0 : 1.0 / h; }

BoundaryProjection distance_functions(double w, double h) {
    if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("domain extents must be positive");
    return {BoundaryProjection::Kind::container, w, h};
}

BoundaryProjection linear_projection(double w, double h) {
    if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("domain extents must be positive");
    return {BoundaryProjection::Kind::linear, w, h};
}

BoundaryProjection identity_projection() noexcept { return {BoundaryProjection::Kind::none, 1.0, 1.0}; }

void ContactSpec::validate() const {
    if (!(penalty > 0.0)) throw std::invalid_argument("contact penalty must be positive");
    for (const WallPlane& w : walls) {
        const double n = std::hypot(w.normal.x, w.normal.y);
        if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument("wall normal must be unit length");
    }
}

// ---- StepProblem ------------------------------------------------------------------

namespace {

// Component offsets inside 2x2 blocks.
constexpr std::size_t XX = 0, XY = 1, YX = 2, YY = 3;

}  // namespace

StepProblem::StepProblem(const ParticleSet& particles, StepContext ctx, nn::NetworkLayout layout)
    : ctx_(std::move(ctx)),
      layout_(std::move(layout)),
      schema_(nn::OutputSchema::fluid_for_width(layout_.output_width())),
      n_(particles.size()),
      s_(ctx_.tableau.stages),
      eval_(layout_, std::max<std::size_t>(particles.size(), 1), 2) {
    if (n_ == 0) throw std::invalid_argument("no particles");
    if (layout_.input_width() != 2) throw std::invalid_argument("fluid network needs two inputs");
    if (schema_.stages != s_) {
        throw std::invalid_argument("network has " + std::to_string(schema_.stages) + " stages but tableau has " +
                                    std::to_string(s_));
    }
    if (!(ctx_.dt > 0.0)) throw std::invalid_argument("time step must be positive");
    ctx_.props.validate();
    if (!ctx_.contact.walls.empty()) ctx_.contact.validate();

    const std::size_t n = n_, s = s_, E = s + 1;
    xn_.resize(n);
    yn_.resize(n);
    vxn_.resize(n);
    vyn_.resize(n);
    Dx_.resize(n);
    Dy_.resize(n);
    dDx_.resize(n);
    dDy_.resize(n);
    surface_.resize(n);
    inputs_.resize(2 * n);
    for (std::size_t b = 0; b < n; ++b) {
        xn_[b] = particles.x[b].x;
        yn_[b] = particles.x[b].y;
        vxn_[b] = particles.v[b].x;
        vyn_[b] = particles.v[b].y;
        Dx_[b] = ctx_.projection.dx(xn_[b]);
        Dy_[b] = ctx_.projection.dy(yn_[b]);
        dDx_[b] = ctx_.projection.ddx(xn_[b]);
        dDy_[b] = ctx_.projection.ddy(yn_[b]);
        surface_[b] = particles.tag[b] == Tag::free_surface ? 1.0 : 0.0;
        inputs_[2 * b] = xn_[b];
        inputs_[2 * b + 1] = yn_[b];
    }

    dtA_.resize(s * s);
    dtb_.resize(s);
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t i = 0; i < s; ++i) dtA_[j * s + i] = ctx_.dt * ctx_.tableau.coeff(j, i);
        dtb_[j] = ctx_.dt * ctx_.tableau.b[j];
    }

    const std::size_t walls = ctx_.contact.walls.size();
    for (auto* v : {&vhat_, &vel_, &est_, &vhat_b_, &vel_b_, &est_b_}) v->assign(E * 2 * n, 0.0);
    for (auto* v : {&jac_, &rate_, &grad_, &inv_, &jac_b_, &rate_b_, &grad_b_, &inv_b_}) v->assign(E * 4 * n, 0.0);
    for (auto* v : {&det_, &div_}) v->assign(E * n, 0.0);
    for (auto* v : {&pres_, &pres_b_}) v->assign(s * n, 0.0);
    for (auto* v : {&dpres_, &gradp_, &pos_, &force_, &acc_, &dpres_b_, &acc_b_, &pos_b_}) v->assign(s * 2 * n, 0.0);
    active_.assign(s * n * std::max<std::size_t>(walls, 1), 0.0);
}

void StepProblem::forward_physics() {
    const std::size_t n = n_, s = s_, E = s + 1, W = layout_.output_width();
    const simd::KernelTable& k = simd::kernels();
    const auto Y = eval_.values();
    const auto T0 = eval_.tangents(0);
    const auto T1 = eval_.tangents(1);

    for (std::size_t i = 0; i < E; ++i) {
        const std::size_t col = (i < s) ? schema_.velocity_stage(i, 0) : schema_.velocity_next(0);
        double* vh = vhat_.data() + i * 2 * n;
        double* jc = jac_.data() + i * 4 * n;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t r = b * W + col;
            vh[b] = Y[r];
            vh[n + b] = Y[r + 1];
            jc[XX * n + b] = T0[r];
            jc[XY * n + b] = T1[r];
            jc[YX * n + b] = T0[r + 1];
            jc[YY * n + b] = T1[r + 1];
        }
    }
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t col = schema_.pressure_stage(i);
        double* p = pres_.data() + i * n;
        double* dp = dpres_.data() + i * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            p[b] = Y[b * W + col];
            dp[b] = T0[b * W + col];
            dp[n + b] = T1[b * W + col];
        }
    }

    // Projection and product rule.
    for (std::size_t i = 0; i < E; ++i) {
        const double* vh = vhat_.data() + i * 2 * n;
        const double* jc = jac_.data() + i * 4 * n;
        double* v = vel_.data() + i * 2 * n;
        double* rt = rate_.data() + i * 4 * n;
        for (std::size_t b = 0; b < n; ++b) {
            v[b] = Dx_[b] * vh[b];
            v[n + b] = Dy_[b] * vh[n + b];
            rt[XX * n + b] = dDx_[b] * vh[b] + Dx_[b] * jc[XX * n + b];
            rt[XY * n + b] = Dx_[b] * jc[XY * n + b];
            rt[YX * n + b] = Dy_[b] * jc[YX * n + b];
            rt[YY * n + b] = dDy_[b] * vh[n + b] + Dy_[b] * jc[YY * n + b];
        }
    }

    // dF^j = 1 + dt sum_i a_ji rate^i, dF_{n+1} = 1 + dt sum_i b_i rate^i.
    k.gemm_nn(s, 4 * n, s, dtA_.data(), s, rate_.data(), 4 * n, grad_.data(), 4 * n, false);
    k.gemm_nn(1, 4 * n, s, dtb_.data(), s, rate_.data(), 4 * n, grad_.data() + s * 4 * n, 4 * n, false);

    min_det_ = std::numeric_limits<double>::infinity();
    min_det_index_ = 0;
    for (std::size_t i = 0; i < E; ++i) {
        double* g = grad_.data() + i * 4 * n;
        double* gi = inv_.data() + i * 4 * n;
        const double* rt = rate_.data() + i * 4 * n;
        double* dt = det_.data() + i * n;
        double* dv = div_.data() + i * n;
        for (std::size_t b = 0; b < n; ++b) {
            g[XX * n + b] += 1.0;
            g[YY * n + b] += 1.0;
            const double a = g[XX * n + b], bb = g[XY * n + b], c = g[YX * n + b], d = g[YY * n + b];
            const double det = a * d - bb * c;
            dt[b] = det;
            if (det < min_det_) {
                min_det_ = det;
                min_det_index_ = b;
            }
            const double r = 1.0 / det;
            gi[XX * n + b] = d * r;
            gi[XY * n + b] = -bb * r;
            gi[YX * n + b] = -c * r;
            gi[YY * n + b] = a * r;
            dv[b] = rt[XX * n + b] * gi[XX * n + b] + rt[XY * n + b] * gi[YX * n + b] +
                    rt[YX * n + b] * gi[XY * n + b] + rt[YY * n + b] * gi[YY * n + b];
        }
    }

    // Pushed-forward pressure gradients and stage positions.
    for (std::size_t j = 0; j < s; ++j) {
        const double* dp = dpres_.data() + j * 2 * n;
        const double* gi = inv_.data() + j * 4 * n;
        double* gp = gradp_.data() + j * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            gp[b] = dp[b] * gi[XX * n + b] + dp[n + b] * gi[YX * n + b];
            gp[n + b] = dp[b] * gi[XY * n + b] + dp[n + b] * gi[YY * n + b];
        }
    }
    k.gemm_nn(s, 2 * n, s, dtA_.data(), s, vel_.data(), 2 * n, pos_.data(), 2 * n, false);
    const auto& walls = ctx_.contact.walls;
    const double eps = ctx_.contact.penalty;
    const double inv_rho = 1.0 / ctx_.props.rho;
    const Vec2 body = ctx_.props.body_accel;
    for (std::size_t j = 0; j < s; ++j) {
        double* x = pos_.data() + j * 2 * n;
        double* f = force_.data() + j * 2 * n;
        double* a = acc_.data() + j * 2 * n;
        const double* gp = gradp_.data() + j * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            x[b] += xn_[b];
            x[n + b] += yn_[b];
            double fx = 0.0, fy = 0.0;
            for (std::size_t w = 0; w < walls.size(); ++w) {
                const WallPlane& wall = walls[w];
                const double gap = (x[b] - wall.point.x) * wall.normal.x + (x[n + b] - wall.point.y) * wall.normal.y;
                const bool on = gap > 0.0;
                active_[(j * n + b) * walls.size() + w] = on ? 1.0 : 0.0;
                if (on) {
                    fx -= eps * gap * wall.normal.x;
                    fy -= eps * gap * wall.normal.y;
                }
            }
            f[b] = fx;
            f[n + b] = fy;
            a[b] = -gp[b] * inv_rho + body.x + fx;
            a[n + b] = -gp[n + b] * inv_rho + body.y + fy;
        }
    }

    // Velocity estimates minus v_n.
    std::copy(vel_.begin(), vel_.end(), est_.begin());
    for (std::size_t j = 0; j < E; ++j) {
        double* e = est_.data() + j * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            e[b] -= vxn_[b];
            e[n + b] -= vyn_[b];
        }
    }
    // est -= dtA acc (stages), est_s -= dtb acc; done via a negated copy of acc.
    std::vector<double>& neg = acc_b_;  // scratch, overwritten in backward
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -acc_[i];
    k.gemm_nn(s, 2 * n, s, dtA_.data(), s, neg.data(), 2 * n, est_.data(), 2 * n, true);
    k.gemm_nn(1, 2 * n, s, dtb_.data(), s, neg.data(), 2 * n, est_.data() + s * 2 * n, 2 * n, true);

    LossBreakdown lb;
    for (double e : est_) lb.sse_v += e * e;
    for (double d : div_) lb.sse_div += d * d;
    for (std::size_t i = 0; i < s; ++i) {
        const double* p = pres_.data() + i * n;
        for (std::size_t b = 0; b < n; ++b) lb.sse_pbar += surface_[b] * p[b] * p[b];
    }
    lb.total = ctx_.weights.velocity * lb.sse_v + ctx_.weights.divergence * lb.sse_div +
               ctx_.weights.pressure * lb.sse_pbar;
    last_ = lb;
}

void StepProblem::backward_physics() {
    const std::size_t n = n_, s = s_, E = s + 1, W = layout_.output_width();
    const simd::KernelTable& k = simd::kernels();
    const double wv = ctx_.weights.velocity, wd = ctx_.weights.divergence, wp = ctx_.weights.pressure;

    for (std::size_t i = 0; i < est_.size(); ++i) est_b_[i] = 2.0 * wv * est_[i];
    std::copy(est_b_.begin(), est_b_.end(), vel_b_.begin());

    // acc_b = -(dtA)^T est_b[stages] - dtb^T est_b[s]
    std::fill(pos_b_.begin(), pos_b_.end(), 0.0);
    k.gemm_tn(s, 2 * n, s, dtA_.data(), s, est_b_.data(), 2 * n, pos_b_.data(), 2 * n);
    k.gemm_tn(s, 2 * n, 1, dtb_.data(), s, est_b_.data() + s * 2 * n, 2 * n, pos_b_.data(), 2 * n);
    for (std::size_t i = 0; i < acc_b_.size(); ++i) acc_b_[i] = -pos_b_[i];

    // Contact: x_b = -eps a(g) n (n . f_b); stage positions feed back into velocities.
    const auto& walls = ctx_.contact.walls;
    const double eps = ctx_.contact.penalty;
    std::fill(pos_b_.begin(), pos_b_.end(), 0.0);
    if (!walls.empty()) {
        for (std::size_t j = 0; j < s; ++j) {
            const double* fb = acc_b_.data() + j * 2 * n;
            double* xb = pos_b_.data() + j * 2 * n;
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t w = 0; w < walls.size(); ++w) {
                    if (active_[(j * n + b) * walls.size() + w] == 0.0) continue;
                    const Vec2 nn = walls[w].normal;
                    const double proj = nn.x * fb[b] + nn.y * fb[n + b];
                    xb[b] -= eps * proj * nn.x;
                    xb[n + b] -= eps * proj * nn.y;
                }
            }
        }
        k.gemm_tn(s, 2 * n, s, dtA_.data(), s, pos_b_.data(), 2 * n, vel_b_.data(), 2 * n);
    }

    // Pressure gradient: gp_m = sum_k P_k G_km.
    std::fill(inv_b_.begin(), inv_b_.end(), 0.0);
    const double inv_rho = 1.0 / ctx_.props.rho;
    for (std::size_t j = 0; j < s; ++j) {
        const double* ab = acc_b_.data() + j * 2 * n;
        const double* dp = dpres_.data() + j * 2 * n;
        const double* gi = inv_.data() + j * 4 * n;
        double* dpb = dpres_b_.data() + j * 2 * n;
        double* gib = inv_b_.data() + j * 4 * n;
        for (std::size_t b = 0; b < n; ++b) {
            const double gbx = -ab[b] * inv_rho, gby = -ab[n + b] * inv_rho;
            dpb[b] = gbx * gi[XX * n + b] + gby * gi[XY * n + b];
            dpb[n + b] = gbx * gi[YX * n + b] + gby * gi[YY * n + b];
            gib[XX * n + b] += dp[b] * gbx;
            gib[XY * n + b] += dp[b] * gby;
            gib[YX * n + b] += dp[n + b] * gbx;
            gib[YY * n + b] += dp[n + b] * gby;
        }
    }

    // Divergence tr(R G), then G = F^-1 -> F_b = -G^T G_b G^T.
    for (std::size_t i = 0; i < E; ++i) {
        const double* rt = rate_.data() + i * 4 * n;
        const double* gi = inv_.data() + i * 4 * n;
        const double* dv = div_.data() + i * n;
        double* rb = rate_b_.data() + i * 4 * n;
        double* gib = inv_b_.data() + i * 4 * n;
        double* fb = grad_b_.data() + i * 4 * n;
        for (std::size_t b = 0; b < n; ++b) {
            const double delta = 2.0 * wd * dv[b];
            rb[XX * n + b] = delta * gi[XX * n + b];
            rb[XY * n + b] = delta * gi[YX * n + b];
            rb[YX * n + b] = delta * gi[XY * n + b];
            rb[YY * n + b] = delta * gi[YY * n + b];
            const double gxx = gib[XX * n + b] + delta * rt[XX * n + b];
            const double gxy = gib[XY * n + b] + delta * rt[YX * n + b];
            const double gyx = gib[YX * n + b] + delta * rt[XY * n + b];
            const double gyy = gib[YY * n + b] + delta * rt[YY * n + b];
            const double Gxx = gi[XX * n + b], Gxy = gi[XY * n + b], Gyx = gi[YX * n + b], Gyy = gi[YY * n + b];
            // M = G_b G^T
            const double mxx = gxx * Gxx + gxy * Gxy, mxy = gxx * Gyx + gxy * Gyy;
            const double myx = gyx * Gxx + gyy * Gxy, myy = gyx * Gyx + gyy * Gyy;
            // F_b = -G^T M
            fb[XX * n + b] = -(Gxx * mxx + Gyx * myx);
            fb[XY * n + b] = -(Gxx * mxy + Gyx * myy);
            fb[YX * n + b] = -(Gxy * mxx + Gyy * myx);
            fb[YY * n + b] = -(Gxy * mxy + Gyy * myy);
        }
    }
    k.gemm_tn(s, 4 * n, s, dtA_.data(), s, grad_b_.data(), 4 * n, rate_b_.data(), 4 * n);
    k.gemm_tn(s, 4 * n, 1, dtb_.data(), s, grad_b_.data() + s * 4 * n, 4 * n, rate_b_.data(), 4 * n);

    // Product rule and projection back to raw outputs.
    auto Vb = eval_.value_adjoint();
    auto T0b = eval_.tangent_adjoint(0);
    auto T1b = eval_.tangent_adjoint(1);
    std::fill(Vb.begin(), Vb.end(), 0.0);
    std::fill(T0b.begin(), T0b.end(), 0.0);
    std::fill(T1b.begin(), T1b.end(), 0.0);
    for (std::size_t i = 0; i < E; ++i) {
        const std::size_t col = (i < s) ? schema_.velocity_stage(i, 0) : schema_.velocity_next(0);
        const double* rb = rate_b_.data() + i * 4 * n;
        const double* vb = vel_b_.data() + i * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t r = b * W + col;
            Vb[r] = dDx_[b] * rb[XX * n + b] + Dx_[b] * vb[b];
            Vb[r + 1] = dDy_[b] * rb[YY * n + b] + Dy_[b] * vb[n + b];
            T0b[r] = Dx_[b] * rb[XX * n + b];
            T1b[r] = Dx_[b] * rb[XY * n + b];
            T0b[r + 1] = Dy_[b] * rb[YX * n + b];
            T1b[r + 1] = Dy_[b] * rb[YY * n + b];
        }
    }
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t col = schema_.pressure_stage(i);
        const double* p = pres_.data() + i * n;
        const double* dpb = dpres_b_.data() + i * 2 * n;
        for (std::size_t b = 0; b < n; ++b) {
            Vb[b * W + col] = 2.0 * wp * surface_[b] * p[b];
            T0b[b * W + col] = dpb[b];
            T1b[b * W + col] = dpb[n + b];
        }
    }
}

double StepProblem::evaluate(const nn::NetworkParams& params, std::span<double> grad) {
    ++evaluations_;
    eval_.forward(params, inputs_, ctx_.input_scale);
    forward_physics();
    if (!grad.empty()) {
        if (grad.size() != params.size()) throw std::invalid_argument("gradient length mismatch");
        std::fill(grad.begin(), grad.end(), 0.0);
        backward_physics();
        eval_.backward(params, grad);
    }
    return last_.total;
}

StageSolution StepProblem::solution(const nn::NetworkParams& params) {
    evaluate(params, {});
    const std::size_t n = n_, s = s_;
    StageSolution sol;
    sol.x_next.resize(n);
    sol.v_next.resize(n);
    sol.p_next.assign(n, 0.0);
    sol.v_stages.assign(n, std::vector<Vec2>(s));
    sol.p_stages.assign(n, std::vector<double>(s));
    for (std::size_t b = 0; b < n; ++b) {
        double dx = 0.0, dy = 0.0, p = 0.0;
        for (std::size_t j = 0; j < s; ++j) {
            const double vx = vel_[j * 2 * n + b], vy = vel_[j * 2 * n + n + b];
            sol.v_stages[b][j] = {vx, vy};
            sol.p_stages[b][j] = pres_[j * n + b];
            dx += dtb_[j] * vx;
            dy += dtb_[j] * vy;
            p += ctx_.tableau.b[j] * pres_[j * n + b];
        }
        sol.x_next[b] = {xn_[b] + dx, yn_[b] + dy};
        sol.v_next[b] = {vel_[s * 2 * n + b], vel_[s * 2 * n + n + b]};
        sol.p_next[b] = p;
    }
    sol.min_det = min_det_;
    sol.min_det_particle = min_det_index_;
    return sol;
}

LossBreakdown assemble_loss(const ParticleSet& particles, const StepContext& ctx, const nn::NetworkParams& params) {
    StepProblem problem(particles, ctx, params.layout());
    problem.evaluate(params, {});
    return problem.breakdown();
}

void check_step(const StageSolution& solution, double dt) {
    if (!(solution.min_det > 0.0)) {
        std::ostringstream msg;
        msg << "step rejected: det dF = " << solution.min_det << " <= 0 at particle " << solution.min_det_particle
            << "; reduce the time step (dt = " << dt << ")";
        throw StepRejected(msg.str());
    }
}

void advance_step(ParticleSet& particles, const StageSolution& solution) {
    if (solution.x_next.size() != particles.size()) throw std::invalid_argument("solution size mismatch");
    for (std::size_t b = 0; b < particles.size(); ++b) {
        particles.x[b] = solution.x_next[b];
        particles.v[b] = solution.v_next[b];
        particles.p[b] = solution.p_next[b];
    }
}

std::size_t slip_relax(ParticleSet& particles, double delta, double right_wall_x) {
    if (!(delta > 0.0)) return 0;
    std::size_t moved = 0;
    for (std::size_t b = 0; b < particles.size(); ++b) {
        const Tag t = particles.tag[b];
        if (t != Tag::wall_left && t != Tag::wall_right) continue;
        Vec2& x = particles.x[b];
        Vec2& v = particles.v[b];
        if (!(x.y < delta) || !(v.y < 0.0)) continue;
        const double along = delta - x.y;
        const double speed = std::hypot(v.x, v.y);
        if (t == Tag::wall_left) {
            x = {along, 0.0};
            v = {speed, 0.0};
        } else {
            x = {right_wall_x - along, 0.0};
            v = {-speed, 0.0};
        }
        particles.tag[b] = Tag::wall_bottom;
        ++moved;
    }
    return moved;
}

Extents refresh_extents(const ParticleSet& particles) {
    double w = -std::numeric_limits<double>::infinity();
    double h = -std::numeric_limits<double>::infinity();
    std::size_t nb = 0, nl = 0;
    for (std::size_t b = 0; b < particles.size(); ++b) {
        if (particles.tag[b] == Tag::wall_bottom) {
            w = std::max(w, particles.x[b].x);
            ++nb;
        } else if (particles.tag[b] == Tag::wall_left) {
            h = std::max(h, particles.x[b].y);
            ++nl;
        }
    }
    if (nb == 0) throw std::invalid_argument("no wall-bottom particles to measure the width");
    if (nl == 0) throw std::invalid_argument("no wall-left particles to measure the height");
    if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("degenerate fluid extents");
    return {w, h};
}

}  // namespace npm::core
