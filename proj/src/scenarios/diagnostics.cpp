#include "npm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace npm::scenarios {

std::optional<double> oscillation_period(std::span<const double> t, std::span<const double> a) {
    if (t.size() != a.size()) throw std::invalid_argument("time and amplitude lengths differ");
    std::vector<double> crossings;
    for (std::size_t k = 1; k < a.size(); ++k) {
        const double a0 = a[k - 1], a1 = a[k];
        if ((a0 < 0.0 && a1 >= 0.0) || (a0 > 0.0 && a1 <= 0.0)) {
            if (a1 == 0.0 && k + 1 < a.size() && a[k + 1] * a0 > 0.0) continue;
            const double f = a0 / (a0 - a1);
            crossings.push_back(t[k - 1] + f * (t[k] - t[k - 1]));
        }
    }
    if (crossings.size() < 3) return std::nullopt;
    return 2.0 * (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

std::optional<double> oscillation_period(const std::vector<EnergyRecord>& series) {
    std::vector<double> t, a;
    for (const auto& e : series) {
        t.push_back(e.t);
        a.push_back(e.amplitude);
    }
    return oscillation_period(t, a);
}

double first_mode_amplitude(const core::ParticleSet& particles, double w, double h) {
    std::vector<std::pair<double, double>> s;
    for (std::size_t b = 0; b < particles.size(); ++b) {
        if (particles.tag[b] == core::Tag::free_surface) s.emplace_back(particles.x[b].x, particles.x[b].y - h);
    }
    std::sort(s.begin(), s.end());
    const double k = std::numbers::pi / w;
    double sum = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const auto [x0, e0] = s[i - 1];
        const auto [x1, e1] = s[i];
        sum += 0.5 * (e0 * std::cos(k * x0) + e1 * std::cos(k * x1)) * (x1 - x0);
    }
    return 2.0 * sum / w;
}

double linear_sloshing_period(double g, double w, double h) {
    const double kw = std::numbers::pi / w;
    return 2.0 * std::numbers::pi / std::sqrt(g * kw * std::tanh(kw * h));
}

double pressure_potential_variation(const std::vector<EnergyRecord>& series) {
    if (series.empty()) return 0.0;
    double lo = series.front().pressure + series.front().potential, hi = lo;
    for (const auto& e : series) {
        lo = std::min(lo, e.pressure + e.potential);
        hi = std::max(hi, e.pressure + e.potential);
    }
    return (hi - lo) / std::abs(series.front().pressure + series.front().potential);
}

double total_energy_drift(const std::vector<EnergyRecord>& series) {
    if (series.empty()) return 0.0;
    return (series.back().total - series.front().total) / std::abs(series.front().total);
}

bool kinetic_energy_decays(const std::vector<EnergyRecord>& series) {
    if (series.size() < 3) return false;
    double peak = 0.0;
    std::vector<double> maxima;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double e = series[k].kinetic;
        peak = std::max(peak, e);
        const bool left = k == 0 || series[k - 1].kinetic < e;
        const bool right = k + 1 == series.size() || series[k + 1].kinetic <= e;
        if (left && right && k > 0) maxima.push_back(e);
    }
    if (!(peak > 0.0)) return false;
    for (std::size_t i = 1; i < maxima.size(); ++i) {
        if (!(maxima[i] < maxima[i - 1])) return false;
    }
    return series.back().kinetic < 0.5 * peak;
}

double kinetic_energy_retention(const std::vector<EnergyRecord>& series, double window) {
    if (series.empty()) return 0.0;
    const double t0 = series.front().t, t1 = series.back().t;
    double first = 0.0, last = 0.0;
    for (const auto& e : series) {
        if (e.t <= t0 + window) first = std::max(first, e.kinetic);
        if (e.t >= t1 - window) last = std::max(last, e.kinetic);
    }
    return first > 0.0 ? last / first : 0.0;
}

std::vector<ComparisonRow> compare_front(const std::vector<FrontSample>& front,
                                         const std::vector<std::pair<double, double>>& measured) {
    std::vector<ComparisonRow> rows;
    if (front.empty()) return rows;
    for (const auto& [ts, zm] : measured) {
        if (ts < front.front().t_star || ts > front.back().t_star) continue;
        auto hi = std::lower_bound(front.begin(), front.end(), ts,
                                   [](const FrontSample& f, double v) { return f.t_star < v; });
        double z = hi->z_star;
        if (hi != front.begin() && hi->t_star != ts) {
            const auto lo = std::prev(hi);
            const double f = (ts - lo->t_star) / (hi->t_star - lo->t_star);
            z = lo->z_star + f * (hi->z_star - lo->z_star);
        }
        rows.push_back({ts, zm, z, std::abs(z - zm) / std::abs(zm)});
    }
    return rows;
}

bool front_non_decreasing(const std::vector<FrontSample>& front, double tolerance) {
    for (std::size_t k = 1; k < front.size(); ++k) {
        if (front[k].z_star < front[k - 1].z_star - tolerance) return false;
    }
    return true;
}

}  // namespace npm::scenarios
