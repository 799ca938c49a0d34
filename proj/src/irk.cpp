#include "npm/irk.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>

namespace npm::irk {
namespace {

struct LegendreValue {
    double p;
    double dp;
};

// P_n(x) and P_n'(x) by the three-term recurrence.
LegendreValue legendre(std::size_t n, double x) {
    double p0 = 1.0;
    double p1 = x;
    if (n == 0) return {1.0, 0.0};
    for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
    }
    const double dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

}  // namespace

ButcherTableau gauss_legendre(std::size_t s) {
    if (s < 1 || s > 100) throw std::invalid_argument("stage count must be in [1, 100]");

    // Roots on (-1, 1) by Newton iteration from Chebyshev points.
    std::vector<double> x(s);
    std::vector<double> w(s);
    for (std::size_t i = 0; i < s; ++i) {
        double xi = std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(s)));
        bool converged = false;
        LegendreValue lv{};
        for (int it = 0; it < 100; ++it) {
            lv = legendre(s, xi);
            const double step = lv.p / lv.dp;
            xi -= step;
            if (std::abs(step) < 1e-16) {
                converged = true;
                break;
            }
        }
        lv = legendre(s, xi);
        if (!converged && std::abs(lv.p) >= 1e-14) {
            throw std::runtime_error("Legendre root iteration did not converge for s = " + std::to_string(s));
        }
        x[i] = xi;
        w[i] = 2.0 / ((1.0 - xi * xi) * lv.dp * lv.dp);
    }

    ButcherTableau tab;
    tab.stages = s;
    std::vector<std::size_t> order(s);
    for (std::size_t i = 0; i < s; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
    for (std::size_t i : order) {
        tab.c.push_back(0.5 * (1.0 + x[i]));
        tab.b.push_back(0.5 * w[i]);
    }
    for (std::size_t i = 1; i < s; ++i) {
        if (!(tab.c[i] > tab.c[i - 1])) throw std::runtime_error("Legendre roots not distinct");
    }

    // Barycentric weights of the Lagrange basis on the nodes c.
    std::vector<double> bary(s, 1.0);
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t m = 0; m < s; ++m) {
            if (m != i) bary[i] /= (tab.c[i] - tab.c[m]);
        }
    }
    auto lagrange = [&](double tau, std::vector<double>& ell) {
        for (std::size_t i = 0; i < s; ++i) {
            if (tau == tab.c[i]) {
                std::fill(ell.begin(), ell.end(), 0.0);
                ell[i] = 1.0;
                return;
            }
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            ell[i] = bary[i] / (tau - tab.c[i]);
            denom += ell[i];
        }
        for (double& e : ell) e /= denom;
    };

    // a^{ji} = int_0^{c_j} l_i, integrated exactly by the s-point rule on [0, c_j].
    tab.a.assign(s * s, 0.0);
    std::vector<double> ell(s);
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t k = 0; k < s; ++k) {
            lagrange(tab.c[j] * tab.c[k], ell);
            const double weight = tab.c[j] * tab.b[k];
            for (std::size_t i = 0; i < s; ++i) tab.a[j * s + i] += weight * ell[i];
        }
    }
    return tab;
}

void dump(const ButcherTableau& tab, std::ostream& os) {
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(17);
    os << "stages " << tab.stages << '\n';
    os << "c";
    for (double v : tab.c) os << ' ' << v;
    os << "\nb";
    for (double v : tab.b) os << ' ' << v;
    os << '\n';
    for (std::size_t j = 0; j < tab.stages; ++j) {
        os << "a" << j + 1;
        for (std::size_t i = 0; i < tab.stages; ++i) os << ' ' << tab.coeff(j, i);
        os << '\n';
    }
    os.flags(old_flags);
    os.precision(old_prec);
}

}  // namespace npm::irk
