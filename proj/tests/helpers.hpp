#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hv/core.hpp"
#include "hv/flow.hpp"

// Shared builders for the test suites. Random objects are seeded per test
// so failures reproduce.

namespace hvtest {

inline constexpr double kPi = 3.14159265358979323846;

/// Smooth random signal: a handful of low-frequency Fourier modes.
inline hv::Signal random_smooth_signal(const hv::Grid& g, std::mt19937& rng, double amplitude = 1.0,
                                       int modes = 4) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::vector<double> a(modes + 1), b(modes + 1);
    for (int m = 0; m <= modes; ++m) {
        a[m] = coef(rng);
        b[m] = coef(rng);
    }
    hv::Signal s(g.nx + 1);
    for (int i = 0; i <= g.nx; ++i) {
        const double x = g.x(i);
        double v = 0.5 * a[0];
        for (int m = 1; m <= modes; ++m)
            v += a[m] * std::cos(2.0 * kPi * m * x) / m + b[m] * std::sin(2.0 * kPi * m * x) / m;
        s[i] = amplitude * v;
    }
    return s;
}

/// Jagged random signal: independent uniform samples.
inline hv::Signal random_rough_signal(const hv::Grid& g, std::mt19937& rng, double amplitude = 1.0) {
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    hv::Signal s(g.nx + 1);
    for (auto& v : s) v = u(rng);
    return s;
}

/// Velocity field from sine modes, zero at the spatial boundary.
inline hv::Field random_velocity(const hv::Grid& g, std::mt19937& rng, double amplitude = 0.2,
                                 int modes = 3) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::vector<double> cx(modes + 1), ct(modes + 1);
    for (int m = 1; m <= modes; ++m) {
        cx[m] = coef(rng);
        ct[m] = coef(rng);
    }
    hv::Field v = hv::Field::on_grid(g);
    for (int j = 0; j <= g.nt; ++j) {
        const double t = g.t(j);
        for (int i = 0; i <= g.nx; ++i) {
            const double x = g.x(i);
            double val = 0.0;
            for (int m = 1; m <= modes; ++m)
                val += cx[m] * std::sin(kPi * m * x) * (1.0 + 0.5 * ct[m] * std::cos(kPi * m * t)) / m;
            v(j, i) = amplitude * val;
        }
    }
    return v;
}

/// Arbitrary (not necessarily admissible) random path with pinned v boundary.
inline hv::Path random_path(const hv::Grid& g, std::mt19937& rng) {
    hv::Path p{hv::Field::on_grid(g), random_velocity(g, rng), hv::Field::on_grid(g)};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int j = 0; j <= g.nt; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            p.f(j, i) = u(rng);
            p.z(j, i) = u(rng);
        }
    return p;
}

/// Admissible random path: the representation solve applied to a random velocity.
inline hv::Path random_admissible_path(const hv::Grid& g, std::mt19937& rng, double v_amplitude = 0.2) {
    const hv::Signal f0 = random_smooth_signal(g, rng);
    const hv::Signal f1 = random_smooth_signal(g, rng);
    const hv::Field v = random_velocity(g, rng, v_amplitude);
    return hv::g1_path(v, f0, f1, g);
}

/// Compact cosine bump of the given height centered at c with half-width w.
inline hv::Signal bump_signal(const hv::Grid& g, std::initializer_list<std::pair<double, double>> bumps,
                              double half_width = 0.08) {
    hv::Signal s(g.nx + 1, 0.0);
    for (auto [center, height] : bumps) {
        for (int i = 0; i <= g.nx; ++i) {
            const double r = (g.x(i) - center) / half_width;
            if (std::abs(r) < 1.0) {
                const double c = 0.5 * (1.0 + std::cos(kPi * r));
                s[i] += height * c * c;
            }
        }
    }
    return s;
}

/// Empirical convergence order from errors at successively doubled resolutions.
inline double observed_order(double err_coarse, double err_fine) {
    return std::log2(err_coarse / err_fine);
}

} // namespace hvtest
