#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hv/core.hpp"
#include "hv/flow.hpp"

// Constructions from the first-derivative-only (epsilon = 0) degeneracy
// analysis, evaluated with the convention
//   A(f, v, z) = iint v^2 + lambda v_x^2 + z^2   (no 1/2 prefactor),
// plus a-priori bound reports for computed flows.

namespace hv {

/// Action in the degeneracy convention: unit weight on v^2, lambda on
/// v_x^2, no curvature term, no 1/2 prefactor.
inline ActionBreakdown degeneracy_action(const Path& p, double lambda, const Grid& g) {
    return detail::weighted_action(p, HVParams(1.0, lambda, 0.0), g, 1.0);
}

/// Upper bound on the competitor action from the three-phase construction:
/// 6 s H^2 + 3 (1-2s)^2 (1 + lambda / s^2).
inline double competitor_bound(double H, double s, double lambda) {
    return 6.0 * s * H * H + 3.0 * (1.0 - 2.0 * s) * (1.0 - 2.0 * s) * (1.0 + lambda / (s * s));
}

/// Three-phase path between the constants 0 and H that beats the linear
/// interpolation (action H^2) for suitable s and H: vertical fill of the
/// step H*1_{x<=s} on [0,1/3], transport of the step edge from s to 1-s at
/// constant speed on [1/3,2/3] with the tent velocity parameterized by
/// initial position, and a symmetric vertical fill on [2/3,1]. Phase
/// boundaries snap to the nearest grid times, s to the nearest node.
inline Path competitor_path(double H, double s, const Grid& g) {
    if (!(H > 0.0)) throw std::invalid_argument("competitor_path: H must be > 0");
    if (!(s > 0.0 && s < 0.5)) throw std::invalid_argument("competitor_path: s must lie in (0, 1/2)");
    if (g.nx * s < 2.0)
        throw std::invalid_argument("competitor_path: grid too coarse to represent the step (nx*s < 2)");
    const int nx = g.nx, nt = g.nt;
    const double dx = g.dx();

    const int is = static_cast<int>(std::lround(s * nx));       // step edge at t = 1/3
    const int ie = static_cast<int>(std::lround((1.0 - s) * nx));  // step edge at t = 2/3
    const int j1 = static_cast<int>(std::lround(nt / 3.0));
    const int j2 = static_cast<int>(std::lround(2.0 * nt / 3.0));
    if (j1 < 1 || j2 <= j1 || j2 >= nt)
        throw std::invalid_argument("competitor_path: nt too coarse to split the three phases");
    const double s_snap = g.x(is);
    const double e_snap = g.x(ie);

    Path p{Field::on_grid(g), Field::on_grid(g), Field::on_grid(g)};

    // phase 1: vertical fill of H * 1_{x <= s} at the rate matching the
    // snapped duration (discretely exact transport constraint with v = 0)
    const double rate1 = H / g.t(j1);
    for (int j = 0; j <= j1; ++j)
        for (int i = 0; i <= is; ++i) p.f(j, i) = g.t(j) * rate1;
    for (int j = 0; j < j1; ++j)
        for (int i = 0; i <= is; ++i) p.z(j, i) = rate1;

    // phase 2: move the step edge from s to 1-s; the velocity along the
    // trajectory starting at x is w(x), so positions are exactly
    // x + w(x) (t - t_{j1}) and the Eulerian fields come from mapping the
    // trajectory samples back to the grid
    const double duration = g.t(j2) - g.t(j1);
    const double speed = (e_snap - s_snap) / duration;
    std::vector<double> w(nx + 1), pos(nx + 1), fval(nx + 1);
    for (int i = 0; i <= nx; ++i) {
        const double x = g.x(i);
        w[i] = (x <= s_snap) ? speed * x / s_snap : speed * (1.0 - x) / (1.0 - s_snap);
        fval[i] = (x <= s_snap) ? H : 0.0;
    }
    for (int j = j1; j <= j2; ++j) {
        const double elapsed = g.t(j) - g.t(j1);
        for (int i = 0; i <= nx; ++i) pos[i] = g.x(i) + w[i] * elapsed;
        detail::to_grid(pos, w, g, p.v.row(j), 1.0, j);
        detail::to_grid(pos, fval, g, p.f.row(j), H, j);
    }

    // phase 3: symmetric vertical fill of the right part
    const double rate3 = H / (1.0 - g.t(j2));
    for (int j = j2; j <= nt; ++j) {
        const double lift = (g.t(j) - g.t(j2)) * rate3;
        for (int i = 0; i <= nx; ++i) p.f(j, i) = (i <= ie) ? H : lift;
    }
    for (int j = j2; j <= nt; ++j)
        for (int i = ie + 1; i <= nx; ++i) p.z(j, i) = rate3;

    return p;
}

/// Two copies of the path shrunk to half the interval:
/// (f(2x mod 1), v(2x mod 1)/2, z(2x mod 1)). Admissible when the input is;
/// strictly decreases the degeneracy action whenever v is not identically 0.
inline Path halving_path(const Path& p) {
    const int nx = p.f.cols() - 1;
    if (nx % 2 != 0) throw std::invalid_argument("halving_path: nx must be even");
    return space_rescale(p, 2);
}

/// A-priori bound checks for a path and the flow of its velocity, each with
/// 5% slack: the energy estimate
///   max_t ||f(.,t)|| <= exp(sqrt(2)||v||_{L2 H2}) (||f0|| + ||z||),
/// the Jacobian bounds 1/b <= J <= b with b = exp(sqrt(2)||v||), and the
/// time-dependent derivative bounds exp(-sqrt(2t)||v||) <= DPhi <= exp(+...).
struct BoundReport {
    double v_norm = 0.0;  // discrete ||v||_{L2(0,1; H2)}
    double b = 1.0;       // exp(sqrt(2) v_norm)
    bool energy_ok = false;
    bool jac_ok = false;
    bool dphi_ok = false;
    // worst observed ratio of each quantity to its bound; <= 1 means the
    // bound holds with margin, <= slack passes
    double energy_margin = 0.0;
    double jac_margin = 0.0;
    double dphi_margin = 0.0;
    static constexpr double slack = 1.05;

    bool all_ok() const { return energy_ok && jac_ok && dphi_ok; }
};

inline BoundReport bound_report(const Path& p, const FlowField& flow, const Grid& g) {
    detail::check_path_dims(p, g);
    BoundReport r;
    r.v_norm = l2h2_norm(p.v, g);
    r.b = std::exp(std::sqrt(2.0) * r.v_norm);

    const double f0_norm = l2_norm(p.f.row(0), g.dx());
    const double z_norm = l2l2_norm(p.z, g);
    double max_f = 0.0;
    for (int j = 0; j <= g.nt; ++j) max_f = std::max(max_f, l2_norm(p.f.row(j), g.dx()));
    const double energy_bound = r.b * (f0_norm + z_norm);
    r.energy_margin = energy_bound > 0.0 ? max_f / energy_bound : (max_f > 0.0 ? HUGE_VAL : 0.0);
    r.energy_ok = r.energy_margin <= BoundReport::slack;

    double jac_ratio = 0.0, dphi_ratio = 0.0;
    for (int j = 0; j <= g.nt; ++j) {
        const double bt = std::exp(std::sqrt(2.0 * g.t(j)) * r.v_norm);
        for (int i = 0; i <= g.nx; ++i) {
            const double J = flow.jac(j, i);
            const double D = flow.dphi(j, i);
            jac_ratio = std::max({jac_ratio, J / r.b, 1.0 / (r.b * J)});
            dphi_ratio = std::max({dphi_ratio, D / bt, 1.0 / (bt * D)});
        }
    }
    r.jac_margin = jac_ratio;
    r.dphi_margin = dphi_ratio;
    r.jac_ok = jac_ratio <= BoundReport::slack;
    r.dphi_ok = dphi_ratio <= BoundReport::slack;
    return r;
}

} // namespace hv
