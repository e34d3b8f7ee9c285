#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hv/core.hpp"
#include "hv/parallel.hpp"

// Velocity-fixed sub-problem, solved in Lagrangian form. The flow map
//   d/dt Phi(x,t) = v(Phi(x,t), t),  Phi(x,0) = x
// is integrated trajectory by trajectory; along each trajectory
//   J(x,t)   = exp(-int_0^t v_x(Phi) ds)        (positive by construction),
//   z(Phi,t) = (f1(Phi(x,1)) - f0(x)) J / int_0^1 J,
//   f(Phi,t) = (1 - eta) f0(x) + eta f1(Phi(x,1)),  eta = int_0^t J / int_0^1 J,
// and the slice values are mapped back to grid nodes by monotone linear
// interpolation in x.

namespace hv {

/// Trajectory crossing or interpolation degeneracy while integrating a flow.
class flow_error : public std::runtime_error {
public:
    enum class Kind { fold_over, collapse };

    flow_error(Kind kind, int time_index, const std::string& what)
        : std::runtime_error(what), kind_(kind), time_index_(time_index) {}

    Kind kind() const { return kind_; }
    int time_index() const { return time_index_; }

private:
    Kind kind_;
    int time_index_;
};

enum class TimeIntegrator { euler, rk4 };

/// Trajectories and trajectory-wise weights of the flow of v.
struct FlowField {
    Field phi;   // positions Phi(x_i, t_j)
    Field dphi;  // spatial derivative along trajectories, exp(+int v_x o Phi)
    Field jac;   // J = exp(-int v_x o Phi) = 1/dphi
    Field eta;   // interpolation weight (int_0^t J) / (int_0^1 J)
};

namespace detail {

/// Linear-in-x interpolant of one nodal row.
inline double interp_row(std::span<const double> row, double x, double nx_inv_dx) {
    const int nx = static_cast<int>(row.size()) - 1;
    double u = x * nx_inv_dx;
    if (u <= 0.0) return row[0];
    if (u >= nx) return row[nx];
    const int i0 = static_cast<int>(u);
    const double frac = u - i0;
    return row[i0] * (1.0 - frac) + row[i0 + 1] * frac;
}

inline void check_velocity_boundary(const Field& v, const Grid& g) {
    for (int j = 0; j <= g.nt; ++j)
        if (std::abs(v(j, 0)) > 1e-12 || std::abs(v(j, g.nx)) > 1e-12)
            throw std::invalid_argument("integrate_flow: v must vanish at the spatial boundary");
}

} // namespace detail

/// Integrate the flow of v with forward Euler (first order; RK4 behind a
/// flag for smooth velocities). The velocity is interpolated linearly in x
/// and held at the left endpoint in t. Positions are clamped to [0,1];
/// a position row decreasing beyond dx*1e-8 raises a fold-over error
/// identifying the offending time slice (refine nt or damp v).
inline FlowField integrate_flow(const Field& v, const Grid& g,
                                TimeIntegrator integrator = TimeIntegrator::euler) {
    detail::check_dims(v, g, "v");
    detail::check_velocity_boundary(v, g);
    const int nx = g.nx, nt = g.nt;
    const double dx = g.dx(), dt = g.dt();
    const double fold_tol = dx * 1e-8;
    const double scale = static_cast<double>(nx);  // 1/dx

    FlowField fl{Field::on_grid(g), Field::on_grid(g, 1.0), Field::on_grid(g, 1.0), Field::on_grid(g)};
    std::vector<double> expo(nx + 1, 0.0);  // accumulated int v_x along each trajectory
    std::vector<double> slopes(nx + 1);

    for (int i = 0; i <= nx; ++i) fl.phi(0, i) = g.x(i);

    for (int j = 0; j < nt; ++j) {
        auto vrow = v.row(j);
        slope(vrow, dx, slopes);
        auto V = [&](double x) { return detail::interp_row(vrow, x, scale); };
        auto Vx = [&](double x) { return detail::interp_row(slopes, x, scale); };

        for (int i = 0; i <= nx; ++i) {
            const double x0 = fl.phi(j, i);
            double x1;
            if (integrator == TimeIntegrator::euler) {
                x1 = x0 + dt * V(x0);
                expo[i] += dt * Vx(x0);
            } else {
                const double k1 = V(x0);
                const double k2 = V(std::clamp(x0 + 0.5 * dt * k1, 0.0, 1.0));
                const double k3 = V(std::clamp(x0 + 0.5 * dt * k2, 0.0, 1.0));
                const double k4 = V(std::clamp(x0 + dt * k3, 0.0, 1.0));
                x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                expo[i] += dt * Vx(std::clamp(x0 + 0.5 * dt * k1, 0.0, 1.0));
            }
            fl.phi(j + 1, i) = std::clamp(x1, 0.0, 1.0);
            fl.jac(j + 1, i) = std::exp(-expo[i]);
            fl.dphi(j + 1, i) = std::exp(expo[i]);
        }

        for (int i = 0; i < nx; ++i) {
            if (fl.phi(j + 1, i + 1) < fl.phi(j + 1, i) - fold_tol)
                throw flow_error(flow_error::Kind::fold_over, j + 1,
                                 "integrate_flow: trajectories cross at slice " + std::to_string(j + 1));
            // flatten sub-tolerance wiggles so each row stays nondecreasing
            if (fl.phi(j + 1, i + 1) < fl.phi(j + 1, i)) fl.phi(j + 1, i + 1) = fl.phi(j + 1, i);
        }
    }

    // eta by trapezoid accumulation of J in t, per trajectory
    for (int i = 0; i <= nx; ++i) {
        double cum = 0.0;
        std::vector<double> partial(nt + 1);
        partial[0] = 0.0;
        for (int j = 0; j < nt; ++j) {
            cum += 0.5 * dt * (fl.jac(j, i) + fl.jac(j + 1, i));
            partial[j + 1] = cum;
        }
        for (int j = 0; j <= nt; ++j) fl.eta(j, i) = partial[j] / cum;
    }
    return fl;
}

struct G1Result {
    Field f;
    Field z;
    FlowField flow;
};

namespace detail {

/// Map trajectory samples {(pos_i, val_i)} back to the uniform grid by
/// monotone piecewise-linear interpolation. pos is nondecreasing with
/// pos[0] = 0 and pos[nx] = 1. Strictly interior trajectories that coincide
/// (within dx * 1e-12) while carrying materially different values signal an
/// information collapse.
inline void to_grid(std::span<const double> pos, std::span<const double> val, const Grid& g,
                    std::span<double> out, double value_scale, int time_index) {
    const int nx = g.nx;
    const double collapse_w = g.dx() * 1e-12;
    const double conflict = 1e-6 * (1.0 + value_scale);
    for (int i = 0; i < nx; ++i) {
        if (pos[i + 1] - pos[i] <= collapse_w && pos[i] > 0.0 && pos[i + 1] < 1.0 &&
            std::abs(val[i + 1] - val[i]) > conflict)
            throw flow_error(flow_error::Kind::collapse, time_index,
                             "g1_solve: coincident trajectories carry conflicting values at slice " +
                                 std::to_string(time_index));
    }
    int seg = 0;
    for (int k = 0; k <= nx; ++k) {
        const double xk = g.x(k);
        while (seg + 1 < nx && pos[seg + 1] < xk) ++seg;
        const double w = pos[seg + 1] - pos[seg];
        if (w > collapse_w) {
            double frac = (xk - pos[seg]) / w;
            frac = std::clamp(frac, 0.0, 1.0);
            out[k] = val[seg] * (1.0 - frac) + val[seg + 1] * frac;
        } else {
            out[k] = val[seg];
        }
    }
}

} // namespace detail

/// Velocity-fixed solve: compute the flow of v and evaluate the trajectory
/// representation of the optimal (f, z), then return both on the grid.
/// Rows 0 and nt of f are the endpoint signals exactly.
inline G1Result g1_solve(const Field& v, const Signal& f0, const Signal& f1, const Grid& g,
                         TimeIntegrator integrator = TimeIntegrator::euler) {
    detail::check_signal(f0, g, "f0");
    detail::check_signal(f1, g, "f1");
    const int nx = g.nx, nt = g.nt;
    const double dt = g.dt();

    G1Result r{Field::on_grid(g), Field::on_grid(g), integrate_flow(v, g, integrator)};
    const FlowField& fl = r.flow;

    double scale = 0.0;
    for (int i = 0; i <= nx; ++i) scale = std::max({scale, std::abs(f0[i]), std::abs(f1[i])});

    // per-trajectory endpoint value and total Jacobian weight
    std::vector<double> target(nx + 1), total_j(nx + 1);
    for (int i = 0; i <= nx; ++i) {
        target[i] = detail::interp_row(f1, fl.phi(nt, i), static_cast<double>(nx));
        double cum = 0.0;
        for (int j = 0; j < nt; ++j) cum += 0.5 * dt * (fl.jac(j, i) + fl.jac(j + 1, i));
        total_j[i] = cum;
    }

    std::vector<double> fhat(nx + 1), zhat(nx + 1);
    for (int j = 0; j <= nt; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const double gap = target[i] - f0[i];
            zhat[i] = gap * fl.jac(j, i) / total_j[i];
            fhat[i] = (1.0 - fl.eta(j, i)) * f0[i] + fl.eta(j, i) * target[i];
        }
        auto pos = fl.phi.row(j);
        detail::to_grid(pos, fhat, g, r.f.row(j), scale, j);
        detail::to_grid(pos, zhat, g, r.z.row(j), scale, j);
    }
    r.f.set_row(0, f0);
    r.f.set_row(nt, f1);
    return r;
}

/// Assemble the path (f, v, z) produced by g1_solve for the given velocity.
inline Path g1_path(const Field& v, const Signal& f0, const Signal& f1, const Grid& g,
                    TimeIntegrator integrator = TimeIntegrator::euler) {
    G1Result r = g1_solve(v, f0, f1, g, integrator);
    return Path{std::move(r.f), v, std::move(r.z)};
}

/// Spatial derivative of the flow map by central differences across
/// trajectories; a finite-difference cross-check of the exponential formula.
inline Field dphi_central(const Field& phi, const Grid& g) {
    Field out(g.nt + 1, g.nx + 1);
    std::vector<double> s(g.nx + 1);
    for (int j = 0; j <= g.nt; ++j) {
        slope(phi.row(j), g.dx(), s);
        for (int i = 0; i <= g.nx; ++i) out(j, i) = s[i];
    }
    return out;
}

} // namespace hv
