#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hv/core.hpp"
#include "hv/parallel.hpp"

// Signal-fixed sub-problem: for each time slice solve the fourth-order
// boundary-value problem
//   eps v_xxxx - lambda v_xx + (kappa + f_x^2) v = -f_t f_x,
//   v = 0 and v_xx = 0 at x = 0, 1,
// by a finite-difference discretization whose near-boundary rows use the
// ghost points v(-dx) = -v(dx), v(1+dx) = -v(1-dx). The resulting matrix is
// pentadiagonal with identity rows pinning the boundary values; it is solved
// by banded LU with partial pivoting.

namespace hv {

/// Factorization failure for one time slice.
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& what, int slice = -1)
        : std::runtime_error(slice >= 0 ? what + " (slice " + std::to_string(slice) + ")" : what),
          slice_(slice) {}
    int slice() const { return slice_; }

private:
    int slice_;
};

/// One assembled time slice: the five diagonals of the (nx+1)-order system,
/// the right-hand side, and the difference quotients w ~ f_x, tau ~ f_t
/// (both zero in their first and last entries).
struct SliceSystem {
    std::vector<double> sub2, sub1, diag, sup1, sup2;  // offsets -2, -1, 0, +1, +2
    std::vector<double> rhs;
    std::vector<double> w;
    std::vector<double> tau;

    int n() const { return static_cast<int>(diag.size()); }

    double at(int r, int c) const {
        switch (c - r) {
            case -2: return sub2[r];
            case -1: return sub1[r];
            case 0: return diag[r];
            case 1: return sup1[r];
            case 2: return sup2[r];
            default: return 0.0;
        }
    }

    /// y = M x with the five stored diagonals.
    std::vector<double> apply(std::span<const double> x) const {
        const int m = n();
        std::vector<double> y(m, 0.0);
        for (int r = 0; r < m; ++r) {
            double s = diag[r] * x[r];
            if (r >= 1) s += sub1[r] * x[r - 1];
            if (r >= 2) s += sub2[r] * x[r - 2];
            if (r + 1 < m) s += sup1[r] * x[r + 1];
            if (r + 2 < m) s += sup2[r] * x[r + 2];
            y[r] = s;
        }
        return y;
    }
};

namespace detail {

/// Assembly from a precomputed tau vector (tau[0] = tau[nx] = 0 expected).
inline SliceSystem assemble_with_tau(const Signal& f_now, const std::vector<double>& tau,
                                     const HVParams& p, const Grid& g, bool include_w_sq) {
    if (!(p.epsilon > 0.0))
        throw std::invalid_argument(
            "assemble: epsilon must be > 0; without the v_xx penalty the geometry degenerates "
            "and the reduced solve is not offered");
    check_signal(f_now, g, "f_now");
    const int nx = g.nx;
    const double dx = g.dx();
    const double e4 = p.epsilon / (dx * dx * dx * dx);
    const double l2 = p.lambda / (dx * dx);

    SliceSystem s;
    s.sub2.assign(nx + 1, 0.0);
    s.sub1.assign(nx + 1, 0.0);
    s.diag.assign(nx + 1, 0.0);
    s.sup1.assign(nx + 1, 0.0);
    s.sup2.assign(nx + 1, 0.0);
    s.rhs.assign(nx + 1, 0.0);
    s.tau = tau;
    s.w.assign(nx + 1, 0.0);
    for (int i = 1; i < nx; ++i) s.w[i] = (f_now[i + 1] - f_now[i]) / dx;

    // boundary rows pin v = 0 exactly
    s.diag[0] = 1.0;
    s.diag[nx] = 1.0;

    const double off1 = -4.0 * e4 - l2;
    for (int i = 1; i < nx; ++i) {
        const double wsq = include_w_sq ? s.w[i] * s.w[i] : 0.0;
        const bool near_boundary = (i == 1 || i == nx - 1);
        s.diag[i] = p.kappa + wsq + 2.0 * l2 + (near_boundary ? 5.0 : 6.0) * e4;
        s.sub1[i] = off1;
        s.sup1[i] = off1;
        if (i >= 2) s.sub2[i] = e4;
        if (i + 2 <= nx) s.sup2[i] = e4;
        s.rhs[i] = -s.tau[i] * s.w[i];
    }
    return s;
}

} // namespace detail

/// Assemble one time slice with w_i = (f_now[i+1] - f_now[i]) / dx and
/// tau_i = (f_next[i] - f_now[i]) / dt (endpoints zeroed), rhs = -tau .* w.
inline SliceSystem assemble(const Signal& f_now, const Signal& f_next, const HVParams& p, const Grid& g) {
    detail::check_signal(f_next, g, "f_next");
    std::vector<double> tau(g.nx + 1, 0.0);
    for (int i = 1; i < g.nx; ++i) tau[i] = (f_next[i] - f_now[i]) / g.dt();
    return detail::assemble_with_tau(f_now, tau, p, g, true);
}

namespace detail {

/// Banded LU with partial pivoting on five diagonals passed as contiguous
/// arrays of length n. Solves in place into x.
inline bool band_lu_solve(int n, const double* sub2, const double* sub1, const double* diag,
                          const double* sup1, const double* sup2, std::vector<double> b,
                          std::vector<double>& x) {
    constexpr int KL = 2, KU = 4, W = KL + KU + 1;  // fill-in widens the upper band
    std::vector<double> ab(static_cast<size_t>(n) * W, 0.0);
    auto a = [&](int r, int c) -> double& { return ab[static_cast<size_t>(r) * W + (c - r + KL)]; };

    for (int r = 0; r < n; ++r) {
        if (r >= 2) a(r, r - 2) = sub2[r];
        if (r >= 1) a(r, r - 1) = sub1[r];
        a(r, r) = diag[r];
        if (r + 1 < n) a(r, r + 1) = sup1[r];
        if (r + 2 < n) a(r, r + 2) = sup2[r];
    }

    for (int k = 0; k < n; ++k) {
        const int rmax = std::min(k + KL, n - 1);
        int piv = k;
        for (int r = k + 1; r <= rmax; ++r)
            if (std::abs(a(r, k)) > std::abs(a(piv, k))) piv = r;
        if (std::abs(a(piv, k)) < 1e-300) return false;
        if (piv != k) {
            // columns beyond k of both rows live inside the k .. k+KU window
            for (int c = k; c <= std::min(k + KU, n - 1); ++c) std::swap(a(k, c), a(piv, c));
            std::swap(b[k], b[piv]);
        }
        const double pivval = a(k, k);
        for (int r = k + 1; r <= rmax; ++r) {
            const double m = a(r, k) / pivval;
            if (m == 0.0) continue;
            a(r, k) = 0.0;
            for (int c = k + 1; c <= std::min(k + KU, n - 1); ++c) a(r, c) -= m * a(k, c);
            b[r] -= m * b[k];
        }
    }

    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c <= std::min(r + KU, n - 1); ++c) s -= a(r, c) * x[c];
        x[r] = s / a(r, r);
    }
    return true;
}

} // namespace detail

/// Direct solve of the assembled pentadiagonal system by banded LU with
/// partial pivoting. Identity boundary rows are eliminated first so the
/// pinned values are bit-exact. The returned v satisfies
/// ||M v - rhs||_inf <= 1e-10 (1 + ||rhs||_inf) whenever that bound is
/// representable; the enforced threshold also admits the double-precision
/// floor eps * ||M||_inf * ||v||_inf of very stiff assemblies.
inline std::vector<double> solve_slice(const SliceSystem& sys, int slice_index = -1) {
    const int n = sys.n();
    std::vector<double> x;

    const bool id_first = sys.diag[0] == 1.0 && sys.sup1[0] == 0.0 && sys.sup2[0] == 0.0;
    const bool id_last = sys.diag[n - 1] == 1.0 && sys.sub1[n - 1] == 0.0 && sys.sub2[n - 1] == 0.0;
    bool ok;
    if (id_first && id_last && n >= 6) {
        const double x0 = sys.rhs[0], xn = sys.rhs[n - 1];
        const int m = n - 2;
        std::vector<double> b(sys.rhs.begin() + 1, sys.rhs.end() - 1);
        b[0] -= sys.sub1[1] * x0;
        b[1] -= sys.sub2[2] * x0;
        b[m - 1] -= sys.sup1[n - 2] * xn;
        b[m - 2] -= sys.sup2[n - 3] * xn;
        std::vector<double> xi;
        ok = detail::band_lu_solve(m, sys.sub2.data() + 1, sys.sub1.data() + 1, sys.diag.data() + 1,
                                   sys.sup1.data() + 1, sys.sup2.data() + 1, std::move(b), xi);
        if (ok) {
            x.reserve(n);
            x.push_back(x0);
            x.insert(x.end(), xi.begin(), xi.end());
            x.push_back(xn);
        }
    } else {
        ok = detail::band_lu_solve(n, sys.sub2.data(), sys.sub1.data(), sys.diag.data(),
                                   sys.sup1.data(), sys.sup2.data(), sys.rhs, x);
    }
    if (!ok) throw solver_error("solve_slice: singular pentadiagonal system", slice_index);

    // residual check on every call
    double rnorm = 0.0, bnorm = 0.0, mnorm = 0.0, xnorm = 0.0;
    const std::vector<double> mx = sys.apply(x);
    for (int r = 0; r < n; ++r) {
        rnorm = std::max(rnorm, std::abs(mx[r] - sys.rhs[r]));
        bnorm = std::max(bnorm, std::abs(sys.rhs[r]));
        xnorm = std::max(xnorm, std::abs(x[r]));
        mnorm = std::max(mnorm, std::abs(sys.at(r, r - 2)) + std::abs(sys.at(r, r - 1)) +
                                    std::abs(sys.diag[r]) + std::abs(sys.at(r, r + 1)) +
                                    std::abs(sys.at(r, r + 2)));
    }
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * mnorm * xnorm;
    const double bound = std::max(1e-10 * (1.0 + bnorm), floor);
    if (!(rnorm <= bound))
        throw solver_error("solve_slice: ill-conditioned system, residual " + std::to_string(rnorm),
                           slice_index);
    return x;
}

/// Time-difference stencil for tau. Forward matches the first-order scheme;
/// central is available for smooth signals.
enum class TimeStencil { forward, central };

struct G2Result {
    Field v;
    Field z;
};

/// Signal-fixed sub-problem over all time slices: solve the boundary-value
/// problem per slice (independent, solved in parallel) and recover
/// z = f_t + v f_x, with one-sided differences at the boundaries.
/// The final slice uses the backward time difference.
inline G2Result g2_solve(const Field& f, const HVParams& p, const Grid& g,
                         TimeStencil stencil = TimeStencil::forward) {
    detail::check_dims(f, g, "f");
    const int nx = g.nx, nt = g.nt;
    const double dx = g.dx(), dt = g.dt();
    G2Result r{Field::on_grid(g), Field::on_grid(g)};

    parallel_for(0, nt + 1, [&](int j) {
        std::vector<double> tau(nx + 1, 0.0);
        const Signal f_now(f.row(j).begin(), f.row(j).end());
        for (int i = 1; i < nx; ++i) {
            if (stencil == TimeStencil::central && j > 0 && j < nt)
                tau[i] = (f(j + 1, i) - f(j - 1, i)) / (2.0 * dt);
            else if (j < nt)
                tau[i] = (f(j + 1, i) - f(j, i)) / dt;
            else
                tau[i] = (f(nt, i) - f(nt - 1, i)) / dt;
        }
        SliceSystem sys = detail::assemble_with_tau(f_now, tau, p, g, true);
        const std::vector<double> v = solve_slice(sys, j);
        for (int i = 0; i <= nx; ++i) r.v(j, i) = v[i];
        // z = f_t + v f_x; interior uses the assembly stencils, the boundary
        // uses one-sided f_t (v vanishes there so the transport term drops)
        for (int i = 1; i < nx; ++i) r.z(j, i) = tau[i] + v[i] * sys.w[i];
        const int jn = (j < nt) ? j + 1 : nt, jp = (j < nt) ? j : nt - 1;
        r.z(j, 0) = (f(jn, 0) - f(jp, 0)) / dt;
        r.z(j, nx) = (f(jn, nx) - f(jp, nx)) / dt;
    });
    return r;
}

/// Tangent-space representative velocity for an H1 signal: solves
/// eps v_xxxx - lambda v_xx + kappa v = -f_x zbar with the same banded
/// assembly but kappa-only diagonal.
inline std::vector<double> tangent_project(const Signal& f_slice, const Signal& zbar,
                                           const HVParams& p, const Grid& g) {
    detail::check_signal(zbar, g, "zbar");
    SliceSystem sys = detail::assemble_with_tau(f_slice, std::vector<double>(g.nx + 1, 0.0), p, g, false);
    for (int i = 1; i < g.nx; ++i) sys.rhs[i] = -sys.w[i] * zbar[i];
    return solve_slice(sys);
}

} // namespace hv
