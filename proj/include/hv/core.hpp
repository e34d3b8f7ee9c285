#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Core value types for paths in the space of 1D signals: a uniform
// space-time grid on [0,1]x[0,1], signals sampled at the spatial nodes,
// admissible path triples (f, v, z) solving f_t + f_x v = z, the metric
// weights (kappa, lambda, epsilon), and the discrete action
//   A = 1/2 * integral( kappa v^2 + lambda v_x^2 + eps v_xx^2 + z^2 )
// evaluated by composite trapezoid quadrature in both x and t.

namespace hv {

/// Uniform mesh with nx spatial and nt time intervals on [0,1]x[0,1].
struct Grid {
    int nx = 0;
    int nt = 0;

    Grid(int nx_, int nt_) : nx(nx_), nt(nt_) {
        if (nx < 4)
            throw std::invalid_argument("Grid: nx must be >= 4 (the fourth-order stencil needs five interior-adjacent nodes)");
        if (nt < 1)
            throw std::invalid_argument("Grid: nt must be >= 1");
    }

    double dx() const { return 1.0 / nx; }
    double dt() const { return 1.0 / nt; }
    double x(int i) const { return static_cast<double>(i) / nx; }
    double t(int j) const { return static_cast<double>(j) / nt; }
};

/// Nodal amplitudes at x_i = i*dx, length nx+1.
using Signal = std::vector<double>;

/// Dense (nt+1) x (nx+1) array; row j is the time slice t_j.
class Field {
public:
    Field() = default;
    Field(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    static Field on_grid(const Grid& g, double fill = 0.0) { return Field(g.nt + 1, g.nx + 1, fill); }

    double& operator()(int j, int i) { return data_[static_cast<size_t>(j) * cols_ + i]; }
    double operator()(int j, int i) const { return data_[static_cast<size_t>(j) * cols_ + i]; }

    std::span<double> row(int j) { return {data_.data() + static_cast<size_t>(j) * cols_, static_cast<size_t>(cols_)}; }
    std::span<const double> row(int j) const { return {data_.data() + static_cast<size_t>(j) * cols_, static_cast<size_t>(cols_)}; }

    void set_row(int j, std::span<const double> values) {
        std::copy(values.begin(), values.end(), row(j).begin());
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Metric weights: kappa > 0 on v^2, lambda >= 0 on v_x^2, epsilon >= 0 on v_xx^2.
/// Operations that solve the fourth-order boundary-value problem require epsilon > 0.
struct HVParams {
    double kappa;
    double lambda;
    double epsilon;

    HVParams(double kappa_, double lambda_, double epsilon_)
        : kappa(kappa_), lambda(lambda_), epsilon(epsilon_) {
        if (!(kappa > 0.0)) throw std::invalid_argument("HVParams: kappa must be > 0");
        if (!(lambda >= 0.0)) throw std::invalid_argument("HVParams: lambda must be >= 0");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("HVParams: epsilon must be >= 0");
    }
};

/// Discrete admissible path: the triple (f, v, z) on the full grid.
/// v vanishes on the spatial boundary; f rows 0 and nt are the endpoint signals.
struct Path {
    Field f;
    Field v;
    Field z;
};

/// The four quadrature terms of the action; total is their exact sum.
struct ActionBreakdown {
    double total = 0.0;
    double kinetic_v = 0.0;   // kappa v^2
    double grad_v = 0.0;      // lambda v_x^2
    double curv_v = 0.0;      // epsilon v_xx^2
    double vertical_z = 0.0;  // z^2
};

namespace detail {

inline void check_dims(const Field& a, const Grid& g, const char* name) {
    if (a.rows() != g.nt + 1 || a.cols() != g.nx + 1)
        throw std::invalid_argument(std::string("dimension mismatch: field '") + name + "' does not match grid");
}

inline void check_path_dims(const Path& p, const Grid& g) {
    check_dims(p.f, g, "f");
    check_dims(p.v, g, "v");
    check_dims(p.z, g, "z");
}

inline void check_signal(const Signal& s, const Grid& g, const char* name) {
    if (static_cast<int>(s.size()) != g.nx + 1)
        throw std::invalid_argument(std::string("dimension mismatch: signal '") + name + "' does not match grid");
    for (double v : s)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string("signal '") + name + "' has non-finite entries");
}

} // namespace detail

/// Composite trapezoid rule with spacing h.
inline double trapezoid(std::span<const double> u, double h) {
    const size_t n = u.size();
    if (n < 2) return 0.0;
    double s = 0.5 * (u[0] + u[n - 1]);
    for (size_t i = 1; i + 1 < n; ++i) s += u[i];
    return s * h;
}

/// First derivative: central differences at interior nodes, one-sided at the ends.
inline void slope(std::span<const double> u, double dx, std::span<double> out) {
    const int n = static_cast<int>(u.size());
    out[0] = (u[1] - u[0]) / dx;
    for (int i = 1; i + 1 < n; ++i) out[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
    out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
}

/// Second difference with the ghost-point reflection u(-dx) = -u(dx),
/// u(1+dx) = -u(1-dx) implied by u_xx = 0 at the boundary.
inline void second_difference(std::span<const double> u, double dx, std::span<double> out) {
    const int n = static_cast<int>(u.size());
    const double inv = 1.0 / (dx * dx);
    out[0] = -2.0 * u[0] * inv;
    for (int i = 1; i + 1 < n; ++i) out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv;
    out[n - 1] = -2.0 * u[n - 1] * inv;
}

/// Trapezoid L2 norm squared of one slice: integral of u^2 over [0,1].
inline double l2_sq(std::span<const double> u, double dx) {
    const size_t n = u.size();
    double s = 0.5 * (u[0] * u[0] + u[n - 1] * u[n - 1]);
    for (size_t i = 1; i + 1 < n; ++i) s += u[i] * u[i];
    return s * dx;
}

/// Trapezoid L2 norm of one slice.
inline double l2_norm(std::span<const double> u, double dx) { return std::sqrt(l2_sq(u, dx)); }

/// H2 norm squared of one slice, integral of u^2 + u_x^2 + u_xx^2, using the
/// same difference stencils as the action evaluator.
inline double h2_sq(std::span<const double> u, double dx) {
    const int n = static_cast<int>(u.size());
    std::vector<double> d1(n), d2(n);
    slope(u, dx, d1);
    second_difference(u, dx, d2);
    std::vector<double> integrand(n);
    for (int i = 0; i < n; ++i) integrand[i] = u[i] * u[i] + d1[i] * d1[i] + d2[i] * d2[i];
    return trapezoid(integrand, dx);
}

/// Discrete norm of v in L2(0,1; H2(0,1)): trapezoid in t of the slice H2 norms.
inline double l2h2_norm(const Field& v, const Grid& g) {
    std::vector<double> per_slice(g.nt + 1);
    for (int j = 0; j <= g.nt; ++j) per_slice[j] = h2_sq(v.row(j), g.dx());
    return std::sqrt(trapezoid(per_slice, g.dt()));
}

/// Discrete norm of z in L2((0,1)^2): trapezoid in t of the slice L2 norms squared.
inline double l2l2_norm(const Field& z, const Grid& g) {
    std::vector<double> per_slice(g.nt + 1);
    for (int j = 0; j <= g.nt; ++j) per_slice[j] = l2_sq(z.row(j), g.dx());
    return std::sqrt(trapezoid(per_slice, g.dt()));
}

namespace detail {

/// Action with an explicit prefactor on the whole quadrature. The public
/// evaluator uses 1/2; the degeneracy arithmetic uses 1.
inline ActionBreakdown weighted_action(const Path& p, const HVParams& params, const Grid& g, double prefactor) {
    check_path_dims(p, g);
    const int nx = g.nx, nt = g.nt;
    const double dx = g.dx(), dt = g.dt();

    std::vector<double> kin(nt + 1), grd(nt + 1), crv(nt + 1), ver(nt + 1);
    std::vector<double> d1(nx + 1), d2(nx + 1), integrand(nx + 1);
    for (int j = 0; j <= nt; ++j) {
        auto vr = p.v.row(j);
        auto zr = p.z.row(j);
        slope(vr, dx, d1);
        second_difference(vr, dx, d2);
        for (int i = 0; i <= nx; ++i) integrand[i] = vr[i] * vr[i];
        kin[j] = trapezoid(integrand, dx);
        for (int i = 0; i <= nx; ++i) integrand[i] = d1[i] * d1[i];
        grd[j] = trapezoid(integrand, dx);
        for (int i = 0; i <= nx; ++i) integrand[i] = d2[i] * d2[i];
        crv[j] = trapezoid(integrand, dx);
        for (int i = 0; i <= nx; ++i) integrand[i] = zr[i] * zr[i];
        ver[j] = trapezoid(integrand, dx);
    }

    ActionBreakdown a;
    a.kinetic_v = prefactor * params.kappa * trapezoid(kin, dt);
    a.grad_v = prefactor * params.lambda * trapezoid(grd, dt);
    a.curv_v = prefactor * params.epsilon * trapezoid(crv, dt);
    a.vertical_z = prefactor * trapezoid(ver, dt);
    a.total = a.kinetic_v + a.grad_v + a.curv_v + a.vertical_z;
    if (!std::isfinite(a.total))
        throw std::invalid_argument("action: non-finite entries in path");
    return a;
}

} // namespace detail

/// Discrete action 1/2 * iint( kappa v^2 + lambda v_x^2 + eps v_xx^2 + z^2 ).
inline ActionBreakdown action(const Path& p, const HVParams& params, const Grid& g) {
    return detail::weighted_action(p, params, g, 0.5);
}

/// Max-norm defect of the discrete transport equation f_t + f_x v = z over
/// interior nodes, forward difference in t and central in x.
inline double constraint_residual(const Path& p, const Grid& g) {
    detail::check_path_dims(p, g);
    const double dx = g.dx(), dt = g.dt();
    double r = 0.0;
    for (int j = 0; j < g.nt; ++j) {
        for (int i = 1; i < g.nx; ++i) {
            const double ft = (p.f(j + 1, i) - p.f(j, i)) / dt;
            const double fx = (p.f(j, i + 1) - p.f(j, i - 1)) / (2.0 * dx);
            r = std::max(r, std::abs(ft + p.v(j, i) * fx - p.z(j, i)));
        }
    }
    return r;
}

/// The zero-velocity path: f linear in t, z = f1 - f0 constant in t.
/// Its action is 1/2 ||f1 - f0||^2 and bounds the squared distance from above.
inline Path linear_path(const Signal& f0, const Signal& f1, const Grid& g) {
    detail::check_signal(f0, g, "f0");
    detail::check_signal(f1, g, "f1");
    Path p{Field::on_grid(g), Field::on_grid(g), Field::on_grid(g)};
    for (int j = 0; j <= g.nt; ++j) {
        const double tj = g.t(j);
        for (int i = 0; i <= g.nx; ++i) {
            p.f(j, i) = (1.0 - tj) * f0[i] + tj * f1[i];
            p.z(j, i) = f1[i] - f0[i];
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Invariance transforms. Each output is an admissible path whenever the
// input is; negate/shift/amplitude_scale preserve the constraint residual
// up to machine precision.
// ---------------------------------------------------------------------------

/// (f, v, z) -> (-f, v, -z); the action is unchanged.
inline Path negate(const Path& p) {
    Path q = p;
    for (int j = 0; j < q.f.rows(); ++j)
        for (int i = 0; i < q.f.cols(); ++i) {
            q.f(j, i) = -q.f(j, i);
            q.z(j, i) = -q.z(j, i);
        }
    return q;
}

/// (f, v, z) -> (f + c, v, z); the action is unchanged.
inline Path shift(const Path& p, double c) {
    Path q = p;
    for (int j = 0; j < q.f.rows(); ++j)
        for (int i = 0; i < q.f.cols(); ++i) q.f(j, i) += c;
    return q;
}

/// (f, v, z) -> (c f, v, c z); with weights scaled by c^2 the action scales by c^2.
inline Path amplitude_scale(const Path& p, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("amplitude_scale: c must be > 0");
    Path q = p;
    for (int j = 0; j < q.f.rows(); ++j)
        for (int i = 0; i < q.f.cols(); ++i) {
            q.f(j, i) *= c;
            q.z(j, i) *= c;
        }
    return q;
}

/// Compress the periodic extension of the path by an integer factor L:
/// samples (f(Lx,t), v(Lx,t)/L, z(Lx,t)). With weights (L^2 kappa, lambda,
/// eps/L^2) the action matches the input up to quadrature error.
inline Path space_rescale(const Path& p, int L) {
    const int nx = p.f.cols() - 1;
    if (L < 1) throw std::invalid_argument("space_rescale: L must be a positive integer");
    if (nx % L != 0) throw std::invalid_argument("space_rescale: nx must be divisible by L");
    Path q{Field(p.f.rows(), p.f.cols()), Field(p.f.rows(), p.f.cols()), Field(p.f.rows(), p.f.cols())};
    const double invL = 1.0 / L;
    for (int j = 0; j < p.f.rows(); ++j) {
        for (int i = 0; i <= nx; ++i) {
            const long long k = static_cast<long long>(L) * i;
            int src = static_cast<int>(k % nx);
            if (src == 0 && k != 0) src = nx;  // seam of the periodic extension
            q.f(j, i) = p.f(j, src);
            q.v(j, i) = p.v(j, src) * invL;
            q.z(j, i) = p.z(j, src);
        }
    }
    return q;
}

} // namespace hv
