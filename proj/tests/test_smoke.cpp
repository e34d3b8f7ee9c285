#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hv/analysis.hpp"
#include "hv/optimizer.hpp"

// Desk-scale reproductions of the qualitative experiment families: the
// solver completes, the trace decreases strictly, and the result stays
// below the linear start. No figure-level numbers are asserted.

using namespace hv;

namespace {

void expect_well_behaved(const GeodesicResult& r, double linear_action) {
    CHECK(std::isfinite(r.action.total));
    CHECK(r.action.total >= 0.0);
    CHECK(r.action.total <= linear_action + 1e-9);
    for (size_t n = 1; n < r.trace.size(); ++n) CHECK(r.trace[n].action < r.trace[n - 1].action);
}

double linear_action_of(const Signal& f0, const Signal& f1, const Grid& g) {
    std::vector<double> diff(g.nx + 1);
    for (int i = 0; i <= g.nx; ++i) diff[i] = f1[i] - f0[i];
    return 0.5 * l2_sq(diff, g.dx());
}

} // namespace

TEST_CASE("smoke: discontinuous box signal against a smooth target") {
    Grid g(150, 140);
    Signal f0(g.nx + 1, 0.0);
    for (int i = 0; i <= g.nx; ++i)
        if (g.x(i) > 0.2 && g.x(i) < 0.45) f0[i] = 1.0;
    const Signal f1 = hvtest::bump_signal(g, {{0.65, 1.0}});
    GeodesicResult r = solve(f0, f1, HVParams(0.02, 0.001, 0.002), g, SolveOptions{.k_max = 2});
    expect_well_behaved(r, linear_action_of(f0, f1, g));
}

TEST_CASE("smoke: growth and expansion") {
    Grid g(150, 140);
    const Signal f0 = hvtest::bump_signal(g, {{0.5, 0.5}}, 0.06);
    const Signal f1 = hvtest::bump_signal(g, {{0.5, 1.5}}, 0.2);
    GeodesicResult r = solve(f0, f1, HVParams(0.2, 0.01, 0.02), g, SolveOptions{.k_max = 2});
    expect_well_behaved(r, linear_action_of(f0, f1, g));
}

TEST_CASE("smoke: large-amplitude signals at heartbeat-like scales") {
    // weights from the scale heuristic at H = 300, W = L = 0.1
    Grid g(150, 75);
    Signal f0 = hvtest::bump_signal(g, {{0.3, 260.0}, {0.55, 80.0}}, 0.05);
    Signal f1 = hvtest::bump_signal(g, {{0.4, 280.0}, {0.66, 70.0}}, 0.05);
    for (int i = 0; i <= g.nx; ++i) {
        f0[i] += 20.0 * std::sin(12.0 * g.x(i));
        f1[i] += 20.0 * std::sin(11.0 * g.x(i) + 1.0);
    }
    GeodesicResult r = solve(f0, f1, HVParams(90000.0, 1800.0, 180.0), g, SolveOptions{.k_max = 2});
    expect_well_behaved(r, linear_action_of(f0, f1, g));
    FlowField fl = integrate_flow(r.path.v, g);
    CHECK(bound_report(r.path, fl, g).all_ok());
}

TEST_CASE("smoke: mixed transport and vertical matching") {
    Grid g(150, 140);
    const Signal f0 = hvtest::bump_signal(g, {{0.25, 1.0}, {0.55, -0.6}, {0.8, 0.4}}, 0.06);
    const Signal f1 = hvtest::bump_signal(g, {{0.35, 0.9}, {0.6, -0.5}, {0.85, 0.55}}, 0.06);
    GeodesicResult r = solve(f0, f1, HVParams(0.1, 0.01, 0.0005), g, SolveOptions{.k_max = 3});
    expect_well_behaved(r, linear_action_of(f0, f1, g));
}
