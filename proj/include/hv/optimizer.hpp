#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hv/bvp.hpp"
#include "hv/core.hpp"
#include "hv/flow.hpp"

// Outer iteration: alternate the velocity-fixed representation solve with the
// signal-fixed boundary-value solve, damped by back-tracking line search so
// that the discrete action decreases strictly at every accepted step.
// Initial paths come from matching the k most prominent peaks of the two
// signals; the k = 0 branch is the zero-velocity (linear) path.

namespace hv {

struct SolveOptions {
    int max_iters = 200;      // outer iterations per initialization
    double tol = -1.0;        // absolute decay tolerance; <= 0 means 1e-8 * initial action
    int ls_max = 20;          // back-tracking trials per line search
    int k_max = 3;            // initializations k = 0 .. k_max
    bool damped = true;       // line-searched blending; full steps when off
    bool match_minima = true; // also match the prominences of -f0, -f1
    bool refine = false;      // continue iterating the winning initialization
    TimeStencil stencil = TimeStencil::forward;
    TimeIntegrator integrator = TimeIntegrator::euler;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("SolveOptions: max_iters must be positive");
        if (ls_max < 1) throw std::invalid_argument("SolveOptions: ls_max must be positive");
        if (k_max < 0) throw std::invalid_argument("SolveOptions: k_max must be nonnegative");
    }
};

/// Interior local maximum and its prominence: the least drop in height
/// needed to reach a strictly higher value (to the signal minimum for the
/// global maximum). Plateaus are represented by their leftmost index.
struct Peak {
    int index = 0;
    double prominence = 0.0;
    double value = 0.0;
};

inline std::vector<Peak> prominences(const Signal& s) {
    const int n = static_cast<int>(s.size());
    if (n < 3) throw std::invalid_argument("prominences: signal length must be >= 3");
    const double global_max = *std::max_element(s.begin(), s.end());
    const double global_min = *std::min_element(s.begin(), s.end());

    std::vector<Peak> peaks;
    for (int i = 1; i < n - 1; ++i) {
        if (!(s[i] > s[i - 1])) continue;
        int j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        if (j >= n - 1 || !(s[j + 1] < s[i])) continue;  // plateau reaching the end is not a peak

        double prom;
        if (s[i] == global_max) {
            prom = s[i] - global_min;
        } else {
            auto side_base = [&](int step) {
                double base = std::numeric_limits<double>::infinity();
                for (int k = i + step * (step > 0 ? (j - i + 1) : 1); k >= 0 && k < n; k += step) {
                    if (s[k] > s[i]) break;
                    base = std::min(base, s[k]);
                }
                return base;
            };
            const double left = side_base(-1);
            const double right = side_base(+1);
            prom = s[i] - std::max(left, right);
        }
        peaks.push_back({i, prom, s[i]});
        i = j;  // skip the rest of the plateau
    }
    return peaks;
}

/// Monotone piecewise-linear map with T(0) = 0, T(1) = 1 through strictly
/// increasing knots in (0,1).
struct MatchingMap {
    std::vector<double> knots_x;
    std::vector<double> knots_y;

    MatchingMap(std::vector<double> xs, std::vector<double> ys)
        : knots_x(std::move(xs)), knots_y(std::move(ys)) {
        if (knots_x.size() != knots_y.size())
            throw std::invalid_argument("MatchingMap: knot count mismatch");
        auto strictly_inc_in_01 = [](const std::vector<double>& k) {
            double prev = 0.0;
            for (double v : k) {
                if (!(v > prev) || !(v < 1.0)) return false;
                prev = v;
            }
            return true;
        };
        if (!strictly_inc_in_01(knots_x) || !strictly_inc_in_01(knots_y))
            throw std::invalid_argument("MatchingMap: knots must be strictly increasing in (0,1)");
    }

    double operator()(double x) const {
        double x0 = 0.0, y0 = 0.0;
        for (size_t m = 0; m < knots_x.size(); ++m) {
            if (x <= knots_x[m])
                return y0 + (knots_y[m] - y0) * (x - x0) / (knots_x[m] - x0);
            x0 = knots_x[m];
            y0 = knots_y[m];
        }
        return y0 + (1.0 - y0) * (x - x0) / (1.0 - x0);
    }
};

struct InitResult {
    Field v0;
    Path path0;
    int k_used = 0;  // smaller than requested when a signal has fewer peaks
};

namespace detail {

/// Top-k peak locations in increasing spatial order. Ties in prominence are
/// broken by larger value, then by smaller index.
inline std::vector<int> top_k_locations(const Signal& s, int k) {
    std::vector<Peak> ps = prominences(s);
    std::sort(ps.begin(), ps.end(), [](const Peak& a, const Peak& b) {
        if (a.prominence != b.prominence) return a.prominence > b.prominence;
        if (a.value != b.value) return a.value > b.value;
        return a.index < b.index;
    });
    ps.resize(std::min<size_t>(ps.size(), static_cast<size_t>(k)));
    std::vector<int> idx;
    idx.reserve(ps.size());
    for (const Peak& p : ps) idx.push_back(p.index);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

/// Initial path for Algorithm-style initialization index k: k = 0 is the
/// zero-velocity start; k > 0 matches the k most prominent peaks of the two
/// signals (paired in increasing spatial order) with v0 = T(x) - x, constant
/// in time. When match_valleys is set, the prominences of -f0, -f1 are used.
/// Falls back to the largest feasible k when a signal has fewer peaks.
inline InitResult prominence_init(const Signal& f0, const Signal& f1, int k, const Grid& g,
                                  bool match_valleys = false,
                                  TimeIntegrator integrator = TimeIntegrator::euler) {
    if (k < 0) throw std::invalid_argument("prominence_init: k must be nonnegative");
    detail::check_signal(f0, g, "f0");
    detail::check_signal(f1, g, "f1");

    InitResult r{Field::on_grid(g), Path{}, 0};
    int k_used = k;
    if (k > 0) {
        Signal a = f0, b = f1;
        if (match_valleys) {
            for (double& v : a) v = -v;
            for (double& v : b) v = -v;
        }
        std::vector<int> xi = detail::top_k_locations(a, k);
        std::vector<int> yi = detail::top_k_locations(b, k);
        k_used = static_cast<int>(std::min(xi.size(), yi.size()));
        xi.resize(k_used);
        yi.resize(k_used);
        if (k_used > 0) {
            std::vector<double> xs(k_used), ys(k_used);
            for (int m = 0; m < k_used; ++m) {
                xs[m] = g.x(xi[m]);
                ys[m] = g.x(yi[m]);
            }
            MatchingMap T(xs, ys);
            for (int i = 0; i <= g.nx; ++i) {
                const double v0 = T(g.x(i)) - g.x(i);
                for (int j = 0; j <= g.nt; ++j) r.v0(j, i) = v0;
            }
        }
    }
    r.k_used = k_used;
    r.path0 = g1_path(r.v0, f0, f1, g, integrator);
    return r;
}

struct LineSearchResult {
    double alpha = 0.0;
    bool accepted = false;
};

/// Componentwise convex blend (1-alpha) a + alpha b on (f, v, z).
inline Path blend(const Path& a, const Path& b, double alpha) {
    Path out = a;
    const double beta = 1.0 - alpha;
    for (int j = 0; j < out.f.rows(); ++j)
        for (int i = 0; i < out.f.cols(); ++i) {
            out.f(j, i) = beta * a.f(j, i) + alpha * b.f(j, i);
            out.v(j, i) = beta * a.v(j, i) + alpha * b.v(j, i);
            out.z(j, i) = beta * a.z(j, i) + alpha * b.z(j, i);
        }
    return out;
}

/// Back-tracking line search: try alpha = 1, 1/2, 1/4, ... (ls_max trials)
/// and return the first alpha whose blend strictly improves the action;
/// alpha = 0 and accepted = false when none does.
inline LineSearchResult line_search(const Path& old_path, const Path& proposed, const HVParams& p,
                                    const Grid& g, int ls_max) {
    const double a_old = action(old_path, p, g).total;
    double alpha = 1.0;
    for (int trial = 0; trial < ls_max; ++trial) {
        if (action(blend(old_path, proposed, alpha), p, g).total < a_old) return {alpha, true};
        alpha *= 0.5;
    }
    return {0.0, false};
}

/// One iteration record: action after the iteration and the accepted
/// damping factors (alpha2 = 0 marks a half-iteration accepted before the
/// second sub-problem failed to improve).
struct TraceEntry {
    double action = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

struct GeodesicResult {
    Path path;
    ActionBreakdown action{};
    double distance = 0.0;  // sqrt of the minimized action
    std::vector<TraceEntry> trace;
    int k_selected = 0;  // negative values mark valley-matched initializations
    bool converged = false;
    std::vector<std::pair<int, double>> k_actions;          // per-initialization action values
    std::vector<std::pair<int, std::string>> k_failures;    // per-initialization failures
};

/// Alternate the two sub-problem solves from the given admissible start.
/// With damping on, each half-step is accepted through the back-tracking
/// line search, so the recorded action trace decreases strictly; a fold-over
/// during a velocity step is treated as a failed line-search trial. Stops
/// when the per-iteration decay drops below tol, a line search fails, or
/// max_iters is reached.
inline GeodesicResult iterate(const Path& start, const HVParams& p, const Grid& g,
                              const SolveOptions& opts = {}) {
    opts.validate();
    detail::check_path_dims(start, g);
    const int nt = g.nt;
    const Signal f0(start.f.row(0).begin(), start.f.row(0).end());
    const Signal f1(start.f.row(nt).begin(), start.f.row(nt).end());

    GeodesicResult res;
    Path cur = start;
    ActionBreakdown a = action(cur, p, g);
    const double tol = opts.tol > 0.0 ? opts.tol : 1e-8 * a.total;
    res.trace.push_back({a.total, 0.0, 0.0});

    // representation solve for the current velocity, reused across steps
    G1Result g1r = g1_solve(cur.v, f0, f1, g, opts.integrator);

    for (int n = 1; n <= opts.max_iters; ++n) {
        const double a_prev = a.total;
        double alpha1 = 0.0, alpha2 = 0.0;  // 0 marks a skipped half-step

        // -- first half-step: blend (f, z) toward the representation solve
        Path prop1{g1r.f, cur.v, g1r.z};
        if (opts.damped) {
            LineSearchResult ls = line_search(cur, prop1, p, g, opts.ls_max);
            if (ls.accepted) {
                alpha1 = ls.alpha;
                cur = blend(cur, prop1, alpha1);
                a = action(cur, p, g);
            }
        } else {
            cur = std::move(prop1);
            a = action(cur, p, g);
            alpha1 = 1.0;
        }

        // -- second half-step: blend (v, z) toward the boundary-value solve
        G2Result g2r = g2_solve(cur.f, p, g, opts.stencil);
        Path prop2{cur.f, std::move(g2r.v), std::move(g2r.z)};
        if (opts.damped) {
            double alpha = 1.0;
            for (int trial = 0; trial < opts.ls_max; ++trial) {
                Path cand = blend(cur, prop2, alpha);
                if (action(cand, p, g).total < a.total) {
                    try {
                        // accepting also requires the new velocity to integrate
                        g1r = g1_solve(cand.v, f0, f1, g, opts.integrator);
                    } catch (const flow_error&) {
                        alpha *= 0.5;  // fold-over counts as a failed trial
                        continue;
                    }
                    cur = std::move(cand);
                    a = action(cur, p, g);
                    alpha2 = alpha;
                    break;
                }
                alpha *= 0.5;
            }
        } else {
            cur = std::move(prop2);
            g1r = g1_solve(cur.v, f0, f1, g, opts.integrator);
            a = action(cur, p, g);
            alpha2 = 1.0;
        }

        if (alpha1 == 0.0 && alpha2 == 0.0) {
            // neither sub-problem can improve the path: numerical fixed point
            res.converged = true;
            break;
        }
        res.trace.push_back({a.total, alpha1, alpha2});

        const double decay = a_prev - a.total;
        if (opts.damped ? (decay < tol) : (std::abs(decay) < tol)) {
            res.converged = true;
            break;
        }
    }

    res.path = std::move(cur);
    res.action = a;
    res.distance = std::sqrt(a.total);
    return res;
}

/// Minimize over initializations: run iterate from the prominence matching
/// for each k in {0, .., k_max} (and from valley matching when enabled) and
/// return the result with the smallest action. The per-k runs are
/// independent and execute as a parallel map; per-k failures are aggregated
/// and fatal only if every initialization fails.
inline GeodesicResult solve(const Signal& f0, const Signal& f1, const HVParams& p, const Grid& g,
                            const SolveOptions& opts = {}) {
    opts.validate();
    struct Candidate {
        int label;  // k for peak matching, -k for valley matching
        int k;
        bool valleys;
    };
    std::vector<Candidate> cands;
    for (int k = 0; k <= opts.k_max; ++k) cands.push_back({k, k, false});
    if (opts.match_minima)
        for (int k = 1; k <= opts.k_max; ++k) cands.push_back({-k, k, true});

    struct Outcome {
        std::optional<GeodesicResult> result;
        std::string error;
    };
    std::vector<Outcome> outcomes(cands.size());

    std::vector<std::future<void>> futs;
    futs.reserve(cands.size());
    for (size_t c = 0; c < cands.size(); ++c) {
        futs.push_back(std::async(std::launch::async, [&, c] {
            try {
                InitResult init = prominence_init(f0, f1, cands[c].k, g, cands[c].valleys, opts.integrator);
                GeodesicResult r = iterate(init.path0, p, g, opts);
                r.k_selected = cands[c].valleys ? -init.k_used : init.k_used;
                outcomes[c].result = std::move(r);
            } catch (const std::exception& e) {
                outcomes[c].error = e.what();
            }
        }));
    }
    for (auto& f : futs) f.get();

    GeodesicResult best;
    bool have = false;
    std::vector<std::pair<int, double>> k_actions;
    std::vector<std::pair<int, std::string>> k_failures;
    for (size_t c = 0; c < cands.size(); ++c) {
        if (outcomes[c].result) {
            GeodesicResult& r = *outcomes[c].result;
            k_actions.emplace_back(cands[c].label, r.action.total);
            if (!have || r.action.total < best.action.total) {
                best = std::move(r);
                have = true;
            }
        } else {
            k_failures.emplace_back(cands[c].label, outcomes[c].error);
        }
    }
    if (!have)
        throw std::runtime_error("solve: every initialization failed; first failure: " +
                                 (k_failures.empty() ? std::string("none") : k_failures.front().second));

    if (opts.refine) {
        const int label = best.k_selected;
        auto k_act = std::move(k_actions);
        auto k_fail = std::move(k_failures);
        GeodesicResult refined = iterate(best.path, p, g, opts);
        refined.k_selected = label;
        best = std::move(refined);
        k_actions = std::move(k_act);
        k_failures = std::move(k_fail);
    }
    best.k_actions = std::move(k_actions);
    best.k_failures = std::move(k_failures);
    return best;
}

} // namespace hv
