// Command-line interface: geodesic solves between 1D signals under the
// horizontal-vertical metric, pairwise distance matrices, parameter
// estimation from data scales, interpolation-frame export, and the
// first-derivative-only degeneracy demonstration.
//
// Exit codes: 0 success, 1 usage error, 2 solver failure, 3 I/O failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hv/hv.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
    std::string f0_path, f1_path;
    std::vector<std::string> inputs;
    int nx = 0;  // 0: infer from the inputs
    int nt = 0;  // 0: match nx
    double kappa = 0.0, lambda = -1.0, epsilon = -1.0;
    double H = 0.0, W = 0.0, L = 0.0;
    int kmax = 3;
    int max_iters = 200;
    double tol = -1.0;
    std::string out_dir = ".";
    bool smooth = false;
    int seed = 0;  // reserved
    std::vector<double> times;
    double s_edge = 0.1;
};

void add_grid_and_params(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--nx", o.nx, "spatial intervals (default: inferred from input)");
    cmd->add_option("--nt", o.nt, "time intervals (default: nx)");
    cmd->add_option("--kappa", o.kappa, "weight on v^2");
    cmd->add_option("--lambda", o.lambda, "weight on v_x^2");
    cmd->add_option("--epsilon", o.epsilon, "weight on v_xx^2");
    cmd->add_option("--H", o.H, "vertical variation scale (heuristic mode)");
    cmd->add_option("--W", o.W, "feature width scale (heuristic mode)");
    cmd->add_option("--L", o.L, "max matching distance scale (heuristic mode)");
}

void add_solver(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--kmax", o.kmax, "largest prominence-matching index to try");
    cmd->add_option("--max-iters", o.max_iters, "outer iteration cap");
    cmd->add_option("--tol", o.tol, "absolute decay tolerance (default 1e-8 x initial action)");
    cmd->add_flag("--smooth", o.smooth, "central time differences in the slice solves");
    cmd->add_option("--seed", o.seed, "reserved");
}

hv::HVParams resolve_params(const CommonOpts& o) {
    const bool heuristic = o.H > 0.0 && o.W > 0.0 && o.L > 0.0;
    if (o.kappa > 0.0 && o.lambda >= 0.0 && o.epsilon >= 0.0)
        return hv::HVParams(o.kappa, o.lambda, o.epsilon);
    if (heuristic) return hv::estimate_params(hv::HeuristicInput(o.H, o.W, o.L));
    throw CLI::ValidationError(
        "params", "give either --kappa --lambda --epsilon or the scales --H --W --L");
}

hv::SolveOptions resolve_solver(const CommonOpts& o) {
    hv::SolveOptions s;
    s.max_iters = o.max_iters;
    s.tol = o.tol;
    s.k_max = o.kmax;
    s.stencil = o.smooth ? hv::TimeStencil::central : hv::TimeStencil::forward;
    return s;
}

int infer_nx(const std::vector<std::string>& paths, int requested) {
    if (requested > 0) return requested;
    int nx = 0;
    for (const auto& p : paths) nx = std::max(nx, hv::sample_count(p) - 1);
    return std::max(nx, 4);
}

json trace_json(const hv::GeodesicResult& r) {
    json t = json::array();
    for (const auto& e : r.trace)
        t.push_back({{"action", e.action}, {"alpha1", e.alpha1}, {"alpha2", e.alpha2}});
    return t;
}

json report_json(const hv::GeodesicResult& r, const hv::HVParams& p, const hv::Grid& g) {
    json k_actions = json::array();
    for (const auto& [k, a] : r.k_actions) k_actions.push_back({{"k", k}, {"action", a}});
    json k_failures = json::array();
    for (const auto& [k, msg] : r.k_failures) k_failures.push_back({{"k", k}, {"error", msg}});
    return json{
        {"action",
         {{"total", r.action.total},
          {"kinetic_v", r.action.kinetic_v},
          {"grad_v", r.action.grad_v},
          {"curv_v", r.action.curv_v},
          {"vertical_z", r.action.vertical_z}}},
        {"distance", r.distance},
        {"trace", trace_json(r)},
        {"k_selected", r.k_selected},
        {"k_actions", k_actions},
        {"k_failures", k_failures},
        {"params", {{"kappa", p.kappa}, {"lambda", p.lambda}, {"epsilon", p.epsilon}}},
        {"grid", {{"nx", g.nx}, {"nt", g.nt}}},
        {"converged", r.converged},
    };
}

struct LoadedPair {
    hv::Grid grid;
    hv::Signal f0, f1;
};

LoadedPair load_pair(const CommonOpts& o) {
    const int nx = infer_nx({o.f0_path, o.f1_path}, o.nx);
    const int nt = o.nt > 0 ? o.nt : nx;
    return LoadedPair{hv::Grid(nx, nt), hv::load_signal(o.f0_path, nx), hv::load_signal(o.f1_path, nx)};
}

int run_solve(const CommonOpts& o, bool emit_files) {
    LoadedPair in = load_pair(o);
    const hv::HVParams params = resolve_params(o);
    hv::GeodesicResult r = hv::solve(in.f0, in.f1, params, in.grid, resolve_solver(o));
    if (emit_files) {
        std::filesystem::create_directories(o.out_dir);
        const std::filesystem::path dir(o.out_dir);
        hv::save_field_csv(r.path.f, (dir / "f.csv").string());
        hv::save_field_csv(r.path.v, (dir / "v.csv").string());
        hv::save_field_csv(r.path.z, (dir / "z.csv").string());
        std::ofstream rep(dir / "report.json");
        if (!rep) throw hv::io_error("cannot write report.json in " + o.out_dir);
        rep << report_json(r, params, in.grid).dump(2) << "\n";
        std::cout << "distance " << r.distance << " action " << r.action.total << " k "
                  << r.k_selected << " iterations " << r.trace.size() - 1
                  << (r.converged ? "" : " (not converged)") << "\n";
    } else {
        std::printf("%.17g\n", r.distance);
    }
    return 0;
}

int run_frames(const CommonOpts& o) {
    LoadedPair in = load_pair(o);
    const hv::HVParams params = resolve_params(o);
    hv::GeodesicResult r = hv::solve(in.f0, in.f1, params, in.grid, resolve_solver(o));
    std::filesystem::create_directories(o.out_dir);
    std::ofstream out(std::filesystem::path(o.out_dir) / "frames.csv");
    if (!out) throw hv::io_error("cannot write frames.csv in " + o.out_dir);
    std::vector<double> times = o.times;
    if (times.empty()) times = {0.0, 0.25, 0.5, 0.75, 1.0};
    char buf[48];
    for (double t : times) {
        const int j = std::clamp(static_cast<int>(std::lround(t * in.grid.nt)), 0, in.grid.nt);
        std::snprintf(buf, sizeof(buf), "%.17g", in.grid.t(j));
        out << buf;
        for (int i = 0; i <= in.grid.nx; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.path.f(j, i));
            out << "," << buf;
        }
        out << "\n";
    }
    std::cout << "wrote " << times.size() << " frames\n";
    return 0;
}

int run_matrix(const CommonOpts& o) {
    if (o.inputs.size() < 2) throw CLI::ValidationError("inputs", "need at least two signal files");
    const int nx = infer_nx(o.inputs, o.nx);
    const int nt = o.nt > 0 ? o.nt : nx;
    const hv::Grid grid(nx, nt);
    const hv::HVParams params = resolve_params(o);
    const hv::SolveOptions sopts = resolve_solver(o);

    std::vector<hv::Signal> signals;
    signals.reserve(o.inputs.size());
    for (const auto& p : o.inputs) signals.push_back(hv::load_signal(p, nx));

    const int n = static_cast<int>(signals.size());
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);

    // each unordered pair solved once, mirrored into both triangle entries
    std::vector<double> dist(pairs.size(), 0.0);
    std::string failure;
    std::mutex fail_mx;
    hv::parallel_for(0, static_cast<int>(pairs.size()), [&](int idx) {
        try {
            dist[idx] =
                hv::solve(signals[pairs[idx].first], signals[pairs[idx].second], params, grid, sopts)
                    .distance;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lk(fail_mx);
            if (failure.empty()) failure = e.what();
        }
    });
    if (!failure.empty()) throw std::runtime_error("distance-matrix: " + failure);

    std::filesystem::create_directories(o.out_dir);
    std::ofstream out(std::filesystem::path(o.out_dir) / "matrix.csv");
    if (!out) throw hv::io_error("cannot write matrix.csv in " + o.out_dir);
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (size_t idx = 0; idx < pairs.size(); ++idx)
        m[pairs[idx].first][pairs[idx].second] = m[pairs[idx].second][pairs[idx].first] = dist[idx];
    char buf[48];
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            std::snprintf(buf, sizeof(buf), "%.17g", m[a][b]);
            out << buf << (b + 1 < n ? "," : "\n");
        }
    std::cout << "wrote " << n << "x" << n << " matrix\n";
    return 0;
}

int run_estimate(const CommonOpts& o) {
    double H = o.H;
    if (!o.inputs.empty()) {
        const int nx = infer_nx(o.inputs, o.nx);
        const hv::Grid grid(nx, 1);
        std::vector<hv::Signal> corpus;
        for (const auto& p : o.inputs) corpus.push_back(hv::load_signal(p, nx));
        H = std::sqrt(hv::dataset_h_squared(corpus, grid));
    }
    if (!(H > 0.0 && o.W > 0.0 && o.L > 0.0))
        throw CLI::ValidationError("estimate-params", "need --H (or --inputs) plus --W and --L");
    const hv::HVParams p = hv::estimate_params(hv::HeuristicInput(H, o.W, o.L));
    std::cout << json{{"H", H},
                      {"W", o.W},
                      {"L", o.L},
                      {"kappa", p.kappa},
                      {"lambda", p.lambda},
                      {"epsilon", p.epsilon}}
                     .dump(2)
              << "\n";
    return 0;
}

int run_demo(const CommonOpts& o) {
    const double H = o.H > 0.0 ? o.H : 23.0;
    const double lambda = o.lambda >= 0.0 ? o.lambda : 1.0;
    const double s = o.s_edge;
    const int nx = o.nx > 0 ? o.nx : 300;

    const double bound = hv::competitor_bound(H, s, lambda);
    const double linear = H * H;
    std::printf("step-transport competitor vs linear interpolation, H=%g s=%g lambda=%g\n", H, s,
                lambda);
    std::printf("%8s %18s %18s %12s\n", "n", "competitor action", "upper bound", "linear H^2");
    double last = 0.0;
    for (int n : {nx / 2, nx}) {
        hv::Grid g(n, n);
        last = hv::degeneracy_action(hv::competitor_path(H, s, g), lambda, g).total;
        std::printf("%8d %18.6f %18.6f %12.4f\n", n, last, bound, linear);
    }
    std::printf("competitor beats linear: %s\n", last < linear ? "yes" : "no");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geodesics between 1D signals under the horizontal-vertical metric"};
    app.require_subcommand(1);
    CommonOpts o;

    CLI::App* solve = app.add_subcommand("solve", "compute a geodesic and write f/v/z CSVs + report");
    solve->add_option("--f0", o.f0_path, "source signal file")->required();
    solve->add_option("--f1", o.f1_path, "target signal file")->required();
    add_grid_and_params(solve, o);
    add_solver(solve, o);
    solve->add_option("--out", o.out_dir, "output directory");

    CLI::App* dist = app.add_subcommand("distance", "print the distance between two signals");
    dist->add_option("--f0", o.f0_path, "source signal file")->required();
    dist->add_option("--f1", o.f1_path, "target signal file")->required();
    add_grid_and_params(dist, o);
    add_solver(dist, o);

    CLI::App* matrix = app.add_subcommand("distance-matrix", "pairwise distances for a set of signals");
    matrix->add_option("--inputs", o.inputs, "signal files")->required()->expected(-2);
    add_grid_and_params(matrix, o);
    add_solver(matrix, o);
    matrix->add_option("--out", o.out_dir, "output directory");

    CLI::App* est = app.add_subcommand("estimate-params", "metric weights from data scales");
    est->add_option("--inputs", o.inputs, "signal corpus (replaces --H)")->expected(-1);
    add_grid_and_params(est, o);

    CLI::App* frames = app.add_subcommand("frames", "export geodesic signal rows at chosen times");
    frames->add_option("--f0", o.f0_path, "source signal file")->required();
    frames->add_option("--f1", o.f1_path, "target signal file")->required();
    frames->add_option("--times", o.times, "times in [0,1]")->delimiter(',');
    add_grid_and_params(frames, o);
    add_solver(frames, o);
    frames->add_option("--out", o.out_dir, "output directory");

    CLI::App* demo = app.add_subcommand("demo-degeneracy",
                                        "first-derivative-only metric: competitor vs linear path");
    demo->add_option("--H", o.H, "step height (default 23)");
    demo->add_option("--s", o.s_edge, "initial edge location (default 0.1)");
    demo->add_option("--lambda", o.lambda, "weight on v_x^2 (default 1)");
    demo->add_option("--nx", o.nx, "grid intervals (default 300)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(solve)) return run_solve(o, true);
        if (app.got_subcommand(dist)) return run_solve(o, false);
        if (app.got_subcommand(matrix)) return run_matrix(o);
        if (app.got_subcommand(est)) return run_estimate(o);
        if (app.got_subcommand(frames)) return run_frames(o);
        if (app.got_subcommand(demo)) return run_demo(o);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const hv::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
