#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hv/core.hpp"

// Signal ingestion and CSV emission for the command-line tools, plus the
// scale-based parameter heuristic
//   kappa = 0.01 H^2 / L^2,  lambda = 0.02 H^2,  eps = 0.2 H^2 W^2,
// where H is the vertical variation, W the feature width, and L the largest
// matching distance in the data.

namespace hv {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
    try {
        size_t used = 0;
        out = std::stod(tok, &used);
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
        return used == tok.size() && std::isfinite(out);
    } catch (...) {
        return false;
    }
}

} // namespace detail

/// Read a signal from disk and resample it to the uniform grid with nx
/// intervals by linear interpolation. Accepted formats: one value per line
/// (assumed uniformly spaced on [0,1]) or two comma-separated columns
/// "x,value" with strictly increasing x.
inline Signal load_signal(const std::string& path, int target_nx) {
    std::ifstream in(path);
    if (!in) throw io_error("load_signal: cannot open '" + path + "'");

    std::vector<double> xs, ys;
    std::string line;
    int lineno = 0;
    bool two_column = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
        if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
        if (trimmed.empty() || trimmed[0] == '#') continue;

        const size_t comma = trimmed.find(',');
        if (comma != std::string::npos) {
            if (!ys.empty() && !two_column)
                throw io_error("load_signal: mixed one- and two-column rows at line " + std::to_string(lineno));
            two_column = true;
            double x, y;
            if (!detail::parse_double(trimmed.substr(0, comma), x) ||
                !detail::parse_double(trimmed.substr(comma + 1), y))
                throw io_error("load_signal: malformed row at line " + std::to_string(lineno));
            if (!xs.empty() && !(x > xs.back()))
                throw io_error("load_signal: x values must be strictly increasing (line " +
                               std::to_string(lineno) + ")");
            xs.push_back(x);
            ys.push_back(y);
        } else {
            if (two_column)
                throw io_error("load_signal: mixed one- and two-column rows at line " + std::to_string(lineno));
            double y;
            if (!detail::parse_double(trimmed, y))
                throw io_error("load_signal: malformed row at line " + std::to_string(lineno));
            ys.push_back(y);
        }
    }
    if (ys.size() < 5) throw io_error("load_signal: fewer than 5 samples in '" + path + "'");

    const size_t n = ys.size();
    if (!two_column) {
        xs.resize(n);
        for (size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / (n - 1);
    }

    Signal out(target_nx + 1);
    size_t seg = 0;
    for (int k = 0; k <= target_nx; ++k) {
        const double x = static_cast<double>(k) / target_nx;
        if (x <= xs.front()) {
            out[k] = ys.front();
            continue;
        }
        if (x >= xs.back()) {
            out[k] = ys.back();
            continue;
        }
        while (seg + 2 < n && xs[seg + 1] < x) ++seg;
        const double t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
        out[k] = ys[seg] * (1.0 - t) + ys[seg + 1] * t;
    }
    return out;
}

/// Number of data rows in a signal file (comments and blanks skipped).
inline int sample_count(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("sample_count: cannot open '" + path + "'");
    int n = 0;
    std::string line;
    while (std::getline(in, line)) {
        const size_t first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || line[first] == '#') continue;
        ++n;
    }
    return n;
}

/// Write a signal one value per line with round-trip precision.
inline void save_signal(const Signal& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_signal: cannot write '" + path + "'");
    char buf[48];
    for (double v : s) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", v);
        out << buf;
    }
    if (!out) throw io_error("save_signal: write failed for '" + path + "'");
}

/// Write a field as CSV, one time slice per row.
inline void save_field_csv(const Field& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_field_csv: cannot write '" + path + "'");
    char buf[48];
    for (int j = 0; j < f.rows(); ++j) {
        for (int i = 0; i < f.cols(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", f(j, i));
            out << buf << (i + 1 < f.cols() ? "," : "\n");
        }
    }
    if (!out) throw io_error("save_field_csv: write failed for '" + path + "'");
}

/// Vertical variation H, feature width W, largest matching distance L.
struct HeuristicInput {
    double H;
    double W;
    double L;

    HeuristicInput(double H_, double W_, double L_) : H(H_), W(W_), L(L_) {
        if (!(H > 0.0 && W > 0.0 && L > 0.0))
            throw std::invalid_argument("HeuristicInput: H, W, L must all be positive");
    }
};

/// Metric weights from the data scales.
inline HVParams estimate_params(const HeuristicInput& in) {
    return HVParams(0.01 * in.H * in.H / (in.L * in.L), 0.02 * in.H * in.H,
                    0.2 * in.H * in.H * in.W * in.W);
}

/// Dataset H^2: twice the variance of the corpus under the trapezoid norm,
/// (2/n) sum ||f_i||^2 - 2 ||mean||^2.
inline double dataset_h_squared(const std::vector<Signal>& corpus, const Grid& g) {
    if (corpus.empty()) throw std::invalid_argument("dataset_h_squared: empty corpus");
    const size_t n = corpus.size();
    Signal mean(g.nx + 1, 0.0);
    double sum_sq = 0.0;
    for (const Signal& s : corpus) {
        detail::check_signal(s, g, "corpus entry");
        sum_sq += l2_sq(s, g.dx());
        for (int i = 0; i <= g.nx; ++i) mean[i] += s[i];
    }
    for (double& v : mean) v /= static_cast<double>(n);
    return 2.0 * sum_sq / static_cast<double>(n) - 2.0 * l2_sq(mean, g.dx());
}

} // namespace hv
