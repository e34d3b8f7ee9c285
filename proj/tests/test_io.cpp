#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "hv/io.hpp"

using namespace hv;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("hv_io_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("one-column signals resample with the peak preserved") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("peak.txt"));
        out << "0\n0\n1\n0\n0\n";
    }
    Signal s = load_signal(tmp.file("peak.txt"), 8);
    CHECK(s.size() == 9);
    CHECK(s[4] == doctest::Approx(1.0));   // x = 0.5
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[3] == doctest::Approx(0.5));   // halfway up the linear flank
    CHECK(s[8] == doctest::Approx(0.0));
}

TEST_CASE("two-column file matching the grid loads identically") {
    TempDir tmp;
    Grid g(8, 1);
    {
        std::ofstream out(tmp.file("two.csv"));
        for (int i = 0; i <= g.nx; ++i) out << g.x(i) << "," << (i * 1.5 - 3.0) << "\n";
    }
    Signal s = load_signal(tmp.file("two.csv"), g.nx);
    for (int i = 0; i <= g.nx; ++i) CHECK(s[i] == doctest::Approx(i * 1.5 - 3.0).epsilon(1e-12));
}

TEST_CASE("malformed and degenerate inputs are rejected with line numbers") {
    TempDir tmp;
    SUBCASE("non-numeric row") {
        {
            std::ofstream out(tmp.file("bad.txt"));
            out << "1\n2\npotato\n4\n5\n";
        }
        try {
            load_signal(tmp.file("bad.txt"), 8);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("non-increasing x") {
        {
            std::ofstream out(tmp.file("dec.csv"));
            out << "0,1\n0.5,2\n0.4,3\n0.8,4\n1,5\n";
        }
        CHECK_THROWS_AS(load_signal(tmp.file("dec.csv"), 8), io_error);
    }
    SUBCASE("too few samples") {
        {
            std::ofstream out(tmp.file("short.txt"));
            out << "1\n2\n3\n4\n";
        }
        CHECK_THROWS_AS(load_signal(tmp.file("short.txt"), 8), io_error);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_signal(tmp.file("nope.txt"), 8), io_error); }
}

TEST_CASE("save and load round-trips a signal bit-exactly at matching nx") {
    TempDir tmp;
    Grid g(37, 1);
    std::mt19937 rng(71);
    Signal s = hvtest::random_rough_signal(g, rng, 3.0);
    save_signal(s, tmp.file("rt.txt"));
    Signal back = load_signal(tmp.file("rt.txt"), g.nx);
    for (int i = 0; i <= g.nx; ++i) CHECK(back[i] == s[i]);
}

TEST_CASE("parameter heuristic evaluates the scale formula") {
    SUBCASE("unit inputs") {
        HVParams p = estimate_params(HeuristicInput(1.0, 1.0, 1.0));
        CHECK(p.kappa == doctest::Approx(0.01));
        CHECK(p.lambda == doctest::Approx(0.02));
        CHECK(p.epsilon == doctest::Approx(0.2));
    }
    SUBCASE("electrocardiogram scales") {
        HVParams p = estimate_params(HeuristicInput(300.0, 0.1, 0.1));
        CHECK(p.kappa == doctest::Approx(90000.0));
        CHECK(p.lambda == doctest::Approx(1800.0));
        CHECK(p.epsilon == doctest::Approx(180.0));
    }
    SUBCASE("invalid inputs") { CHECK_THROWS_AS(HeuristicInput(0.0, 1.0, 1.0), std::invalid_argument); }
}

TEST_CASE("dataset H^2 is twice the corpus variance") {
    Grid g(50, 1);
    std::mt19937 rng(73);
    std::vector<Signal> corpus;
    for (int k = 0; k < 6; ++k) corpus.push_back(hvtest::random_smooth_signal(g, rng));

    // oracle: mean of pairwise squared trapezoid distances, (1/n^2) sum_ij ||fi - fj||^2
    const size_t n = corpus.size();
    double pairwise = 0.0;
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) {
            std::vector<double> diff(g.nx + 1);
            for (int i = 0; i <= g.nx; ++i) diff[i] = corpus[a][i] - corpus[b][i];
            pairwise += l2_sq(diff, g.dx());
        }
    pairwise /= static_cast<double>(n * n);

    CHECK(dataset_h_squared(corpus, g) == doctest::Approx(pairwise).epsilon(1e-12));
}
