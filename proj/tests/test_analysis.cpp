#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "irislab/analysis.hpp"

using namespace irislab;
using namespace irislab::analysis;
using polydes::Polynomial;

TEST_CASE("wilson_ci matches the closed form") {
    const long k = 7, n = 100;
    const double z = 1.959963984540054;
    const double p = 0.07;
    const double denom = 1.0 + z * z / n;
    const double center = (p + z * z / (2 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom;
    auto ci = wilson_ci(k, n);
    CHECK(ci.lo == doctest::Approx(center - half).epsilon(1e-12));
    CHECK(ci.hi == doctest::Approx(center + half).epsilon(1e-12));

    auto zero = wilson_ci(0, 1000);
    CHECK(zero.lo == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(zero.hi > 0.0);
    CHECK(zero.hi < 0.005);
    auto all = wilson_ci(50, 50);
    CHECK(all.hi == 1.0);
}

TEST_CASE("poly_extremes finds interior extrema") {
    // x^2 on [-1, 2]: min 0 at the interior root, max 4 at the edge.
    Polynomial sq({0.0, 0.0, 1.0});
    auto [lo, hi] = poly_extremes(sq, {-1.0, 2.0});
    CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(4.0).epsilon(1e-12));

    // Cubic with an interior max/min pair.
    Polynomial cub({0.0, -3.0, 0.0, 1.0});  // x^3 - 3x, extrema +-2 at x = -+1
    auto [clo, chi] = poly_extremes(cub, {-2.0, 2.0});
    CHECK(clo == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(chi == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("montecarlo_fold: identity polynomial with wide intervals") {
    Polynomial ident({0.0, 1.0});
    ScoreModel model;
    model.mean = 0.0;
    model.std = 0.01;
    model.negative = {-0.1, 0.1};
    model.positive = {0.5, 0.6};
    FoldingSpec spec;
    spec.k = 4;
    spec.n_f = {-0.4, 0.4};
    spec.p_f = {0.41, 1.2};

    auto r = montecarlo_fold(ident, model, spec, 10000, 99, 2);
    CHECK(r.trials == 10000);
    CHECK(r.neg_outside_nf == 0);
    CHECK(r.pos_min_outside_pf == 0);
    CHECK(r.pos_max_outside_pf == 0);
    CHECK(r.p1 == 0.0);
    CHECK(r.p2 == 0.0);
    CHECK(r.f_min_on_p == doctest::Approx(0.5));
    CHECK(r.f_max_on_p == doctest::Approx(0.6));

    CHECK_THROWS_AS(montecarlo_fold(ident, model, spec, 0, 1, 1), ConfigError);
}

TEST_CASE("montecarlo_fold is deterministic for a fixed seed and worker count") {
    Polynomial ident({0.0, 1.0});
    ScoreModel model;
    model.mean = 0.0;
    model.std = 0.01;
    model.negative = {-0.1, 0.1};
    model.positive = {0.5, 0.6};
    FoldingSpec spec;
    spec.k = 4;
    spec.n_f = {-0.02, 0.02};  // tight: plenty of outliers
    spec.p_f = {0.03, 1.2};

    auto a = montecarlo_fold(ident, model, spec, 20000, 7, 3);
    auto b = montecarlo_fold(ident, model, spec, 20000, 7, 3);
    CHECK(a.neg_outside_nf > 0);
    CHECK(a.neg_outside_nf == b.neg_outside_nf);
    CHECK(a.pos_min_outside_pf == b.pos_min_outside_pf);
    CHECK(a.pos_max_outside_pf == b.pos_max_outside_pf);

    auto c = montecarlo_fold(ident, model, spec, 20000, 8, 3);
    CHECK(a.neg_outside_nf != c.neg_outside_nf);
}

TEST_CASE("calibrate_intervals") {
    Polynomial ident({0.0, 1.0});
    ScoreModel model;
    model.mean = 0.0;
    model.std = 0.01;
    model.negative = {-0.1, 0.1};
    model.positive = {0.5, 0.6};

    auto cal = calibrate_intervals(ident, model, 4, 0.01, 0.01, 50000, 3, 0.02);
    // Quantile interval of a centered sum straddles 0 and is roughly
    // symmetric with half-width near 2.58 sigma (sigma = 0.02).
    CHECK(cal.n_f.lo < 0.0);
    CHECK(cal.n_f.hi > 0.0);
    CHECK(cal.n_f.hi < 0.1);
    CHECK(std::abs(cal.n_f.hi + cal.n_f.lo) < 0.02);
    // Widened interval extends by exactly the margin.
    CHECK(cal.n_f_widened.lo == doctest::Approx(cal.n_f.lo - 0.02));
    CHECK(cal.n_f_widened.hi == doctest::Approx(cal.n_f.hi + 0.02));
    // Positive bracket stays above the widened negatives (by far).
    CHECK(cal.p_f.lo > cal.n_f_widened.hi);

    // Widening monotonicity: a larger margin gives a superset.
    auto wide = calibrate_intervals(ident, model, 4, 0.01, 0.01, 50000, 3, 0.05);
    CHECK(wide.n_f_widened.lo < cal.n_f_widened.lo);
    CHECK(wide.n_f_widened.hi > cal.n_f_widened.hi);

    CHECK_THROWS_AS(calibrate_intervals(ident, model, 4, 0.0, 0.01, 1000, 1),
                    ConfigError);
    CHECK_THROWS_AS(calibrate_intervals(ident, model, 4, 1e-6, 0.01, 1000, 1),
                    InsufficientTrials);
}

TEST_CASE("fp_fn_report") {
    std::vector<RunOutcome> runs = {
        {true, true},  {false, true}, {true, true},  {true, false},
        {false, false}, {false, false}, {true, false}, {false, false},
    };
    // Oracle positives: 3 (one missed). Oracle negatives: 5 (two flagged).
    auto r = fp_fn_report(runs);
    CHECK(r.runs == 8);
    CHECK(r.false_negatives == 1);
    CHECK(r.false_positives == 2);
    CHECK(r.fn_rate == doctest::Approx(1.0 / 3.0));
    CHECK(r.fp_rate == doctest::Approx(2.0 / 5.0));
    CHECK(r.fp_ci.lo <= r.fp_rate);
    CHECK(r.fp_ci.hi >= r.fp_rate);

    auto empty = fp_fn_report({});
    CHECK(empty.runs == 0);
    CHECK(empty.fp_rate == 0.0);
}

TEST_CASE("report and histogram files") {
    Polynomial ident({0.0, 1.0});
    ScoreModel model;
    model.mean = 0.0;
    model.std = 0.01;
    model.negative = {-0.1, 0.1};
    model.positive = {0.5, 0.6};
    FoldingSpec spec;
    spec.k = 4;
    spec.n_f = {-0.4, 0.4};
    spec.p_f = {0.41, 1.2};
    auto r = montecarlo_fold(ident, model, spec, 1000, 5, 1);

    save_fold_report("fold_report_test.json", r);
    {
        std::ifstream is("fold_report_test.json");
        REQUIRE(is.good());
        std::string body((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
        CHECK(body.find("\"neg_outside_nf\"") != std::string::npos);
    }
    std::remove("fold_report_test.json");

    save_fold_histogram_csv("fold_hist_test.csv", ident, model, 4, 1000, 5, 20);
    {
        std::ifstream is("fold_hist_test.csv");
        REQUIRE(is.good());
        std::string header;
        std::getline(is, header);
        CHECK(header == "bucket_lo,bucket_hi,count");
        long total = 0;
        std::string line;
        while (std::getline(is, line)) {
            const auto pos = line.rfind(',');
            total += std::stol(line.substr(pos + 1));
        }
        CHECK(total == 1000);
    }
    std::remove("fold_hist_test.csv");
}
