#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "irislab/poly_design.hpp"

using namespace irislab;
using polydes::Polynomial;
using polydes::WeightSpec;

namespace {

WeightSpec uniform_weight() {
    // alpha = 0 with P covering the domain gives w = 1 on [-1, 1].
    WeightSpec w;
    w.alpha = 0.0;
    w.p_interval = {-1.0, 1.0};
    w.domain = {-1.0, 1.0};
    return w;
}

WeightSpec design_weight() {
    WeightSpec w;
    w.alpha = 1.0e3;
    w.dist_mean = 0.008;
    w.dist_std = 0.06;
    w.p_interval = {0.4, 1.0};
    w.domain = {0.008 - 8.0 * 0.06, 1.0};
    return w;
}

}  // namespace

TEST_CASE("orthonormal basis reproduces normalized Legendre at d=2") {
    auto basis = polydes::orthonormal_basis(uniform_weight(), 2);
    REQUIRE(basis.size() == 3);
    // sqrt(1/2), sqrt(3/2) x, sqrt(5/2) (3x^2 - 1)/2, up to sign.
    const double c0 = std::sqrt(0.5);
    const double c1 = std::sqrt(1.5);
    const double c2 = std::sqrt(2.5);
    const double s0 = basis[0](0.3) < 0 ? -1.0 : 1.0;
    CHECK(s0 * basis[0](0.3) == doctest::Approx(c0).epsilon(1e-8));
    const double s1 = basis[1](0.5) < 0 ? -1.0 : 1.0;
    CHECK(s1 * basis[1](0.5) == doctest::Approx(c1 * 0.5).epsilon(1e-8));
    const double s2 = basis[2](0.7) < 0 ? -1.0 : 1.0;
    CHECK(s2 * basis[2](0.7) ==
          doctest::Approx(c2 * (3.0 * 0.49 - 1.0) / 2.0).epsilon(1e-8));
}

TEST_CASE("orthonormality: Gram matrix is the identity at doubled order") {
    auto w = design_weight();
    auto basis = polydes::orthonormal_basis(w, 7);
    REQUIRE(basis.size() == 8);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = i; j < basis.size(); ++j) {
            const long double ip = polydes::integrate_weighted(
                w,
                [&](long double x) {
                    return basis[i].eval(x) * basis[j].eval(x);
                },
                128);  // doubled quadrature order
            const double expect = (i == j) ? 1.0 : 0.0;
            CHECK(static_cast<double>(ip) == doctest::Approx(expect).epsilon(1e-8));
        }
    }
}

TEST_CASE("l2_project reproduces low-degree polynomials") {
    auto w = design_weight();
    auto basis = polydes::orthonormal_basis(w, 5);
    auto proj = polydes::l2_project([](double x) { return x * x; }, basis, w);
    for (double x : {-0.3, 0.0, 0.41, 0.97}) {
        CHECK(proj(x) == doctest::Approx(x * x).epsilon(1e-8));
    }

    // Projecting a basis element returns it.
    const Polynomial& f1 = basis[1];
    auto pf1 = polydes::l2_project([&](double x) { return f1(x); }, basis, w);
    for (double x : {-0.2, 0.1, 0.6}) {
        CHECK(pf1(x) == doctest::Approx(f1(x)).epsilon(1e-8));
    }

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int it = 0; it < 5; ++it) {
        std::vector<double> c(6);
        for (auto& v : c) v = coef(rng);
        Polynomial t(c);
        auto pt = polydes::l2_project([&](double x) { return t(x); }, basis, w);
        for (double x : {-0.35, 0.05, 0.5, 0.9}) {
            CHECK(pt(x) == doctest::Approx(t(x)).epsilon(1e-7));
        }
    }
}

TEST_CASE("remez: symmetric degree-1 instance") {
    auto r = polydes::remez_two_interval({-2.0, -1.0}, {1.0, 2.0}, 1);
    // The best affine approximation of the antisymmetric step is 1/2 + c x.
    REQUIRE(r.poly.coeffs.size() >= 2);
    CHECK(r.poly.coeffs[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(r.alternations >= 3);  // d + 2
    // Dense grid confirms the declared eps.
    double worst = 0.0;
    for (int i = 0; i <= 100000; ++i) {
        const double x = -2.0 + 4.0 * i / 100000.0;
        if (x > -1.0 && x < 1.0) continue;
        const double target = x > 0 ? 1.0 : 0.0;
        worst = std::max(worst, std::abs(r.poly(x) - target));
    }
    CHECK(worst <= r.eps * 1.01 + 1e-12);
}

TEST_CASE("remez: eps decreases with degree and alternation counts hold") {
    const iris::Interval i0{-0.15, 0.35}, i1{0.4, 3.8};
    auto r9 = polydes::remez_two_interval(i0, i1, 9);
    auto r11 = polydes::remez_two_interval(i0, i1, 11);
    auto r15 = polydes::remez_two_interval(i0, i1, 15);
    CHECK(r11.eps <= r9.eps + 1e-12);
    CHECK(r15.eps <= r11.eps + 1e-12);
    CHECK(r15.eps < 0.5);
    CHECK(r9.alternations >= 11);
    CHECK(r11.alternations >= 13);
    CHECK(r15.alternations >= 17);
}

TEST_CASE("compose_classifier core and post schedules") {
    auto core = polydes::compose_classifier({-0.15, 0.35}, {0.4, 3.8}, 1e-4,
                                            {15, 15, 7});
    CHECK(core.stages.size() == 3);
    CHECK(core.eps() <= 1e-4);
    CHECK(polydes::chain_grid_error(core) <= core.eps() + 1e-5);

    auto post = polydes::compose_classifier({-0.414, 0.571}, {0.585, 1.414},
                                            1e-3, {31, 31});
    CHECK(post.stages.size() == 2);
    CHECK(post.eps() <= 1e-3);
    CHECK(polydes::chain_grid_error(post) <= post.eps() + 1e-5);

    // A loose target is reached by a single stage.
    auto single = polydes::compose_classifier({-0.15, 0.35}, {0.4, 3.8}, 0.45, {15});
    CHECK(single.stages.size() == 1);

    CHECK_THROWS_AS(
        polydes::compose_classifier({-0.15, 0.35}, {0.4, 3.8}, 1e-12, {3}),
        TargetUnreachable);
}

TEST_CASE("folding bound check") {
    CHECK(polydes::folding_bound_check(1.0 / 32.0, 1.0, 16));
    CHECK_FALSE(polydes::folding_bound_check(1.0 / 31.0, 1.0, 16));
    const double alpha = 1.0 / 32.0, beta = 1.0;
    CHECK(16.0 * alpha < beta - 15.0 * alpha);
}

TEST_CASE("shipped folding polynomial fixture") {
    auto f = polydes::load_polynomial(std::string(DATA_DIR) + "/fold_poly_appc.json");
    CHECK(f.poly.degree() == 7);
    CHECK(f.poly(0.0) == 0.004105);  // exact constant coefficient
    CHECK(f.domain_lo == doctest::Approx(-0.233));
    CHECK(f.domain_hi == doctest::Approx(1.0));
    for (int i = 0; i <= 2000; ++i) {
        const double x = -0.13 + 0.26 * i / 2000.0;
        CHECK(std::abs(f.poly(x)) < 0.05);
    }
}

TEST_CASE("classifier chain fixture round trip") {
    auto chain = polydes::compose_classifier({-2.0, -1.0}, {1.0, 2.0}, 0.45, {5});
    const std::string path = "chain_test.json";
    polydes::save_chain(path, chain);
    auto back = polydes::load_chain(path);
    REQUIRE(back.stages.size() == chain.stages.size());
    CHECK(back.eps() == doctest::Approx(chain.eps()));
    for (double x : {-1.7, -1.0, 1.3, 2.0}) {
        CHECK(static_cast<double>(back.eval(x)) ==
              doctest::Approx(static_cast<double>(chain.eval(x))).epsilon(1e-12));
    }
    std::remove(path.c_str());
}
