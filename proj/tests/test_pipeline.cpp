#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "irislab/pipeline.hpp"

using namespace irislab;
using emu::EmulatedCiphertext;
using emu::Encoding;

namespace {

std::vector<std::complex<double>> cvec(const std::vector<double>& v) {
    std::vector<std::complex<double>> out;
    out.reserve(v.size());
    for (double x : v) out.emplace_back(x, 0.0);
    return out;
}

const polydes::ClassifierChain& core_chain() {
    static const polydes::ClassifierChain c = polydes::compose_classifier(
        {-0.25, 0.25}, {0.4, 0.475}, 1e-4, {15, 15});
    return c;
}

const polydes::ClassifierChain& fold_chain() {
    static const polydes::ClassifierChain c = polydes::compose_classifier(
        {-0.15, 0.35}, {0.4, 3.8}, 1e-4, {15, 15, 7});
    return c;
}

const polydes::ClassifierChain& post_chain() {
    static const polydes::ClassifierChain c = polydes::compose_classifier(
        {-0.414, 0.571}, {0.585, 1.414}, 1e-3, {31, 31});
    return c;
}

polydes::Polynomial fold_poly() {
    return polydes::Polynomial(std::vector<double>{
        0.004105, -0.173510, -2.528271, 24.347349, 124.161550, -412.746212,
        376.961251, 106.553952});
}

pipe::PipelineConfig small_config() {
    pipe::PipelineConfig cfg;
    cfg.rho = 8;
    cfg.batch = 1;
    cfg.n_db = 1024;
    cfg.d = 1024;
    cfg.fold_k = 4;
    cfg.emu_cfg = pipe::default_emulator_config();
    cfg.model.negative = {-0.25, 0.25};
    cfg.model.positive = {0.4, 0.475};
    cfg.fold_poly = fold_poly();
    cfg.alg1_chain = core_chain();
    cfg.fold_chain = fold_chain();
    cfg.post_chain = post_chain();
    return cfg;
}

}  // namespace

TEST_CASE("pack_query") {
    emu::Emulator em(pipe::default_emulator_config());
    const auto enc = [&](double v) {
        return em.ecd(cvec({v, v}), Encoding::Slot, false, 2, 23.0, 10);
    };
    std::vector<EmulatedCiphertext> bits = {enc(1), enc(0), enc(1), enc(1)};

    SUBCASE("beta = 1 returns the inputs unchanged") {
        auto out = pipe::pack_query(em, bits, 1);
        REQUIRE(out.size() == 4);
        CHECK(out[2].message == bits[2].message);
    }
    SUBCASE("bits (1,0,1,1) pack to 13") {
        auto out = pipe::pack_query(em, bits, 4);
        REQUIRE(out.size() == 1);
        CHECK(out[0].message[0].real() == 13.0);
    }
    SUBCASE("31 rotations at beta 4 give 8 ciphertexts") {
        std::vector<EmulatedCiphertext> many(31, enc(1));
        auto out = pipe::pack_query(em, many, 4);
        CHECK(out.size() == 8);
        CHECK(out[7].message[0].real() == 7.0);  // last group holds 3 bits
    }
}

TEST_CASE("preprocess_query recovers the masked representation") {
    emu::Emulator em(pipe::default_emulator_config());
    const std::size_t d = 8;
    iris::IrisTemplate q;
    q.code = {1, 0, 1, 1, 0, 0, 1, 0};
    q.mask = {1, 1, 0, 1, 1, 1, 1, 0};

    const int rho = 4, beta = 2;
    std::vector<EmulatedCiphertext> bit_cts;
    std::vector<std::vector<double>> masks;
    for (int r = 0; r < rho; ++r) {
        const iris::IrisTemplate qr = iris::rotate(q, static_cast<std::size_t>(r));
        std::vector<double> code(d), mask(d);
        for (std::size_t i = 0; i < d; ++i) {
            code[i] = qr.code[i];
            mask[i] = qr.mask[i];
        }
        bit_cts.push_back(em.ecd(cvec(code), Encoding::Slot, false, 4, 23.0, 3));
        masks.push_back(mask);
    }
    auto packed = pipe::pack_query(em, bit_cts, beta);
    REQUIRE(packed.size() == 2);
    auto out = pipe::preprocess_query(em, packed, masks, beta, rho, "si_half");
    REQUIRE(out.size() == 4);
    CHECK(em.count_ops("bts:si_half") == 2);  // one per packed ciphertext

    for (int r = 0; r < rho; ++r) {
        const auto expect =
            iris::to_masked(iris::rotate(q, static_cast<std::size_t>(r)));
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(out[static_cast<std::size_t>(r)].message[i].real() ==
                  doctest::Approx(expect.values[i]).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(pipe::preprocess_query(em, packed, masks, beta, 5, "si_half"),
                    ShapeMismatch);
}

TEST_CASE("normalize divides by the overlap counts") {
    emu::Emulator em(pipe::default_emulator_config());
    auto ct = em.ecd(cvec({6.0, -4.0, 10.0, 0.0}), Encoding::Slot, false, 3, 23.0, 10);
    auto out = pipe::normalize(em, ct, {2.0, 4.0, 5.0, 8.0}, 23.0);
    CHECK(out.message[0].real() == doctest::Approx(3.0));
    CHECK(out.message[1].real() == doctest::Approx(-1.0));
    CHECK(out.message[2].real() == doctest::Approx(2.0));
    CHECK(out.level == 9);          // pmult + rescale costs one level
    CHECK(out.scale_bits == 23.0);  // scale restored by the rescale

    CHECK_THROWS_AS(pipe::normalize(em, ct, {2.0, 0.0, 5.0, 8.0}, 23.0), ZeroOverlap);
    CHECK_THROWS_AS(pipe::normalize(em, ct, {2.0, 4.0}, 23.0), ShapeMismatch);
}

TEST_CASE("or_combine and or_tree implement OR on clean bits") {
    emu::Emulator em(pipe::default_emulator_config());
    // Slots enumerate the truth table: (0,0), (0,1), (1,0), (1,1).
    auto a = em.ecd(cvec({0, 0, 1, 1}), Encoding::Slot, false, 3, 23.0, 10);
    auto b = em.ecd(cvec({0, 1, 0, 1}), Encoding::Slot, false, 3, 23.0, 10);
    auto o = pipe::or_combine(em, a, b, 23.0, "acc");
    const std::vector<double> expect = {0, 1, 1, 1};
    for (int i = 0; i < 4; ++i) {
        CHECK(o.message[static_cast<std::size_t>(i)].real() ==
              doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }

    auto c = em.ecd(cvec({1, 0, 0, 0}), Encoding::Slot, false, 3, 23.0, 10);
    auto t = pipe::or_tree(em, {a, b, c}, 23.0, "acc");
    const std::vector<double> expect3 = {1, 1, 1, 1};
    for (int i = 0; i < 4; ++i) {
        CHECK(t.message[static_cast<std::size_t>(i)].real() ==
              doctest::Approx(expect3[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
    CHECK_THROWS_AS(pipe::or_tree(em, {}, 23.0, "acc"), ConfigError);

    // Low-level operands are refreshed instead of failing.
    auto low = em.mod_switch(a, 1);
    auto r = pipe::or_combine(em, low, b, 23.0, "acc");
    CHECK(r.message[2].real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(em.count_ops("bts:acc") >= 1);
}

TEST_CASE("rotate_and_sum_or floods a single set bit to all slots") {
    emu::Emulator em(pipe::default_emulator_config());
    auto ct = em.ecd(cvec({0, 0, 1, 0}), Encoding::Slot, false, 3, 23.0, 10);
    auto out = pipe::rotate_and_sum_or(em, ct, 23.0, "acc");
    for (int i = 0; i < 4; ++i) {
        CHECK(out.message[static_cast<std::size_t>(i)].real() ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
    auto zero = em.ecd(cvec({0, 0, 0, 0}), Encoding::Slot, false, 3, 23.0, 10);
    auto zout = pipe::rotate_and_sum_or(em, zero, 23.0, "acc");
    CHECK(zout.message[0].real() == doctest::Approx(0.0));
}

TEST_CASE("discretize grid parameters") {
    pipe::PipelineConfig cfg = small_config();
    // Defaults: delta = 5, e_comp = 13.25, e_bts = 0.28.
    CHECK(pipe::discretize_n_prime(cfg) == 14);  // ceil(13.53)
    CHECK(pipe::discretize_p_prime(cfg) == 18);  // floor(32 - 13.53)
    CHECK(pipe::discretize_tau(cfg) == 18);      // policy: tau = p'

    cfg.tau_override = 15;
    CHECK(pipe::discretize_tau(cfg) == 15);
    cfg.tau_override = 14;  // tau must exceed n'
    CHECK_THROWS_AS(pipe::discretize_tau(cfg), ConfigError);
    cfg.tau_override = 19;  // tau must not exceed p'
    CHECK_THROWS_AS(pipe::discretize_tau(cfg), ConfigError);

    cfg.tau_override = -1;
    cfg.delta_bits = 3;  // 2^3 < e_comp + e_bts: no integer gap left
    CHECK_THROWS_AS(pipe::discretize_tau(cfg), GapCollapsed);
}

TEST_CASE("discretize maps clean classifier outputs to clean bits") {
    pipe::PipelineConfig cfg = small_config();
    emu::Emulator em(cfg.emu_cfg);
    const auto enc = [&](double v) {
        return em.ecd(cvec(std::vector<double>(8, v)), Encoding::Slot, false, 4,
                      23.0, 6);
    };
    auto one = pipe::discretize(em, enc(1.0), cfg);
    CHECK(one.message[0].real() == doctest::Approx(1.0).epsilon(1e-9));
    auto zero = pipe::discretize(em, enc(0.0), cfg);
    CHECK(std::abs(zero.message[0].real()) < 1e-9);
    // Residual classifier error within the chain's eps snaps away.
    auto near = pipe::discretize(em, enc(1.0 - 4e-4), cfg);
    CHECK(near.message[0].real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(em.count_ops("bts:post") == 3);
}

TEST_CASE("fold_group with a single rotation") {
    emu::Emulator em(pipe::default_emulator_config());
    const polydes::Polynomial f = fold_poly();
    auto ct = em.ecd(cvec({0.01, -0.02, 0.43, 0.0}), Encoding::Slot, false, 3,
                     23.0, 12);
    auto out = pipe::fold_group(em, {ct}, f, 23.0, 2);
    // f applied slot-wise, then rotated by the base index 2.
    CHECK(out.message[0].real() == doctest::Approx(f(0.43)).epsilon(1e-9));
    CHECK(out.message[2].real() == doctest::Approx(f(0.01)).epsilon(1e-9));
    CHECK_THROWS_AS(pipe::fold_group(em, {}, f, 23.0, 0), ConfigError);
}

TEST_CASE("postprocess_clean sharpens bits quadratically") {
    emu::Emulator em(pipe::default_emulator_config());
    auto ct = em.ecd(cvec({1.0 - 1e-3, 1e-3, 1.0, 0.0}), Encoding::Slot, false, 3,
                     23.0, 17);
    auto out = pipe::postprocess_clean(em, ct, 1e-3, 88, 23.0, "acc");
    CHECK(std::abs(out.message[0].real() - 1.0) < std::ldexp(1.0, -88));
    CHECK(std::abs(out.message[1].real()) < std::ldexp(1.0, -88));
    CHECK(out.message[2].real() == doctest::Approx(1.0));
    CHECK(std::abs(out.message[3].real()) < 1e-30);

    CHECK_THROWS_AS(pipe::postprocess_clean(em, ct, 0.6, 40, 23.0, "acc"),
                    ConfigError);
}

TEST_CASE("polynomial evaluation on an exhausted chain fails loudly") {
    emu::Emulator em(pipe::default_emulator_config());
    auto low = em.ecd(cvec(std::vector<double>(8, 0.1)), Encoding::Slot, false, 4,
                      23.0, 2);
    CHECK_THROWS_AS(pipe::eval_chain_ct(em, core_chain(), low, 23.0),
                    ModulusExhausted);
}

TEST_CASE("end-to-end: both algorithms match the plaintext oracle") {
    pipe::PipelineConfig cfg = small_config();

    auto db = iris::synth_db(static_cast<std::size_t>(cfg.n_db),
                             static_cast<std::size_t>(cfg.d), 1.0, 42);
    auto queries = iris::synth_db(1, static_cast<std::size_t>(cfg.d), 1.0, 4242);
    // Plant a match at rotation 5 with 292 code-bit flips: score ~ 0.43, in P.
    {
        iris::IrisTemplate t = iris::rotate(queries[0], 5);
        std::mt19937_64 rng(7);
        std::vector<int> idx(static_cast<std::size_t>(cfg.d));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int i = 0; i < 292; ++i) t.code[static_cast<std::size_t>(idx[i])] ^= 1;
        db[777] = t;
        const double s = iris::score(iris::rotate(queries[0], 5), db[777]);
        REQUIRE(cfg.model.positive.contains(s));
    }

    emu::Emulator em(cfg.emu_cfg);
    auto r1 = pipe::run_alg1(em, cfg, queries, db);
    CHECK(r1.oracle_bits == std::vector<int>{1});
    CHECK(r1.agrees_with_oracle());
    CHECK(r1.bts_pre == cfg.rho);  // one per (rotation, block, eye)

    auto r2 = pipe::run_alg2(em, cfg, queries, db);
    CHECK(r2.agrees_with_oracle());
    CHECK(r2.folding_assumption_ok);
    CHECK(r2.bts_pre == (cfg.rho + cfg.fold_k - 1) / cfg.fold_k);
    // Pre-classification bootstraps shrink by exactly k here (k | rho).
    CHECK(r1.bts_pre == cfg.fold_k * r2.bts_pre);

    pipe::save_run_report("run_report_test.json", r1, r2, cfg);
    std::ifstream is("run_report_test.json");
    REQUIRE(is.good());
    std::string body((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("\"agrees_with_oracle\": true") != std::string::npos);
    std::remove("run_report_test.json");

    // A query with no planted match stays negative.
    auto clean_q = iris::synth_db(1, static_cast<std::size_t>(cfg.d), 1.0, 999);
    auto r3 = pipe::run_alg1(em, cfg, clean_q, db);
    CHECK(r3.oracle_bits == std::vector<int>{0});
    CHECK(r3.agrees_with_oracle());
}

TEST_CASE("config validation") {
    pipe::PipelineConfig cfg = small_config();
    cfg.fold_k = 9;  // > rho
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.n_db = 1000;  // not a multiple of d
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.bts_acc = "missing";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(small_config().validate());
}
