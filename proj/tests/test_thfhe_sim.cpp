#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "irislab/thfhe_sim.hpp"

using namespace irislab;
using namespace irislab::thfhe;

namespace {

mpz_class prime_above(int bits) {
    mpz_class q = mpz_class(1) << bits;
    mpz_class p;
    mpz_nextprime(p.get_mpz_t(), q.get_mpz_t());
    return p;
}

ToyRingElement reconstruct(const Sharing& sh, const std::vector<int>& participants,
                           const mpz_class& q) {
    const auto lambda = lagrange_coeffs(participants, q);
    ToyRingElement acc = re_zero(sh.shares[0].n(), q);
    for (std::size_t j = 0; j < participants.size(); ++j) {
        acc = re_add(acc, re_scalar_mul(
                              lambda[j],
                              sh.shares[static_cast<std::size_t>(participants[j] - 1)]));
    }
    return acc;
}

std::vector<long> round_trip(long n, int q_bits, int scale_bits, int n_parties,
                             int threshold, const std::vector<int>& participants,
                             const std::vector<long>& mu, double flood_std_bits,
                             uint64_t prf_master, uint64_t seed,
                             double noise_bound_bits = -1.0) {
    const mpz_class q = prime_above(q_bits);
    const ToyRingElement sk = toy_keygen(n, q, seed);
    const ToyCiphertext ct = toy_encrypt(mu, sk, scale_bits, 1.0, seed + 1);
    const Sharing sh = share_secret(sk, n_parties, threshold, seed + 2);
    std::vector<DecryptionShare> shares;
    for (int p : participants) {
        shares.push_back(partial_decrypt(ct, p,
                                         sh.shares[static_cast<std::size_t>(p - 1)],
                                         participants, flood_std_bits, prf_master,
                                         seed + 3));
    }
    const auto out = final_decrypt(ct.b, shares, scale_bits, noise_bound_bits);
    std::vector<long> got;
    for (const auto& m : out) got.push_back(m.get_si());
    return got;
}

std::vector<long> ramp(long n) {
    std::vector<long> mu(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) mu[static_cast<std::size_t>(i)] = (i % 7) - 3;
    return mu;
}

}  // namespace

TEST_CASE("ring arithmetic basics") {
    const mpz_class q = 97;
    ToyRingElement a = re_zero(4, q);
    a.coeffs = {1, 2, 3, 4};
    ToyRingElement b = re_zero(4, q);
    b.coeffs = {0, 1, 0, 0};  // X
    // a * X negacyclically: constant term picks up -a_3.
    auto p = re_mul(a, b);
    CHECK(p.coeffs[0] == 97 - 4);
    CHECK(p.coeffs[1] == 1);
    CHECK(p.coeffs[2] == 2);
    CHECK(p.coeffs[3] == 3);
    auto s = re_sub(re_add(a, b), b);
    CHECK(s.coeffs == a.coeffs);
    auto d = re_scalar_mul(3, a);
    CHECK(d.coeffs[3] == 12);
}

TEST_CASE("share and reconstruct") {
    const mpz_class q = prime_above(40);
    const ToyRingElement sk = toy_keygen(16, q, 7);

    SUBCASE("t = n = 2") {
        auto sh = share_secret(sk, 2, 2, 11);
        auto rec = reconstruct(sh, {1, 2}, q);
        CHECK(rec.coeffs == sk.coeffs);
    }
    SUBCASE("(5, 3): any 3 of 5 suffice, 2 do not") {
        auto sh = share_secret(sk, 5, 3, 13);
        CHECK(reconstruct(sh, {1, 2, 3}, q).coeffs == sk.coeffs);
        CHECK(reconstruct(sh, {2, 4, 5}, q).coeffs == sk.coeffs);
        CHECK(reconstruct(sh, {1, 3, 5}, q).coeffs == sk.coeffs);
        CHECK_FALSE(reconstruct(sh, {2, 5}, q).coeffs == sk.coeffs);
    }
    SUBCASE("bad parameters") {
        CHECK_THROWS_AS(share_secret(sk, 5, 1, 1), BadThreshold);
        CHECK_THROWS_AS(share_secret(sk, 5, 6, 1), BadThreshold);
        ToyRingElement small = re_zero(16, 5);
        CHECK_THROWS_AS(share_secret(small, 8, 3, 1), BadThreshold);  // q <= n
        ToyRingElement comp = re_zero(16, mpz_class(1) << 20);
        CHECK_THROWS_AS(share_secret(comp, 3, 2, 1), BadThreshold);  // composite q
    }
}

TEST_CASE("noiseless round trip, (3, 2) threshold") {
    const long n = 16;
    const auto mu = ramp(n);
    auto got = round_trip(n, 40, 20, 3, 2, {1, 3}, mu, -1.0, 0, 101);
    CHECK(got == mu);
}

TEST_CASE("pairwise PRF masks perturb shares but cancel in the sum") {
    const long n = 16;
    const mpz_class q = prime_above(40);
    const ToyRingElement sk = toy_keygen(n, q, 5);
    const ToyCiphertext ct = toy_encrypt(ramp(n), sk, 20, 1.0, 6);
    const auto sh = share_secret(sk, 5, 3, 7);
    const std::vector<int> parts = {1, 2, 4};

    ToyRingElement bare_sum = re_zero(n, q);
    ToyRingElement masked_sum = re_zero(n, q);
    bool any_differs = false;
    for (int p : parts) {
        auto bare = partial_decrypt(ct, p, sh.shares[static_cast<std::size_t>(p - 1)],
                                    parts, -1.0, 0, 0);
        auto masked = partial_decrypt(ct, p, sh.shares[static_cast<std::size_t>(p - 1)],
                                      parts, -1.0, 0xfeedULL, 0);
        any_differs = any_differs || !(bare.share.coeffs == masked.share.coeffs);
        bare_sum = re_add(bare_sum, bare.share);
        masked_sum = re_add(masked_sum, masked.share);
    }
    CHECK(any_differs);
    CHECK(bare_sum.coeffs == masked_sum.coeffs);
}

TEST_CASE("round trips with flooding noise") {
    const long n = 16;
    const auto mu = ramp(n);
    SUBCASE("(3, 2)") {
        auto got = round_trip(n, 40, 20, 3, 2, {2, 3}, mu, 12.0, 0x1baULL, 21);
        CHECK(got == mu);
    }
    SUBCASE("(5, 3)") {
        auto got = round_trip(n, 40, 20, 5, 3, {1, 4, 5}, mu, 12.0, 0xabcULL, 22);
        CHECK(got == mu);
    }
    SUBCASE("(8, 5)") {
        auto got = round_trip(n, 40, 20, 8, 5, {1, 2, 3, 6, 8}, mu, 12.0, 0xdefULL, 23);
        CHECK(got == mu);
    }
    SUBCASE("flooding sized by the gap formula") {
        // log_n = 4, lambda = 40, log_t = 2 -> gap 26; scale leaves headroom.
        const double gap = flooding_gap_bits(4, 40, 2);
        CHECK(gap == 26.0);
        auto got = round_trip(n, 72, 34, 5, 3, {2, 3, 5}, mu, gap, 0x55ULL, 24);
        CHECK(got == mu);
    }
}

TEST_CASE("rounding ambiguity is detected, missing shares break decryption") {
    const long n = 16;
    const auto mu = ramp(n);
    CHECK_THROWS_AS(
        round_trip(n, 40, 20, 3, 2, {1, 2}, mu, -1.0, 0, 31, /*noise_bound=*/19.5),
        RoundingAmbiguity);

    // An adversary holding t-1 = 2 of the shares built for a 3-participant
    // Lagrange set decodes garbage.
    const mpz_class q = prime_above(40);
    const ToyRingElement sk = toy_keygen(n, q, 41);
    const ToyCiphertext ct = toy_encrypt(mu, sk, 20, 1.0, 42);
    const auto sh = share_secret(sk, 5, 3, 43);
    const std::vector<int> parts = {1, 2, 5};
    std::vector<DecryptionShare> partial;
    for (int p : {1, 2}) {
        partial.push_back(partial_decrypt(
            ct, p, sh.shares[static_cast<std::size_t>(p - 1)], parts, -1.0, 0, 0));
    }
    auto got = final_decrypt(ct.b, partial, 20);
    std::vector<long> got_l;
    for (const auto& m : got) got_l.push_back(m.get_si());
    CHECK_FALSE(got_l == mu);
}

TEST_CASE("unknown participants are rejected") {
    const long n = 16;
    const mpz_class q = prime_above(40);
    const ToyRingElement sk = toy_keygen(n, q, 51);
    const ToyCiphertext ct = toy_encrypt(ramp(n), sk, 20, 1.0, 52);
    const auto sh = share_secret(sk, 3, 2, 53);
    CHECK_THROWS_AS(partial_decrypt(ct, 3, sh.shares[2], {1, 2}, -1.0, 0, 0),
                    UnknownParticipant);
}

TEST_CASE("flooding gap formula") {
    CHECK(flooding_gap_bits(16, 128, 8) == 88.0);
    CHECK(flooding_gap_bits(0, 0, 0) == 0.0);
    CHECK(flooding_gap_bits(13, 128, 8) == 85.0);
}

TEST_CASE("fewer than t shares look uniform") {
    // Chi-square on the coefficients of a single partial decryption share:
    // a is uniform, so lambda * a * sk is statistically flat across bins.
    const long n = 512;
    const mpz_class q = prime_above(40);
    const ToyRingElement sk = toy_keygen(n, q, 61);
    std::vector<long> mu(static_cast<std::size_t>(n), 1);
    const ToyCiphertext ct = toy_encrypt(mu, sk, 20, 1.0, 62);
    const auto sh = share_secret(sk, 3, 2, 63);
    auto share = partial_decrypt(ct, 1, sh.shares[0], {1, 2}, -1.0, 0, 0);

    const int bins = 16;
    std::vector<int> counts(bins, 0);
    for (const auto& c : share.share.coeffs) {
        mpz_class idx = (c * bins) / q;
        ++counts[static_cast<std::size_t>(idx.get_si())];
    }
    const double expect = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int c : counts) {
        const double d = c - expect;
        chi2 += d * d / expect;
    }
    // 15 degrees of freedom; 45 is far beyond the 0.999 quantile (~37.7),
    // so a flat distribution passes with huge margin.
    CHECK(chi2 < 45.0);
}

TEST_CASE("transcript file") {
    Transcript t;
    t.n_parties = 5;
    t.threshold = 3;
    t.participants = {1, 2, 4};
    t.ring_n = 8192;
    t.q_bits = 128;
    t.share_bytes = 8192 * 16;
    t.gap_bits = 88.0;
    const std::string path = "transcript_test.json";
    save_transcript(path, t);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string body((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("\"gap_bits\"") != std::string::npos);
    CHECK(body.find("8192") != std::string::npos);
    std::remove(path.c_str());
}
