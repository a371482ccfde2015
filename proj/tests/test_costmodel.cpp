#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "irislab/costmodel.hpp"

using namespace irislab;
using namespace irislab::cost;

TEST_CASE("database sizes") {
    // ell = 1, log Q = 48: 3 * 2 * 2^27 * 48 bits.
    CHECK(db_size_bits(1, 48) == 3LL * 2 * (1LL << 27) * 48);
    // One byte per coefficient per plane matches the bit formula at log_q = 8.
    CHECK(db_size_bits(1, 8) == db_size_bytes_int8(1, 1) * 8);
    // int8 digit planes, 24 primes doubled by the p^2 decomposition: 48 planes,
    // 36 GiB total.
    CHECK(db_size_bytes_int8(1, 48) == 36LL * GiB);
    // Stripping the shared a-part halves it.
    CHECK(db_size_bytes_int8(1, 48) - a_part_bytes_int8(48) == 18LL * GiB);
    CHECK(a_part_bytes_int8(48) == 18LL * GiB);
    CHECK_THROWS_AS(db_size_bits(-1, 48), ConfigError);
    CHECK_THROWS_AS(db_size_bytes_int8(1, 0), ConfigError);
}

TEST_CASE("query sizes") {
    // Two ciphertexts, N = 2^16, 16-bit modulus: 512 KiB.
    CHECK(query_size_bytes(16, 16, 2) == 512 * KiB);
    // One ciphertext: 256 KiB.
    CHECK(query_size_bytes(16, 16, 1) == 256 * KiB);
    CHECK_THROWS_AS(query_size_bytes(16, 0, 2), ConfigError);
}

TEST_CASE("packed query ciphertext count") {
    // 31 rotations, beta = 4, batch of 32, d = 2^14, N = 2^16.
    CHECK(packed_query_ct_count(31, 4, 32, 1L << 14, 16) == 62);
    // One eye, one rotation, tiny ring: ceil division.
    CHECK(packed_query_ct_count(1, 1, 1, 10, 3) == 2);
    CHECK_THROWS_AS(packed_query_ct_count(0, 4, 32, 1L << 14, 16), ConfigError);
}

TEST_CASE("expansion factor") {
    CHECK(expansion_factor(16, 4) == doctest::Approx(0.3125));
    // Decreasing in both arguments.
    CHECK(expansion_factor(32, 4) < expansion_factor(16, 4));
    CHECK(expansion_factor(16, 8) < expansion_factor(16, 4));
    CHECK_THROWS_AS(expansion_factor(0, 4), ConfigError);
}

TEST_CASE("communication report") {
    CommParams p;  // defaults: query 2^16/16-bit x2, result 2^13/128-bit
    auto r = comm_report(p);
    CHECK(r.query_bytes == 512 * KiB);
    CHECK(r.result_ct_bytes == 256 * KiB);
    CHECK(r.share_bytes == 128 * KiB);
    // Subring-truncated receiver traffic: (5 shares + b) * 32 * 8 bits.
    CHECK(r.truncated_bytes == 6 * 32);
    CHECK(r.truncated_bytes < KiB);
}

TEST_CASE("gpu distribution plan") {
    auto plan = gpu_distribution_plan(1L << 19, 1L << 16, 8, 48);
    CHECK(plan.slices == 8);
    CHECK(plan.a_slice_bytes == 18LL * GiB);
    CHECK(plan.b_slice_bytes == 18LL * GiB / 7);
    CHECK(plan.clusters == 2);  // 2^19 entries over 7 * 2^16 per cluster

    auto big = gpu_distribution_plan(1L << 22, 1L << 14, 8, 48);
    CHECK(big.clusters == 37);  // ceil(2^22 / (7 * 2^14))

    CHECK_THROWS_AS(gpu_distribution_plan(0, 1, 8, 48), ConfigError);
    CHECK_THROWS_AS(gpu_distribution_plan(100, 10, 1, 48), ConfigError);
}

TEST_CASE("report emitters") {
    CommParams p;
    const std::string table = cost_report_table(1, 48, p);
    CHECK(table.find("36 GiB") != std::string::npos);
    CHECK(table.find("18 GiB") != std::string::npos);
    CHECK(table.find("512 KiB") != std::string::npos);
    CHECK(table.find("256 KiB") != std::string::npos);
    CHECK(table.find("128 KiB") != std::string::npos);

    save_cost_report_json("cost_test.json", 1, 48, p);
    std::ifstream is("cost_test.json");
    REQUIRE(is.good());
    std::string body((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("\"db_size_gib\": 36") != std::string::npos);
    CHECK(body.find("\"query_bytes\": 524288") != std::string::npos);
    std::remove("cost_test.json");
}
