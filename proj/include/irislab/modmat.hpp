#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "irislab/errors.hpp"

namespace irislab::modmat {

/// RNS basis of pairwise coprime moduli p^e with p < 2^8.
struct RnsBasis {
    struct Modulus {
        uint32_t p = 0;  // prime
        uint32_t e = 1;  // exponent, 1 or 2
        uint32_t value() const { return e == 2 ? p * p : p; }
    };

    std::vector<Modulus> moduli;
    mpz_class Q;  // exact product of all p^e

    /// One int8 digit plane per modulus of the form p, two per p^2.
    std::size_t digit_planes() const;
    double log2_Q() const;
};

/// Q = prod of p^2 over primes 127 <= p <= 253.
RnsBasis build_paper_basis();

/// log2 of prod over primes 3..253 of p^floor(log_p 256): the largest
/// modulus reachable with one int8 plane per prime power.
double max_int8_rns_capacity();

/// Number of int8 planes a pure-RNS representation needs for that same
/// target: one per prime in [3, 253].
std::size_t pure_rns_plane_count();

std::vector<uint32_t> primes_in_range(uint32_t lo, uint32_t hi);

/// Row-major int matrix of centered residues.
struct SmallMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<int32_t> a;

    int32_t& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    int32_t at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

/// M = M0 + p*M1 (mod p^2) with digits centered in [-(p-1)/2, (p-1)/2].
struct DigitMatrices {
    uint32_t p = 0;
    SmallMatrix m0;
    SmallMatrix m1;
};

/// Arbitrary-precision matrix with entries reduced to [0, Q).
struct BigMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<mpz_class> a;

    static BigMatrix zeros(std::size_t r, std::size_t c);
    static BigMatrix identity(std::size_t n);
    mpz_class& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    const mpz_class& at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    void reduce(const mpz_class& Q);
};

DigitMatrices digit_decompose(const SmallMatrix& m, uint32_t p);
SmallMatrix digit_recompose(const DigitMatrices& d);

/// Plain integer GEMM with signed 32-bit accumulation. The precondition
/// K*max|A|*max|B| < 2^31 is checked before computing.
SmallMatrix small_gemm(const SmallMatrix& a, const SmallMatrix& b);

/// A*B mod p^2 via exactly three small products (A0B0, A0B1, A1B0).
SmallMatrix gemm_mod_psq(const SmallMatrix& a, const SmallMatrix& b, uint32_t p);

/// A*B mod Q through per-modulus digit GEMMs and CRT recombination.
BigMatrix gemm_mod_Q(const BigMatrix& a, const BigMatrix& b, const RnsBasis& basis);

/// Schoolbook arbitrary-precision reference.
BigMatrix oracle_gemm_mod_Q(const BigMatrix& a, const BigMatrix& b, const mpz_class& Q);

// --- serialization -------------------------------------------------------

/// Header {rows, cols, Q as decimal string}; entries as fixed-width
/// little-endian byte strings of ceil(log256 Q) bytes.
void save_big_matrix(const std::string& path, const BigMatrix& m, const mpz_class& Q);
BigMatrix load_big_matrix(const std::string& path, mpz_class* Q_out = nullptr);

}  // namespace irislab::modmat
