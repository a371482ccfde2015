#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "irislab/errors.hpp"

namespace irislab::thfhe {

/// Element of Z_q[X]/(X^N + 1), coefficients reduced into [0, q).
struct ToyRingElement {
    std::vector<mpz_class> coeffs;
    mpz_class q;

    long n() const { return static_cast<long>(coeffs.size()); }
    void reduce();
    bool is_zero() const;
};

ToyRingElement re_zero(long n, const mpz_class& q);
ToyRingElement re_add(const ToyRingElement& a, const ToyRingElement& b);
ToyRingElement re_sub(const ToyRingElement& a, const ToyRingElement& b);
ToyRingElement re_scalar_mul(const mpz_class& c, const ToyRingElement& a);
/// Negacyclic convolution (schoolbook; toy sizes only).
ToyRingElement re_mul(const ToyRingElement& a, const ToyRingElement& b);
ToyRingElement re_random(long n, const mpz_class& q, uint64_t seed);

struct DecryptionShare {
    int party = 0;
    ToyRingElement share;
};

struct ToyCiphertext {
    ToyRingElement a;
    ToyRingElement b;  // b = -a*sk + scale*mu + e
};

struct Sharing {
    int n_parties = 0;
    int threshold = 0;
    std::vector<ToyRingElement> shares;  // shares[j] belongs to party j+1
};

/// Shamir sharing over Z_q coefficient-wise; q must be a prime > n so all
/// Lagrange denominators are invertible.
Sharing share_secret(const ToyRingElement& sk, int n, int t, uint64_t seed);

/// Lagrange reconstruction coefficients at 0 for the given party indices.
std::vector<mpz_class> lagrange_coeffs(const std::vector<int>& participants,
                                       const mpz_class& q);

/// Partial decryption share for one participant:
///   sh_j = lambda_j * a * sk_j + e_j + sum_{k != j} sign(j,k) * F(key_jk, ct).
/// The pairwise masks cancel exactly when all participants' shares are
/// summed. flood_std_bits < 0 disables flooding; prf_master == 0 disables
/// the pairwise masks.
DecryptionShare partial_decrypt(const ToyCiphertext& ct, int party,
                                const ToyRingElement& key_share,
                                const std::vector<int>& participants,
                                double flood_std_bits, uint64_t prf_master,
                                uint64_t flood_seed);

/// b + sum of shares, centered mod q and rounded by 2^scale_bits.
/// noise_bound_bits, when nonnegative, is checked against the rounding
/// margin: a bound reaching scale_bits - 1 makes rounding ambiguous.
std::vector<mpz_class> final_decrypt(const ToyRingElement& b,
                                     const std::vector<DecryptionShare>& shares,
                                     int scale_bits,
                                     double noise_bound_bits = -1.0);

double flooding_gap_bits(double log_n, double lambda, double log_t);

// --- toy key/ciphertext generation for round-trip tests ---------------------

ToyRingElement toy_keygen(long n, const mpz_class& q, uint64_t seed);
ToyCiphertext toy_encrypt(const std::vector<long>& mu, const ToyRingElement& sk,
                          int scale_bits, double noise_std, uint64_t seed);

struct Transcript {
    int n_parties = 0;
    int threshold = 0;
    std::vector<int> participants;
    long ring_n = 0;
    long q_bits = 0;
    long share_bytes = 0;
    double gap_bits = 0.0;
};

void save_transcript(const std::string& path, const Transcript& t);

}  // namespace irislab::thfhe
