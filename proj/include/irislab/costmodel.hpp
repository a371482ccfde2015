#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irislab/errors.hpp"

namespace irislab::cost {

inline constexpr long long KiB = 1LL << 10;
inline constexpr long long MiB = 1LL << 20;
inline constexpr long long GiB = 1LL << 30;

/// Encrypted database size in bits: 3 (ell+1) 2^27 log_Q.
long long db_size_bits(int ell, long long log_q);

/// Digit-plane database size in bytes: planes * 3 * (ell+1) * 2^27.
long long db_size_bytes_int8(int ell, int planes);

/// A-part bytes of the digit-plane layout (one of the three ring elements).
long long a_part_bytes_int8(int planes);

/// One query: cts_per_query ciphertexts, each a pair of ring elements of
/// degree 2^log_n with q_bits-bit coefficients.
long long query_size_bytes(int log_n, long long q_bits, int cts_per_query);

/// Ciphertexts holding the packed rotations of a full batch:
/// ceil(rho/beta) * batch * d / 2^log_n, before any further packing.
long long packed_query_ct_count(int rho, int beta, int batch, long d, int log_n);

double expansion_factor(double delta, double beta);

struct CommReport {
    long long query_bytes = 0;       // user's query upload
    long long result_ct_bytes = 0;   // decryptor-bound ciphertext
    long long share_bytes = 0;       // one decryption share
    long long truncated_bytes = 0;   // subring-truncated receiver traffic
};

struct CommParams {
    int query_log_n = 16;
    long long query_q_bits = 16;
    int query_cts = 2;
    int result_log_n = 13;
    long long result_q_bits = 128;
    // Receiver-bound traffic: b-part plus one share per decryptor, all taken
    // in a small subring and truncated to a few bits per coefficient.
    int subring_dim = 32;
    int truncated_bits = 8;
    int decryptors = 5;
};

CommReport comm_report(const CommParams& p);

struct GpuPlan {
    int slices = 0;
    long entries_per_slice = 0;
    long long a_slice_bytes = 0;
    long long b_slice_bytes = 0;
    long clusters = 0;  // number of such plans to cover n_db
};

/// One A-slice GPU plus (slices-1) B-part GPUs, each holding n_per_slice
/// database entries; clusters = ceil(n_db / ((slices-1) * n_per_slice)).
GpuPlan gpu_distribution_plan(long n_db, long n_per_slice, int slices, int planes);

void save_cost_report_json(const std::string& path, int ell, int planes,
                           const CommParams& comm);
std::string cost_report_table(int ell, int planes, const CommParams& comm);

}  // namespace irislab::cost
