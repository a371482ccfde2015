#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "irislab/errors.hpp"

namespace irislab::emu {

/// Per-level modulus bit sizes, level 0 at the bottom.
struct ModulusChain {
    std::vector<double> level_bits;

    int top_level() const { return static_cast<int>(level_bits.size()) - 1; }
    /// Total modulus bits available at the given level (sum of chunks 0..level).
    double modulus_bits(int level) const;
    void validate() const;
};

enum class Encoding { Slot, Coeff };

/// Message-plus-metadata twin of a CKKS ciphertext. The message is exact;
/// noise_bound_bits tracks the worst-case error as log2, relative to the
/// scale: |error| <= 2^(noise_bound_bits - scale_bits) in message space.
struct EmulatedCiphertext {
    std::vector<std::complex<double>> message;
    Encoding encoding = Encoding::Slot;
    bool ci = false;  // conjugate-invariant: N real slots instead of N/2 complex
    int log_ring_degree = 0;
    int level = 0;
    double scale_bits = 0.0;
    double noise_bound_bits = 0.0;

    long ring_degree() const { return 1L << log_ring_degree; }
    /// Expected message length for the encoding.
    long slot_count() const {
        return (encoding == Encoding::Slot && !ci) ? ring_degree() / 2 : ring_degree();
    }
};

struct BtsProfile {
    enum class Variant { CtSFirst, StCFirst, Half, SIHalf };

    std::string name;
    Variant variant = Variant::CtSFirst;
    int max_input_level = 0;  // bootstrap starts at or below this level
    int output_level = 0;
    Encoding input_encoding = Encoding::Slot;
    Encoding output_encoding = Encoding::Slot;
    double e_bts = 0.0;  // noise bound after bootstrap
};

/// Per-operation worst-case noise constants (log2).
struct NoiseConstants {
    double fresh = 1.0;
    double mult = 26.0;  // folds the message-times-error cross terms
    double rot = 1.0;
    double rescale = 1.0;
    double ccmm = 2.0;
};

struct EmulatorConfig {
    ModulusChain chain;
    NoiseConstants noise;
    std::map<std::string, BtsProfile> bts_profiles;

    void validate() const;
};

EmulatorConfig load_emulator_config(const std::string& path);

struct TraceRow {
    std::string op;
    int level_before = 0;
    int level_after = 0;
    double scale_bits = 0.0;
    double noise_bound_bits = 0.0;
};

/// Shapes and modulus bookkeeping for the plaintext-twin CCMM.
struct CcmmSpec {
    long d1 = 0, d2 = 0, d3 = 0;
    long n_db = 0;   // ring degree on the database side
    long n_qry = 0;  // ring degree on the query side
    double db_modulus_bits = 0.0;   // ~ 2q - delta
    double qry_modulus_bits = 0.0;  // q
    double scale_bits = 0.0;        // delta
    int out_level = 0;  // > 0 when the product runs at a raised modulus
    // Layout of the product ciphertexts. The raised-modulus variant delivers
    // them slot-encoded so folding can run before any bootstrap.
    Encoding out_encoding = Encoding::Coeff;
    bool out_ci = false;
};

/// The emulator: pure ciphertext ops plus a trace log and optional
/// bounded-noise injection. Ciphertext values are never mutated in place.
class Emulator {
public:
    explicit Emulator(EmulatorConfig cfg, bool inject_noise = false,
                      uint64_t seed = 0);

    const EmulatorConfig& config() const { return cfg_; }

    EmulatedCiphertext ecd(const std::vector<std::complex<double>>& v,
                           Encoding encoding, bool ci, int log_ring_degree,
                           double scale_bits, int level);
    std::vector<std::complex<double>> dcd(const EmulatedCiphertext& ct) const;

    EmulatedCiphertext add(const EmulatedCiphertext& a, const EmulatedCiphertext& b);
    EmulatedCiphertext add_const(const EmulatedCiphertext& a, double c);
    EmulatedCiphertext mult(const EmulatedCiphertext& a, const EmulatedCiphertext& b);
    EmulatedCiphertext pmult(const EmulatedCiphertext& a,
                             const std::vector<std::complex<double>>& pt,
                             double pt_scale_bits);
    /// pmult by a scalar constant, same bookkeeping.
    EmulatedCiphertext pmult_const(const EmulatedCiphertext& a, double c,
                                   double pt_scale_bits);
    EmulatedCiphertext rescale(const EmulatedCiphertext& ct, double drop_bits);
    EmulatedCiphertext rot(const EmulatedCiphertext& ct, long r);
    EmulatedCiphertext bts(const EmulatedCiphertext& ct, const std::string& profile);
    /// Drops to a lower level without rescaling (for level alignment).
    EmulatedCiphertext mod_switch(const EmulatedCiphertext& ct, int target_level);

    std::vector<EmulatedCiphertext> ring_switch_down(const EmulatedCiphertext& ct,
                                                     int target_log_ring_degree);
    EmulatedCiphertext ring_pack(const std::vector<EmulatedCiphertext>& cts);

    EmulatedCiphertext to_ci(const EmulatedCiphertext& ct);
    EmulatedCiphertext from_ci(const EmulatedCiphertext& ct);

    /// Exact matrix product (d1 x d2)·(d2 x d3) at message level, returned as
    /// d1*d3/n_db coefficient-encoded ciphertexts, each holding n_db
    /// consecutive entries of one output column.
    std::vector<EmulatedCiphertext> ccmm_twin(const CcmmSpec& spec,
                                              const std::vector<double>& db,
                                              const std::vector<double>& qry);

    const std::vector<TraceRow>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }
    void write_trace_csv(const std::string& path) const;
    long count_ops(const std::string& prefix) const;

private:
    void record(const std::string& op, int before, const EmulatedCiphertext& out);
    void require_budget(const EmulatedCiphertext& ct, const std::string& op) const;
    void inject(EmulatedCiphertext& ct);

    EmulatorConfig cfg_;
    bool inject_noise_;
    std::mt19937_64 rng_;
    std::vector<TraceRow> trace_;
};

}  // namespace irislab::emu
