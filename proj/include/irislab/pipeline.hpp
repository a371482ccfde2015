#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irislab/emulator.hpp"
#include "irislab/iris_core.hpp"
#include "irislab/poly.hpp"
#include "irislab/poly_design.hpp"

namespace irislab::pipe {

/// End-to-end matching configuration: database/query geometry, folding and
/// classification artifacts, discretization parameters and emulator wiring.
struct PipelineConfig {
    int rho = 31;        // rotations per eye
    int batch = 4;       // query eyes per run
    long n_db = 4096;    // database size
    long d = 1024;       // code dimension == score-ciphertext ring degree
    int fold_k = 16;     // rotations folded per group (Alg. 2)
    int beta = 4;        // query bit-packing width

    // Discretization: rescale classified bits to scale 2^delta, bootstrap,
    // then re-classify. e_comp/e_bts bound the compound and bootstrap error
    // in units of the delta-scaled integer message.
    int delta_bits = 5;
    double e_comp = 13.25;
    double e_bts = 0.28;
    // tau policy: "p_prime" picks tau = p'; an explicit tau >= 0 overrides.
    std::string tau_policy = "p_prime";
    int tau_override = -1;

    double scale_bits = 23.0;  // working CKKS scale (log2)

    // Bits of cleaning applied to each classified bit before OR
    // accumulation; the OR of ~rho*n_db slots adds the residuals up.
    int clean_target_bits = 40;

    polydes::Polynomial fold_poly;           // degree-7 folding polynomial
    polydes::ClassifierChain alg1_chain;  // classify raw scores (N, P)
    polydes::ClassifierChain fold_chain;  // classify folded scores (N_f', P_f)
    polydes::ClassifierChain post_chain;  // classify discretized bits (N', P')

    iris::ScoreModel model;  // score intervals used by the plaintext oracle
    emu::EmulatorConfig emu_cfg;

    // Bootstrap profile names in emu_cfg.
    std::string bts_pre = "half";            // Coeff -> Slot, raises score cts
    std::string bts_fold_pre = "fold_pre";   // pre-classification, folded cts
    std::string bts_post = "post";           // discretization step
    std::string bts_acc = "acc";             // accumulator refresh in OR chains
    std::string bts_si = "si_half";          // query preprocessing

    // Default (true) combines match bits with the x+y-xy OR tree; false
    // sums the bits and thresholds the total instead.
    bool use_or_tree = true;

    void validate() const;  // throws ConfigError
};

/// Result of one run: per-eye decisions plus trace-derived BTS accounting.
struct PipelineResult {
    std::vector<int> match_bits;   // one per eye, from the output ciphertext
    std::vector<int> oracle_bits;  // plaintext reference decisions
    long bts_pre = 0;              // bootstraps before classification
    long bts_post = 0;             // discretization bootstraps
    long bts_acc = 0;              // accumulator refreshes in OR chains
    long total_ops = 0;            // emulator trace rows consumed
    bool folding_assumption_ok = true;  // plaintext shadow check (Alg. 2)
    bool agrees_with_oracle() const;
};

/// Modulus chain and bootstrap profiles sized for the default runs.
emu::EmulatorConfig default_emulator_config();

/// Packs beta consecutive bit ciphertexts into one integer ciphertext per
/// group: entry = sum_i 2^i * bits_i. beta == 1 returns the input unchanged.
std::vector<emu::EmulatedCiphertext> pack_query(
    emu::Emulator& em, const std::vector<emu::EmulatedCiphertext>& bit_cts,
    int beta);

/// Inverts pack_query and converts each recovered bit vector c to the masked
/// representation m - 2*(c AND m): one SI bootstrap per packed ciphertext,
/// message-level digit extraction, then a plaintext multiplication by the
/// mask against (1 - 2c). masks[r] is the plaintext mask of rotation r.
std::vector<emu::EmulatedCiphertext> preprocess_query(
    emu::Emulator& em, const std::vector<emu::EmulatedCiphertext>& packed,
    const std::vector<std::vector<double>>& masks, int beta, int rho,
    const std::string& si_profile);

/// Divides each slot by its mask-overlap size (one pmult + rescale level).
emu::EmulatedCiphertext normalize(emu::Emulator& em,
                                  const emu::EmulatedCiphertext& ct,
                                  const std::vector<double>& overlaps,
                                  double scale_bits);

/// Evaluates a polynomial on a ciphertext with the baby-step/giant-step
/// plan; consumes exactly ps_eval_plan(p).depth levels.
emu::EmulatedCiphertext eval_poly_ct(emu::Emulator& em,
                                     const polydes::Polynomial& p,
                                     const emu::EmulatedCiphertext& x,
                                     double scale_bits);

/// Evaluates a full classifier chain stage by stage.
emu::EmulatedCiphertext eval_chain_ct(emu::Emulator& em,
                                      const polydes::ClassifierChain& chain,
                                      const emu::EmulatedCiphertext& x,
                                      double scale_bits);

/// Folds k normalized score ciphertexts: sum_s rot_s(f(ct_s)).
emu::EmulatedCiphertext fold_group(
    emu::Emulator& em, const std::vector<emu::EmulatedCiphertext>& cts,
    const polydes::Polynomial& fold_poly, double scale_bits, long base_rot = 0);

/// Rescales a {0,1}-classified ciphertext to scale 2^delta, rounds at the
/// bottom modulus, bootstraps, and re-classifies with the post chain.
/// Throws GapCollapsed when ceil(e_comp + e_bts) >= floor(2^delta - e_comp -
/// e_bts) and ConfigError when tau leaves (n', p'].
emu::EmulatedCiphertext discretize(emu::Emulator& em,
                                   const emu::EmulatedCiphertext& ct,
                                   const PipelineConfig& cfg);

/// n' / p' / tau as used by discretize, exposed for tests.
int discretize_n_prime(const PipelineConfig& cfg);
int discretize_p_prime(const PipelineConfig& cfg);
int discretize_tau(const PipelineConfig& cfg);

/// x OR y = x + y - x*y (one level). Inputs must be eps-close to {0,1}.
emu::EmulatedCiphertext or_combine(emu::Emulator& em,
                                   const emu::EmulatedCiphertext& a,
                                   const emu::EmulatedCiphertext& b,
                                   double scale_bits,
                                   const std::string& acc_profile);

/// Tree reduction of many bit ciphertexts with or_combine; bootstraps the
/// operands when the level budget runs low.
emu::EmulatedCiphertext or_tree(emu::Emulator& em,
                                std::vector<emu::EmulatedCiphertext> cts,
                                double scale_bits,
                                const std::string& acc_profile);

/// Folds all slots into every slot with log2(N/2 or N) rotate-and-OR steps.
emu::EmulatedCiphertext rotate_and_sum_or(emu::Emulator& em,
                                          emu::EmulatedCiphertext ct,
                                          double scale_bits,
                                          const std::string& acc_profile);

/// Final cleaning of an eps-accurate bit: iterates h(x) = 3x^2 - 2x^3 until
/// the analytic bound 3*eps^2 reaches 2^-target_bits.
emu::EmulatedCiphertext postprocess_clean(emu::Emulator& em,
                                          emu::EmulatedCiphertext ct,
                                          double input_eps, int target_bits,
                                          double scale_bits,
                                          const std::string& acc_profile);

/// Naive per-rotation main loop (Algorithm 1 shape).
PipelineResult run_alg1(emu::Emulator& em, const PipelineConfig& cfg,
                        const std::vector<iris::IrisTemplate>& queries,
                        const std::vector<iris::IrisTemplate>& db);

/// Folding main loop (Algorithm 2 shape).
PipelineResult run_alg2(emu::Emulator& em, const PipelineConfig& cfg,
                        const std::vector<iris::IrisTemplate>& queries,
                        const std::vector<iris::IrisTemplate>& db);

/// Writes the run report (per-eye bits, BTS counts, trace summary) as JSON.
void save_run_report(const std::string& path, const PipelineResult& alg1,
                     const PipelineResult& alg2, const PipelineConfig& cfg);

}  // namespace irislab::pipe
