#include "irislab/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace irislab::pipe {

using emu::EmulatedCiphertext;
using emu::Encoding;

namespace {

/// Ring adapter for baby-step/giant-step evaluation on ciphertexts: every
/// nonscalar mult is followed by a rescale so the scale stays canonical and
/// one level is consumed per multiplicative depth.
struct CtRing {
    emu::Emulator& em;
    double scale;

    std::pair<EmulatedCiphertext, EmulatedCiphertext> align(
        const EmulatedCiphertext& a, const EmulatedCiphertext& b) {
        const int lv = std::min(a.level, b.level);
        EmulatedCiphertext x = (a.level == lv) ? a : em.mod_switch(a, lv);
        EmulatedCiphertext y = (b.level == lv) ? b : em.mod_switch(b, lv);
        return {std::move(x), std::move(y)};
    }
    EmulatedCiphertext mul(const EmulatedCiphertext& a, const EmulatedCiphertext& b) {
        auto [x, y] = align(a, b);
        return em.rescale(em.mult(x, y), scale);
    }
    EmulatedCiphertext add(const EmulatedCiphertext& a, const EmulatedCiphertext& b) {
        auto [x, y] = align(a, b);
        return em.add(x, y);
    }
    EmulatedCiphertext axpb(double a, const EmulatedCiphertext& x, double b) {
        return em.add_const(em.pmult_const(x, a, 0.0), b);
    }
};

const emu::BtsProfile& profile_of(const emu::Emulator& em, const std::string& name) {
    const auto it = em.config().bts_profiles.find(name);
    if (it == em.config().bts_profiles.end()) {
        throw ConfigError("pipeline: unknown bootstrap profile '" + name + "'");
    }
    return it->second;
}

/// Bootstraps, dropping to the profile's maximum input level first.
EmulatedCiphertext boot(emu::Emulator& em, const EmulatedCiphertext& ct,
                        const std::string& name) {
    const emu::BtsProfile& p = profile_of(em, name);
    EmulatedCiphertext in =
        (ct.level > p.max_input_level) ? em.mod_switch(ct, p.max_input_level) : ct;
    return em.bts(in, name);
}

/// Refreshes a near-exhausted operand so the next mult stays above level 0.
EmulatedCiphertext refresh_if_low(emu::Emulator& em, EmulatedCiphertext ct,
                                  const std::string& acc_profile) {
    if (ct.level < 2) ct = boot(em, ct, acc_profile);
    return ct;
}

std::vector<uint64_t> pack_bits(const std::vector<uint8_t>& v) {
    std::vector<uint64_t> out((v.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i]) out[i / 64] |= (uint64_t{1} << (i % 64));
    }
    return out;
}

long overlap_count(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b) {
    long c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += std::popcount(a[i] & b[i]);
    return c;
}

/// Plaintext matrices and mask overlaps shared by both algorithms.
struct Prepared {
    std::vector<double> db_mat;   // n_db x d, row-major, masked entries
    std::vector<double> qry_mat;  // d x (batch*rho), row-major
    // overlaps[(e*rho + r)*blocks + b][j] = |m_db(bN+j) AND m_qry(e,r)|
    std::vector<std::vector<double>> overlaps;
};

Prepared prepare(const PipelineConfig& cfg,
                 const std::vector<iris::IrisTemplate>& queries,
                 const std::vector<iris::IrisTemplate>& db) {
    if (static_cast<long>(db.size()) != cfg.n_db) {
        throw ShapeMismatch("pipeline: database size does not match config");
    }
    if (static_cast<int>(queries.size()) != cfg.batch) {
        throw ShapeMismatch("pipeline: query count does not match batch");
    }
    const long d = cfg.d;
    const long cols = static_cast<long>(cfg.batch) * cfg.rho;
    const long blocks = cfg.n_db / d;

    Prepared prep;
    prep.db_mat.resize(static_cast<std::size_t>(cfg.n_db * d));
    std::vector<std::vector<uint64_t>> db_masks(static_cast<std::size_t>(cfg.n_db));
    for (long j = 0; j < cfg.n_db; ++j) {
        const iris::IrisTemplate& t = db[static_cast<std::size_t>(j)];
        if (static_cast<long>(t.size()) != d) {
            throw ShapeMismatch("pipeline: database template dimension mismatch");
        }
        const iris::MaskedBitvector mv = iris::to_masked(t);
        for (long i = 0; i < d; ++i) {
            prep.db_mat[static_cast<std::size_t>(j * d + i)] =
                static_cast<double>(mv.values[static_cast<std::size_t>(i)]);
        }
        db_masks[static_cast<std::size_t>(j)] = pack_bits(t.mask);
    }

    prep.qry_mat.assign(static_cast<std::size_t>(d * cols), 0.0);
    std::vector<std::vector<uint64_t>> qry_masks(static_cast<std::size_t>(cols));
    for (int e = 0; e < cfg.batch; ++e) {
        const iris::IrisTemplate& q = queries[static_cast<std::size_t>(e)];
        if (static_cast<long>(q.size()) != d) {
            throw ShapeMismatch("pipeline: query template dimension mismatch");
        }
        for (int r = 0; r < cfg.rho; ++r) {
            const long c = static_cast<long>(e) * cfg.rho + r;
            const iris::IrisTemplate qr = iris::rotate(q, static_cast<std::size_t>(r));
            const iris::MaskedBitvector mv = iris::to_masked(qr);
            for (long i = 0; i < d; ++i) {
                prep.qry_mat[static_cast<std::size_t>(i * cols + c)] =
                    static_cast<double>(mv.values[static_cast<std::size_t>(i)]);
            }
            qry_masks[static_cast<std::size_t>(c)] = pack_bits(qr.mask);
        }
    }

    prep.overlaps.resize(static_cast<std::size_t>(cols * blocks));
    for (long c = 0; c < cols; ++c) {
        for (long b = 0; b < blocks; ++b) {
            std::vector<double>& ov = prep.overlaps[static_cast<std::size_t>(c * blocks + b)];
            ov.resize(static_cast<std::size_t>(d));
            for (long j = 0; j < d; ++j) {
                ov[static_cast<std::size_t>(j)] = static_cast<double>(overlap_count(
                    db_masks[static_cast<std::size_t>(b * d + j)],
                    qry_masks[static_cast<std::size_t>(c)]));
            }
        }
    }
    return prep;
}

emu::CcmmSpec base_ccmm_spec(const PipelineConfig& cfg, const emu::Emulator& em) {
    emu::CcmmSpec spec;
    spec.d1 = cfg.n_db;
    spec.d2 = cfg.d;
    spec.d3 = static_cast<long>(cfg.batch) * cfg.rho;
    spec.n_db = cfg.d;
    spec.n_qry = cfg.d;
    spec.qry_modulus_bits = em.config().chain.modulus_bits(0);
    spec.db_modulus_bits = 2.0 * spec.qry_modulus_bits - cfg.scale_bits;
    spec.scale_bits = cfg.scale_bits;
    return spec;
}

/// The q0 rounding at scale 2^delta: snaps every slot to the grid 2^-delta.
EmulatedCiphertext snap_to_grid(const EmulatedCiphertext& ct, int delta_bits) {
    EmulatedCiphertext out = ct;
    const double g = std::ldexp(1.0, delta_bits);
    for (auto& m : out.message) m = {std::round(m.real() * g) / g, 0.0};
    return out;
}

int combine_bit(double v) { return v >= 0.5 ? 1 : 0; }

void fill_bts_counts(const emu::Emulator& em, const PipelineConfig& cfg,
                     PipelineResult& res) {
    res.bts_pre = em.count_ops("bts:" + cfg.bts_pre) +
                  em.count_ops("bts:" + cfg.bts_fold_pre);
    res.bts_post = em.count_ops("bts:" + cfg.bts_post);
    res.bts_acc = em.count_ops("bts:" + cfg.bts_acc);
    res.total_ops = static_cast<long>(em.trace().size());
}

std::vector<int> oracle_bits(const PipelineConfig& cfg,
                             const std::vector<iris::IrisTemplate>& queries,
                             const std::vector<iris::IrisTemplate>& db) {
    std::vector<int> out;
    out.reserve(queries.size());
    for (const iris::IrisTemplate& q : queries) {
        std::vector<iris::IrisTemplate> rots;
        rots.reserve(static_cast<std::size_t>(cfg.rho));
        for (int r = 0; r < cfg.rho; ++r) {
            rots.push_back(iris::rotate(q, static_cast<std::size_t>(r)));
        }
        out.push_back(iris::match_db_reference(rots, db, cfg.model.negative,
                                               cfg.model.positive)
                          ? 1
                          : 0);
    }
    return out;
}

/// Combines per-(rotation, block) bit ciphertexts of one eye and reduces the
/// slots to a single decision value.
double reduce_eye(emu::Emulator& em, const PipelineConfig& cfg,
                  std::vector<EmulatedCiphertext> bits) {
    EmulatedCiphertext acc;
    if (cfg.use_or_tree) {
        acc = or_tree(em, std::move(bits), cfg.scale_bits, cfg.bts_acc);
        acc = rotate_and_sum_or(em, std::move(acc), cfg.scale_bits, cfg.bts_acc);
    } else {
        // Alternative grouping: add all match values, threshold at decode.
        acc = bits.front();
        for (std::size_t i = 1; i < bits.size(); ++i) {
            const int lv = std::min(acc.level, bits[i].level);
            acc = em.add(em.mod_switch(acc, lv), em.mod_switch(bits[i], lv));
        }
        const long n = static_cast<long>(acc.message.size());
        for (long sh = 1; sh < n; sh <<= 1) {
            acc = refresh_if_low(em, std::move(acc), cfg.bts_acc);
            acc = em.add(acc, em.rot(acc, sh));
        }
    }
    return em.dcd(acc).front().real();
}

}  // namespace

void PipelineConfig::validate() const {
    if (rho < 1 || batch < 1) throw ConfigError("pipeline: rho and batch must be >= 1");
    if (beta < 1) throw ConfigError("pipeline: beta must be >= 1");
    if (fold_k < 1 || fold_k > rho) {
        throw ConfigError("pipeline: fold_k must satisfy 1 <= k <= rho");
    }
    if (d < 2 || (d & (d - 1)) != 0) {
        throw ConfigError("pipeline: d must be a power of two");
    }
    if (n_db < d || n_db % d != 0) {
        throw ConfigError("pipeline: n_db must be a positive multiple of d");
    }
    if (delta_bits < 1) throw ConfigError("pipeline: delta_bits must be >= 1");
    if (e_comp < 0.0 || e_bts < 0.0) {
        throw ConfigError("pipeline: error bounds must be nonnegative");
    }
    if (tau_policy != "p_prime" && tau_override < 0) {
        throw ConfigError("pipeline: unknown tau policy '" + tau_policy + "'");
    }
    emu_cfg.validate();
    for (const std::string& name :
         {bts_pre, bts_fold_pre, bts_post, bts_acc, bts_si}) {
        if (emu_cfg.bts_profiles.find(name) == emu_cfg.bts_profiles.end()) {
            throw ConfigError("pipeline: missing bootstrap profile '" + name + "'");
        }
    }
}

bool PipelineResult::agrees_with_oracle() const {
    return match_bits == oracle_bits;
}

emu::EmulatorConfig default_emulator_config() {
    emu::EmulatorConfig cfg;
    cfg.chain.level_bits.assign(25, 23.0);
    cfg.chain.level_bits[0] = 36.0;  // q0
    auto make = [](const std::string& name, emu::BtsProfile::Variant v,
                   Encoding in, Encoding out) {
        emu::BtsProfile p;
        p.name = name;
        p.variant = v;
        p.max_input_level = 3;
        p.output_level = 17;
        p.input_encoding = in;
        p.output_encoding = out;
        p.e_bts = 6.0;
        return p;
    };
    using V = emu::BtsProfile::Variant;
    cfg.bts_profiles["half"] = make("half", V::Half, Encoding::Coeff, Encoding::Slot);
    cfg.bts_profiles["fold_pre"] =
        make("fold_pre", V::Half, Encoding::Slot, Encoding::Slot);
    cfg.bts_profiles["post"] = make("post", V::Half, Encoding::Slot, Encoding::Slot);
    cfg.bts_profiles["acc"] =
        make("acc", V::StCFirst, Encoding::Slot, Encoding::Slot);
    cfg.bts_profiles["si_half"] =
        make("si_half", V::SIHalf, Encoding::Slot, Encoding::Slot);
    return cfg;
}

std::vector<EmulatedCiphertext> pack_query(
    emu::Emulator& em, const std::vector<EmulatedCiphertext>& bit_cts, int beta) {
    if (beta < 1) throw ConfigError("pack_query: beta must be >= 1");
    if (beta == 1) return bit_cts;
    std::vector<EmulatedCiphertext> out;
    out.reserve((bit_cts.size() + static_cast<std::size_t>(beta) - 1) /
                static_cast<std::size_t>(beta));
    for (std::size_t g = 0; g * static_cast<std::size_t>(beta) < bit_cts.size(); ++g) {
        EmulatedCiphertext acc;
        bool first = true;
        for (int i = 0; i < beta; ++i) {
            const std::size_t idx = g * static_cast<std::size_t>(beta) +
                                    static_cast<std::size_t>(i);
            if (idx >= bit_cts.size()) break;
            EmulatedCiphertext term =
                em.pmult_const(bit_cts[idx], std::ldexp(1.0, i), 0.0);
            acc = first ? std::move(term) : em.add(acc, term);
            first = false;
        }
        out.push_back(std::move(acc));
    }
    return out;
}

std::vector<EmulatedCiphertext> preprocess_query(
    emu::Emulator& em, const std::vector<EmulatedCiphertext>& packed,
    const std::vector<std::vector<double>>& masks, int beta, int rho,
    const std::string& si_profile) {
    if (beta < 1 || rho < 1) throw ConfigError("preprocess_query: bad beta/rho");
    if (static_cast<int>(masks.size()) != rho) {
        throw ShapeMismatch("preprocess_query: need one mask per rotation");
    }
    const std::size_t groups = (static_cast<std::size_t>(rho) +
                                static_cast<std::size_t>(beta) - 1) /
                               static_cast<std::size_t>(beta);
    if (packed.size() != groups) {
        throw ShapeMismatch("preprocess_query: packed ciphertext count mismatch");
    }
    std::vector<EmulatedCiphertext> booted;
    booted.reserve(groups);
    for (const EmulatedCiphertext& ct : packed) booted.push_back(boot(em, ct, si_profile));

    std::vector<EmulatedCiphertext> out;
    out.reserve(static_cast<std::size_t>(rho));
    for (int r = 0; r < rho; ++r) {
        const EmulatedCiphertext& src =
            booted[static_cast<std::size_t>(r / beta)];
        const int digit = r % beta;
        // Message-level digit extraction of the packed integers; the extract
        // circuit is modeled as costing one level.
        EmulatedCiphertext bit = src;
        bit.level -= 1;
        for (auto& m : bit.message) {
            const long v = std::lround(m.real());
            m = {static_cast<double>((v >> digit) & 1L), 0.0};
        }
        EmulatedCiphertext sign = em.add_const(em.pmult_const(bit, -2.0, 0.0), 1.0);
        const std::vector<double>& mk = masks[static_cast<std::size_t>(r)];
        if (static_cast<long>(mk.size()) != static_cast<long>(sign.message.size())) {
            throw ShapeMismatch("preprocess_query: mask length mismatch");
        }
        std::vector<std::complex<double>> pt(mk.begin(), mk.end());
        out.push_back(em.pmult(sign, pt, 0.0));
    }
    return out;
}

EmulatedCiphertext normalize(emu::Emulator& em, const EmulatedCiphertext& ct,
                             const std::vector<double>& overlaps,
                             double scale_bits) {
    if (static_cast<long>(overlaps.size()) != static_cast<long>(ct.message.size())) {
        throw ShapeMismatch("normalize: overlap vector length mismatch");
    }
    std::vector<std::complex<double>> inv(overlaps.size());
    for (std::size_t i = 0; i < overlaps.size(); ++i) {
        if (overlaps[i] == 0.0) throw ZeroOverlap();
        inv[i] = {1.0 / overlaps[i], 0.0};
    }
    return em.rescale(em.pmult(ct, inv, scale_bits), scale_bits);
}

EmulatedCiphertext eval_poly_ct(emu::Emulator& em, const polydes::Polynomial& p,
                                const EmulatedCiphertext& x, double scale_bits) {
    CtRing ring{em, scale_bits};
    return polydes::ps_execute<EmulatedCiphertext, CtRing>(p, x, ring);
}

EmulatedCiphertext eval_chain_ct(emu::Emulator& em,
                                 const polydes::ClassifierChain& chain,
                                 const EmulatedCiphertext& x, double scale_bits) {
    if (chain.stages.empty()) throw ConfigError("eval_chain_ct: empty chain");
    EmulatedCiphertext cur = x;
    for (const polydes::ClassifierChain::Stage& st : chain.stages) {
        EmulatedCiphertext shifted = em.add_const(cur, -st.center);
        cur = eval_poly_ct(em, st.poly, shifted, scale_bits);
    }
    return cur;
}

EmulatedCiphertext fold_group(emu::Emulator& em,
                              const std::vector<EmulatedCiphertext>& cts,
                              const polydes::Polynomial& fold_poly,
                              double scale_bits, long base_rot) {
    if (cts.empty()) throw ConfigError("fold_group: empty rotation group");
    EmulatedCiphertext acc;
    for (std::size_t s = 0; s < cts.size(); ++s) {
        EmulatedCiphertext t = eval_poly_ct(em, fold_poly, cts[s], scale_bits);
        t = em.rot(t, base_rot + static_cast<long>(s));
        if (s == 0) {
            acc = std::move(t);
        } else {
            const int lv = std::min(acc.level, t.level);
            acc = em.add(em.mod_switch(acc, lv), em.mod_switch(t, lv));
        }
    }
    return acc;
}

int discretize_n_prime(const PipelineConfig& cfg) {
    return static_cast<int>(std::ceil(cfg.e_comp + cfg.e_bts));
}

int discretize_p_prime(const PipelineConfig& cfg) {
    return static_cast<int>(
        std::floor(std::ldexp(1.0, cfg.delta_bits) - cfg.e_comp - cfg.e_bts));
}

int discretize_tau(const PipelineConfig& cfg) {
    const int n_prime = discretize_n_prime(cfg);
    const int p_prime = discretize_p_prime(cfg);
    if (n_prime >= p_prime) {
        throw GapCollapsed("discretize: noise bounds leave no integer gap at delta");
    }
    const int tau = cfg.tau_override >= 0 ? cfg.tau_override : p_prime;
    if (tau <= n_prime || tau > p_prime) {
        throw ConfigError("discretize: tau outside (n', p']");
    }
    return tau;
}

EmulatedCiphertext discretize(emu::Emulator& em, const EmulatedCiphertext& ct,
                              const PipelineConfig& cfg) {
    (void)discretize_tau(cfg);  // validates the (n', p'] gap and tau policy
    EmulatedCiphertext cur =
        em.rescale(ct, ct.scale_bits - static_cast<double>(cfg.delta_bits));
    cur = snap_to_grid(cur, cfg.delta_bits);
    cur = boot(em, cur, cfg.bts_post);
    if (cur.scale_bits != cfg.scale_bits) {
        // The bootstrap re-encodes at the working scale.
        cur = em.pmult_const(cur, 1.0, cfg.scale_bits - cur.scale_bits);
    }
    cur = eval_chain_ct(em, cfg.post_chain, cur, cfg.scale_bits);
    // Clean the bit before OR accumulation: the OR of ~rho*n_db slots sums
    // the residual eps, so it must be far below 1/(rho*n_db).
    return postprocess_clean(em, std::move(cur), cfg.post_chain.eps(),
                             cfg.clean_target_bits, cfg.scale_bits, cfg.bts_acc);
}

EmulatedCiphertext or_combine(emu::Emulator& em, const EmulatedCiphertext& a,
                              const EmulatedCiphertext& b, double scale_bits,
                              const std::string& acc_profile) {
    EmulatedCiphertext x = refresh_if_low(em, a, acc_profile);
    EmulatedCiphertext y = refresh_if_low(em, b, acc_profile);
    CtRing ring{em, scale_bits};
    EmulatedCiphertext prod = ring.mul(x, y);
    EmulatedCiphertext sum = ring.add(x, y);
    return ring.add(sum, em.pmult_const(prod, -1.0, 0.0));
}

EmulatedCiphertext or_tree(emu::Emulator& em,
                           std::vector<EmulatedCiphertext> cts,
                           double scale_bits, const std::string& acc_profile) {
    if (cts.empty()) throw ConfigError("or_tree: no inputs");
    while (cts.size() > 1) {
        std::vector<EmulatedCiphertext> next;
        next.reserve((cts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < cts.size(); i += 2) {
            next.push_back(or_combine(em, cts[i], cts[i + 1], scale_bits, acc_profile));
        }
        if (cts.size() % 2 == 1) next.push_back(std::move(cts.back()));
        cts = std::move(next);
    }
    return cts.front();
}

EmulatedCiphertext rotate_and_sum_or(emu::Emulator& em, EmulatedCiphertext ct,
                                     double scale_bits,
                                     const std::string& acc_profile) {
    const long n = static_cast<long>(ct.message.size());
    for (long sh = 1; sh < n; sh <<= 1) {
        ct = refresh_if_low(em, std::move(ct), acc_profile);
        ct = or_combine(em, ct, em.rot(ct, sh), scale_bits, acc_profile);
    }
    return ct;
}

EmulatedCiphertext postprocess_clean(emu::Emulator& em, EmulatedCiphertext ct,
                                     double input_eps, int target_bits,
                                     double scale_bits,
                                     const std::string& acc_profile) {
    if (input_eps <= 0.0 || input_eps >= 0.5) {
        throw ConfigError("postprocess_clean: input eps must lie in (0, 0.5)");
    }
    const polydes::Polynomial h(std::vector<double>{0.0, 0.0, 3.0, -2.0});
    const double target = std::ldexp(1.0, -target_bits);
    double eps = input_eps;
    while (eps > target) {
        if (ct.level < 3) ct = boot(em, ct, acc_profile);
        ct = eval_poly_ct(em, h, ct, scale_bits);
        eps = 3.0 * eps * eps;  // cleaning contraction bound
    }
    return ct;
}

PipelineResult run_alg1(emu::Emulator& em, const PipelineConfig& cfg,
                        const std::vector<iris::IrisTemplate>& queries,
                        const std::vector<iris::IrisTemplate>& db) {
    cfg.validate();
    em.clear_trace();
    const Prepared prep = prepare(cfg, queries, db);
    emu::CcmmSpec spec = base_ccmm_spec(cfg, em);
    const std::vector<EmulatedCiphertext> scored =
        em.ccmm_twin(spec, prep.db_mat, prep.qry_mat);
    const long blocks = cfg.n_db / cfg.d;

    PipelineResult res;
    for (int e = 0; e < cfg.batch; ++e) {
        std::vector<EmulatedCiphertext> bits;
        bits.reserve(static_cast<std::size_t>(cfg.rho * blocks));
        for (int r = 0; r < cfg.rho; ++r) {
            for (long b = 0; b < blocks; ++b) {
                const std::size_t idx = static_cast<std::size_t>(
                    (static_cast<long>(e) * cfg.rho + r) * blocks + b);
                EmulatedCiphertext ct = boot(em, scored[idx], cfg.bts_pre);
                ct = normalize(em, ct, prep.overlaps[idx], cfg.scale_bits);
                ct = eval_chain_ct(em, cfg.alg1_chain, ct, cfg.scale_bits);
                bits.push_back(discretize(em, ct, cfg));
            }
        }
        res.match_bits.push_back(combine_bit(reduce_eye(em, cfg, std::move(bits))));
    }
    res.oracle_bits = oracle_bits(cfg, queries, db);
    fill_bts_counts(em, cfg, res);
    return res;
}

PipelineResult run_alg2(emu::Emulator& em, const PipelineConfig& cfg,
                        const std::vector<iris::IrisTemplate>& queries,
                        const std::vector<iris::IrisTemplate>& db) {
    cfg.validate();
    em.clear_trace();
    const Prepared prep = prepare(cfg, queries, db);

    // Raised modulus: enough spare levels to normalize, evaluate the folding
    // polynomial, and rotate before the first bootstrap; the product arrives
    // slot-encoded.
    const int fold_levels =
        1 + polydes::ps_eval_plan(cfg.fold_poly).depth + 1;  // normalize+f+rot
    emu::CcmmSpec spec = base_ccmm_spec(cfg, em);
    spec.out_level = fold_levels;
    spec.out_encoding = Encoding::Slot;
    spec.out_ci = true;
    spec.db_modulus_bits += em.config().chain.modulus_bits(fold_levels) -
                            em.config().chain.modulus_bits(0);
    const std::vector<EmulatedCiphertext> scored =
        em.ccmm_twin(spec, prep.db_mat, prep.qry_mat);

    const long blocks = cfg.n_db / cfg.d;
    const int groups = (cfg.rho + cfg.fold_k - 1) / cfg.fold_k;

    PipelineResult res;

    // Folding-assumption shadow check: after the Rot_r alignment, slot i of
    // group g collects scores of users (i + r) mod d over the group's
    // rotations; at most one of them may fall outside N.
    for (int e = 0; e < cfg.batch && res.folding_assumption_ok; ++e) {
        for (long b = 0; b < blocks && res.folding_assumption_ok; ++b) {
            for (long i = 0; i < cfg.d && res.folding_assumption_ok; ++i) {
                for (int g = 0; g < groups; ++g) {
                    int non_d = 0;
                    const int r_end = std::min(cfg.rho, (g + 1) * cfg.fold_k);
                    for (int r = g * cfg.fold_k; r < r_end; ++r) {
                        const std::size_t idx = static_cast<std::size_t>(
                            (static_cast<long>(e) * cfg.rho + r) * blocks + b);
                        const long j = (i + r) % cfg.d;
                        const double raw =
                            scored[idx].message[static_cast<std::size_t>(j)].real();
                        const double ov =
                            prep.overlaps[idx][static_cast<std::size_t>(j)];
                        if (ov == 0.0 || !cfg.model.negative.contains(raw / ov)) {
                            ++non_d;
                        }
                    }
                    if (non_d > 1) {
                        res.folding_assumption_ok = false;
                        break;
                    }
                }
            }
        }
    }

    for (int e = 0; e < cfg.batch; ++e) {
        std::vector<EmulatedCiphertext> bits;
        bits.reserve(static_cast<std::size_t>(blocks));
        for (long b = 0; b < blocks; ++b) {
            EmulatedCiphertext refolded;
            bool first = true;
            for (int g = 0; g < groups; ++g) {
                std::vector<EmulatedCiphertext> group;
                const int r_end = std::min(cfg.rho, (g + 1) * cfg.fold_k);
                group.reserve(static_cast<std::size_t>(r_end - g * cfg.fold_k));
                for (int r = g * cfg.fold_k; r < r_end; ++r) {
                    const std::size_t idx = static_cast<std::size_t>(
                        (static_cast<long>(e) * cfg.rho + r) * blocks + b);
                    group.push_back(normalize(em, scored[idx], prep.overlaps[idx],
                                              cfg.scale_bits));
                }
                EmulatedCiphertext folded =
                    fold_group(em, group, cfg.fold_poly, cfg.scale_bits,
                               static_cast<long>(g) * cfg.fold_k);
                folded = boot(em, folded, cfg.bts_fold_pre);
                EmulatedCiphertext cls =
                    eval_chain_ct(em, cfg.fold_chain, folded, cfg.scale_bits);
                if (first) {
                    refolded = std::move(cls);
                    first = false;
                } else {
                    // Refold: the assumption guarantees at most one positive
                    // per slot across groups, so the plain sum stays binary.
                    const int lv = std::min(refolded.level, cls.level);
                    refolded = em.add(em.mod_switch(refolded, lv),
                                      em.mod_switch(cls, lv));
                }
            }
            bits.push_back(discretize(em, refolded, cfg));
        }
        res.match_bits.push_back(combine_bit(reduce_eye(em, cfg, std::move(bits))));
    }
    res.oracle_bits = oracle_bits(cfg, queries, db);
    fill_bts_counts(em, cfg, res);
    return res;
}

void save_run_report(const std::string& path, const PipelineResult& alg1,
                     const PipelineResult& alg2, const PipelineConfig& cfg) {
    nlohmann::json j;
    j["config"] = {{"rho", cfg.rho},       {"batch", cfg.batch},
                   {"n_db", cfg.n_db},     {"d", cfg.d},
                   {"fold_k", cfg.fold_k}, {"beta", cfg.beta},
                   {"delta_bits", cfg.delta_bits}};
    auto dump = [](const PipelineResult& r) {
        return nlohmann::json{{"match_bits", r.match_bits},
                              {"oracle_bits", r.oracle_bits},
                              {"bts_pre", r.bts_pre},
                              {"bts_post", r.bts_post},
                              {"bts_acc", r.bts_acc},
                              {"total_ops", r.total_ops},
                              {"folding_assumption_ok", r.folding_assumption_ok},
                              {"agrees_with_oracle", r.agrees_with_oracle()}};
    };
    j["alg1"] = dump(alg1);
    j["alg2"] = dump(alg2);
    std::ofstream os(path);
    if (!os) throw ConfigError("save_run_report: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace irislab::pipe
