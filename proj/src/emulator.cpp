#include "irislab/emulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace irislab::emu {

double ModulusChain::modulus_bits(int level) const {
    if (level < 0 || level > top_level()) {
        throw ConfigError("level " + std::to_string(level) + " outside chain");
    }
    return std::accumulate(level_bits.begin(), level_bits.begin() + level + 1, 0.0);
}

void ModulusChain::validate() const {
    if (level_bits.empty()) throw ConfigError("modulus chain is empty");
    for (double b : level_bits) {
        if (b <= 0.0) throw ConfigError("modulus chain bit sizes must be positive");
    }
}

void EmulatorConfig::validate() const {
    chain.validate();
    for (const auto& [name, p] : bts_profiles) {
        if (p.output_level > chain.top_level()) {
            throw ConfigError("bts profile " + name + " outputs above the chain top");
        }
        if (p.max_input_level < 0 || p.output_level < 0) {
            throw ConfigError("bts profile " + name + " has negative levels");
        }
    }
}

namespace {

Encoding parse_encoding(const std::string& s) {
    if (s == "slot") return Encoding::Slot;
    if (s == "coeff") return Encoding::Coeff;
    throw ConfigError("unknown encoding: " + s);
}

BtsProfile::Variant parse_variant(const std::string& s) {
    if (s == "cts_first") return BtsProfile::Variant::CtSFirst;
    if (s == "stc_first") return BtsProfile::Variant::StCFirst;
    if (s == "half") return BtsProfile::Variant::Half;
    if (s == "si_half") return BtsProfile::Variant::SIHalf;
    throw ConfigError("unknown bts variant: " + s);
}

// Worst-case error in message space for the ciphertext's bookkeeping.
double noise_magnitude(const EmulatedCiphertext& ct) {
    return std::exp2(ct.noise_bound_bits - ct.scale_bits);
}

double log_sum(double a_bits, double b_bits) {
    const double hi = std::max(a_bits, b_bits);
    const double lo = std::min(a_bits, b_bits);
    return hi + std::log2(1.0 + std::exp2(lo - hi));
}

}  // namespace

EmulatorConfig load_emulator_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open emulator config " + path);
    nlohmann::json j;
    is >> j;
    EmulatorConfig cfg;
    cfg.chain.level_bits = j.at("chain_bits").get<std::vector<double>>();
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        cfg.noise.fresh = n.value("fresh", cfg.noise.fresh);
        cfg.noise.mult = n.value("mult", cfg.noise.mult);
        cfg.noise.rot = n.value("rot", cfg.noise.rot);
        cfg.noise.rescale = n.value("rescale", cfg.noise.rescale);
        cfg.noise.ccmm = n.value("ccmm", cfg.noise.ccmm);
    }
    for (const auto& p : j.value("bts_profiles", nlohmann::json::array())) {
        BtsProfile prof;
        prof.name = p.at("name").get<std::string>();
        prof.variant = parse_variant(p.at("variant").get<std::string>());
        prof.max_input_level = p.at("max_input_level").get<int>();
        prof.output_level = p.at("output_level").get<int>();
        prof.input_encoding = parse_encoding(p.at("input_encoding").get<std::string>());
        prof.output_encoding = parse_encoding(p.at("output_encoding").get<std::string>());
        prof.e_bts = p.at("e_bts").get<double>();
        cfg.bts_profiles[prof.name] = prof;
    }
    cfg.validate();
    return cfg;
}

Emulator::Emulator(EmulatorConfig cfg, bool inject_noise, uint64_t seed)
    : cfg_(std::move(cfg)), inject_noise_(inject_noise), rng_(seed) {
    cfg_.validate();
}

void Emulator::record(const std::string& op, int before, const EmulatedCiphertext& out) {
    trace_.push_back({op, before, out.level, out.scale_bits, out.noise_bound_bits});
}

void Emulator::require_budget(const EmulatedCiphertext& ct, const std::string& op) const {
    if (ct.level <= 0) {
        throw ModulusExhausted(op + " at level 0");
    }
}

void Emulator::inject(EmulatedCiphertext& ct) {
    if (!inject_noise_) return;
    // A fraction of the declared bound, so accumulated drift plus injected
    // noise stays inside the bound that the metadata reports.
    const double mag = noise_magnitude(ct) / 16.0;
    std::uniform_real_distribution<double> u(-mag, mag);
    for (auto& m : ct.message) m += u(rng_);
}

EmulatedCiphertext Emulator::ecd(const std::vector<std::complex<double>>& v,
                                 Encoding encoding, bool ci, int log_ring_degree,
                                 double scale_bits, int level) {
    EmulatedCiphertext ct;
    ct.encoding = encoding;
    ct.ci = ci && encoding == Encoding::Slot;
    ct.log_ring_degree = log_ring_degree;
    ct.level = level;
    ct.scale_bits = scale_bits;
    ct.noise_bound_bits = cfg_.noise.fresh;
    if (static_cast<long>(v.size()) != ct.slot_count()) {
        throw ShapeMismatch("ecd: expected " + std::to_string(ct.slot_count()) +
                            " entries, got " + std::to_string(v.size()));
    }
    if (level < 0 || level > cfg_.chain.top_level()) {
        throw ModulusExhausted("ecd at level " + std::to_string(level));
    }
    if (scale_bits > cfg_.chain.modulus_bits(level)) {
        throw ScaleMismatch("ecd: scale exceeds modulus at level " +
                            std::to_string(level));
    }
    ct.message = v;
    inject(ct);
    record("ecd", level, ct);
    return ct;
}

std::vector<std::complex<double>> Emulator::dcd(const EmulatedCiphertext& ct) const {
    return ct.message;
}

EmulatedCiphertext Emulator::add(const EmulatedCiphertext& a,
                                 const EmulatedCiphertext& b) {
    if (a.level != b.level) throw LevelMismatch("add: levels differ");
    if (a.scale_bits != b.scale_bits) throw ScaleMismatch("add: scales differ");
    if (a.encoding != b.encoding || a.ci != b.ci ||
        a.log_ring_degree != b.log_ring_degree) {
        throw EncodingMismatch("add: incompatible encodings");
    }
    EmulatedCiphertext out = a;
    for (std::size_t i = 0; i < out.message.size(); ++i) out.message[i] += b.message[i];
    out.noise_bound_bits = log_sum(a.noise_bound_bits, b.noise_bound_bits);
    inject(out);
    record("add", a.level, out);
    return out;
}

EmulatedCiphertext Emulator::add_const(const EmulatedCiphertext& a, double c) {
    EmulatedCiphertext out = a;
    for (auto& m : out.message) m += c;
    record("add_const", a.level, out);
    return out;
}

EmulatedCiphertext Emulator::mult(const EmulatedCiphertext& a,
                                  const EmulatedCiphertext& b) {
    if (a.level != b.level) throw LevelMismatch("mult: levels differ");
    if (a.encoding != b.encoding || a.ci != b.ci ||
        a.log_ring_degree != b.log_ring_degree) {
        throw EncodingMismatch("mult: incompatible encodings");
    }
    require_budget(a, "mult");
    EmulatedCiphertext out = a;
    for (std::size_t i = 0; i < out.message.size(); ++i) out.message[i] *= b.message[i];
    out.scale_bits = a.scale_bits + b.scale_bits;
    out.noise_bound_bits = a.noise_bound_bits + b.noise_bound_bits + cfg_.noise.mult;
    inject(out);
    record("mult", a.level, out);
    return out;
}

EmulatedCiphertext Emulator::pmult(const EmulatedCiphertext& a,
                                   const std::vector<std::complex<double>>& pt,
                                   double pt_scale_bits) {
    if (static_cast<long>(pt.size()) != a.slot_count()) {
        throw ShapeMismatch("pmult: plaintext length mismatch");
    }
    require_budget(a, "pmult");
    EmulatedCiphertext out = a;
    for (std::size_t i = 0; i < out.message.size(); ++i) out.message[i] *= pt[i];
    out.scale_bits = a.scale_bits + pt_scale_bits;
    out.noise_bound_bits = a.noise_bound_bits + cfg_.noise.mult;
    inject(out);
    record("pmult", a.level, out);
    return out;
}

EmulatedCiphertext Emulator::pmult_const(const EmulatedCiphertext& a, double c,
                                         double pt_scale_bits) {
    require_budget(a, "pmult");
    EmulatedCiphertext out = a;
    for (auto& m : out.message) m *= c;
    out.scale_bits = a.scale_bits + pt_scale_bits;
    out.noise_bound_bits = a.noise_bound_bits + cfg_.noise.mult;
    inject(out);
    record("pmult", a.level, out);
    return out;
}

EmulatedCiphertext Emulator::rescale(const EmulatedCiphertext& ct, double drop_bits) {
    if (ct.level <= 0) throw ModulusExhausted("rescale at level 0");
    EmulatedCiphertext out = ct;
    out.level = ct.level - 1;
    out.scale_bits = ct.scale_bits - drop_bits;
    out.noise_bound_bits = ct.noise_bound_bits + cfg_.noise.rescale;
    inject(out);
    record("rescale", ct.level, out);
    return out;
}

EmulatedCiphertext Emulator::rot(const EmulatedCiphertext& ct, long r) {
    if (ct.encoding != Encoding::Slot) throw EncodingMismatch("rot: slot encoding required");
    require_budget(ct, "rot");
    EmulatedCiphertext out = ct;
    const long n = static_cast<long>(ct.message.size());
    const long shift = ((r % n) + n) % n;
    for (long i = 0; i < n; ++i) {
        out.message[i] = ct.message[(i + shift) % n];
    }
    out.noise_bound_bits = log_sum(ct.noise_bound_bits, cfg_.noise.rot);
    inject(out);
    record("rot", ct.level, out);
    return out;
}

EmulatedCiphertext Emulator::bts(const EmulatedCiphertext& ct,
                                 const std::string& profile) {
    const auto it = cfg_.bts_profiles.find(profile);
    if (it == cfg_.bts_profiles.end()) {
        throw ProfileMismatch("unknown bts profile " + profile);
    }
    const BtsProfile& p = it->second;
    if (ct.level > p.max_input_level) {
        throw ProfileMismatch("bts " + profile + ": input level " +
                              std::to_string(ct.level) + " above profile max " +
                              std::to_string(p.max_input_level));
    }
    if (ct.encoding != p.input_encoding) {
        throw ProfileMismatch("bts " + profile + ": input encoding mismatch");
    }
    EmulatedCiphertext out = ct;
    out.level = p.output_level;
    out.encoding = p.output_encoding;
    if (p.input_encoding == Encoding::Coeff && p.output_encoding == Encoding::Slot) {
        out.ci = true;  // N coefficients land in N real slots
    }
    out.noise_bound_bits = p.e_bts;
    inject(out);
    record("bts:" + profile, ct.level, out);
    return out;
}

EmulatedCiphertext Emulator::mod_switch(const EmulatedCiphertext& ct, int target_level) {
    if (target_level < 0 || target_level > ct.level) {
        throw ModulusExhausted("mod_switch to level " + std::to_string(target_level));
    }
    EmulatedCiphertext out = ct;
    out.level = target_level;
    record("mod_switch", ct.level, out);
    return out;
}

std::vector<EmulatedCiphertext> Emulator::ring_switch_down(const EmulatedCiphertext& ct,
                                                           int target_log_ring_degree) {
    if (ct.encoding != Encoding::Slot) {
        throw EncodingMismatch("ring_switch_down: slot encoding required");
    }
    if (target_log_ring_degree > ct.log_ring_degree) {
        throw ShapeMismatch("ring_switch_down: target ring larger than source");
    }
    require_budget(ct, "ring_switch_down");
    const long blocks = 1L << (ct.log_ring_degree - target_log_ring_degree);
    const long block_len = static_cast<long>(ct.message.size()) / blocks;
    std::vector<EmulatedCiphertext> out;
    out.reserve(blocks);
    for (long b = 0; b < blocks; ++b) {
        EmulatedCiphertext part = ct;
        part.log_ring_degree = target_log_ring_degree;
        part.level = ct.level - 1;
        part.noise_bound_bits = ct.noise_bound_bits + cfg_.noise.mult;
        part.message.assign(ct.message.begin() + b * block_len,
                            ct.message.begin() + (b + 1) * block_len);
        inject(part);
        record("ring_switch_down", ct.level, part);
        out.push_back(std::move(part));
    }
    return out;
}

EmulatedCiphertext Emulator::ring_pack(const std::vector<EmulatedCiphertext>& cts) {
    if (cts.empty()) throw ShapeMismatch("ring_pack: empty input");
    const std::size_t count = cts.size();
    if ((count & (count - 1)) != 0) {
        throw ShapeMismatch("ring_pack: input count must be a power of two");
    }
    const EmulatedCiphertext& first = cts.front();
    for (const auto& ct : cts) {
        if (ct.level != first.level) throw LevelMismatch("ring_pack: levels differ");
        if (ct.scale_bits != first.scale_bits ||
            ct.encoding != first.encoding || ct.ci != first.ci ||
            ct.log_ring_degree != first.log_ring_degree) {
            throw LevelMismatch("ring_pack: metadata differs");
        }
    }
    require_budget(first, "ring_pack");
    EmulatedCiphertext out = first;
    out.log_ring_degree =
        first.log_ring_degree + static_cast<int>(std::countr_zero(count));
    out.level = first.level - 1;
    out.message.clear();
    double nb = cts.front().noise_bound_bits + cfg_.noise.mult;
    for (const auto& ct : cts) {
        out.message.insert(out.message.end(), ct.message.begin(), ct.message.end());
        nb = log_sum(nb, ct.noise_bound_bits + cfg_.noise.mult);
    }
    out.noise_bound_bits = nb;
    inject(out);
    record("ring_pack", first.level, out);
    return out;
}

EmulatedCiphertext Emulator::to_ci(const EmulatedCiphertext& ct) {
    if (ct.encoding != Encoding::Slot || ct.ci) {
        throw EncodingMismatch("to_ci: plain slot encoding required");
    }
    require_budget(ct, "to_ci");
    const double tol = noise_magnitude(ct) + 1e-12;
    for (const auto& m : ct.message) {
        if (std::abs(m.imag()) > tol) {
            throw NonRealMessage("to_ci: message has imaginary content");
        }
    }
    EmulatedCiphertext out = ct;
    out.ci = true;
    out.level = ct.level - 1;
    out.noise_bound_bits = ct.noise_bound_bits + cfg_.noise.mult;
    // N/2 real values become N real slots: the second half mirrors the first.
    out.message.resize(ct.message.size() * 2);
    for (std::size_t i = 0; i < ct.message.size(); ++i) {
        out.message[i] = {ct.message[i].real(), 0.0};
        out.message[i + ct.message.size()] = {ct.message[i].real(), 0.0};
    }
    inject(out);
    record("to_ci", ct.level, out);
    return out;
}

EmulatedCiphertext Emulator::from_ci(const EmulatedCiphertext& ct) {
    if (ct.encoding != Encoding::Slot || !ct.ci) {
        throw EncodingMismatch("from_ci: conjugate-invariant input required");
    }
    require_budget(ct, "from_ci");
    EmulatedCiphertext out = ct;
    out.ci = false;
    out.level = ct.level - 1;
    out.noise_bound_bits = ct.noise_bound_bits + cfg_.noise.mult;
    const std::size_t half = ct.message.size() / 2;
    out.message.resize(half);
    for (std::size_t i = 0; i < half; ++i) {
        out.message[i] = {
            0.5 * (ct.message[i].real() + ct.message[i + half].real()), 0.0};
    }
    inject(out);
    record("from_ci", ct.level, out);
    return out;
}

std::vector<EmulatedCiphertext> Emulator::ccmm_twin(const CcmmSpec& spec,
                                                    const std::vector<double>& db,
                                                    const std::vector<double>& qry) {
    if (spec.d1 <= 0 || spec.d2 <= 0 || spec.d3 <= 0) {
        throw ShapeMismatch("ccmm: nonpositive dimensions");
    }
    if (spec.d1 % spec.n_db != 0 || spec.d2 % spec.n_qry != 0) {
        throw ShapeMismatch("ccmm: d1 must be a multiple of n_db, d2 of n_qry");
    }
    if (static_cast<long>(db.size()) != spec.d1 * spec.d2 ||
        static_cast<long>(qry.size()) != spec.d2 * spec.d3) {
        throw ShapeMismatch("ccmm: matrix buffer sizes do not match dimensions");
    }
    if (spec.db_modulus_bits < 2.0 * spec.qry_modulus_bits - spec.scale_bits) {
        throw ModulusBudget("ccmm: database modulus below 2q - delta");
    }
    if (spec.out_level < 0 || spec.out_level > cfg_.chain.top_level()) {
        throw ModulusBudget("ccmm: output level outside the modulus chain");
    }
    if (spec.out_encoding == Encoding::Slot && !spec.out_ci) {
        throw ShapeMismatch("ccmm: slot-encoded output must be conjugate-invariant");
    }
    // Row-major exact product; entries are small integers, exact in double.
    std::vector<double> prod(static_cast<std::size_t>(spec.d1 * spec.d3), 0.0);
    for (long i = 0; i < spec.d1; ++i) {
        for (long k = 0; k < spec.d2; ++k) {
            const double a = db[static_cast<std::size_t>(i * spec.d2 + k)];
            if (a == 0.0) continue;
            const double* qrow = qry.data() + k * spec.d3;
            double* prow = prod.data() + i * spec.d3;
            for (long j = 0; j < spec.d3; ++j) prow[j] += a * qrow[j];
        }
    }
    const long blocks_per_col = spec.d1 / spec.n_db;
    std::vector<EmulatedCiphertext> out;
    out.reserve(static_cast<std::size_t>(blocks_per_col * spec.d3));
    for (long c = 0; c < spec.d3; ++c) {
        for (long b = 0; b < blocks_per_col; ++b) {
            EmulatedCiphertext ct;
            ct.encoding = spec.out_encoding;
            ct.ci = spec.out_ci;
            ct.log_ring_degree = static_cast<int>(std::countr_zero(
                static_cast<unsigned long>(spec.n_db)));
            ct.level = spec.out_level;
            ct.scale_bits = spec.scale_bits;
            ct.noise_bound_bits = cfg_.noise.ccmm;
            ct.message.resize(static_cast<std::size_t>(spec.n_db));
            for (long i = 0; i < spec.n_db; ++i) {
                ct.message[static_cast<std::size_t>(i)] = {
                    prod[static_cast<std::size_t>((b * spec.n_db + i) * spec.d3 + c)],
                    0.0};
            }
            inject(ct);
            record("ccmm", 0, ct);
            out.push_back(std::move(ct));
        }
    }
    return out;
}

void Emulator::write_trace_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open trace file " + path);
    os << "op,level_before,level_after,scale_bits,noise_bound_bits\n";
    for (const auto& row : trace_) {
        os << row.op << ',' << row.level_before << ',' << row.level_after << ','
           << row.scale_bits << ',' << row.noise_bound_bits << '\n';
    }
}

long Emulator::count_ops(const std::string& prefix) const {
    return std::count_if(trace_.begin(), trace_.end(), [&](const TraceRow& r) {
        return r.op.rfind(prefix, 0) == 0;
    });
}

}  // namespace irislab::emu
