#include "irislab/thfhe_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace irislab::thfhe {

namespace {

void check_compatible(const ToyRingElement& a, const ToyRingElement& b,
                      const char* op) {
    if (a.n() != b.n() || a.q != b.q) {
        throw ConfigError(std::string(op) + ": ring mismatch");
    }
}

mpz_class mod_q(const mpz_class& v, const mpz_class& q) {
    mpz_class r;
    mpz_fdiv_r(r.get_mpz_t(), v.get_mpz_t(), q.get_mpz_t());
    return r;
}

// Uniform value in [0, q) from a 64-bit generator.
mpz_class uniform_mpz(std::mt19937_64& g, const mpz_class& q) {
    const std::size_t bits = mpz_sizeinbase(q.get_mpz_t(), 2);
    while (true) {
        mpz_class v = 0;
        for (std::size_t got = 0; got < bits; got += 64) {
            v <<= 64;
            v += mpz_class(static_cast<unsigned long>(g()));
        }
        v >>= (64 - bits % 64) % 64;
        if (v < q) return v;
    }
}

}  // namespace

void ToyRingElement::reduce() {
    for (auto& c : coeffs) c = mod_q(c, q);
}

bool ToyRingElement::is_zero() const {
    return std::all_of(coeffs.begin(), coeffs.end(),
                       [](const mpz_class& c) { return c == 0; });
}

ToyRingElement re_zero(long n, const mpz_class& q) {
    return {std::vector<mpz_class>(static_cast<std::size_t>(n), mpz_class(0)), q};
}

ToyRingElement re_add(const ToyRingElement& a, const ToyRingElement& b) {
    check_compatible(a, b, "re_add");
    ToyRingElement out = a;
    for (long i = 0; i < a.n(); ++i) {
        out.coeffs[i] = mod_q(a.coeffs[i] + b.coeffs[i], a.q);
    }
    return out;
}

ToyRingElement re_sub(const ToyRingElement& a, const ToyRingElement& b) {
    check_compatible(a, b, "re_sub");
    ToyRingElement out = a;
    for (long i = 0; i < a.n(); ++i) {
        out.coeffs[i] = mod_q(a.coeffs[i] - b.coeffs[i], a.q);
    }
    return out;
}

ToyRingElement re_scalar_mul(const mpz_class& c, const ToyRingElement& a) {
    ToyRingElement out = a;
    for (auto& v : out.coeffs) v = mod_q(c * v, a.q);
    return out;
}

ToyRingElement re_mul(const ToyRingElement& a, const ToyRingElement& b) {
    check_compatible(a, b, "re_mul");
    const long n = a.n();
    ToyRingElement out = re_zero(n, a.q);
    for (long i = 0; i < n; ++i) {
        if (a.coeffs[i] == 0) continue;
        for (long j = 0; j < n; ++j) {
            const long k = i + j;
            if (k < n) {
                out.coeffs[k] += a.coeffs[i] * b.coeffs[j];
            } else {
                out.coeffs[k - n] -= a.coeffs[i] * b.coeffs[j];  // X^n = -1
            }
        }
    }
    out.reduce();
    return out;
}

ToyRingElement re_random(long n, const mpz_class& q, uint64_t seed) {
    std::mt19937_64 g(seed);
    ToyRingElement out = re_zero(n, q);
    for (auto& c : out.coeffs) c = uniform_mpz(g, q);
    return out;
}

Sharing share_secret(const ToyRingElement& sk, int n, int t, uint64_t seed) {
    if (t < 2 || t > n) throw BadThreshold("need 2 <= t <= n");
    if (sk.q <= n) throw BadThreshold("toy modulus must exceed the party count");
    if (mpz_probab_prime_p(sk.q.get_mpz_t(), 25) == 0) {
        throw BadThreshold("toy modulus must be prime");
    }
    std::mt19937_64 g(seed);
    Sharing sh;
    sh.n_parties = n;
    sh.threshold = t;
    sh.shares.assign(static_cast<std::size_t>(n), re_zero(sk.n(), sk.q));
    // Coefficient-wise Shamir: random degree-(t-1) polynomial with the secret
    // at 0, evaluated at party indices 1..n.
    for (long c = 0; c < sk.n(); ++c) {
        std::vector<mpz_class> poly(static_cast<std::size_t>(t));
        poly[0] = sk.coeffs[c];
        for (int j = 1; j < t; ++j) poly[j] = uniform_mpz(g, sk.q);
        for (int p = 1; p <= n; ++p) {
            mpz_class acc = 0;
            for (int j = t - 1; j >= 0; --j) acc = mod_q(acc * p + poly[j], sk.q);
            sh.shares[p - 1].coeffs[c] = acc;
        }
    }
    return sh;
}

std::vector<mpz_class> lagrange_coeffs(const std::vector<int>& participants,
                                       const mpz_class& q) {
    std::vector<mpz_class> lambda;
    lambda.reserve(participants.size());
    for (std::size_t j = 0; j < participants.size(); ++j) {
        mpz_class num = 1, den = 1;
        for (std::size_t m = 0; m < participants.size(); ++m) {
            if (m == j) continue;
            num = mod_q(num * participants[m], q);
            den = mod_q(den * (participants[m] - participants[j]), q);
        }
        mpz_class inv;
        if (mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), q.get_mpz_t()) == 0) {
            throw BadThreshold("non-invertible Lagrange denominator");
        }
        lambda.push_back(mod_q(num * inv, q));
    }
    return lambda;
}

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t pair_key(uint64_t master, int i, int j) {
    const uint64_t lo = static_cast<uint64_t>(std::min(i, j));
    const uint64_t hi = static_cast<uint64_t>(std::max(i, j));
    return splitmix(master ^ splitmix((hi << 32) | lo));
}

uint64_t hash_ct(const ToyCiphertext& ct) {
    uint64_t h = 0xcbf29ce484222325ULL;
    const auto fold = [&h](const ToyRingElement& e) {
        for (const auto& c : e.coeffs) {
            h = splitmix(h ^ mpz_fdiv_ui(c.get_mpz_t(), 0xfffffffbUL));
        }
    };
    fold(ct.a);
    fold(ct.b);
    return h;
}

// Keyed PRG: deterministic ring element from (key, ciphertext).
ToyRingElement prf_mask(uint64_t key, const ToyCiphertext& ct) {
    std::mt19937_64 g(key ^ hash_ct(ct));
    ToyRingElement out = re_zero(ct.a.n(), ct.a.q);
    for (auto& c : out.coeffs) c = uniform_mpz(g, ct.a.q);
    return out;
}

// Rounded Gaussian with 12-sigma tail cut, coefficient-wise.
ToyRingElement flooding_noise(long n, const mpz_class& q, double std_bits,
                              uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    ToyRingElement out = re_zero(n, q);
    for (auto& c : out.coeffs) {
        double z = dist(g);
        z = std::clamp(z, -12.0, 12.0);
        // e = round(z * 2^std_bits), in extended precision via mpf.
        mpf_class mag(std::abs(z), 128);
        mpf_class scale;
        mpf_set_ui(scale.get_mpf_t(), 1);
        mpf_mul_2exp(scale.get_mpf_t(), scale.get_mpf_t(),
                     static_cast<unsigned long>(std::ceil(std::max(0.0, std_bits))));
        mag *= scale * std::exp2(std_bits - std::ceil(std::max(0.0, std_bits)));
        mpz_class e;
        mpf_class half = mag + 0.5;
        mpz_set_f(e.get_mpz_t(), half.get_mpf_t());
        if (z < 0) e = -e;
        c = mod_q(e, q);
    }
    return out;
}

}  // namespace

DecryptionShare partial_decrypt(const ToyCiphertext& ct, int party,
                                const ToyRingElement& key_share,
                                const std::vector<int>& participants,
                                double flood_std_bits, uint64_t prf_master,
                                uint64_t flood_seed) {
    const auto self = std::find(participants.begin(), participants.end(), party);
    if (self == participants.end()) {
        throw UnknownParticipant("party " + std::to_string(party) +
                                 " not in the participant list");
    }
    const auto lambda = lagrange_coeffs(participants, ct.a.q);
    const mpz_class lam = lambda[static_cast<std::size_t>(self - participants.begin())];

    ToyRingElement sh = re_scalar_mul(lam, re_mul(ct.a, key_share));
    if (flood_std_bits >= 0.0) {
        sh = re_add(sh, flooding_noise(ct.a.n(), ct.a.q, flood_std_bits,
                                       splitmix(flood_seed ^ static_cast<uint64_t>(party))));
    }
    if (prf_master != 0) {
        for (int other : participants) {
            if (other == party) continue;
            const ToyRingElement m = prf_mask(pair_key(prf_master, party, other), ct);
            sh = (party < other) ? re_add(sh, m) : re_sub(sh, m);
        }
    }
    return {party, std::move(sh)};
}

std::vector<mpz_class> final_decrypt(const ToyRingElement& b,
                                     const std::vector<DecryptionShare>& shares,
                                     int scale_bits, double noise_bound_bits) {
    if (noise_bound_bits >= 0.0 && noise_bound_bits >= scale_bits - 1) {
        throw RoundingAmbiguity("noise bound 2^" + std::to_string(noise_bound_bits) +
                                " reaches half the scale 2^" +
                                std::to_string(scale_bits));
    }
    ToyRingElement acc = b;
    for (const auto& s : shares) acc = re_add(acc, s.share);
    const mpz_class q = b.q;
    const mpz_class half_q = q / 2;
    const mpz_class delta = mpz_class(1) << scale_bits;
    std::vector<mpz_class> mu;
    mu.reserve(acc.coeffs.size());
    for (auto c : acc.coeffs) {
        if (c > half_q) c -= q;  // center
        mpz_class m;
        // round(c / delta) = floor((c + delta/2) / delta)
        mpz_class shifted = c + delta / 2;
        mpz_fdiv_q(m.get_mpz_t(), shifted.get_mpz_t(), delta.get_mpz_t());
        mu.push_back(m);
    }
    return mu;
}

double flooding_gap_bits(double log_n, double lambda, double log_t) {
    return log_n + lambda / 2.0 + log_t;
}

ToyRingElement toy_keygen(long n, const mpz_class& q, uint64_t seed) {
    // Ternary secret in {-1, 0, 1}.
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> d(-1, 1);
    ToyRingElement sk = re_zero(n, q);
    for (auto& c : sk.coeffs) c = mod_q(mpz_class(d(g)), q);
    return sk;
}

ToyCiphertext toy_encrypt(const std::vector<long>& mu, const ToyRingElement& sk,
                          int scale_bits, double noise_std, uint64_t seed) {
    if (static_cast<long>(mu.size()) != sk.n()) {
        throw ConfigError("toy_encrypt: plaintext length != ring degree");
    }
    std::mt19937_64 g(seed);
    ToyCiphertext ct;
    ct.a = re_random(sk.n(), sk.q, g());
    const mpz_class delta = mpz_class(1) << scale_bits;
    ToyRingElement msg = re_zero(sk.n(), sk.q);
    std::normal_distribution<double> noise(0.0, noise_std);
    for (long i = 0; i < sk.n(); ++i) {
        mpz_class v = delta * mu[static_cast<std::size_t>(i)];
        if (noise_std > 0.0) v += static_cast<long>(std::lround(noise(g)));
        msg.coeffs[static_cast<std::size_t>(i)] = mod_q(v, sk.q);
    }
    ct.b = re_sub(msg, re_mul(ct.a, sk));
    return ct;
}

void save_transcript(const std::string& path, const Transcript& t) {
    nlohmann::json j;
    j["n_parties"] = t.n_parties;
    j["threshold"] = t.threshold;
    j["participants"] = t.participants;
    j["ring_n"] = t.ring_n;
    j["q_bits"] = t.q_bits;
    j["share_bytes"] = t.share_bytes;
    j["gap_bits"] = t.gap_bits;
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace irislab::thfhe
