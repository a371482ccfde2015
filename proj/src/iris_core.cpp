#include "irislab/iris_core.hpp"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace irislab::iris {

void IrisTemplate::validate() const {
    if (code.size() != mask.size() || code.empty()) {
        throw ShapeMismatch("code and mask must have identical nonzero length");
    }
    for (std::size_t i = 0; i < code.size(); ++i) {
        if (code[i] > 1 || mask[i] > 1) {
            throw ShapeMismatch("template entries must be bits");
        }
    }
}

void ScoreModel::validate() const {
    if (std <= 0.0) throw ConfigError("score model std must be positive");
    if (negative.hi >= positive.lo) {
        throw ConfigError("score intervals must satisfy max(N) < min(P)");
    }
}

MaskedBitvector to_masked(const IrisTemplate& t) {
    MaskedBitvector out;
    out.values.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        out.values[i] = static_cast<int8_t>(t.mask[i] - 2 * (t.code[i] & t.mask[i]));
    }
    return out;
}

namespace {

// Returns (<a',b'>, ||m_a & m_b||_1) in exact integer arithmetic.
std::pair<long, long> inner_and_overlap(const IrisTemplate& a, const IrisTemplate& b) {
    if (a.size() != b.size()) throw ShapeMismatch("template lengths differ");
    long inner = 0;
    long overlap = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int av = a.mask[i] - 2 * (a.code[i] & a.mask[i]);
        const int bv = b.mask[i] - 2 * (b.code[i] & b.mask[i]);
        inner += av * bv;
        overlap += a.mask[i] & b.mask[i];
    }
    return {inner, overlap};
}

}  // namespace

double score(const IrisTemplate& a, const IrisTemplate& b) {
    auto [inner, overlap] = inner_and_overlap(a, b);
    if (overlap == 0) throw ZeroOverlap();
    return static_cast<double>(inner) / static_cast<double>(overlap);
}

double distance(const IrisTemplate& a, const IrisTemplate& b) {
    return (1.0 - score(a, b)) / 2.0;
}

IrisTemplate rotate(const IrisTemplate& t, std::size_t r) {
    const std::size_t d = t.size();
    r %= d;
    IrisTemplate out;
    out.code.resize(d);
    out.mask.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        out.code[(i + r) % d] = t.code[i];
        out.mask[(i + r) % d] = t.mask[i];
    }
    return out;
}

bool match_db_reference(const std::vector<IrisTemplate>& query,
                        const std::vector<IrisTemplate>& db,
                        const Interval& n_int, const Interval& p_int) {
    for (const auto& q : query) {
        for (const auto& entry : db) {
            const double s = score(q, entry);
            if (p_int.contains(s)) return true;
            // Scores in N (or in the gap) do not set the match bit.
            (void)n_int;
        }
    }
    return false;
}

std::vector<IrisTemplate> synth_db(std::size_t n_db, std::size_t d,
                                   double mask_density, uint64_t seed) {
    if (mask_density <= 0.0 || mask_density > 1.0) {
        throw ConfigError("mask density must be in (0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution code_bit(0.5);
    std::bernoulli_distribution mask_bit(mask_density);
    std::vector<IrisTemplate> out(n_db);
    for (auto& t : out) {
        t.code.resize(d);
        t.mask.resize(d);
        for (std::size_t i = 0; i < d; ++i) t.code[i] = code_bit(rng) ? 1 : 0;
        if (mask_density >= 1.0) {
            std::fill(t.mask.begin(), t.mask.end(), uint8_t{1});
        } else {
            for (std::size_t i = 0; i < d; ++i) t.mask[i] = mask_bit(rng) ? 1 : 0;
        }
    }
    return out;
}

IrisTemplate pad_to(const IrisTemplate& t, std::size_t d_target) {
    if (d_target < t.size()) throw ShapeMismatch("cannot pad to a smaller length");
    IrisTemplate out = t;
    out.code.resize(d_target, 0);
    out.mask.resize(d_target, 0);  // padded bits are masked out
    return out;
}

// --- serialization -------------------------------------------------------

namespace {

constexpr uint32_t kMagic = 0x49524954;  // "IRIT"
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& os, uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(is.get())) << (8 * i);
    return v;
}
uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(is.get())) << (8 * i);
    return v;
}

// Packs one plane (all codes, or all masks) with little-endian bit order:
// bit i of byte j holds element 8*j + i.
void pack_plane(std::ostream& os, const std::vector<IrisTemplate>& ts, bool mask_plane) {
    uint8_t acc = 0;
    int nbits = 0;
    for (const auto& t : ts) {
        const auto& plane = mask_plane ? t.mask : t.code;
        for (uint8_t bit : plane) {
            acc |= static_cast<uint8_t>(bit << nbits);
            if (++nbits == 8) {
                os.put(static_cast<char>(acc));
                acc = 0;
                nbits = 0;
            }
        }
    }
    if (nbits > 0) os.put(static_cast<char>(acc));
}

void unpack_plane(std::istream& is, std::vector<IrisTemplate>& ts, bool mask_plane) {
    uint8_t acc = 0;
    int nbits = 0;
    for (auto& t : ts) {
        auto& plane = mask_plane ? t.mask : t.code;
        for (auto& bit : plane) {
            if (nbits == 0) {
                acc = static_cast<uint8_t>(is.get());
                nbits = 8;
            }
            bit = acc & 1;
            acc >>= 1;
            --nbits;
        }
    }
}

}  // namespace

void save_templates(const std::string& path, const std::vector<IrisTemplate>& ts) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    const uint64_t d = ts.empty() ? 0 : ts.front().size();
    for (const auto& t : ts) {
        if (t.size() != d) throw ShapeMismatch("all templates must share one length");
    }
    put_u32(os, kMagic);
    put_u32(os, kVersion);
    put_u64(os, ts.size());
    put_u64(os, d);
    pack_plane(os, ts, /*mask_plane=*/false);
    pack_plane(os, ts, /*mask_plane=*/true);
}

std::vector<IrisTemplate> load_templates(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    if (get_u32(is) != kMagic) throw Error("bad template file magic in " + path);
    if (get_u32(is) != kVersion) throw Error("unsupported template file version");
    const uint64_t n = get_u64(is);
    const uint64_t d = get_u64(is);
    std::vector<IrisTemplate> ts(n);
    for (auto& t : ts) {
        t.code.resize(d);
        t.mask.resize(d);
    }
    unpack_plane(is, ts, false);
    unpack_plane(is, ts, true);
    if (!is) throw Error("truncated template file " + path);
    return ts;
}

std::string templates_to_json(const std::vector<IrisTemplate>& ts) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& t : ts) {
        j.push_back({{"code", t.code}, {"mask", t.mask}});
    }
    return j.dump();
}

std::vector<IrisTemplate> templates_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    std::vector<IrisTemplate> ts;
    for (const auto& e : j) {
        IrisTemplate t;
        t.code = e.at("code").get<std::vector<uint8_t>>();
        t.mask = e.at("mask").get<std::vector<uint8_t>>();
        t.validate();
        ts.push_back(std::move(t));
    }
    return ts;
}

}  // namespace irislab::iris
