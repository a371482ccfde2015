#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irislab/errors.hpp"

namespace irislab::iris {

/// Binary iris code plus validity mask, both of the same length d.
struct IrisTemplate {
    std::vector<uint8_t> code;  // entries in {0,1}
    std::vector<uint8_t> mask;  // entries in {0,1}

    std::size_t size() const { return code.size(); }
    void validate() const;
};

/// Ternary representation c' = m - 2*(c & m), entries in {-1,0,1}.
struct MaskedBitvector {
    std::vector<int8_t> values;

    std::size_t size() const { return values.size(); }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return x >= lo && x <= hi; }
    double width() const { return hi - lo; }
};

/// Negative-score distribution and the decision intervals N (no match)
/// and P (match).
struct ScoreModel {
    double mean = 0.008;
    double std = 0.034;
    Interval negative;  // N = [s, t0]
    Interval positive;  // P = [t1, u]

    void validate() const;
};

MaskedBitvector to_masked(const IrisTemplate& t);

/// Score <a',b'> / ||m_a & m_b||_1 in [-1,1]. Throws ZeroOverlap when the
/// masks do not intersect.
double score(const IrisTemplate& a, const IrisTemplate& b);

/// Fractional masked Hamming distance; equals (1 - score)/2.
double distance(const IrisTemplate& a, const IrisTemplate& b);

/// Cyclic shift of code and mask by r positions (entry i moves to i+r mod d).
IrisTemplate rotate(const IrisTemplate& t, std::size_t r);

/// Plaintext ground-truth oracle: OR of per-(rotation, entry) match bits.
/// Scores in N give 0, scores in P give 1; a score in the gap yields an
/// unspecified-but-binary bit (here: 0).
bool match_db_reference(const std::vector<IrisTemplate>& query,
                        const std::vector<IrisTemplate>& db,
                        const Interval& n_int, const Interval& p_int);

/// Seeded synthetic templates: uniform codes, Bernoulli(mask_density) masks.
std::vector<IrisTemplate> synth_db(std::size_t n_db, std::size_t d,
                                   double mask_density, uint64_t seed);

/// Pads code and mask with zero mask bits up to length d_target.
IrisTemplate pad_to(const IrisTemplate& t, std::size_t d_target);

// --- serialization -------------------------------------------------------

/// Packed-bit binary file: header {magic, version, n_db, d}, then the code
/// plane followed by the mask plane, little-endian bit order.
void save_templates(const std::string& path, const std::vector<IrisTemplate>& ts);
std::vector<IrisTemplate> load_templates(const std::string& path);

std::string templates_to_json(const std::vector<IrisTemplate>& ts);
std::vector<IrisTemplate> templates_from_json(const std::string& json_text);

}  // namespace irislab::iris
