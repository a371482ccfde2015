#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "irislab/errors.hpp"

namespace irislab::polydes {

/// Dense polynomial, coefficients in ascending degree. Evaluation is done
/// in extended precision; high-degree classifier stages need the headroom.
struct Polynomial {
    std::vector<double> coeffs;

    Polynomial() = default;
    explicit Polynomial(std::vector<double> c) : coeffs(std::move(c)) {}

    /// Index of the last nonzero coefficient; 0 for the zero polynomial.
    int degree() const;

    long double eval(long double x) const;
    double operator()(double x) const { return static_cast<double>(eval(x)); }

    Polynomial derivative() const;
};

/// Baby-step/giant-step evaluation structure for a polynomial of the given
/// degree: split size m, multiplicative depth, and nonscalar mult count.
struct PsPlan {
    int degree = 0;
    int baby_m = 1;
    int depth = 0;
    int nonscalar_mults = 0;
};

PsPlan ps_eval_plan(const Polynomial& p);

/// Executes the plan in a generic ring. The ring must provide:
///   T mul(const T&, const T&)       -- nonscalar multiplication
///   T add(const T&, const T&)
///   T axpb(double a, const T& x, double b)  -- scalar a*x + b
/// Multiplicative depth and mult count follow the plan exactly.
template <typename T, typename Ring>
T ps_execute(const Polynomial& p, const T& x, Ring& ring);

namespace detail {

inline int ps_depth(int degree) {
    int k = 0;
    while ((1 << k) < degree + 1) ++k;
    return k;
}

inline std::size_t ps_baby_m(int degree) {
    if (degree == 0) return 1;
    const int k = ps_depth(degree);
    return std::size_t{1} << ((k + 1) / 2);
}

template <typename T, typename Ring>
T ps_eval_range(const std::vector<double>& c, std::size_t lo, std::size_t hi,
                const std::vector<T>& baby, const std::vector<T>& giant,
                std::size_t m, Ring& ring) {
    // Evaluates sum_{i in [lo, hi)} c[lo+i] * x^i.
    const std::size_t n = hi - lo;
    if (n <= m) {
        // Direct combination of baby powers: c0 + sum c_i * x^i.
        T acc = ring.axpb(0.0, baby[0], c[lo]);
        for (std::size_t i = 1; i < n; ++i) {
            acc = ring.add(acc, ring.axpb(c[lo + i], baby[i - 1], 0.0));
        }
        return acc;
    }
    // Split at the largest giant power 2^t * m < n.
    std::size_t split = m;
    std::size_t g = 0;
    while (split * 2 < n) {
        split *= 2;
        ++g;
    }
    T low = ps_eval_range(c, lo, lo + split, baby, giant, m, ring);
    T high = ps_eval_range(c, lo + split, hi, baby, giant, m, ring);
    return ring.add(ring.mul(high, giant[g]), low);
}

}  // namespace detail

template <typename T, typename Ring>
T ps_execute(const Polynomial& p, const T& x, Ring& ring) {
    const int d = p.degree();
    std::vector<double> c = p.coeffs;
    c.resize(static_cast<std::size_t>(d) + 1, 0.0);
    if (d == 0) return ring.axpb(0.0, x, c[0]);

    const std::size_t m = detail::ps_baby_m(d);

    // Baby powers x^1 .. x^m, each from its halves to keep depth log2(j).
    std::vector<T> baby;
    baby.push_back(x);
    for (std::size_t j = 2; j <= std::min<std::size_t>(m, static_cast<std::size_t>(d)); ++j) {
        baby.push_back(ring.mul(baby[(j + 1) / 2 - 1], baby[j / 2 - 1]));
    }
    // Giant powers x^m, x^2m, ... by squaring.
    std::vector<T> giant;
    if (static_cast<std::size_t>(d) + 1 > m) {
        giant.push_back(baby[m - 1]);
        std::size_t pw = m;
        while (pw * 2 < static_cast<std::size_t>(d) + 1) {
            giant.push_back(ring.mul(giant.back(), giant.back()));
            pw *= 2;
        }
    }
    return detail::ps_eval_range(c, 0, static_cast<std::size_t>(d) + 1, baby, giant, m, ring);
}

/// Scalar ring used for tests and plaintext evaluation.
struct ScalarRing {
    int mults = 0;
    long double mul(long double a, long double b) {
        ++mults;
        return a * b;
    }
    long double add(long double a, long double b) { return a + b; }
    long double axpb(double a, long double x, double b) { return a * x + b; }
};

// --- fixture files -------------------------------------------------------

struct PolynomialFixture {
    Polynomial poly;
    double domain_lo = 0.0;
    double domain_hi = 0.0;
    std::string metadata;
};

void save_polynomial(const std::string& path, const PolynomialFixture& f);
PolynomialFixture load_polynomial(const std::string& path);

}  // namespace irislab::polydes
