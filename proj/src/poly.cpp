#include "irislab/poly.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace irislab::polydes {

int Polynomial::degree() const {
    for (std::size_t i = coeffs.size(); i-- > 0;) {
        if (coeffs[i] != 0.0) return static_cast<int>(i);
    }
    return 0;
}

long double Polynomial::eval(long double x) const {
    long double acc = 0.0L;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
        acc = acc * x + static_cast<long double>(coeffs[i]);
    }
    return acc;
}

Polynomial Polynomial::derivative() const {
    Polynomial d;
    if (coeffs.size() <= 1) {
        d.coeffs = {0.0};
        return d;
    }
    d.coeffs.resize(coeffs.size() - 1);
    for (std::size_t i = 1; i < coeffs.size(); ++i) {
        d.coeffs[i - 1] = coeffs[i] * static_cast<double>(i);
    }
    return d;
}

PsPlan ps_eval_plan(const Polynomial& p) {
    PsPlan plan;
    plan.degree = p.degree();
    if (plan.degree == 0) {
        return plan;  // zero multiplications, zero depth
    }
    plan.depth = detail::ps_depth(plan.degree);
    plan.baby_m = static_cast<int>(detail::ps_baby_m(plan.degree));

    // Count by executing the plan on scalars.
    ScalarRing ring;
    Polynomial probe = p;
    probe.coeffs.resize(static_cast<std::size_t>(plan.degree) + 1);
    if (probe.coeffs.back() == 0.0) probe.coeffs.back() = 1.0;  // keep the stated degree
    (void)ps_execute<long double>(probe, 0.5L, ring);
    plan.nonscalar_mults = ring.mults;
    return plan;
}

void save_polynomial(const std::string& path, const PolynomialFixture& f) {
    nlohmann::json j;
    j["degree"] = f.poly.degree();
    j["coeffs"] = f.poly.coeffs;
    j["domain"] = {f.domain_lo, f.domain_hi};
    j["metadata"] = f.metadata;
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

PolynomialFixture load_polynomial(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    nlohmann::json j;
    is >> j;
    PolynomialFixture f;
    f.poly.coeffs = j.at("coeffs").get<std::vector<double>>();
    f.domain_lo = j.at("domain").at(0).get<double>();
    f.domain_hi = j.at("domain").at(1).get<double>();
    f.metadata = j.value("metadata", "");
    return f;
}

}  // namespace irislab::polydes
