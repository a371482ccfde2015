#include "irislab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace irislab::analysis {

WilsonCi wilson_ci(long k, long n, double z) {
    if (n <= 0) return {0.0, 0.0};
    const double p = static_cast<double>(k) / static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * static_cast<double>(n) * n)) /
        denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Hot-loop Horner on a local double copy of the coefficients.
struct FastPoly {
    std::vector<double> c;

    explicit FastPoly(const Polynomial& p) : c(p.coeffs) {}

    double operator()(double x) const {
        double acc = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
        return acc;
    }
};

struct WorkerCounts {
    long neg_outside = 0;
    long pos_min_outside = 0;
    long pos_max_outside = 0;
};

}  // namespace

std::pair<double, double> poly_extremes(const Polynomial& f, const Interval& iv,
                                        long grid_points) {
    const FastPoly fp(f);
    const Polynomial df = f.derivative();
    double lo = fp(iv.lo), hi = fp(iv.lo);
    double prev_d = static_cast<double>(df.eval(iv.lo));
    double prev_x = iv.lo;
    const auto consider = [&](double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (long g = 1; g < grid_points; ++g) {
        const double x = iv.lo + (iv.hi - iv.lo) * g / (grid_points - 1);
        consider(fp(x));
        const double d = static_cast<double>(df.eval(x));
        if ((prev_d <= 0.0) != (d <= 0.0)) {
            // Interior extremum: bisect the derivative sign change.
            double a = prev_x, b = x, da = prev_d;
            for (int it = 0; it < 80; ++it) {
                const double m = 0.5 * (a + b);
                const double dm = static_cast<double>(df.eval(m));
                if ((da <= 0.0) != (dm <= 0.0)) {
                    b = m;
                } else {
                    a = m;
                    da = dm;
                }
            }
            consider(fp(0.5 * (a + b)));
        }
        prev_d = d;
        prev_x = x;
    }
    return {lo, hi};
}

FoldTrialReport montecarlo_fold(const Polynomial& f, const ScoreModel& model,
                                const FoldingSpec& spec, long trials,
                                uint64_t seed, int workers) {
    if (trials < 1) throw ConfigError("montecarlo_fold: trials must be >= 1");
    spec.validate();
    const auto [fmin, fmax] = poly_extremes(f, model.positive);

    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers <= 0) workers = 1;
    }
    workers = static_cast<int>(std::min<long>(workers, trials));

    const FastPoly fp(f);
    const int k = spec.k;
    const double nf_lo = spec.n_f.lo, nf_hi = spec.n_f.hi;
    const double pf_lo = spec.p_f.lo, pf_hi = spec.p_f.hi;

    std::vector<WorkerCounts> counts(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    const long per = trials / workers;
    const long extra = trials % workers;

    for (int w = 0; w < workers; ++w) {
        const long n_local = per + (w < extra ? 1 : 0);
        pool.emplace_back([&, w, n_local] {
            std::mt19937_64 g(splitmix(seed ^ static_cast<uint64_t>(w + 1)));
            std::normal_distribution<double> draw(model.mean, model.std);
            WorkerCounts& c = counts[static_cast<std::size_t>(w)];
            for (long t = 0; t < n_local; ++t) {
                double sum_k = 0.0, sum_k1 = 0.0;
                for (int i = 0; i < k; ++i) {
                    const double v = fp(draw(g));
                    sum_k += v;
                    if (i < k - 1) sum_k1 += v;
                }
                if (sum_k < nf_lo || sum_k > nf_hi) ++c.neg_outside;
                const double smin = fmin + sum_k1;
                const double smax = fmax + sum_k1;
                if (smin < pf_lo || smin > pf_hi) ++c.pos_min_outside;
                if (smax < pf_lo || smax > pf_hi) ++c.pos_max_outside;
            }
        });
    }
    for (auto& t : pool) t.join();

    FoldTrialReport r;
    r.trials = trials;
    r.seed = seed;
    r.f_min_on_p = fmin;
    r.f_max_on_p = fmax;
    for (const auto& c : counts) {
        r.neg_outside_nf += c.neg_outside;
        r.pos_min_outside_pf += c.pos_min_outside;
        r.pos_max_outside_pf += c.pos_max_outside;
    }
    r.p1 = static_cast<double>(r.neg_outside_nf) / trials;
    const long pos_worst = std::max(r.pos_min_outside_pf, r.pos_max_outside_pf);
    r.p2 = static_cast<double>(pos_worst) / trials;
    r.p1_ci = wilson_ci(r.neg_outside_nf, trials);
    r.p2_ci = wilson_ci(pos_worst, trials);
    return r;
}

CalibratedIntervals calibrate_intervals(const Polynomial& f, const ScoreModel& model,
                                        int k, double target_p1, double target_p2,
                                        long trials, uint64_t seed,
                                        double widen_margin) {
    if (target_p1 <= 0.0 || target_p1 >= 1.0 || target_p2 <= 0.0 || target_p2 >= 1.0) {
        throw ConfigError("calibrate_intervals: targets must be in (0,1)");
    }
    if (target_p1 < 10.0 / trials || target_p2 < 10.0 / trials) {
        throw InsufficientTrials("targets below the 10/trials quantile resolution");
    }
    const FastPoly fp(f);
    const auto [fmin, fmax] = poly_extremes(f, model.positive);
    std::mt19937_64 g(splitmix(seed));
    std::normal_distribution<double> draw(model.mean, model.std);

    std::vector<double> neg(static_cast<std::size_t>(trials));
    std::vector<double> pos;
    pos.reserve(static_cast<std::size_t>(2 * trials));
    for (long t = 0; t < trials; ++t) {
        double sum_k = 0.0, sum_k1 = 0.0;
        for (int i = 0; i < k; ++i) {
            const double v = fp(draw(g));
            sum_k += v;
            if (i < k - 1) sum_k1 += v;
        }
        neg[static_cast<std::size_t>(t)] = sum_k;
        pos.push_back(fmin + sum_k1);
        pos.push_back(fmax + sum_k1);
    }
    std::sort(neg.begin(), neg.end());
    std::sort(pos.begin(), pos.end());
    const auto quantile = [](const std::vector<double>& v, double p) {
        const auto idx = static_cast<std::size_t>(
            std::clamp<double>(p * (static_cast<double>(v.size()) - 1), 0.0,
                               static_cast<double>(v.size()) - 1));
        return v[idx];
    };
    CalibratedIntervals out;
    out.n_f = {quantile(neg, target_p1 / 2), quantile(neg, 1.0 - target_p1 / 2)};
    out.p_f = {quantile(pos, target_p2 / 2), quantile(pos, 1.0 - target_p2 / 2)};
    out.n_f_widened = {out.n_f.lo - widen_margin, out.n_f.hi + widen_margin};
    return out;
}

FpFnReport fp_fn_report(const std::vector<RunOutcome>& outcomes) {
    FpFnReport r;
    r.runs = static_cast<long>(outcomes.size());
    long oracle_pos = 0, oracle_neg = 0;
    for (const auto& o : outcomes) {
        if (o.oracle_bit) {
            ++oracle_pos;
            if (!o.pipeline_bit) ++r.false_negatives;
        } else {
            ++oracle_neg;
            if (o.pipeline_bit) ++r.false_positives;
        }
    }
    r.fp_rate = oracle_neg ? static_cast<double>(r.false_positives) / oracle_neg : 0.0;
    r.fn_rate = oracle_pos ? static_cast<double>(r.false_negatives) / oracle_pos : 0.0;
    r.fp_ci = wilson_ci(r.false_positives, oracle_neg);
    r.fn_ci = wilson_ci(r.false_negatives, oracle_pos);
    return r;
}

void save_fold_report(const std::string& path, const FoldTrialReport& r) {
    nlohmann::json j;
    j["trials"] = r.trials;
    j["seed"] = r.seed;
    j["neg_outside_nf"] = r.neg_outside_nf;
    j["pos_min_outside_pf"] = r.pos_min_outside_pf;
    j["pos_max_outside_pf"] = r.pos_max_outside_pf;
    j["p1"] = r.p1;
    j["p2"] = r.p2;
    j["p1_ci"] = {r.p1_ci.lo, r.p1_ci.hi};
    j["p2_ci"] = {r.p2_ci.lo, r.p2_ci.hi};
    j["f_min_on_p"] = r.f_min_on_p;
    j["f_max_on_p"] = r.f_max_on_p;
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os << j.dump(2) << "\n";
}

void save_fold_histogram_csv(const std::string& path, const Polynomial& f,
                             const ScoreModel& model, int k, long trials,
                             uint64_t seed, int buckets) {
    const FastPoly fp(f);
    std::mt19937_64 g(splitmix(seed));
    std::normal_distribution<double> draw(model.mean, model.std);
    std::vector<double> sums(static_cast<std::size_t>(trials));
    for (auto& s : sums) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += fp(draw(g));
        s = acc;
    }
    const auto [lo_it, hi_it] = std::minmax_element(sums.begin(), sums.end());
    const double lo = *lo_it, hi = *hi_it;
    const double width = (hi - lo) / buckets;
    std::vector<long> hist(static_cast<std::size_t>(buckets), 0);
    for (double s : sums) {
        auto b = static_cast<long>((s - lo) / (width > 0 ? width : 1.0));
        b = std::clamp<long>(b, 0, buckets - 1);
        ++hist[static_cast<std::size_t>(b)];
    }
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os << "bucket_lo,bucket_hi,count\n";
    for (int b = 0; b < buckets; ++b) {
        os << lo + b * width << ',' << lo + (b + 1) * width << ','
           << hist[static_cast<std::size_t>(b)] << '\n';
    }
}

}  // namespace irislab::analysis
