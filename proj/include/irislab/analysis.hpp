#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "irislab/iris_core.hpp"
#include "irislab/poly.hpp"
#include "irislab/poly_design.hpp"

namespace irislab::analysis {

using iris::Interval;
using iris::ScoreModel;
using polydes::FoldingSpec;
using polydes::Polynomial;

struct WilsonCi {
    double lo = 0.0;
    double hi = 0.0;
};

/// 95% Wilson score interval for k successes in n trials.
WilsonCi wilson_ci(long k, long n, double z = 1.959963984540054);

struct FoldTrialReport {
    long trials = 0;
    long neg_outside_nf = 0;   // all-negative sums outside N_f
    long pos_min_outside_pf = 0;  // min-over-P bracket outside P_f
    long pos_max_outside_pf = 0;  // max-over-P bracket outside P_f
    double p1 = 0.0;  // estimated false-negative probability
    double p2 = 0.0;  // estimated false-positive probability (worse bracket)
    WilsonCi p1_ci;
    WilsonCi p2_ci;
    double f_min_on_p = 0.0;
    double f_max_on_p = 0.0;
    uint64_t seed = 0;
};

/// Extremes of f over the interval: dense grid plus derivative-root
/// refinement by bisection.
std::pair<double, double> poly_extremes(const Polynomial& f, const Interval& iv,
                                        long grid_points = 100000);

/// Three folding experiment families: sum of k negative draws; min of f over
/// P plus k-1 negative draws; max of f over P plus k-1 negative draws.
/// Trials are split across workers with counter-derived seeds.
FoldTrialReport montecarlo_fold(const Polynomial& f, const ScoreModel& model,
                                const FoldingSpec& spec, long trials,
                                uint64_t seed, int workers = 0);

struct CalibratedIntervals {
    Interval n_f;
    Interval p_f;
    Interval n_f_widened;
};

/// Empirical-quantile calibration of the folded intervals, then widening of
/// N_f by the margin on both sides.
CalibratedIntervals calibrate_intervals(const Polynomial& f, const ScoreModel& model,
                                        int k, double target_p1, double target_p2,
                                        long trials, uint64_t seed,
                                        double widen_margin = 0.02);

struct RunOutcome {
    bool pipeline_bit = false;
    bool oracle_bit = false;
};

struct FpFnReport {
    long runs = 0;
    long false_positives = 0;
    long false_negatives = 0;
    double fp_rate = 0.0;
    double fn_rate = 0.0;
    WilsonCi fp_ci;
    WilsonCi fn_ci;
};

FpFnReport fp_fn_report(const std::vector<RunOutcome>& outcomes);

void save_fold_report(const std::string& path, const FoldTrialReport& r);

/// Histogram CSV (bucket_lo,bucket_hi,count) of folded negative sums.
void save_fold_histogram_csv(const std::string& path, const Polynomial& f,
                             const ScoreModel& model, int k, long trials,
                             uint64_t seed, int buckets = 200);

}  // namespace irislab::analysis
