#pragma once

#include <functional>
#include <vector>

#include "irislab/iris_core.hpp"
#include "irislab/poly.hpp"

namespace irislab::polydes {

using iris::Interval;

/// Weight w_alpha(x) = alpha * D(x) + 1_P(x) with D a normal density,
/// integrated over [domain.lo, domain.hi].
struct WeightSpec {
    double alpha = 1.0e3;
    double dist_mean = 0.008;
    double dist_std = 0.06;
    Interval p_interval;
    Interval domain;

    void validate() const;
    double operator()(double x) const;
};

/// Gauss-Legendre nodes/weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendreRule(int order);
};

/// Integrates f with the weight over the domain, splitting at the
/// P-interval endpoints where the weight is discontinuous.
long double integrate_weighted(const WeightSpec& w,
                               const std::function<long double(long double)>& f,
                               int order_per_piece = 64);

/// Orthonormal basis f_0..f_d for <phi,psi> = int phi psi w, built by the
/// Stieltjes three-term recurrence; f_i has degree exactly i.
std::vector<Polynomial> orthonormal_basis(const WeightSpec& w, int d,
                                          int quad_order = 64,
                                          double cond_bound = 1.0e12);

/// L2(w) projection of the target onto span(basis): sum <f_i, t> f_i.
Polynomial l2_project(const std::function<double(double)>& target,
                      const std::vector<Polynomial>& basis, const WeightSpec& w,
                      int quad_order = 64);

/// Minimax approximation of the step (0 on I0, 1 on I1) by a degree-d
/// polynomial. Returns the polynomial and the equioscillation error.
struct RemezResult {
    Polynomial poly;
    double eps = 0.0;
    int alternations = 0;
};

RemezResult remez_two_interval(const Interval& i0, const Interval& i1, int d,
                               int max_iter = 400, int grid_per_interval = 20000);

/// Composed classification stages; stage j maps the neighborhoods of the
/// previous outputs into its own input domain. Each stage keeps its
/// polynomial in the variable x - center: high-degree step approximants
/// have coefficients too large for double monomials around the origin.
struct ClassifierChain {
    struct Stage {
        Polynomial poly;  // in the shifted variable y = x - center
        double center = 0.0;

        long double eval(long double x) const { return poly.eval(x - center); }
    };

    std::vector<Stage> stages;
    Interval i0;
    Interval i1;
    std::vector<double> eps_schedule;  // eps_0 >= eps_1 >= ... (final = eps())

    double eps() const { return eps_schedule.empty() ? 0.0 : eps_schedule.back(); }
    long double eval(long double x) const;
};

ClassifierChain compose_classifier(const Interval& i0, const Interval& i1,
                                   double eps_target,
                                   const std::vector<int>& degree_schedule);

/// Max deviation of the chain from its step target over I0 and I1,
/// measured on a dense grid.
double chain_grid_error(const ClassifierChain& chain, long grid_points = 100000);

/// Folding parameters (k groups of scores, target sum intervals).
struct FoldingSpec {
    int k = 16;
    Interval n_f;  // folded-negative interval
    Interval p_f;  // folded-positive interval
    double p1 = 0.0;
    double p2 = 0.0;

    void validate() const;
};

/// True iff alpha < beta / (2k - 1), the disjointness condition for
/// [-k*alpha, k*alpha] and [beta - (k-1)*alpha, inf).
bool folding_bound_check(double alpha_bound, double beta_bound, int k);

// --- chain fixture files ---------------------------------------------------

void save_chain(const std::string& path, const ClassifierChain& chain);
ClassifierChain load_chain(const std::string& path);

}  // namespace irislab::polydes
