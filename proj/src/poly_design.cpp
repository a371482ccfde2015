#include "irislab/poly_design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace irislab::polydes {

void WeightSpec::validate() const {
    if (dist_std <= 0.0) throw ConfigError("weight distribution std must be positive");
    if (p_interval.lo < domain.lo || p_interval.hi > domain.hi) {
        throw ConfigError("P interval must lie inside the integration domain");
    }
    if (alpha < 0.0) throw ConfigError("weight alpha must be nonnegative");
}

double WeightSpec::operator()(double x) const {
    const double z = (x - dist_mean) / dist_std;
    const double density =
        std::exp(-0.5 * z * z) / (dist_std * std::sqrt(2.0 * std::numbers::pi));
    return alpha * density + (p_interval.contains(x) ? 1.0 : 0.0);
}

GaussLegendreRule::GaussLegendreRule(int order) {
    nodes.resize(order);
    weights.resize(order);
    // Newton iteration on the Legendre polynomial, symmetric half only.
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        long double x = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) /
                                 (order + 0.5L));
        long double pp = 0.0L;
        for (int it = 0; it < 100; ++it) {
            long double p0 = 1.0L, p1 = 0.0L;
            for (int j = 0; j < order; ++j) {
                const long double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            pp = order * (x * p0 - p1) / (x * x - 1.0L);
            const long double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-19L) break;
        }
        nodes[i] = static_cast<double>(-x);
        nodes[order - 1 - i] = static_cast<double>(x);
        const double w = static_cast<double>(2.0L / ((1.0L - x * x) * pp * pp));
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
}

namespace {

long double integrate_panel(const WeightSpec& w, const GaussLegendreRule& rule,
                            long double lo, long double hi,
                            const std::function<long double(long double)>& f) {
    const long double c = 0.5L * (lo + hi);
    const long double h = 0.5L * (hi - lo);
    long double acc = 0.0L;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const long double x = c + h * static_cast<long double>(rule.nodes[i]);
        acc += static_cast<long double>(rule.weights[i]) * f(x) *
               static_cast<long double>(w(static_cast<double>(x)));
    }
    return acc * h;
}

long double integrate_piece(const WeightSpec& w, const GaussLegendreRule& rule,
                            long double lo, long double hi,
                            const std::function<long double(long double)>& f) {
    if (hi <= lo) return 0.0L;
    // Subdivide so the Gaussian factor is resolved by the fixed-order rule.
    const long double width = hi - lo;
    int panels = static_cast<int>(std::ceil(width / w.dist_std));
    panels = std::clamp(panels, 1, 64);
    long double acc = 0.0L;
    for (int i = 0; i < panels; ++i) {
        const long double a = lo + width * i / panels;
        const long double b = lo + width * (i + 1) / panels;
        acc += integrate_panel(w, rule, a, b, f);
    }
    return acc;
}

}  // namespace

long double integrate_weighted(const WeightSpec& w,
                               const std::function<long double(long double)>& f,
                               int order_per_piece) {
    const GaussLegendreRule rule(order_per_piece);
    // Split at the P endpoints: the indicator part of the weight jumps there.
    std::vector<long double> cuts = {w.domain.lo, w.p_interval.lo, w.p_interval.hi,
                                     w.domain.hi};
    std::sort(cuts.begin(), cuts.end());
    long double acc = 0.0L;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const long double lo = std::max<long double>(cuts[i], w.domain.lo);
        const long double hi = std::min<long double>(cuts[i + 1], w.domain.hi);
        acc += integrate_piece(w, rule, lo, hi, f);
    }
    return acc;
}

namespace {

using LPoly = std::vector<long double>;  // ascending coefficients

long double leval(const LPoly& p, long double x) {
    long double acc = 0.0L;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

LPoly shift_up(const LPoly& p) {  // multiply by x
    LPoly q(p.size() + 1, 0.0L);
    for (std::size_t i = 0; i < p.size(); ++i) q[i + 1] = p[i];
    return q;
}

void axpy(LPoly& y, long double a, const LPoly& x) {
    if (y.size() < x.size()) y.resize(x.size(), 0.0L);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

long double inner(const WeightSpec& w, const LPoly& a, const LPoly& b, int order) {
    return integrate_weighted(
        w, [&](long double x) { return leval(a, x) * leval(b, x); }, order);
}

Polynomial to_poly(const LPoly& p) {
    Polynomial out;
    out.coeffs.assign(p.begin(), p.end());
    return out;
}

}  // namespace

std::vector<Polynomial> orthonormal_basis(const WeightSpec& w, int d, int quad_order,
                                          double cond_bound) {
    w.validate();
    std::vector<LPoly> basis;
    const long double scale_x =
        std::max(std::abs(w.domain.lo), std::abs(w.domain.hi));

    LPoly prev;  // f_{i-1}
    LPoly cur = {1.0L};
    const long double n0 = inner(w, cur, cur, quad_order);
    if (!(n0 > 0.0L)) throw IllConditioned("weight has zero mass on the domain");
    cur[0] = 1.0L / std::sqrt(n0);
    basis.push_back(cur);

    for (int i = 0; i < d; ++i) {
        // Stieltjes step: q = x f_i - <x f_i, f_i> f_i - <x f_i, f_{i-1}> f_{i-1}.
        LPoly q = shift_up(cur);
        const long double a = inner(w, q, cur, quad_order);
        axpy(q, -a, cur);
        if (!prev.empty()) {
            const long double b = inner(w, shift_up(cur), prev, quad_order);
            axpy(q, -b, prev);
        }
        const long double nq = inner(w, q, q, quad_order);
        // The residual must stay well above the quadrature noise floor.
        long double mag = 0.0L;
        long double pw = 1.0L;
        for (long double c : q) {
            mag += std::abs(c) * pw;
            pw *= std::max<long double>(scale_x, 1.0L);
        }
        if (!(nq > 0.0L) || std::sqrt(nq) * cond_bound < mag * 1e-15L) {
            throw IllConditioned("orthogonalization residual vanished at degree " +
                                 std::to_string(i + 1));
        }
        const long double inv = 1.0L / std::sqrt(nq);
        for (auto& c : q) c *= inv;
        prev = cur;
        cur = q;
        basis.push_back(cur);
    }

    std::vector<Polynomial> out;
    out.reserve(basis.size());
    for (const auto& p : basis) out.push_back(to_poly(p));
    return out;
}

Polynomial l2_project(const std::function<double(double)>& target,
                      const std::vector<Polynomial>& basis, const WeightSpec& w,
                      int quad_order) {
    LPoly acc = {0.0L};
    for (const auto& f : basis) {
        const long double lambda = integrate_weighted(
            w,
            [&](long double x) {
                return f.eval(x) * static_cast<long double>(target(static_cast<double>(x)));
            },
            quad_order);
        LPoly fc(f.coeffs.begin(), f.coeffs.end());
        axpy(acc, lambda, fc);
    }
    return to_poly(acc);
}

// --- Remez ----------------------------------------------------------------

namespace {

// Chebyshev basis on [a, b], converted to monomials at the end.
struct ChebBasis {
    long double a, b;

    long double map(long double x) const { return (2.0L * x - (a + b)) / (b - a); }

    // T_0..T_n at mapped x.
    std::vector<long double> values(long double x, int n) const {
        std::vector<long double> t(n + 1);
        const long double u = map(x);
        t[0] = 1.0L;
        if (n >= 1) t[1] = u;
        for (int j = 2; j <= n; ++j) t[j] = 2.0L * u * t[j - 1] - t[j - 2];
        return t;
    }

    // Monomial coefficients (in y = x - center) of sum c_j T_j(map(x)).
    LPoly to_monomial(const std::vector<long double>& c, long double center = 0.0L) const {
        const int n = static_cast<int>(c.size()) - 1;
        // u = s*y + t as a polynomial in y.
        const long double s = 2.0L / (b - a);
        const long double t0 = (2.0L * center - (a + b)) / (b - a);
        LPoly tm1 = {1.0L};
        LPoly tj = {t0, s};
        LPoly acc = {0.0L};
        axpy(acc, c[0], tm1);
        if (n >= 1) axpy(acc, c[1], tj);
        for (int j = 2; j <= n; ++j) {
            // T_j = 2u*T_{j-1} - T_{j-2}
            LPoly next = shift_up(tj);
            for (auto& v : next) v *= 2.0L * s;
            axpy(next, 2.0L * t0, tj);
            axpy(next, -1.0L, tm1);
            tm1 = tj;
            tj = next;
            axpy(acc, c[j], tj);
        }
        return acc;
    }
};

struct GridPoint {
    long double x;
    long double err;
};

// Selects d+2 alternating-sign extrema of maximal amplitude from the
// candidate list (sorted by x). Leftmost candidate wins ties.
std::vector<GridPoint> select_alternating(std::vector<GridPoint> cand, std::size_t n) {
    if (cand.empty()) return cand;
    // Merge runs of equal sign, keeping the largest |err| (leftmost on tie).
    std::vector<GridPoint> merged;
    for (const auto& g : cand) {
        if (!merged.empty() && (merged.back().err >= 0) == (g.err >= 0)) {
            if (std::abs(g.err) > std::abs(merged.back().err)) merged.back() = g;
        } else {
            merged.push_back(g);
        }
    }
    // Trim to n keeping amplitude.
    while (merged.size() > n) {
        if (merged.size() == n + 1) {
            if (std::abs(merged.front().err) < std::abs(merged.back().err)) {
                merged.erase(merged.begin());
            } else {
                merged.pop_back();
            }
        } else {
            // Drop the weakest adjacent pair to preserve alternation.
            std::size_t best = 0;
            long double best_amp = -1.0L;
            for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
                const long double amp =
                    std::max(std::abs(merged[i].err), std::abs(merged[i + 1].err));
                if (best_amp < 0.0L || amp < best_amp) {
                    best = i;
                    best_amp = amp;
                }
            }
            merged.erase(merged.begin() + static_cast<long>(best),
                         merged.begin() + static_cast<long>(best) + 2);
        }
    }
    return merged;
}

struct RemezCore {
    std::vector<long double> cheb;
    ChebBasis basis{0.0L, 1.0L};
    long double eps = 0.0L;
    int alternations = 0;
};

RemezCore remez_core(const Interval& i0, const Interval& i1, int d, int max_iter,
                     int grid_per_interval) {
    if (d < 1) throw ConfigError("remez degree must be >= 1");
    Interval left = i0, right = i1;
    if (left.lo > right.lo) std::swap(left, right);
    if (left.hi >= right.lo) throw ConfigError("remez intervals must be disjoint");

    const auto target = [&](long double x) -> long double {
        return (x >= i1.lo && x <= i1.hi) ? 1.0L : 0.0L;
    };
    const ChebBasis cheb{std::min(i0.lo, i1.lo), std::max(i0.hi, i1.hi)};
    const std::size_t n = static_cast<std::size_t>(d) + 2;

    // Initial reference: Chebyshev nodes split proportionally to lengths.
    std::vector<long double> ref;
    {
        const double w0 = left.width(), w1 = right.width();
        std::size_t n0 = static_cast<std::size_t>(
            std::lround(static_cast<double>(n) * w0 / (w0 + w1)));
        n0 = std::clamp<std::size_t>(n0, 1, n - 1);
        const std::size_t n1 = n - n0;
        const auto fill = [&](const Interval& iv, std::size_t count) {
            if (count == 1) {
                ref.push_back(0.5L * (iv.lo + iv.hi));
                return;
            }
            for (std::size_t j = 0; j < count; ++j) {
                const long double t =
                    std::cos(std::numbers::pi_v<long double> * j / (count - 1));
                ref.push_back(0.5L * (iv.lo + iv.hi) + 0.5L * (iv.hi - iv.lo) * t);
            }
        };
        fill(left, n0);
        fill(right, n1);
        std::sort(ref.begin(), ref.end());
    }

    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    const auto solve_on_ref = [&](const std::vector<long double>& pts,
                                  const std::vector<int>& signs) {
        LMat m(n, n);
        LVec rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto tv = cheb.values(pts[i], d);
            for (int j = 0; j <= d; ++j) m(i, j) = tv[static_cast<std::size_t>(j)];
            m(i, n - 1) = static_cast<long double>(signs[i]);
            rhs(i) = target(pts[i]);
        }
        const LVec sol = m.fullPivLu().solve(rhs);
        return std::vector<long double>(sol.data(), sol.data() + n);
    };

    const auto grid_scan = [&](const std::vector<long double>& cc,
                               std::vector<GridPoint>& cand) {
        cand.clear();
        long double gmax = 0.0L;
        for (const Interval* iv : {&left, &right}) {
            std::vector<GridPoint> pts(static_cast<std::size_t>(grid_per_interval));
            for (int g = 0; g < grid_per_interval; ++g) {
                const long double x =
                    iv->lo + (iv->hi - iv->lo) * g / (grid_per_interval - 1);
                const auto tv = cheb.values(x, d);
                long double px = 0.0L;
                for (int j = 0; j <= d; ++j)
                    px += cc[static_cast<std::size_t>(j)] * tv[static_cast<std::size_t>(j)];
                pts[static_cast<std::size_t>(g)] = {x, px - target(x)};
                gmax = std::max(gmax, std::abs(px - target(x)));
            }
            // Local extrema (plus endpoints) of the error on this interval.
            for (std::size_t g = 0; g < pts.size(); ++g) {
                const bool left_ok =
                    g == 0 || std::abs(pts[g].err) >= std::abs(pts[g - 1].err);
                const bool right_ok =
                    g + 1 == pts.size() || std::abs(pts[g].err) > std::abs(pts[g + 1].err);
                if (left_ok && right_ok) cand.push_back(pts[g]);
            }
        }
        std::sort(cand.begin(), cand.end(),
                  [](const GridPoint& a, const GridPoint& b) { return a.x < b.x; });
        return gmax;
    };

    // The levelled error alternates within each interval, but the relative
    // parity across the gap is not known in advance: try both for the first
    // solve, then read the signs off the measured error.
    std::vector<int> signs(n);
    {
        std::vector<long double> best_cc;
        long double best_max = 0.0L;
        int best_flip = 0;
        std::vector<GridPoint> scratch;
        for (int flip = 0; flip < 2; ++flip) {
            for (std::size_t i = 0; i < n; ++i) {
                int s = (i % 2 == 0) ? 1 : -1;
                if (flip && ref[i] >= right.lo) s = -s;
                signs[i] = s;
            }
            const auto sol = solve_on_ref(ref, signs);
            const std::vector<long double> cc(sol.begin(), sol.begin() + d + 1);
            const long double gmax = grid_scan(cc, scratch);
            if (flip == 0 || gmax < best_max) {
                best_cc = cc;
                best_max = gmax;
                best_flip = flip;
            }
        }
        // Seed the reference and signs from the better pattern's extrema.
        std::vector<GridPoint> cand;
        grid_scan(best_cc, cand);
        const auto seeded = select_alternating(std::move(cand), n);
        if (seeded.size() == n) {
            ref.clear();
            for (const auto& g : seeded) {
                signs[ref.size()] = g.err >= 0 ? 1 : -1;
                ref.push_back(g.x);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                int s = (i % 2 == 0) ? 1 : -1;
                if (best_flip && ref[i] >= right.lo) s = -s;
                signs[i] = s;
            }
        }
    }

    std::vector<long double> cheb_coeffs;
    long double eps_ref = 0.0L;
    long double grid_max = 0.0L;
    int alt_count = 0;
    bool converged = false;

    for (int iter = 0; iter < max_iter; ++iter) {
        const auto sol = solve_on_ref(ref, signs);
        cheb_coeffs.assign(sol.begin(), sol.begin() + d + 1);
        eps_ref = std::abs(sol[n - 1]);

        std::vector<GridPoint> cand;
        grid_max = grid_scan(cheb_coeffs, cand);
        auto new_ref = select_alternating(cand, n);
        alt_count = static_cast<int>(new_ref.size());

        // Converged when the grid maximum matches the levelled error and the
        // full alternation count is present (guards against degenerate
        // levelled-but-suboptimal configurations).
        if (static_cast<std::size_t>(alt_count) >= n &&
            grid_max - eps_ref <= 1e-12L * std::max<long double>(1.0L, grid_max)) {
            converged = true;
            break;
        }
        if (new_ref.size() == n) {
            ref.clear();
            for (const auto& g : new_ref) {
                signs[ref.size()] = g.err >= 0 ? 1 : -1;
                ref.push_back(g.x);
            }
            continue;
        }
        // Too few alternating extrema for a full exchange: swap the single
        // worst grid point into the reference, keeping alternation intact.
        const auto worst = std::max_element(
            cand.begin(), cand.end(), [](const GridPoint& a, const GridPoint& b) {
                return std::abs(a.err) < std::abs(b.err);
            });
        const long double xs = worst->x;
        const int ss = worst->err >= 0 ? 1 : -1;
        std::size_t pos = static_cast<std::size_t>(
            std::lower_bound(ref.begin(), ref.end(), xs) - ref.begin());
        std::size_t anchor;
        // Coincides (up to grid rounding) with an existing reference point:
        // just refresh that point's sign. Inserting a near-duplicate would
        // make the solve singular.
        const long double snap = 1e-9L * (cheb.b - cheb.a);
        std::size_t nearest = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(ref[i] - xs) <= snap) nearest = i;
        }
        if (nearest < n) {
            ref[nearest] = xs;
            for (std::size_t i = 0; i < n; ++i) {
                signs[i] = ((i + nearest) % 2 == 0) ? ss : -ss;
            }
            continue;
        }
        if (pos == 0) {
            if (signs[0] != ss) {
                ref.pop_back();
                ref.insert(ref.begin(), xs);
            } else {
                ref[0] = xs;
            }
            anchor = 0;
        } else if (pos == n) {
            if (signs[n - 1] != ss) {
                ref.erase(ref.begin());
                ref.push_back(xs);
            } else {
                ref[n - 1] = xs;
            }
            anchor = n - 1;
        } else {
            anchor = (signs[pos - 1] == ss) ? pos - 1 : pos;
            ref[anchor] = xs;
        }
        for (std::size_t i = 0; i < n; ++i) {
            signs[i] = ((i + anchor) % 2 == 0) ? ss : -ss;
        }
    }
    if (!converged) {
        throw NonConvergence("remez exchange did not level off after " +
                             std::to_string(max_iter) + " iterations");
    }

    RemezCore res;
    res.cheb = std::move(cheb_coeffs);
    res.basis = cheb;
    res.eps = grid_max;
    res.alternations = alt_count;
    return res;
}

}  // namespace

RemezResult remez_two_interval(const Interval& i0, const Interval& i1, int d,
                               int max_iter, int grid_per_interval) {
    const RemezCore core = remez_core(i0, i1, d, max_iter, grid_per_interval);
    RemezResult res;
    res.poly = to_poly(core.basis.to_monomial(core.cheb));
    res.eps = static_cast<double>(core.eps);
    res.alternations = core.alternations;
    return res;
}

long double ClassifierChain::eval(long double x) const {
    long double v = x;
    for (const auto& s : stages) v = s.eval(v);
    return v;
}

ClassifierChain compose_classifier(const Interval& i0, const Interval& i1,
                                   double eps_target,
                                   const std::vector<int>& degree_schedule) {
    if (degree_schedule.empty()) throw ConfigError("empty degree schedule");
    ClassifierChain chain;
    chain.i0 = i0;
    chain.i1 = i1;
    Interval cur0 = i0, cur1 = i1;
    for (int deg : degree_schedule) {
        if (cur0.hi >= cur1.lo) {
            throw TargetUnreachable("stage input intervals overlap; previous eps >= 1/2");
        }
        const RemezCore r = remez_core(cur0, cur1, deg, 400, 20000);
        const long double center = 0.5L * (r.basis.a + r.basis.b);
        chain.stages.push_back(
            {to_poly(r.basis.to_monomial(r.cheb, center)), static_cast<double>(center)});
        const double eps = static_cast<double>(r.eps);
        chain.eps_schedule.push_back(eps);
        if (eps <= eps_target) return chain;
        cur0 = {-eps, eps};
        cur1 = {1.0 - eps, 1.0 + eps};
    }
    throw TargetUnreachable("degree schedule exhausted at eps = " +
                            std::to_string(chain.eps_schedule.back()) +
                            " > target " + std::to_string(eps_target));
}

double chain_grid_error(const ClassifierChain& chain, long grid_points) {
    const long per = grid_points / 2;
    long double worst = 0.0L;
    for (int side = 0; side < 2; ++side) {
        const Interval& iv = side == 0 ? chain.i0 : chain.i1;
        const long double want = side;
        for (long g = 0; g < per; ++g) {
            const long double x = iv.lo + (iv.hi - iv.lo) * g / (per - 1);
            worst = std::max(worst, std::abs(chain.eval(x) - want));
        }
    }
    return static_cast<double>(worst);
}

void FoldingSpec::validate() const {
    if (k < 1) throw ConfigError("folding k must be >= 1");
    if (n_f.hi >= p_f.lo) throw ConfigError("folding intervals must satisfy max(N_f) < min(P_f)");
    if (p1 < 0 || p1 > 1 || p2 < 0 || p2 > 1) throw ConfigError("folding probabilities must be in [0,1]");
}

bool folding_bound_check(double alpha_bound, double beta_bound, int k) {
    if (alpha_bound < 0 || beta_bound < 0 || k < 1) {
        throw ConfigError("folding bound check needs alpha, beta >= 0 and k >= 1");
    }
    return alpha_bound < beta_bound / (2.0 * k - 1.0);
}

void save_chain(const std::string& path, const ClassifierChain& chain) {
    nlohmann::json j;
    j["i0"] = {chain.i0.lo, chain.i0.hi};
    j["i1"] = {chain.i1.lo, chain.i1.hi};
    j["eps_schedule"] = chain.eps_schedule;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : chain.stages) {
        j["stages"].push_back({{"center", s.center}, {"coeffs", s.poly.coeffs}});
    }
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

ClassifierChain load_chain(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    nlohmann::json j;
    is >> j;
    ClassifierChain chain;
    chain.i0 = {j.at("i0").at(0).get<double>(), j.at("i0").at(1).get<double>()};
    chain.i1 = {j.at("i1").at(0).get<double>(), j.at("i1").at(1).get<double>()};
    chain.eps_schedule = j.at("eps_schedule").get<std::vector<double>>();
    for (const auto& s : j.at("stages")) {
        chain.stages.push_back({Polynomial(s.at("coeffs").get<std::vector<double>>()),
                                s.at("center").get<double>()});
    }
    return chain;
}

}  // namespace irislab::polydes
