#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irislab/analysis.hpp"
#include "irislab/costmodel.hpp"
#include "irislab/errors.hpp"
#include "irislab/iris_core.hpp"
#include "irislab/pipeline.hpp"
#include "irislab/poly_design.hpp"
#include "irislab/thfhe_sim.hpp"

using namespace irislab;
using nlohmann::json;

namespace {

int worker_override() {
    const char* env = std::getenv("IRISLAB_WORKERS");
    if (!env) return 0;
    return std::atoi(env);
}

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    json j;
    is >> j;
    return j;
}

iris::Interval parse_interval(const std::vector<double>& v, const char* name) {
    if (v.size() != 2 || v[0] >= v[1]) {
        throw ConfigError(std::string(name) + ": expected LO HI with LO < HI");
    }
    return {v[0], v[1]};
}

// --- run ---------------------------------------------------------------------

pipe::PipelineConfig load_run_config(const std::string& path) {
    const json j = load_json(path);
    // Relative fixture paths are resolved against the config file's directory.
    const auto base = std::filesystem::path(path).parent_path();
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    pipe::PipelineConfig cfg;
    cfg.rho = j.value("rho", cfg.rho);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.n_db = j.value("n_db", cfg.n_db);
    cfg.d = j.value("d", cfg.d);
    cfg.fold_k = j.value("fold_k", cfg.fold_k);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.delta_bits = j.value("delta_bits", cfg.delta_bits);
    cfg.e_comp = j.value("e_comp", cfg.e_comp);
    cfg.e_bts = j.value("e_bts", cfg.e_bts);
    cfg.tau_policy = j.value("tau_policy", cfg.tau_policy);
    cfg.tau_override = j.value("tau_override", cfg.tau_override);
    cfg.scale_bits = j.value("scale_bits", cfg.scale_bits);
    cfg.clean_target_bits = j.value("clean_target_bits", cfg.clean_target_bits);
    cfg.use_or_tree = j.value("use_or_tree", cfg.use_or_tree);

    const auto& model = j.at("model");
    cfg.model.mean = model.value("mean", cfg.model.mean);
    cfg.model.std = model.value("std", cfg.model.std);
    cfg.model.negative = {model.at("negative")[0], model.at("negative")[1]};
    cfg.model.positive = {model.at("positive")[0], model.at("positive")[1]};

    cfg.fold_poly =
        polydes::load_polynomial(resolve(j.at("fold_poly").get<std::string>()))
            .poly;

    const auto chain = [&](const char* key) {
        const auto& c = j.at(key);
        if (c.is_string()) return polydes::load_chain(resolve(c.get<std::string>()));
        return polydes::compose_classifier(
            {c.at("i0")[0], c.at("i0")[1]}, {c.at("i1")[0], c.at("i1")[1]},
            c.at("eps_target").get<double>(),
            c.at("degrees").get<std::vector<int>>());
    };
    cfg.alg1_chain = chain("alg1_chain");
    cfg.fold_chain = chain("fold_chain");
    cfg.post_chain = chain("post_chain");

    if (j.contains("emulator")) {
        cfg.emu_cfg =
            emu::load_emulator_config(resolve(j.at("emulator").get<std::string>()));
    } else {
        cfg.emu_cfg = pipe::default_emulator_config();
    }
    cfg.validate();
    return cfg;
}

int cmd_gen_db(long n, long d, double mask_density, uint64_t seed,
               const std::string& out) {
    const auto ts = iris::synth_db(static_cast<std::size_t>(n),
                                   static_cast<std::size_t>(d), mask_density, seed);
    iris::save_templates(out, ts);
    std::cout << "wrote " << n << " templates (d=" << d << ") to " << out << "\n";
    return 0;
}

int cmd_design_fold(double alpha, double mean, double std_dev,
                    const std::vector<double>& p_iv, int degree,
                    const std::string& out) {
    polydes::WeightSpec w;
    w.alpha = alpha;
    w.dist_mean = mean;
    w.dist_std = std_dev;
    w.p_interval = parse_interval(p_iv, "--p-interval");
    w.domain = {mean - 8.0 * std_dev, w.p_interval.hi};
    w.validate();

    const auto basis = polydes::orthonormal_basis(w, degree);
    // Weighted least squares against the P indicator: small under D, near 1
    // on the positive interval.
    const auto f = polydes::l2_project(
        [&](double x) { return w.p_interval.contains(x) ? 1.0 : 0.0; }, basis, w);

    polydes::PolynomialFixture fx;
    fx.poly = f;
    fx.domain_lo = w.domain.lo;
    fx.domain_hi = w.domain.hi;
    fx.metadata = "weighted L2 fold design, alpha=" + std::to_string(alpha);
    polydes::save_polynomial(out, fx);
    std::cout << "degree-" << f.degree() << " folding polynomial written to "
              << out << "\n";
    return 0;
}

int cmd_design_classifier(const std::vector<double>& i0,
                          const std::vector<double>& i1,
                          const std::vector<int>& degrees, double eps,
                          const std::string& out) {
    const auto chain = polydes::compose_classifier(
        parse_interval(i0, "--i0"), parse_interval(i1, "--i1"), eps, degrees);
    polydes::save_chain(out, chain);
    std::cout << chain.stages.size() << "-stage chain (eps=" << chain.eps()
              << ") written to " << out << "\n";
    return 0;
}

int cmd_run(const std::string& config, const std::string& db_path,
            const std::string& query_path, int alg, const std::string& report) {
    const pipe::PipelineConfig cfg = load_run_config(config);
    const auto db = iris::load_templates(db_path);
    const auto queries = iris::load_templates(query_path);

    emu::Emulator em(cfg.emu_cfg);
    const pipe::PipelineResult res = (alg == 1)
                                         ? pipe::run_alg1(em, cfg, queries, db)
                                         : pipe::run_alg2(em, cfg, queries, db);
    if (!report.empty()) {
        pipe::save_run_report(report, res, res, cfg);
        em.write_trace_csv(report + ".trace.csv");
    }
    std::cout << "alg" << alg << ": bits";
    for (int b : res.match_bits) std::cout << ' ' << b;
    std::cout << " | oracle";
    for (int b : res.oracle_bits) std::cout << ' ' << b;
    std::cout << " | bts pre/post/acc " << res.bts_pre << '/' << res.bts_post
              << '/' << res.bts_acc << " | "
              << (res.agrees_with_oracle() ? "agrees" : "DISAGREES") << "\n";
    return res.agrees_with_oracle() ? 0 : 1;
}

int cmd_montecarlo(const std::string& poly_path, int k, long trials,
                   uint64_t seed, const std::vector<double>& nf,
                   const std::vector<double>& pf, double mean, double std_dev,
                   const std::string& out) {
    const auto fx = polydes::load_polynomial(poly_path);
    iris::ScoreModel model;
    model.mean = mean;
    model.std = std_dev;
    model.negative = {mean - 8 * std_dev, mean + 8 * std_dev};
    model.positive = parse_interval(pf, "--p-interval");
    polydes::FoldingSpec spec;
    spec.k = k;
    spec.n_f = parse_interval(nf, "--nf");
    spec.p_f = {0.4, 3.8};
    const auto r = analysis::montecarlo_fold(fx.poly, model, spec, trials, seed,
                                             worker_override());
    std::cout << "trials " << r.trials << ": neg outside N_f " << r.neg_outside_nf
              << ", pos outside P_f " << r.pos_min_outside_pf << '/'
              << r.pos_max_outside_pf << " (min/max bracket), f on P ["
              << r.f_min_on_p << ", " << r.f_max_on_p << "]\n";
    if (!out.empty()) analysis::save_fold_report(out, r);
    return 0;
}

int cmd_thfhe_demo(int n, int t, int log_n, double lambda,
                   const std::string& out) {
    const long ring_n = 1L << log_n;
    const double gap = thfhe::flooding_gap_bits(log_n, lambda, std::log2(t));
    const int scale_bits = static_cast<int>(gap) + 8;  // rounding headroom
    const int q_bits = 2 * scale_bits + 8;
    mpz_class q = mpz_class(1) << q_bits;
    mpz_nextprime(q.get_mpz_t(), q.get_mpz_t());

    const auto sk = thfhe::toy_keygen(ring_n, q, 1);
    std::vector<long> mu(static_cast<std::size_t>(ring_n));
    for (long i = 0; i < ring_n; ++i) mu[static_cast<std::size_t>(i)] = i % 5 - 2;
    const auto ct = thfhe::toy_encrypt(mu, sk, scale_bits, 3.2, 2);
    const auto sh = thfhe::share_secret(sk, n, t, 3);

    std::vector<int> participants;
    for (int p = 1; p <= t; ++p) participants.push_back(p);
    std::vector<thfhe::DecryptionShare> shares;
    for (int p : participants) {
        shares.push_back(thfhe::partial_decrypt(
            ct, p, sh.shares[static_cast<std::size_t>(p - 1)], participants, gap,
            0xabcdefULL, 4));
    }
    const auto dec = thfhe::final_decrypt(ct.b, shares, scale_bits);
    bool ok = true;
    for (long i = 0; i < ring_n; ++i) {
        ok = ok && dec[static_cast<std::size_t>(i)] == mu[static_cast<std::size_t>(i)];
    }
    std::cout << "(" << n << "," << t << ") toy decryption over N=" << ring_n
              << ", q_bits=" << q_bits << ": gap " << gap << " bits, round trip "
              << (ok ? "ok" : "FAILED") << "\n";
    if (!out.empty()) {
        thfhe::Transcript tr;
        tr.n_parties = n;
        tr.threshold = t;
        tr.participants = participants;
        tr.ring_n = ring_n;
        tr.q_bits = q_bits;
        tr.share_bytes = ring_n * ((q_bits + 7) / 8);
        tr.gap_bits = gap;
        thfhe::save_transcript(out, tr);
    }
    return ok ? 0 : 1;
}

int cmd_cost_report(const std::string& config, const std::string& out) {
    int ell = 1, planes = 48;
    cost::CommParams comm;
    if (!config.empty()) {
        const json j = load_json(config);
        ell = j.value("ell", ell);
        planes = j.value("planes", planes);
        comm.query_log_n = j.value("query_log_n", comm.query_log_n);
        comm.query_q_bits = j.value("query_q_bits", comm.query_q_bits);
        comm.query_cts = j.value("query_cts", comm.query_cts);
        comm.result_log_n = j.value("result_log_n", comm.result_log_n);
        comm.result_q_bits = j.value("result_q_bits", comm.result_q_bits);
        comm.subring_dim = j.value("subring_dim", comm.subring_dim);
        comm.truncated_bits = j.value("truncated_bits", comm.truncated_bits);
        comm.decryptors = j.value("decryptors", comm.decryptors);
    }
    std::cout << cost::cost_report_table(ell, planes, comm);
    if (!out.empty()) cost::save_cost_report_json(out, ell, planes, comm);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"encrypted iris-matching experiment toolkit"};
    app.require_subcommand(1);

    // gen-db
    long gn = 4096, gd = 1024;
    double gdensity = 1.0;
    uint64_t gseed = 0;
    std::string gout = "db.bin";
    auto* gen = app.add_subcommand("gen-db", "generate synthetic templates");
    gen->add_option("--n", gn, "template count");
    gen->add_option("--d", gd, "code dimension");
    gen->add_option("--mask-density", gdensity, "Bernoulli mask density");
    gen->add_option("--seed", gseed, "RNG seed");
    gen->add_option("--out", gout, "output file")->required();

    // design-fold
    double falpha = 1e3, fmean = 0.008, fstd = 0.034;
    std::vector<double> fp = {0.4, 1.0};
    int fdeg = 7;
    std::string fout = "fold.json";
    auto* dfold = app.add_subcommand("design-fold", "weighted L2 folding polynomial");
    dfold->add_option("--alpha", falpha, "weight on the negative density");
    dfold->add_option("--mean", fmean, "negative-score mean");
    dfold->add_option("--std", fstd, "negative-score std");
    dfold->add_option("--p-interval", fp, "positive interval LO HI")->expected(2);
    dfold->add_option("--degree", fdeg, "polynomial degree");
    dfold->add_option("--out", fout, "output fixture")->required();

    // design-classifier
    std::vector<double> ci0 = {-0.15, 0.35}, ci1 = {0.4, 3.8};
    std::vector<int> cdeg = {15, 15, 7};
    double ceps = 1e-4;
    std::string cout_path = "chain.json";
    auto* dcls = app.add_subcommand("design-classifier", "composed minimax classifier");
    dcls->add_option("--i0", ci0, "reject interval LO HI")->expected(2);
    dcls->add_option("--i1", ci1, "accept interval LO HI")->expected(2);
    dcls->add_option("--degrees", cdeg, "stage degree schedule");
    dcls->add_option("--eps", ceps, "target accuracy");
    dcls->add_option("--out", cout_path, "output fixture")->required();

    // run
    std::string rconfig, rdb, rquery, rreport;
    int ralg = 2;
    auto* run = app.add_subcommand("run", "end-to-end matching run");
    run->add_option("--config", rconfig, "run config JSON")->required();
    run->add_option("--db", rdb, "database template file")->required();
    run->add_option("--query", rquery, "query template file")->required();
    run->add_option("--alg", ralg, "algorithm (1 or 2)")->check(CLI::Range(1, 2));
    run->add_option("--report", rreport, "report JSON output");

    // montecarlo-fold
    std::string mpoly, mout;
    int mk = 16;
    long mtrials = 1000000;
    uint64_t mseed = 0;
    std::vector<double> mnf = {-0.13, 0.33}, mpf = {0.4, 0.475};
    double mmean = 0.008, mstd = 0.034;
    auto* mc = app.add_subcommand("montecarlo-fold", "folding interval validation");
    mc->add_option("--poly", mpoly, "folding polynomial fixture")->required();
    mc->add_option("--k", mk, "fold group size");
    mc->add_option("--trials", mtrials, "trial count");
    mc->add_option("--seed", mseed, "RNG seed");
    mc->add_option("--nf", mnf, "folded negative interval LO HI")->expected(2);
    mc->add_option("--p-interval", mpf, "raw positive interval LO HI")->expected(2);
    mc->add_option("--mean", mmean, "negative-score mean");
    mc->add_option("--std", mstd, "negative-score std");
    mc->add_option("--out", mout, "report JSON output");

    // thfhe-demo
    int tn = 5, tt = 3, tlogn = 4;
    double tlambda = 40.0;
    std::string tout;
    auto* th = app.add_subcommand("thfhe-demo", "threshold decryption round trip");
    th->add_option("--n", tn, "party count");
    th->add_option("--t", tt, "threshold");
    th->add_option("--logN", tlogn, "toy ring degree (log2)");
    th->add_option("--lambda", tlambda, "statistical security parameter");
    th->add_option("--out", tout, "transcript JSON output");

    // cost-report
    std::string cconfig, ccout;
    auto* cost_cmd = app.add_subcommand("cost-report", "storage/communication sizes");
    cost_cmd->add_option("--config", cconfig, "cost config JSON");
    cost_cmd->add_option("--out", ccout, "report JSON output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_db(gn, gd, gdensity, gseed, gout);
        if (dfold->parsed()) return cmd_design_fold(falpha, fmean, fstd, fp, fdeg, fout);
        if (dcls->parsed()) return cmd_design_classifier(ci0, ci1, cdeg, ceps, cout_path);
        if (run->parsed()) return cmd_run(rconfig, rdb, rquery, ralg, rreport);
        if (mc->parsed()) {
            return cmd_montecarlo(mpoly, mk, mtrials, mseed, mnf, mpf, mmean, mstd, mout);
        }
        if (th->parsed()) return cmd_thfhe_demo(tn, tt, tlogn, tlambda, tout);
        if (cost_cmd->parsed()) return cmd_cost_report(cconfig, ccout);
    } catch (const ConfigError& e) {
        std::cerr << "{\"error\":\"config\",\"message\":\"" << e.what() << "\"}\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "{\"error\":\"runtime\",\"message\":\"" << e.what() << "\"}\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"runtime\",\"message\":\"" << e.what() << "\"}\n";
        return 1;
    }
    return 0;
}
