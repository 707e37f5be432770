// mlmom command-line driver.
#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

#include "mlmom/combinatoric.hpp"
#include "mlmom/dsmc.hpp"
#include "mlmom/io.hpp"
#include "mlmom/kernels.hpp"
#include "mlmom/moment_bounds.hpp"
#include "mlmom/partial_sums.hpp"
#include "mlmom/povzner.hpp"
#include "mlmom/specfun.hpp"

namespace fs = std::filesystem;
using namespace mlmom;

namespace {

struct Common {
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out;
    std::string config;
};

/// Sink for a named output: a file under --out, or stdout when --out is absent.
struct Output {
    const Common& c;
    json produced = json::object();

    void emit(const std::string& name, const std::string& text, bool to_stdout_if_no_dir = true) {
        if (c.out.empty()) {
            (to_stdout_if_no_dir ? std::cout : std::cerr) << text;
            return;
        }
        fs::create_directories(c.out);
        write_text((fs::path(c.out) / name).string(), text);
        produced[name] = checksum_hex(text);
    }
};

struct KernelOpts {
    std::string family = "grad_bounded";
    double gamma = 1.0, nu = 1.0, scale = 1.0 / (4 * std::numbers::pi), theta_min = 0.1;
    int d = 3;

    void add(CLI::App* sub) {
        sub->add_option("--family", family, "angular family")
            ->check(CLI::IsMember({"grad_bounded", "power_law", "truncated"}));
        sub->add_option("--gamma", gamma, "velocity exponent in (0,1]");
        sub->add_option("--nu", nu, "angular singularity exponent");
        sub->add_option("--scale", scale, "b0 or C");
        sub->add_option("--theta-min", theta_min, "truncation angle");
        sub->add_option("--d", d, "dimension");
    }
    AngularKernel angular() const {
        if (family == "grad_bounded") return AngularKernel::grad_bounded(scale, d);
        if (family == "power_law") return AngularKernel::power_law(nu, scale, d);
        return AngularKernel::truncated(nu, theta_min, scale, d);
    }
    CollisionKernel kernel() const { return CollisionKernel{gamma, angular()}; }
};

std::string num(double x) { return format_real(x); }

/// Fills options not given on the command line from [section] of the INI file (root keys for common flags).
void apply_config(CLI::App& app, CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(path, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    auto fill = [&](CLI::App* a, const std::string& prefix) {
        for (CLI::Option* opt : a->get_options()) {
            if (opt->count() > 0 || opt->get_single_name().empty() || opt->get_single_name() == "help") continue;
            const auto v = pt.get_optional<std::string>(prefix + opt->get_single_name());
            if (!v) continue;
            std::istringstream items(*v);
            std::string item;
            while (items >> item) opt->add_result(item);
            opt->run_callback();
        }
    };
    fill(&app, "");
    fill(sub, sub->get_name() + ".");
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g;
    if (n <= 1) return {hi};
    for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mittag-Leffler moment toolkit for the homogeneous Boltzmann equation"};
    app.require_subcommand(1);
    app.fallthrough();
    Common c;
    app.add_option("--seed", c.seed, "random seed");
    app.add_option("--workers", c.workers, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--out", c.out, "output directory (stdout when absent)");
    app.add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);

    // ml-eval
    auto* ml = app.add_subcommand("ml-eval", "evaluate E_a(x) on a grid");
    std::vector<double> ml_a{1.0}, ml_x{1.0};
    ml->add_option("--a", ml_a, "ML parameters")->delimiter(',');
    ml->add_option("--x", ml_x, "arguments")->delimiter(',');

    // eps-profile
    auto* eps = app.add_subcommand("eps-profile", "epsilon_q decay profile");
    std::string eps_preset = "bounded";
    double eps_beta = NAN, eps_qmin = 4, eps_qmax = 1024;
    KernelOpts eps_k;
    eps->add_option("--preset", eps_preset, "bounded | power | truncated | custom")
        ->check(CLI::IsMember({"bounded", "power", "truncated", "custom"}));
    eps->add_option("--beta", eps_beta, "normalization exponent");
    eps->add_option("--qmin", eps_qmin);
    eps->add_option("--qmax", eps_qmax);
    eps_k.add(eps);

    // povzner-sweep
    auto* pov = app.add_subcommand("povzner-sweep", "direct G weight against the angular bound");
    KernelOpts pov_k;
    pov_k.scale = 1.0;
    std::vector<double> pov_rq{4, 6, 9.4};
    std::size_t pov_n = 1000;
    double pov_tol = 1e-8;
    pov_k.add(pov);
    pov->add_option("--rq", pov_rq, "test function orders")->delimiter(',');
    pov->add_option("--configs", pov_n, "random configurations per order");
    pov->add_option("--rel-tol", pov_tol, "quadrature tolerance");

    // beta-sums
    auto* bs = app.add_subcommand("beta-sums", "binomial beta sums and their normalized ratios");
    std::string bs_lemma = "A4";
    std::vector<double> bs_param{2.0};
    int bs_qmin = 3, bs_qmax = 300;
    bs->add_option("--lemma", bs_lemma, "A4 (parameter a) or A5 (parameter s)")->check(CLI::IsMember({"A4", "A5"}));
    bs->add_option("--param", bs_param)->delimiter(',');
    bs->add_option("--qmin", bs_qmin);
    bs->add_option("--qmax", bs_qmax);

    // moment-envelope
    auto* env = app.add_subcommand("moment-envelope", "Bernoulli upper envelope of polynomial moments");
    KernelOpts env_k;
    double env_m0 = 1, env_m2 = 4, env_tmax = 2;
    std::vector<double> env_rp{4};
    int env_points = 21;
    std::optional<double> env_init;
    env_k.add(env);
    env->add_option("--m0", env_m0);
    env->add_option("--m2", env_m2);
    env->add_option("--rp", env_rp)->delimiter(',');
    env->add_option("--tmax", env_tmax);
    env->add_option("--points", env_points);
    env->add_option("--initial", env_init, "m_rp(0); omit for the generation form");

    // dsmc-run
    auto* ds = app.add_subcommand("dsmc-run", "particle simulation producing a moment trajectory");
    KernelOpts ds_k;
    std::string ds_ic = "maxwellian", ds_manifest;
    double T = 1, T1 = 1, T2 = 1, dv = 0, R = 1, s0 = 1, alpha0 = 0.5, horizon = 1, dt_max = 0.05;
    std::size_t N = 100000;
    int snaps = 11, qmax = 40;
    std::optional<double> budget;
    bool entropy = false;
    ds->add_option("--ic", ds_ic)->check(CLI::IsMember({"maxwellian", "shifted_bimaxwellian", "compact_support", "heavy_tail"}));
    ds->add_option("--T", T);
    ds->add_option("--T1", T1);
    ds->add_option("--T2", T2);
    ds->add_option("--dv", dv);
    ds->add_option("--R", R);
    ds->add_option("--s0", s0);
    ds->add_option("--alpha0", alpha0);
    ds_k.add(ds);
    ds->add_option("--N", N);
    ds->add_option("--horizon", horizon);
    ds->add_option("--snapshots", snaps, "evenly spaced snapshot count including t=0");
    ds->add_option("--qmax", qmax, "orders 2q and 2q+gamma up to q = qmax");
    ds->add_option("--dt-max", dt_max);
    ds->add_option("--budget", budget, "maximum projected pair draws");
    ds->add_flag("--entropy", entropy, "estimate entropy at snapshots");
    ds->add_option("--manifest", ds_manifest, "replay the run recorded in a manifest")->check(CLI::ExistingFile);

    // tail-report and bootstrap-scan share trajectory input
    auto* tr = app.add_subcommand("tail-report", "generation and propagation verdicts for a trajectory");
    auto* bsc = app.add_subcommand("bootstrap-scan", "T_n for one ML spec");
    std::string traj_path;
    double s_ord = 1, tr_alpha0 = 0.5, tr_gamma = 1, fit_t = NAN, bs_alpha = 0.25;
    int nmax = 200, qlo = 10, qhi = 40;
    std::optional<double> M0_opt;
    std::vector<double> alphas;
    for (auto* sub : {tr, bsc}) {
        sub->add_option("--trajectory", traj_path, "trajectory CSV")->required();
        sub->add_option("--s", s_ord, "tail order");
        sub->add_option("--alpha0", tr_alpha0, "initial rate for M0");
        sub->add_option("--nmax", nmax);
    }
    tr->add_option("--alphas", alphas, "rate grid (default alpha0 * 2^k, k = -6..1)")->delimiter(',');
    tr->add_option("--gamma", tr_gamma, "kernel exponent for the generation verdict");
    tr->add_option("--t", fit_t, "fit time (default: last snapshot)");
    tr->add_option("--qlo", qlo);
    tr->add_option("--qhi", qhi);
    bsc->add_option("--alpha", bs_alpha);
    bsc->add_option("--M0", M0_opt, "threshold base; default E^200 at alpha0 on the first snapshot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        apply_config(app, sub, c.config);
        Output out{c};

        if (sub == ml) {
            std::string csv = "a,x,value,log_value\n";
            for (double a : ml_a)
                for (double x : ml_x) {
                    const double lv = log_mittag_leffler(a, x);
                    csv += num(a) + "," + num(x) + "," + format_real(std::exp(static_cast<long double>(lv))) + "," + num(lv) + "\n";
                }
            out.emit("ml_eval.csv", csv);
        } else if (sub == eps) {
            AngularKernel k = eps_k.angular();
            double beta = eps_beta;
            if (eps_preset == "bounded") {
                k = AngularKernel::grad_bounded(1.0, eps_k.d);
                if (std::isnan(beta)) beta = 0.1;
            } else if (eps_preset == "power") {
                k = AngularKernel::power_law(1.0, 1.0, eps_k.d);
                if (std::isnan(beta)) beta = 2.0;
            } else if (eps_preset == "truncated") {
                k = AngularKernel::truncated(1.5, 1e-3, 1.0, eps_k.d);
                if (std::isnan(beta)) beta = 1.6;
            } else if (std::isnan(beta)) {
                beta = 2.0;
            }
            const auto prof = epsilon_decay_profile(k, beta, doubling_grid(eps_qmin, eps_qmax), c.workers);
            std::string csv = "kernel,beta,q,eps,normalized\n";
            for (std::size_t i = 0; i < prof.q.size(); ++i)
                csv += k.name() + "," + num(beta) + "," + num(prof.q[i]) + "," + num(prof.values[i]) + "," +
                       num(prof.normalized[i]) + "\n";
            out.emit("eps_profile.csv", csv);
        } else if (sub == pov) {
            PovznerSweepConfig cfg;
            cfg.kernel = pov_k.kernel();
            cfg.rq_values = pov_rq;
            cfg.configurations = pov_n;
            cfg.seed = c.seed;
            cfg.rel_tol = pov_tol;
            cfg.workers = c.workers;
            const auto rows = povzner_sweep(cfg);
            std::string csv = "rq,v,v_star,direct,direct_err,bound,bound_halved,dominated\n";
            json per = json::object();
            for (const auto& r : rows) {
                auto vec = [](const Vec& v) {
                    std::string s;
                    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
                    return s;
                };
                csv += num(r.rq) + "," + vec(r.v) + "," + vec(r.v_star) + "," + num(r.direct) + "," + num(r.direct_err) + "," +
                       num(r.bound) + "," + num(r.bound_halved) + "," + (r.dominated() ? "1" : "0") + "\n";
                auto& slot = per[num(r.rq)];
                if (slot.is_null()) slot = json::object();
                slot["count"] = slot.value("count", 0) + 1;
                slot["printed_violations"] = slot.value("printed_violations", 0) + (r.dominated() ? 0 : 1);
                slot["halved_violations"] =
                    slot.value("halved_violations", 0) + (r.direct <= r.bound_halved + r.direct_err ? 0 : 1);
            }
            out.emit("povzner.csv", csv);
            json summary = {{"kernel", to_json(cfg.kernel)}, {"seed", c.seed}, {"per_rq", per}};
            out.emit("povzner_summary.json", summary.dump(2) + "\n", false);
        } else if (sub == bs) {
            std::string csv = "lemma,param,q,sum,log_sum,normalized\n";
            json slices = json::array();
            for (double p : bs_param) {
                const auto sl = bs_lemma == "A4" ? sweep_A4(p, bs_qmin, bs_qmax, c.workers) : sweep_A5(p, bs_qmin, bs_qmax, c.workers);
                for (const auto& r : sl.rows)
                    csv += bs_lemma + "," + num(p) + "," + std::to_string(r.q) + "," + num(r.sum) + "," + num(r.log_sum) + "," +
                           num(r.normalized) + "\n";
                slices.push_back({{"param", p}, {"max_over_min", sl.max_over_min}, {"nonincreasing_from_32", sl.nonincreasing_tail}});
            }
            out.emit("beta_sums.csv", csv);
            out.emit("beta_sums_summary.json", json{{"lemma", bs_lemma}, {"slices", slices}}.dump(2) + "\n", false);
        } else if (sub == env) {
            const auto k = env_k.kernel();
            const auto bc = BoundConstants::make(k, env_m0, env_m2);
            std::string csv = "t,rp,envelope\n";
            for (double rp : env_rp)
                for (double t : linspace(0, env_tmax, env_points)) {
                    if (!env_init && t == 0) continue;
                    csv += num(t) + "," + num(rp) + "," + num(bernoulli_envelope(bc, bc.B_rp(rp), rp, k.gamma, env_init, t)) + "\n";
                }
            out.emit("envelope.csv", csv);
        } else if (sub == ds) {
            RunConfig cfg;
            if (!ds_manifest.empty()) {
                cfg = run_config_from_json(read_json(ds_manifest).at("config"));
            } else {
                if (ds_ic == "maxwellian") cfg.ic = InitialCondition::maxwellian(T, ds_k.d);
                if (ds_ic == "shifted_bimaxwellian") cfg.ic = InitialCondition::shifted_bimaxwellian(T1, T2, dv, ds_k.d);
                if (ds_ic == "compact_support") cfg.ic = InitialCondition::compact_support(R, ds_k.d);
                if (ds_ic == "heavy_tail") cfg.ic = InitialCondition::heavy_tail(s0, alpha0, ds_k.d);
                cfg.kernel = ds_k.kernel();
                cfg.horizon = horizon;
                cfg.snapshots = linspace(0, horizon, snaps);
                cfg.orders = ladder_orders(qmax, cfg.kernel.gamma);
                cfg.N = N;
                cfg.seed = c.seed;
                cfg.dt_max = dt_max;
                cfg.entropy = entropy;
                cfg.pair_budget = budget;
            }
            cfg.workers = c.workers;
            const auto res = run(cfg);
            const std::string csv = trajectory_csv(res.trajectory);
            out.emit("trajectory.csv", csv);
            if (cfg.entropy) {
                std::string ecsv = "t,entropy,stderr\n";
                for (std::size_t i = 0; i < res.entropy.size(); ++i)
                    ecsv += num(res.trajectory.snapshots[i].t) + "," + num(res.entropy[i].value) + "," +
                            num(res.entropy[i].std_error) + "\n";
                out.emit("entropy.csv", ecsv);
            }
            json m = make_manifest("dsmc-run", to_json(cfg), out.produced);
            m["diagnostics"] = {{"collisions", res.collisions},
                                {"steps", res.steps},
                                {"energy_drift", res.energy_drift},
                                {"momentum_drift", res.momentum_drift}};
            m["trajectory_checksum"] = checksum_hex(csv);
            out.emit("manifest.json", m.dump(2) + "\n", false);
            std::cerr << "trajectory checksum " << checksum_hex(csv) << "\n";
        } else if (sub == tr || sub == bsc) {
            const auto traj = read_trajectory_csv(traj_path);
            if (traj.empty()) throw UsageError("trajectory " + traj_path + " is empty");
            const int avail = static_cast<int>(std::floor(traj.snapshots.front().max_order() / 2));
            const int n_used = std::min(nmax, avail);
            const MLSpec spec0(s_ord, tr_alpha0);
            const double M0 = M0_opt ? *M0_opt : std::exp(log_partial_sum_E(traj.snapshots.front(), spec0, n_used));
            if (sub == bsc) {
                const auto rep = bootstrap_scan(traj, spec0.with_alpha(bs_alpha), M0, n_used);
                std::string csv = "n,T_n\n";
                for (std::size_t i = 0; i < rep.n_grid.size(); ++i) csv += std::to_string(rep.n_grid[i]) + "," + num(rep.T_n[i]) + "\n";
                out.emit("bootstrap.csv", csv);
                json j = {{"spec", {{"s", s_ord}, {"alpha", bs_alpha}}},
                          {"M0", M0},
                          {"n_max", n_used},
                          {"horizon", rep.horizon},
                          {"all_reach_horizon", rep.all_reach_horizon}};
                j["first_collapse_n"] = rep.first_collapse_n ? json(*rep.first_collapse_n) : json(nullptr);
                out.emit("bootstrap.json", j.dump(2) + "\n", false);
            } else {
                if (alphas.empty())
                    for (int k = -6; k <= 1; ++k) alphas.push_back(tr_alpha0 * std::ldexp(1.0, k));
                json scans = json::array();
                std::optional<double> best;
                for (double a : alphas) {
                    const auto rep = bootstrap_scan(traj, spec0.with_alpha(a), M0, n_used);
                    json row = {{"alpha", a}, {"all_reach_horizon", rep.all_reach_horizon}, {"T_n_min", *std::min_element(rep.T_n.begin(), rep.T_n.end())}};
                    row["first_collapse_n"] = rep.first_collapse_n ? json(*rep.first_collapse_n) : json(nullptr);
                    scans.push_back(row);
                    if (rep.all_reach_horizon && a <= tr_alpha0 && (!best || a > *best)) best = a;
                }
                json gen;
                const double tf = std::isnan(fit_t) ? traj.horizon() : fit_t;
                gen["t"] = tf;
                gen["gamma"] = tr_gamma;
                try {
                    const auto f = estimate_tail_order(traj, tf, qlo, qhi);
                    gen["s_hat"] = f.s_hat;
                    gen["s_se"] = f.s_se;
                    gen["alpha_hat"] = f.alpha_hat;
                    gen["alpha_se"] = f.alpha_se;
                    gen["verdict"] = (f.s_hat >= 0.7 * tr_gamma && f.s_hat <= 1.3 * tr_gamma) ? "PASS" : "FAIL";
                } catch (const FitDegenerateError& e) {
                    gen["verdict"] = "FAIL";
                    gen["fit_error"] = e.what();
                } catch (const MissingMomentError& e) {
                    gen["verdict"] = "FAIL";
                    gen["fit_error"] = e.what();
                }
                json rep = {{"trajectory", traj_path},
                            {"spec", {{"s", s_ord}, {"a", spec0.a()}, {"alpha0", tr_alpha0}}},
                            {"M0", M0},
                            {"n_max", n_used},
                            {"horizon", traj.horizon()},
                            {"scans", scans},
                            {"propagation", {{"verdict", best ? "PASS" : "FAIL"}, {"alpha_found", best ? json(*best) : json(nullptr)}}},
                            {"generation", gen}};
                out.emit("tail_report.json", rep.dump(2) + "\n");
            }
        }
        if (!c.out.empty() && sub != ds) {
            json m = make_manifest(sub->get_name(), {{"argv", std::vector<std::string>(argv + 1, argv + argc)}}, out.produced);
            write_text((fs::path(c.out) / (sub->get_name() + ".manifest.json")).string(), m.dump(2) + "\n");
        }
        return 0;
    } catch (const DomainError& e) {
        // parameters outside a function's domain come from user input here
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const json::exception& e) {
        std::cerr << "error: bad input: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
