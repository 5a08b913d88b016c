// jumpstab command-line front end.
//
// Exit codes: 0 success, 1 numeric or solver failure, 2 I/O or usage error.

#include <CLI11.hpp>

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jumpstab/control.hpp"
#include "jumpstab/cost.hpp"
#include "jumpstab/error.hpp"
#include "jumpstab/json_io.hpp"
#include "jumpstab/lyapunov.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/perturb.hpp"
#include "jumpstab/riccati.hpp"
#include "jumpstab/simulate.hpp"

namespace {

using namespace jumpstab;
using json_io::json;

constexpr const char* kVersion = "0.1.0";

struct UsageError : Error {
    using Error::Error;
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Every flag of the subcommand except --threads, which cannot change results.
json meta_block(const CLI::App& cmd, const std::string& model_text) {
    json flags = json::object();
    for (const CLI::Option* opt : cmd.get_options()) {
        const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
        if (name == "help" || name == "threads") continue;
        if (opt->count() == 0 && opt->get_default_str().empty()) continue;
        const auto& res = opt->results();
        if (res.empty()) {
            flags[name] = opt->get_default_str();
        } else if (res.size() == 1) {
            flags[name] = res.front();
        } else {
            flags[name] = res;
        }
    }
    return {{"tool", "jumpstab"},
            {"version", kVersion},
            {"command", cmd.get_name()},
            {"flags", flags},
            {"model_hash", "fnv1a64:" + hex64(fnv1a64(model_text))}};
}

Vector parse_vector(const std::string& csv, int m, const char* flag) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(tok, &used));
            while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": cannot parse '" + tok + "' as a number");
        }
    }
    if (static_cast<int>(vals.size()) != m)
        throw UsageError(std::string(flag) + ": expected " + std::to_string(m) + " comma-separated values");
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

struct LoadedModel {
    std::string text;
    Model model;
    ValidationReport report;
};

LoadedModel load_checked(const std::string& path) {
    LoadedModel lm;
    lm.text = json_io::read_text_file(path);
    lm.model = parse_model(lm.text);
    lm.report = validate(lm.model.system, lm.model.weights);
    if (!lm.report.ok()) {
        std::cerr << lm.report.to_text();
        throw UsageError("model '" + path + "' failed validation");
    }
    return lm;
}

void check_regime(int y0, const RegimeSystem& sys) {
    if (y0 < 0 || y0 >= sys.regime_count())
        throw UsageError("--y0: regime must lie in [0, " + std::to_string(sys.regime_count()) + ")");
}

FeedbackLaw law_from_gains(const std::string& path, const Model& model) {
    const GainSet g = json_io::load_gains(path);
    if (g.regimes() != model.system.regime_count())
        throw DimensionError("G", "gains file has " + std::to_string(g.regimes()) +
                                      " regimes, model has " +
                                      std::to_string(model.system.regime_count()));
    return synthesize_feedback(g, model.system, model.weights);
}

void emit(const std::string& out, const std::string& content) {
    if (out.empty() || out == "-")
        std::cout << content;
    else
        json_io::write_text_file(out, content);
}

// CSV outputs carry their provenance in a sidecar file.
void emit_csv(const std::string& out, const std::string& csv, const json& meta) {
    emit(out, csv);
    if (!out.empty() && out != "-") json_io::write_text_file(out + ".meta.json", meta.dump(2) + "\n");
}

void print_gain_summary(const GainSet& g) {
    const auto bounds = gain_bounds(g);
    for (int i = 0; i < g.regimes(); ++i)
        for (int k = 0; k < g.intervals(); ++k) {
            const double res = i < static_cast<int>(g.residual.size()) &&
                                       k < static_cast<int>(g.residual[i].size())
                                   ? g.residual[i][k]
                                   : 0.0;
            std::printf("G[%d][%d] residual %.3e  lambda_min %.6g  lambda_max %.6g  %s\n", i, k, res,
                        bounds[i][k].c1, bounds[i][k].c2,
                        bounds[i][k].c1 > 0.0 ? "positive definite" : "NOT positive definite");
        }
    for (const auto& w : g.warnings) std::printf("warning: %s\n", w.c_str());
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string model;
};

int run_validate(const ValidateArgs& a) {
    const Model model = load_model(a.model);
    const auto report = validate(model.system, model.weights);
    std::cout << report.to_text();
    return report.ok() ? 0 : 1;
}

struct SynthesizeArgs {
    std::string model;
    std::string method;
    std::string out;
    double tol = 1e-10;
    int max_outer = 500;
    double relaxation = 1.0;
    double horizon = 0.0;
    double dt_g = 0.01;
    double eps = 0.0;
    int order = 2;
};

int run_synthesize(const SynthesizeArgs& a, const CLI::App& cmd) {
    const LoadedModel lm = load_checked(a.model);
    const RegimeSystem& sys = lm.model.system;
    const CostWeights& w = lm.model.weights;
    const int N = sys.regime_count();
    const int m = sys.m;

    GainSet gains;
    std::optional<SeriesSolution> series;
    if (a.method == "care") {
        SolveOptions opts;
        opts.tol = a.tol;
        opts.max_outer = a.max_outer;
        opts.relaxation = a.relaxation;
        gains = solve_coupled_care(sys, w, opts);
    } else if (a.method == "riccati-ode") {
        if (!(a.horizon > 0.0)) throw UsageError("--horizon must be > 0 for riccati-ode");
        const GainTrajectory traj = solve_riccati_ode(sys, w, a.horizon, a.dt_g);
        gains = traj.initial();
        attach_residuals(gains, sys, w);
        gains.tol = a.tol;
        if (!traj.psd) gains.warnings.push_back("G(t) lost positive semidefiniteness on the grid");
    } else if (a.method == "perturb1") {
        Matrix r_rates = Matrix::Zero(N, N);
        if (a.eps > 0.0)
            r_rates = sys.Q / a.eps;
        else if (sys.Q.cwiseAbs().maxCoeff() > 0.0)
            throw UsageError("--eps 0 with perturb1 requires a decoupled model (Q = 0)");
        series = solve_case1(sys, w, r_rates, a.eps, a.order);
    } else if (a.method == "perturb2") {
        std::vector<std::vector<Matrix>> K_hat(N, std::vector<Matrix>(N, Matrix::Zero(m, m)));
        std::vector<Matrix> Q_hat;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (i == j) continue;
                const Matrix dK = sys.regime_jump.K[i][j] - Matrix::Identity(m, m);
                if (a.eps > 0.0)
                    K_hat[i][j] = dK / a.eps;
                else if (dK.cwiseAbs().maxCoeff() > 0.0)
                    throw UsageError("--eps 0 with perturb2 requires identity jump matrices K");
            }
        for (const auto& Qm : sys.regime_jump.Qs) {
            if (a.eps > 0.0)
                Q_hat.push_back(Qm / a.eps);
            else if (Qm.cwiseAbs().maxCoeff() > 0.0)
                throw UsageError("--eps 0 with perturb2 requires zero Qs");
            else
                Q_hat.push_back(Matrix::Zero(m, m));
        }
        series = solve_case2(sys, w, K_hat, Q_hat, a.eps, a.order);
    } else {
        throw UsageError("--method must be one of care, riccati-ode, perturb1, perturb2");
    }

    if (series) {
        gains = assemble_series(*series);
        gains.tol = a.tol;
        attach_residuals(gains, sys, w);
        std::printf("series order %d  eps %.6g  majorant radius %.6g  c %.6g\n", series->order,
                    series->eps, series->majorant.radius, series->majorant.c);
    }

    json doc = json_io::gains_to_json(gains);
    doc["method"] = a.method;
    doc["feedback"] = json_io::feedback_to_json(synthesize_feedback(gains, sys, w))["F"];
    if (series) doc["series"] = json_io::series_to_json(*series);
    doc["meta"] = meta_block(cmd, lm.text);
    emit(a.out, doc.dump(2) + "\n");
    print_gain_summary(gains);
    return 0;
}

struct RandomArgs {
    std::string model;
    std::string gains;
    std::string x0;
    int y0 = 0;
    double T = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    int paths = 1;
    int threads = 0;
    std::string out;
};

FeedbackLaw law_or_zero(const std::string& gains, const Model& model) {
    return gains.empty() ? FeedbackLaw::zero(model.system) : law_from_gains(gains, model);
}

int run_simulate(const RandomArgs& a, const CLI::App& cmd) {
    const LoadedModel lm = load_checked(a.model);
    const RegimeSystem& sys = lm.model.system;
    check_regime(a.y0, sys);
    if (a.paths < 1) throw UsageError("--paths must be >= 1");
    const Vector x0 = parse_vector(a.x0, sys.m, "--x0");
    const FeedbackLaw law = law_or_zero(a.gains, lm.model);
    const json meta = meta_block(cmd, lm.text);

    std::ostringstream os;
    if (a.paths == 1) {
        const auto path = simulate_path(sys, law, x0, a.y0, a.T, a.dt, SeededStream(a.seed, 0));
        write_trajectory_csv(os, path);
    } else {
        struct Summary {
            double t_end;
            Vector x_end;
            int regime, eta, events;
            double max_norm;
        };
        std::vector<Summary> rows(static_cast<std::size_t>(a.paths));
        parallel_for(a.paths, a.threads, [&](int p) {
            TrajectoryPath path;
            try {
                path = simulate_path(sys, law, x0, a.y0, a.T, a.dt,
                                     SeededStream(a.seed, static_cast<std::uint64_t>(p)));
            } catch (const DivergenceError& e) {
                throw DivergenceError(e.time(), p);
            }
            double mx = 0.0;
            for (const auto& x : path.x) mx = std::max(mx, x.norm());
            for (const auto& x : path.x_pre) mx = std::max(mx, x.norm());
            rows[static_cast<std::size_t>(p)] = {path.time.back(), path.x.back(), path.regime.back(),
                                                 path.eta.back(),
                                                 static_cast<int>(path.events.size()), mx};
        });
        os << "path,t_end";
        for (int i = 0; i < sys.m; ++i) os << ",x_" << i;
        os << ",regime,eta,n_events,max_norm\n";
        char buf[32];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf;
        };
        for (std::size_t p = 0; p < rows.size(); ++p) {
            os << p << ',';
            num(rows[p].t_end);
            for (int i = 0; i < sys.m; ++i) {
                os << ',';
                num(rows[p].x_end(i));
            }
            os << ',' << rows[p].regime << ',' << rows[p].eta << ',' << rows[p].events << ',';
            num(rows[p].max_norm);
            os << '\n';
        }
    }
    emit_csv(a.out, os.str(), meta);
    return 0;
}

struct CostArgs : RandomArgs {
    std::string compare_gains;
};

int run_estimate_cost(const CostArgs& a, const CLI::App& cmd) {
    const LoadedModel lm = load_checked(a.model);
    const RegimeSystem& sys = lm.model.system;
    const CostWeights& w = lm.model.weights;
    check_regime(a.y0, sys);
    const Vector x0 = parse_vector(a.x0, sys.m, "--x0");
    const GainSet G = json_io::load_gains(a.gains);
    const FeedbackLaw law = synthesize_feedback(G, sys, w);
    CostOptions opts;
    opts.threads = a.threads;

    json doc;
    doc["v0"] = lyapunov_value(G, a.y0, sys.det_switch.interval_at(0.0), x0);
    if (a.compare_gains.empty()) {
        const CostEstimate est = estimate_cost(sys, w, law, x0, a.y0, a.T, a.dt, a.paths, a.seed, opts);
        doc["estimate"] = json_io::cost_to_json(est);
        std::printf("cost %.10g +- %.3g (%d paths, %d diverged)  v(x0) %.10g\n", est.mean,
                    est.std_error, est.n_paths, est.n_diverged, doc["v0"].get<double>());
    } else {
        const FeedbackLaw other = law_from_gains(a.compare_gains, lm.model);
        const CostComparison cmp =
            compare_costs(sys, w, law, other, x0, a.y0, a.T, a.dt, a.paths, a.seed, opts);
        doc["comparison"] = json_io::comparison_to_json(cmp);
        std::printf("cost difference (gains - compare) %.10g +- %.3g, 95%% CI [%.6g, %.6g]\n",
                    cmp.diff_mean, cmp.diff_std_error, cmp.ci_low, cmp.ci_high);
    }
    doc["meta"] = meta_block(cmd, lm.text);
    if (!a.out.empty()) emit(a.out, doc.dump(2) + "\n");
    return 0;
}

struct StabilityArgs : RandomArgs {
    double eps1 = 1.0;
    double delta = 0.01;
    int x0_samples = 5;
    std::string supermartingale_out;
    std::string lemma1_out;
};

int run_check_stability(const StabilityArgs& a, const CLI::App& cmd) {
    const LoadedModel lm = load_checked(a.model);
    const RegimeSystem& sys = lm.model.system;
    const FeedbackLaw law = law_or_zero(a.gains, lm.model);
    const json meta = meta_block(cmd, lm.text);

    const StabilityEstimate est = stability_probability_estimate(
        sys, law, a.eps1, a.delta, a.T, a.dt, a.paths, a.x0_samples, a.seed, a.threads);
    std::ostringstream os;
    write_stability_csv(os, est);
    emit_csv(a.out, os.str(), meta);
    std::printf("max exceedance probability %.6g, Wilson 95%% upper bound %.6g\n",
                est.max_probability, est.max_upper);

    if (!a.supermartingale_out.empty() || !a.lemma1_out.empty()) {
        if (a.gains.empty()) throw UsageError("--supermartingale-out and --lemma1-out need --gains");
        if (a.x0.empty()) throw UsageError("--supermartingale-out and --lemma1-out need --x0");
        check_regime(a.y0, sys);
        const Vector x0 = parse_vector(a.x0, sys.m, "--x0");
        const GainSet G = json_io::load_gains(a.gains);
        const auto paths = simulate_batch(sys, law, x0, a.y0, a.T, a.dt, a.paths, a.seed, a.threads);
        if (!a.supermartingale_out.empty()) {
            const auto res = supermartingale_check(paths, G, sys.det_switch);
            std::ostringstream ss;
            write_supermartingale_csv(ss, res);
            emit_csv(a.supermartingale_out, ss.str(), meta);
            std::printf("supermartingale verdict: %s\n", res.verdict ? "true" : "false");
        }
        if (!a.lemma1_out.empty()) {
            const auto rows =
                lemma1_bound_check(paths, sys.det_switch, lm.report.lipschitz, lm.report.max_gap);
            std::ostringstream ss;
            write_lemma1_csv(ss, rows);
            emit_csv(a.lemma1_out, ss.str(), meta);
            bool ok = true;
            for (const auto& r : rows) ok = ok && r.satisfied;
            std::printf("second-moment bound satisfied: %s\n", ok ? "true" : "false");
        }
    }
    return 0;
}

void add_random_flags(CLI::App* cmd, RandomArgs& a, bool need_x0) {
    cmd->add_option("--model", a.model, "Model JSON")->required();
    auto* x0 = cmd->add_option("--x0", a.x0, "Initial state, comma-separated");
    if (need_x0) x0->required();
    cmd->add_option("--y0", a.y0, "Initial regime")->capture_default_str();
    cmd->add_option("--T", a.T, "Horizon")->required();
    cmd->add_option("--dt", a.dt, "Integration step")->required();
    cmd->add_option("--seed", a.seed, "Root seed")->required();
    cmd->add_option("--paths", a.paths, "Number of paths")->capture_default_str();
    cmd->add_option("--threads", a.threads, "Worker threads (0 = available parallelism)");
    cmd->add_option("--out", a.out, "Output file (default: standard output)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stabilization of regime-switching jump-diffusion systems"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    ValidateArgs va;
    auto* validate_cmd = app.add_subcommand("validate", "Check a model file");
    validate_cmd->add_option("--model", va.model, "Model JSON")->required();

    SynthesizeArgs sa;
    auto* synth_cmd = app.add_subcommand("synthesize", "Compute gains and the feedback law");
    synth_cmd->add_option("--model", sa.model, "Model JSON")->required();
    synth_cmd->add_option("--method", sa.method, "care | riccati-ode | perturb1 | perturb2")
        ->required()
        ->check(CLI::IsMember({"care", "riccati-ode", "perturb1", "perturb2"}));
    synth_cmd->add_option("--tol", sa.tol, "Residual tolerance")->capture_default_str();
    synth_cmd->add_option("--max-outer", sa.max_outer, "Outer iteration cap")->capture_default_str();
    synth_cmd->add_option("--relaxation", sa.relaxation, "Damping in (0, 1]")->capture_default_str();
    synth_cmd->add_option("--horizon", sa.horizon, "Horizon T for riccati-ode");
    synth_cmd->add_option("--dt-g", sa.dt_g, "RK4 step for riccati-ode")->capture_default_str();
    synth_cmd->add_option("--eps", sa.eps, "Small parameter for perturb methods")->capture_default_str();
    synth_cmd->add_option("--order", sa.order, "Series order R")->capture_default_str();
    synth_cmd->add_option("--out", sa.out, "Output gains JSON (default: standard output)");

    RandomArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate closed-loop paths");
    add_random_flags(sim_cmd, sim, true);
    sim_cmd->add_option("--gains", sim.gains, "Gains JSON (omit for zero control)");

    CostArgs ca;
    auto* cost_cmd = app.add_subcommand("estimate-cost", "Monte Carlo cost of the feedback law");
    add_random_flags(cost_cmd, ca, true);
    cost_cmd->add_option("--gains", ca.gains, "Gains JSON")->required();
    cost_cmd->add_option("--compare-gains", ca.compare_gains,
                         "Second gains JSON; compares both laws on common random numbers");

    StabilityArgs st;
    auto* stab_cmd = app.add_subcommand("check-stability", "Exceedance probabilities near the origin");
    add_random_flags(stab_cmd, st, false);
    stab_cmd->add_option("--gains", st.gains, "Gains JSON (omit for zero control)");
    stab_cmd->add_option("--eps1", st.eps1, "Exceedance threshold")->required();
    stab_cmd->add_option("--delta", st.delta, "Initial radius")->required();
    stab_cmd->add_option("--x0-samples", st.x0_samples, "Initial states on the sphere")
        ->capture_default_str();
    stab_cmd->add_option("--supermartingale-out", st.supermartingale_out,
                         "CSV of per-interval means of v_k for paths from --x0");
    stab_cmd->add_option("--lemma1-out", st.lemma1_out,
                         "CSV of interval second moments against the a priori bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*validate_cmd) return run_validate(va);
        if (*synth_cmd) return run_synthesize(sa, *synth_cmd);
        if (*sim_cmd) return run_simulate(sim, *sim_cmd);
        if (*cost_cmd) return run_estimate_cost(ca, *cost_cmd);
        if (*stab_cmd) return run_check_stability(st, *stab_cmd);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << " (last residual " << e.last_residual() << ")\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
