// Command line front end: one subcommand per pipeline stage, plus `run` for
// manifest-driven end-to-end runs and `reproduce` for the figure sweeps.

#include "drmvp/pipeline.hpp"
#include "drmvp/util.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace pl = drmvp::pipeline;

namespace {

void report(const std::vector<std::string>& warnings,
            const std::vector<std::string>& outputs) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : outputs) std::cout << "wrote " << f << "\n";
}

std::string default_path(const std::string& value, const std::string& dir,
                         const char* name) {
    return value.empty() ? dir + "/" + name : value;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic realized minimum-variance portfolio pipeline"};
    app.require_subcommand(1);

    // shared flag storage; every subcommand binds the subset it uses
    std::string out = "run";
    unsigned long long seed = 1;
    int jobs = 0;

    // ---- simulate ----
    auto* cmd_sim = app.add_subcommand("simulate", "simulate a high-frequency market");
    drmvp::sim::SimConfig sim_cfg;
    bool no_ticks = false;
    cmd_sim->add_option("--out", out, "output directory");
    cmd_sim->add_option("--seed", seed, "run seed");
    cmd_sim->add_option("--p", sim_cfg.p, "number of assets");
    cmd_sim->add_option("--days", sim_cfg.days, "number of days");
    cmd_sim->add_option("--steps", sim_cfg.steps_per_day, "ticks per asset-day");
    cmd_sim->add_option("--burn-in", sim_cfg.burn_in, "warm-up days discarded");
    cmd_sim->add_option("--noise-scale", sim_cfg.noise_scale, "observation noise scale");
    cmd_sim->add_option("--jump-intensity", sim_cfg.jump_intensity, "jumps per asset-day");
    cmd_sim->add_flag("--martingale-off", sim_cfg.martingale_off,
                      "disable the martingale shock");
    cmd_sim->add_flag("--no-ticks", no_ticks, "skip tick emission");
    cmd_sim->callback([&] {
        sim_cfg.seed = seed;
        sim_cfg.emit_ticks = !no_ticks;
        sim_cfg.validate();
        auto warnings = pl::stage_simulate(sim_cfg, out);
        std::vector<std::string> outputs = {out + "/truth.csv", out + "/truth_weights.csv"};
        if (sim_cfg.emit_ticks) outputs.insert(outputs.begin(), out + "/ticks.csv");
        report(warnings, outputs);
    });

    // ---- estimate-iv ----
    auto* cmd_est = app.add_subcommand("estimate-iv",
                                       "daily realized matrices from ticks");
    std::string ticks_in;
    drmvp::rv::EstimateConfig est_cfg;
    bool no_regularize = false, no_jump_robust = false;
    cmd_est->add_option("--out", out, "output directory");
    cmd_est->add_option("--ticks", ticks_in, "tick csv (default <out>/ticks.csv)");
    cmd_est->add_option("--jobs", jobs, "worker threads (0: DRMVP_JOBS or hardware)");
    cmd_est->add_option("--seed", seed, "seed recorded in output headers");
    cmd_est->add_option("--factors", est_cfg.poet_factors, "factors kept by regularization");
    cmd_est->add_option("--trunc-const", est_cfg.preavg.trunc_const, "jump truncation level");
    cmd_est->add_option("--trunc-exponent", est_cfg.preavg.trunc_exponent,
                        "jump truncation exponent");
    cmd_est->add_flag("--no-regularize", no_regularize, "skip factor regularization");
    cmd_est->add_flag("--no-jump-robust", no_jump_robust, "disable jump truncation");
    cmd_est->callback([&] {
        est_cfg.regularize = !no_regularize;
        est_cfg.preavg.jump_robust = !no_jump_robust;
        std::string ticks = default_path(ticks_in, out, "ticks.csv");
        auto warnings = pl::stage_estimate(ticks, est_cfg, jobs, seed, out);
        report(warnings, {out + "/gamma_hat.csv"});
    });

    // ---- invert ----
    auto* cmd_inv = app.add_subcommand("invert", "sparse inverse and weights per day");
    std::string gamma_in;
    int tau_points = 100;
    cmd_inv->add_option("--out", out, "output directory");
    cmd_inv->add_option("--gamma", gamma_in, "matrix csv (default <out>/gamma_hat.csv)");
    cmd_inv->add_option("--tau-points", tau_points, "tuning grid size (<=0: full grid)");
    cmd_inv->add_option("--jobs", jobs, "worker threads");
    cmd_inv->add_option("--seed", seed, "seed recorded in output headers");
    cmd_inv->callback([&] {
        std::string gamma = default_path(gamma_in, out, "gamma_hat.csv");
        auto warnings = pl::stage_invert(gamma, tau_points, jobs, seed, out);
        report(warnings, {out + "/omega_hat.csv", out + "/invert_meta.csv",
                          out + "/weights_hat.csv"});
    });

    // ---- fit ----
    auto* cmd_fit = app.add_subcommand("fit", "penalized weight-dynamics regression");
    std::string weights_in, lags_str = "har:1,5,22";
    int lambda_points = 100;
    bool no_penalize = false;
    cmd_fit->add_option("--out", out, "output directory");
    cmd_fit->add_option("--weights", weights_in, "weights csv (default <out>/weights_hat.csv)");
    cmd_fit->add_option("--lags", lags_str, "lag spec, e.g. har:1,5,22 or ar:1,2");
    cmd_fit->add_option("--lambda-points", lambda_points, "penalty grid size (<=0: full)");
    cmd_fit->add_flag("--no-penalize-intercept", no_penalize, "exempt the intercept");
    cmd_fit->add_option("--jobs", jobs, "worker threads");
    cmd_fit->add_option("--seed", seed, "seed recorded in output headers");
    cmd_fit->callback([&] {
        std::string weights = default_path(weights_in, out, "weights_hat.csv");
        auto warnings = pl::stage_fit(weights, pl::lag_spec_from_string(lags_str),
                                      !no_penalize, lambda_points, jobs, seed, out);
        report(warnings, {out + "/model_meta.csv", out + "/model_coefs.csv"});
    });

    // ---- predict ----
    auto* cmd_pred = app.add_subcommand("predict", "one-day-ahead portfolio");
    std::string coefs_in;
    cmd_pred->add_option("--out", out, "output directory");
    cmd_pred->add_option("--weights", weights_in, "weights csv (default <out>/weights_hat.csv)");
    cmd_pred->add_option("--coefs", coefs_in, "model csv (default <out>/model_coefs.csv)");
    cmd_pred->add_option("--seed", seed, "seed recorded in output headers");
    cmd_pred->callback([&] {
        std::string weights = default_path(weights_in, out, "weights_hat.csv");
        std::string coefs = default_path(coefs_in, out, "model_coefs.csv");
        auto warnings = pl::stage_predict(weights, coefs, seed, out);
        report(warnings, {out + "/prediction.csv"});
    });

    // ---- backtest ----
    auto* cmd_bt = app.add_subcommand("backtest", "rolling out-of-sample portfolios");
    std::vector<std::string> models = {"drmvp", "har", "martingale"};
    int window = 252;
    cmd_bt->add_option("--out", out, "output directory");
    cmd_bt->add_option("--weights", weights_in, "weights csv (default <out>/weights_hat.csv)");
    cmd_bt->add_option("--models", models, "model list")->delimiter(',');
    cmd_bt->add_option("--window", window, "rolling fit window, days");
    cmd_bt->add_option("--lags", lags_str, "lag spec, e.g. har:1,5,22");
    cmd_bt->add_flag("--no-penalize-intercept", no_penalize, "exempt the intercept");
    cmd_bt->add_option("--jobs", jobs, "worker threads");
    cmd_bt->add_option("--seed", seed, "seed recorded in output headers");
    cmd_bt->callback([&] {
        std::string weights = default_path(weights_in, out, "weights_hat.csv");
        auto warnings = pl::stage_backtest(weights, models, pl::lag_spec_from_string(lags_str),
                                           !no_penalize, window, jobs, seed, out);
        std::vector<std::string> outputs;
        for (const auto& kind : models) outputs.push_back(out + "/backtest_" + kind + ".csv");
        report(warnings, outputs);
    });

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "score backtests against ex-post weights");
    std::string expost_in;
    bool expost_truth = false;
    cmd_eval->add_option("--out", out, "output directory");
    cmd_eval->add_option("--ticks", ticks_in, "tick csv (default <out>/ticks.csv)");
    cmd_eval->add_option("--expost", expost_in, "ex-post weights csv (default <out>/weights_hat.csv)");
    cmd_eval->add_flag("--expost-from-truth", expost_truth,
                       "use <out>/truth_weights.csv as the ex-post portfolio");
    cmd_eval->add_option("--models", models, "backtest files to score, <out>/backtest_<name>.csv")
        ->delimiter(',');
    cmd_eval->add_option("--seed", seed, "seed recorded in output headers");
    cmd_eval->callback([&] {
        std::string ticks = default_path(ticks_in, out, "ticks.csv");
        std::string expost =
            default_path(expost_in, out, expost_truth ? "truth_weights.csv" : "weights_hat.csv");
        std::vector<std::string> files;
        for (const auto& kind : models) files.push_back(out + "/backtest_" + kind + ".csv");
        auto warnings = pl::stage_eval(ticks, expost, files, models, seed, out);
        report(warnings, {out + "/report.csv", out + "/dm_pvalues.csv"});
    });

    // ---- acf ----
    auto* cmd_acf = app.add_subcommand("acf", "weight autocorrelations");
    int max_lag = 20;
    cmd_acf->add_option("--out", out, "output directory");
    cmd_acf->add_option("--weights", weights_in, "weights csv (default <out>/weights_hat.csv)");
    cmd_acf->add_option("--max-lag", max_lag, "largest lag");
    cmd_acf->add_option("--seed", seed, "seed recorded in output headers");
    cmd_acf->callback([&] {
        std::string weights = default_path(weights_in, out, "weights_hat.csv");
        auto warnings = pl::stage_acf(weights, max_lag, seed, out);
        report(warnings, {out + "/acf.csv"});
    });

    // ---- reproduce ----
    auto* cmd_rep = app.add_subcommand("reproduce", "figure-reproduction sweeps");
    std::string study_name, config_path;
    pl::StudyConfig study_cfg;
    cmd_rep->add_option("--study", study_name, "fig1..fig5")->required();
    cmd_rep->add_option("--config", config_path, "run config json supplying defaults");
    cmd_rep->add_option("--out", study_cfg.out_dir, "output directory");
    cmd_rep->add_option("--p", study_cfg.p, "number of assets");
    cmd_rep->add_option("--replications", study_cfg.replications, "replications per cell");
    cmd_rep->add_option("--m-grid", study_cfg.m_grid, "ticks-per-day grid")->delimiter(',');
    cmd_rep->add_option("--n-grid", study_cfg.n_grid, "day-count grid")->delimiter(',');
    cmd_rep->add_option("--inner-paths", study_cfg.inner_paths, "conditional-mean paths");
    cmd_rep->add_option("--tau-points", study_cfg.tau_points, "tuning grid size");
    cmd_rep->add_option("--seed", study_cfg.seed, "base seed");
    cmd_rep->add_option("--jobs", study_cfg.jobs, "worker threads");
    cmd_rep->callback([&] {
        if (!config_path.empty()) {
            pl::RunConfig rc = pl::run_config_from_json(drmvp::read_text_file(config_path));
            pl::StudyConfig from_cfg;
            from_cfg.p = rc.sim.p;
            from_cfg.replications = rc.replications;
            from_cfg.tau_points = rc.tau_grid_points;
            from_cfg.seed = rc.seed;
            from_cfg.jobs = rc.jobs;
            from_cfg.out_dir = rc.out_dir;
            from_cfg.m_grid = study_cfg.m_grid;
            from_cfg.n_grid = study_cfg.n_grid;
            from_cfg.inner_paths = study_cfg.inner_paths;
            // explicit flags win over the config file
            if (cmd_rep->count("--p")) from_cfg.p = study_cfg.p;
            if (cmd_rep->count("--replications")) from_cfg.replications = study_cfg.replications;
            if (cmd_rep->count("--tau-points")) from_cfg.tau_points = study_cfg.tau_points;
            if (cmd_rep->count("--seed")) from_cfg.seed = study_cfg.seed;
            if (cmd_rep->count("--jobs")) from_cfg.jobs = study_cfg.jobs;
            if (cmd_rep->count("--out")) from_cfg.out_dir = study_cfg.out_dir;
            study_cfg = from_cfg;
        }
        auto files = pl::reproduce_figures(pl::study_from_name(study_name), study_cfg);
        report({}, files);
    });

    // ---- run ----
    auto* cmd_run = app.add_subcommand("run", "end-to-end pipeline from a config file");
    bool force = false;
    cmd_run->add_option("--config", config_path, "run config json")->required();
    cmd_run->add_option("--out", out, "override out_dir");
    cmd_run->add_option("--seed", seed, "override seed");
    cmd_run->add_option("--jobs", jobs, "override jobs");
    cmd_run->add_flag("--force", force, "re-run stages even when hashes match");
    cmd_run->callback([&] {
        pl::RunConfig cfg = pl::run_config_from_json(drmvp::read_text_file(config_path));
        if (cmd_run->count("--out")) cfg.out_dir = out;
        if (cmd_run->count("--seed")) cfg.seed = seed;
        if (cmd_run->count("--jobs")) cfg.jobs = jobs;
        if (force) cfg.force = true;
        pl::Manifest manifest = pl::run_pipeline(cfg);
        for (const auto& s : manifest.stages) {
            for (const auto& w : s.warnings) std::cerr << "warning [" << s.name << "]: " << w << "\n";
            std::printf("stage %-9s %s (%.2fs)\n", s.name.c_str(),
                        s.skipped ? "skipped" : "ran", s.wall_seconds);
        }
        std::cout << "manifest " << cfg.out_dir << "/manifest.json\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
