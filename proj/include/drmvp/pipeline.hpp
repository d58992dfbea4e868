#pragma once
// End-to-end orchestration: simulate -> estimate-iv -> invert -> fit ->
// backtest -> eval, plus the figure-reproduction sweeps.
//
// Every stage reads and writes fixed-name CSV files inside a run directory,
// records the run seed in each header, and stages its writes through
// "<name>.partial" files renamed into place only when the stage finishes, so
// an interrupted stage never leaves a truncated final file. The manifest
// (manifest.json, written last) carries input/config hashes per stage;
// re-running a stage whose hashes match and whose outputs exist is a no-op
// unless forced.

#include <string>
#include <utility>
#include <vector>

#include "drmvp/market_sim.hpp"
#include "drmvp/model.hpp"
#include "drmvp/realized_vol.hpp"

namespace drmvp::pipeline {

// "har:1,5,22" / "ar:1,2"; bare "har" or "ar" keeps the default horizons
model::LagSpec lag_spec_from_string(const std::string& s);
std::string lag_spec_to_string(const model::LagSpec& spec);

struct RunConfig {
    // stage toggles, in dependency order
    bool do_simulate = true;
    bool do_estimate = true;
    bool do_invert = true;
    bool do_fit = true;
    bool do_backtest = true;
    bool do_eval = true;

    std::string out_dir = "run";
    std::string ticks_csv;  // external tick input; empty means <out_dir>/ticks.csv
    unsigned long long seed = 1;
    int jobs = 0;        // 0: resolve via DRMVP_JOBS / hardware
    bool force = false;  // re-run stages even when hashes match

    sim::SimConfig sim;  // sim.seed is overridden by the run seed
    rv::EstimateConfig estimate;
    int tau_grid_points = 100;     // CLIME grid thinning, 100 keeps the full grid
    model::LagSpec lags;
    int lambda_grid_points = 100;  // LASSO grid thinning
    bool penalize_intercept = true;
    int backtest_window = 252;
    std::vector<std::string> backtest_models = {"drmvp", "har", "martingale"};
    bool expost_from_truth = false;  // eval denominator from simulator truth
    int replications = 20;           // used by the figure sweeps

    void validate() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);   // canonical form

struct StageRecord {
    std::string name;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> input_hashes;
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;
    std::vector<std::string> warnings;
    bool skipped = false;
};

struct Manifest {
    std::vector<StageRecord> stages;

    const StageRecord* find(const std::string& name) const;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

// executes the enabled stages in order inside cfg.out_dir; on a stage failure
// the manifest of completed stages is still written before the error
// propagates, and the failing stage leaves only .partial files behind
Manifest run_pipeline(const RunConfig& cfg);

// ---- single stages against explicit paths (the CLI subcommands) ----
// each returns the warnings it produced and writes fixed-name outputs

std::vector<std::string> stage_simulate(const sim::SimConfig& cfg,
                                        const std::string& out_dir);
std::vector<std::string> stage_estimate(const std::string& ticks_csv,
                                        const rv::EstimateConfig& cfg, int jobs,
                                        unsigned long long seed,
                                        const std::string& out_dir);
std::vector<std::string> stage_invert(const std::string& gamma_csv,
                                      int tau_points, int jobs,
                                      unsigned long long seed,
                                      const std::string& out_dir);
std::vector<std::string> stage_fit(const std::string& weights_csv,
                                   const model::LagSpec& lags,
                                   bool penalize_intercept, int lambda_points,
                                   int jobs, unsigned long long seed,
                                   const std::string& out_dir);
std::vector<std::string> stage_predict(const std::string& weights_csv,
                                       const std::string& coefs_csv,
                                       unsigned long long seed,
                                       const std::string& out_dir);
std::vector<std::string> stage_backtest(const std::string& weights_csv,
                                        const std::vector<std::string>& kinds,
                                        const model::LagSpec& lags,
                                        bool penalize_intercept, int window,
                                        int jobs, unsigned long long seed,
                                        const std::string& out_dir);
std::vector<std::string> stage_eval(const std::string& ticks_csv,
                                    const std::string& expost_csv,
                                    const std::vector<std::string>& backtest_csvs,
                                    const std::vector<std::string>& names,
                                    unsigned long long seed,
                                    const std::string& out_dir);
std::vector<std::string> stage_acf(const std::string& weights_csv, int max_lag,
                                   unsigned long long seed,
                                   const std::string& out_dir);

// ---- figure-reproduction sweeps ----

enum class Study { Fig1, Fig2, Fig3, Fig4, Fig5 };

Study study_from_name(const std::string& name);   // "fig1" .. "fig5"

struct StudyConfig {
    int p = 10;
    int replications = 20;
    std::vector<int> m_grid = {390, 780, 2340};
    std::vector<int> n_grid = {50, 125, 250};
    int inner_paths = 2000;      // conditional-mean Monte Carlo budget
    int tau_points = 25;         // thinned CLIME grid keeps the sweeps at minutes
    unsigned long long seed = 1;
    int jobs = 0;
    std::string out_dir = "figures";

    void validate() const;
};

// runs the sweep for one figure and returns the files it wrote
std::vector<std::string> reproduce_figures(Study study, const StudyConfig& cfg);

// ---- shared readers for the fixed file contracts ----

struct EstimatePanel {
    std::vector<rv::RealizedCov> days;
};

EstimatePanel read_gamma_csv(const std::string& path);

struct WeightTable {
    Eigen::MatrixXd w;       // days x p, non-normalized
    Eigen::MatrixXd w_bar;   // days x p
};

WeightTable read_weights_csv(const std::string& path);

struct StoredModel {
    model::DrmvpFit fit;
    bool penalize_intercept = true;
};

StoredModel read_model_csv(const std::string& coefs_csv);

struct BacktestTable {
    std::vector<int> days;
    Eigen::MatrixXd g_hat;   // rows follow `days`
    Eigen::MatrixXd w_bar;
};

BacktestTable read_backtest_csv(const std::string& path);

} // namespace drmvp::pipeline
