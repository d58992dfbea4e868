#pragma once
// Weight dynamics: per-asset LASSO on lagged realized MVP weights with EBIC
// selection, the per-asset OLS baseline, one-day-ahead prediction, and the
// rolling backtest that ties them together.
//
// All assets share one design matrix (the stacked lagged weight vectors, AR
// lags or HAR trailing means); each asset contributes its own response
// column. The LASSO runs coordinate descent on internally standardized
// features, lambda lives on that standardized scale, and reported
// coefficients are mapped back to the original one.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "drmvp/clime.hpp"
#include "drmvp/market_sim.hpp"

namespace drmvp::model {

// same lag grammar the simulator presets use: AR(q) or HAR horizon list
using LagSpec = drmvp::sim::LagSpec;
using clime::DegenerateNormalizer;

struct InsufficientHistory : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FeaturePanel {
    Eigen::MatrixXd x;    // n rows, P = p * n_lags columns, no intercept
    Eigen::MatrixXd y;    // n rows, one response column per asset
    int n = 0;
    int P = 0;
    int p = 0;
    int max_lag = 0;
    LagSpec spec;
};

// weights: one row per day, one column per asset (realized w_d = Omega_d 1).
// Row alignment: response day d pairs with features built from days < d.
// Column (h, j) of x sits at index h * p + j, horizons in listed order (AR
// lags count as horizons 1..q).
FeaturePanel build_features(const Eigen::MatrixXd& weights, const LagSpec& spec);

// feature row for predicting the day right after the last row of weights
Eigen::VectorXd latest_features(const Eigen::MatrixXd& weights, const LagSpec& spec);

struct LassoConfig {
    double lambda = 0.0;
    bool penalize_intercept = true;   // the penalty formally includes beta_0
    int max_sweeps = 10000;
    double tol = 1e-9;                // max coefficient change per sweep
};

struct LassoFit {
    Eigen::VectorXd theta;     // original-scale slopes, size P
    double intercept = 0.0;    // original scale
    double lambda = 0.0;
    double loss = 0.0;         // (1/n) sum of squared residuals
    double kkt_residual = 0.0; // worst stationarity violation, standardized scale
    int nonzero_count = 0;     // slopes, plus the intercept when penalized
    bool converged = true;
    Eigen::VectorXd residuals;
};

LassoFit lasso_fit(const FeaturePanel& panel, int asset, const LassoConfig& cfg);

// smallest lambda at which every slope is exactly zero
double lambda_max(const FeaturePanel& panel, int asset);

// 100 log-spaced lambda candidates in [1e-6, 10], ascending
std::vector<double> lambda_grid();

// n log(L) + k log(n) + 2 k gamma log(P) with gamma = 0.5
double ebic_value(double loss, int nonzero, int n, int big_p);

struct EbicChoice {
    LassoFit fit;
    double ebic = 0.0;
    bool overfit = false;   // the selected fit's loss hit the 1e-300 floor
};

// walks the grid descending with warm starts; min EBIC wins, ties within
// 1e-10 go to the larger (sparser) lambda
EbicChoice ebic_select(const FeaturePanel& panel, int asset,
                       const std::vector<double>& grid,
                       bool penalize_intercept = true);

struct DrmvpFit {
    std::vector<EbicChoice> assets;   // size p
    LagSpec spec;
};

DrmvpFit fit_all(const FeaturePanel& panel, const std::vector<double>& grid,
                 bool penalize_intercept = true, int jobs = 1);

struct Prediction {
    Eigen::VectorXd g_hat;    // beta_0 + features' theta per asset
    Eigen::VectorXd w_bar;    // g_hat / (1' g_hat)
};

// throws DegenerateNormalizer when |1' g_hat| < 1e-12
Prediction predict_g(const DrmvpFit& fit, const Eigen::VectorXd& features);

struct OlsFit {
    Eigen::VectorXd coef;     // intercept first, then own-lag coefficients
    bool rank_deficient = false;
    Eigen::VectorXd residuals;
};

// per-asset OLS on the asset's own lag columns only (intercept unpenalized,
// minimum-norm solution on rank deficiency)
OlsFit har_ols_baseline(const FeaturePanel& panel, int asset);

enum class BacktestModel { DrmvpLasso, HarOls, Martingale };

struct BacktestConfig {
    LagSpec spec;
    int window = 252;
    BacktestModel kind = BacktestModel::DrmvpLasso;
    bool penalize_intercept = true;
    int jobs = 1;
};

struct BacktestDay {
    int day = 0;              // index into the weight series being predicted
    Eigen::VectorXd g_hat;
    Eigen::VectorXd w_bar;
    bool fallback = false;    // degenerate normalizer, previous weights reused
};

struct BacktestResult {
    std::vector<BacktestDay> days;
    std::vector<std::string> warnings;
};

// refits on the trailing window for every out-of-sample day; a degenerate
// normalizer falls back to the previous emitted portfolio with a flag
BacktestResult rolling_backtest(const Eigen::MatrixXd& weights,
                                const BacktestConfig& cfg);

} // namespace drmvp::model
