#pragma once
// Scoring of predicted portfolios against ex-post truth: annualized and
// relative risks, daily ranks, l2 distances, Sharpe ratios, Diebold-Mariano
// tests, and the weight-autocorrelation diagnostic.
//
// All functions here are pure: same inputs give bit-identical outputs.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "drmvp/ticks.hpp"

namespace drmvp::eval {

// thrown when a variance that must be positive is numerically zero
struct DegenerateVariance : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kIntervalsPerDay = 39;

// one 39 x p block of ten-minute asset log returns per day, sampled last-tick
// at day fractions i/39
struct ReturnPanel {
    int p = 0;
    std::vector<Eigen::MatrixXd> days;

    void validate() const;
};

ReturnPanel returns_from_ticks(const TickPanel& ticks);

// close-to-close log returns, (days - 1) x p; row k is day k+1 close over
// day k close
Eigen::MatrixXd close_to_close(const TickPanel& ticks);

// one portfolio per day, aligned with a ReturnPanel
using WeightPath = std::vector<Eigen::VectorXd>;

// sqrt((252 / d) sum_k sum_i (w'r)^2), reported in percent
double annualized_risk(const WeightPath& weights, const ReturnPanel& panel);

struct RelativeRiskStats {
    Eigen::VectorXd mean_relative_risk;   // per model, vs the ex-post portfolio
    Eigen::VectorXd mean_rank;            // ties get the average rank
    Eigen::VectorXi first_place_count;    // ties at the minimum all count
    std::vector<int> excluded_days;       // days with a zero ex-post denominator
    Eigen::MatrixXd daily_risk;           // d x m sum_i (w'r)^2, the DM loss series
};

// per-day risk ratios against the ex-post portfolio plus cross-model ranks;
// ranks cover every day, the ratio average skips the excluded ones
RelativeRiskStats relative_risk_and_rank(const std::vector<WeightPath>& models,
                                         const WeightPath& ex_post,
                                         const ReturnPanel& panel);

struct DmResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

// Diebold-Mariano on d = a - b. One-sided p is the upper tail, so small
// values say a's losses run higher than b's; nw_lag 0 means the long-run
// variance is the plain sample variance of d.
DmResult dm_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                 bool one_sided = true, int nw_lag = 0);

// mean excess portfolio return over its sample sd (n - 1 denominator)
double sharpe(const WeightPath& weights, const Eigen::MatrixXd& close_returns,
              const Eigen::VectorXd& risk_free);

struct AcfResult {
    Eigen::MatrixXd acf;          // (max_lag + 1) x p, lag 0 row is all ones
    double band = 0.0;            // 1.96 / sqrt(N), the 5% significance level
    std::vector<char> constant;   // per asset: sample variance is zero
};

// standard sample autocorrelations per asset; constant assets are flagged and
// carry NaN at the positive lags
AcfResult weight_acf(const Eigen::MatrixXd& weights, int max_lag = 20);

// mean over days of the euclidean distance between two weight paths
double mean_l2(const WeightPath& a, const WeightPath& b);

struct MetricReport {
    std::vector<std::string> model;
    Eigen::VectorXd annualized_risk;
    Eigen::VectorXd mean_relative_risk;
    Eigen::VectorXd mean_rank;
    Eigen::VectorXi first_place_count;
    Eigen::VectorXd mean_l2;
    Eigen::VectorXd sharpe;       // NaN without close returns or on zero sd
    Eigen::MatrixXd dm_pvalues;   // one-sided, NaN on the diagonal and on failure
    std::vector<int> excluded_days;
};

// one-call assembly of the full table; close_returns and risk_free are
// optional (simulated data has no risk-free series, so it defaults to zero)
MetricReport build_report(const std::vector<std::string>& names,
                          const std::vector<WeightPath>& models,
                          const WeightPath& ex_post, const ReturnPanel& panel,
                          const Eigen::MatrixXd* close_returns = nullptr,
                          const Eigen::VectorXd* risk_free = nullptr);

} // namespace drmvp::eval
