#include "drmvp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drmvp::eval {

namespace {

constexpr double kZeroVar = 1e-300;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// last tick at or before the day fraction f; the series opens at f = 0
double last_tick_price(const TickSeries& s, double f) {
    auto it = std::upper_bound(s.frac.begin(), s.frac.end(), f);
    if (it == s.frac.begin()) return s.price.front();
    return s.price[static_cast<size_t>(it - s.frac.begin() - 1)];
}

void check_weight_path(const WeightPath& weights, const ReturnPanel& panel,
                       const char* who) {
    if (weights.size() != panel.days.size())
        throw std::invalid_argument(std::string(who) + ": one portfolio per day required");
    for (const auto& w : weights)
        if (w.size() != panel.p)
            throw std::invalid_argument(std::string(who) + ": weight dimension mismatch");
}

} // namespace

void ReturnPanel::validate() const {
    if (p < 1 || days.empty())
        throw std::invalid_argument("ReturnPanel: need at least one day and one asset");
    for (const auto& day : days)
        if (day.rows() != kIntervalsPerDay || day.cols() != p)
            throw std::invalid_argument("ReturnPanel: every day must be 39 x p");
}

ReturnPanel returns_from_ticks(const TickPanel& ticks) {
    if (ticks.days < 1 || ticks.p < 1)
        throw std::invalid_argument("returns_from_ticks: empty tick panel");
    ReturnPanel panel;
    panel.p = ticks.p;
    panel.days.assign(static_cast<size_t>(ticks.days),
                      Eigen::MatrixXd(kIntervalsPerDay, ticks.p));
    for (int d = 0; d < ticks.days; ++d) {
        for (int j = 0; j < ticks.p; ++j) {
            const TickSeries& s = ticks.data[static_cast<size_t>(d)][static_cast<size_t>(j)];
            if (s.frac.empty())
                throw std::invalid_argument("returns_from_ticks: empty tick series");
            double prev = last_tick_price(s, 0.0);
            for (int i = 1; i <= kIntervalsPerDay; ++i) {
                double cur = last_tick_price(s, i / static_cast<double>(kIntervalsPerDay));
                panel.days[static_cast<size_t>(d)](i - 1, j) = cur - prev;
                prev = cur;
            }
        }
    }
    return panel;
}

Eigen::MatrixXd close_to_close(const TickPanel& ticks) {
    if (ticks.days < 2 || ticks.p < 1)
        throw std::invalid_argument("close_to_close: need at least two days");
    Eigen::MatrixXd out(ticks.days - 1, ticks.p);
    for (int d = 0; d + 1 < ticks.days; ++d)
        for (int j = 0; j < ticks.p; ++j) {
            const auto& today = ticks.data[static_cast<size_t>(d)][static_cast<size_t>(j)];
            const auto& next = ticks.data[static_cast<size_t>(d + 1)][static_cast<size_t>(j)];
            if (today.price.empty() || next.price.empty())
                throw std::invalid_argument("close_to_close: empty tick series");
            out(d, j) = next.price.back() - today.price.back();
        }
    return out;
}

double annualized_risk(const WeightPath& weights, const ReturnPanel& panel) {
    panel.validate();
    check_weight_path(weights, panel, "annualized_risk");
    const double d = static_cast<double>(panel.days.size());
    double total = 0.0;
    for (size_t k = 0; k < panel.days.size(); ++k)
        total += (panel.days[k] * weights[k]).squaredNorm();
    return std::sqrt(252.0 / d * total) * 100.0;
}

RelativeRiskStats relative_risk_and_rank(const std::vector<WeightPath>& models,
                                         const WeightPath& ex_post,
                                         const ReturnPanel& panel) {
    panel.validate();
    if (models.empty())
        throw std::invalid_argument("relative_risk_and_rank: no models");
    for (const auto& m : models) check_weight_path(m, panel, "relative_risk_and_rank");
    check_weight_path(ex_post, panel, "relative_risk_and_rank");

    const int n_days = static_cast<int>(panel.days.size());
    const int n_models = static_cast<int>(models.size());
    RelativeRiskStats out;
    out.daily_risk.resize(n_days, n_models);
    out.mean_relative_risk = Eigen::VectorXd::Zero(n_models);
    out.mean_rank = Eigen::VectorXd::Zero(n_models);
    out.first_place_count = Eigen::VectorXi::Zero(n_models);

    int included = 0;
    std::vector<int> order(static_cast<size_t>(n_models));
    for (int k = 0; k < n_days; ++k) {
        for (int m = 0; m < n_models; ++m)
            out.daily_risk(k, m) =
                (panel.days[static_cast<size_t>(k)] * models[static_cast<size_t>(m)][static_cast<size_t>(k)])
                    .squaredNorm();
        double denom =
            (panel.days[static_cast<size_t>(k)] * ex_post[static_cast<size_t>(k)]).squaredNorm();
        if (denom < kZeroVar) {
            out.excluded_days.push_back(k);
        } else {
            ++included;
            out.mean_relative_risk += out.daily_risk.row(k).transpose() / denom;
        }

        // tie-adjusted ranks: every run of equal risks shares its average rank
        for (int m = 0; m < n_models; ++m) order[static_cast<size_t>(m)] = m;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return out.daily_risk(k, a) < out.daily_risk(k, b);
        });
        for (int lo = 0; lo < n_models;) {
            int hi = lo;
            while (hi + 1 < n_models &&
                   out.daily_risk(k, order[static_cast<size_t>(hi + 1)]) ==
                       out.daily_risk(k, order[static_cast<size_t>(lo)]))
                ++hi;
            double shared = 0.5 * (lo + hi) + 1.0;
            for (int q = lo; q <= hi; ++q)
                out.mean_rank(order[static_cast<size_t>(q)]) += shared;
            lo = hi + 1;
        }
        double best = out.daily_risk.row(k).minCoeff();
        for (int m = 0; m < n_models; ++m)
            if (out.daily_risk(k, m) == best) ++out.first_place_count(m);
    }
    out.mean_relative_risk /= included > 0 ? included : 1;
    if (included == 0) out.mean_relative_risk.setConstant(kNaN);
    out.mean_rank /= static_cast<double>(n_days);
    return out;
}

DmResult dm_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                 bool one_sided, int nw_lag) {
    const Eigen::Index n = a.size();
    if (b.size() != n)
        throw std::invalid_argument("dm_test: loss series lengths differ");
    if (n < 10)
        throw std::invalid_argument("dm_test: need at least 10 observations");
    if (nw_lag < 0 || nw_lag >= n)
        throw std::invalid_argument("dm_test: lag out of range");

    Eigen::VectorXd dev = a - b;
    const double mean = dev.mean();
    dev.array() -= mean;
    double var = dev.squaredNorm() / static_cast<double>(n);
    for (int j = 1; j <= nw_lag; ++j) {
        double gamma =
            dev.tail(n - j).dot(dev.head(n - j)) / static_cast<double>(n);
        var += 2.0 * (1.0 - j / (nw_lag + 1.0)) * gamma;
    }
    if (var < kZeroVar)
        throw DegenerateVariance("dm_test: loss differences have zero variance");

    DmResult out;
    out.statistic = mean / std::sqrt(var / static_cast<double>(n));
    out.p_value = one_sided ? 1.0 - normal_cdf(out.statistic)
                            : 2.0 * (1.0 - normal_cdf(std::abs(out.statistic)));
    return out;
}

double sharpe(const WeightPath& weights, const Eigen::MatrixXd& close_returns,
              const Eigen::VectorXd& risk_free) {
    const Eigen::Index n = close_returns.rows();
    if (n < 2)
        throw std::invalid_argument("sharpe: need at least two returns");
    if (static_cast<Eigen::Index>(weights.size()) != n || risk_free.size() != n)
        throw std::invalid_argument("sharpe: series are not aligned");
    Eigen::VectorXd excess(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights[static_cast<size_t>(i)].size() != close_returns.cols())
            throw std::invalid_argument("sharpe: weight dimension mismatch");
        excess(i) =
            weights[static_cast<size_t>(i)].dot(close_returns.row(i)) - risk_free(i);
    }
    const double mean = excess.mean();
    excess.array() -= mean;
    const double sd =
        std::sqrt(excess.squaredNorm() / static_cast<double>(n - 1));
    if (sd < kZeroVar)
        throw DegenerateVariance("sharpe: excess returns have zero variance");
    return mean / sd;
}

AcfResult weight_acf(const Eigen::MatrixXd& weights, int max_lag) {
    const int n = static_cast<int>(weights.rows());
    const int p = static_cast<int>(weights.cols());
    if (max_lag < 1)
        throw std::invalid_argument("weight_acf: max lag must be positive");
    if (n <= max_lag + 1)
        throw std::invalid_argument("weight_acf: series no longer than max lag + 1");
    AcfResult out;
    out.band = 1.96 / std::sqrt(static_cast<double>(n));
    out.acf.resize(max_lag + 1, p);
    out.acf.row(0).setOnes();
    out.constant.assign(static_cast<size_t>(p), 0);
    for (int j = 0; j < p; ++j) {
        Eigen::VectorXd c = weights.col(j).array() - weights.col(j).mean();
        double denom = c.squaredNorm();
        if (denom < kZeroVar) {
            out.constant[static_cast<size_t>(j)] = 1;
            out.acf.col(j).tail(max_lag).setConstant(kNaN);
            continue;
        }
        for (int lag = 1; lag <= max_lag; ++lag)
            out.acf(lag, j) = c.tail(n - lag).dot(c.head(n - lag)) / denom;
    }
    return out;
}

double mean_l2(const WeightPath& a, const WeightPath& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("mean_l2: paths must match and be non-empty");
    double total = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        if (a[k].size() != b[k].size())
            throw std::invalid_argument("mean_l2: weight dimension mismatch");
        total += (a[k] - b[k]).norm();
    }
    return total / static_cast<double>(a.size());
}

MetricReport build_report(const std::vector<std::string>& names,
                          const std::vector<WeightPath>& models,
                          const WeightPath& ex_post, const ReturnPanel& panel,
                          const Eigen::MatrixXd* close_returns,
                          const Eigen::VectorXd* risk_free) {
    if (names.size() != models.size())
        throw std::invalid_argument("build_report: one name per model");
    const int n_models = static_cast<int>(models.size());
    const int n_days = static_cast<int>(panel.days.size());

    MetricReport report;
    report.model = names;
    RelativeRiskStats stats = relative_risk_and_rank(models, ex_post, panel);
    report.mean_relative_risk = stats.mean_relative_risk;
    report.mean_rank = stats.mean_rank;
    report.first_place_count = stats.first_place_count;
    report.excluded_days = stats.excluded_days;

    report.annualized_risk.resize(n_models);
    report.mean_l2.resize(n_models);
    report.sharpe = Eigen::VectorXd::Constant(n_models, kNaN);
    for (int m = 0; m < n_models; ++m) {
        report.annualized_risk(m) = annualized_risk(models[static_cast<size_t>(m)], panel);
        report.mean_l2(m) = mean_l2(models[static_cast<size_t>(m)], ex_post);
    }

    if (close_returns != nullptr) {
        // a close-to-close matrix is one row short of the day count; pair row
        // k with the portfolio held on day k + 1 in that case
        const Eigen::Index rows = close_returns->rows();
        size_t offset = 0;
        if (rows == n_days - 1)
            offset = 1;
        else if (rows != n_days)
            throw std::invalid_argument("build_report: close returns misaligned");
        Eigen::VectorXd rf =
            risk_free != nullptr ? *risk_free : Eigen::VectorXd::Zero(rows);
        for (int m = 0; m < n_models; ++m) {
            WeightPath held(models[static_cast<size_t>(m)].begin() +
                                static_cast<std::ptrdiff_t>(offset),
                            models[static_cast<size_t>(m)].end());
            try {
                report.sharpe(m) = sharpe(held, *close_returns, rf);
            } catch (const DegenerateVariance&) {
                report.sharpe(m) = kNaN;
            }
        }
    }

    report.dm_pvalues = Eigen::MatrixXd::Constant(n_models, n_models, kNaN);
    for (int i = 0; i < n_models; ++i)
        for (int j = 0; j < n_models; ++j) {
            if (i == j || n_days < 10) continue;
            try {
                report.dm_pvalues(i, j) =
                    dm_test(stats.daily_risk.col(i), stats.daily_risk.col(j)).p_value;
            } catch (const DegenerateVariance&) {
            }
        }
    return report;
}

} // namespace drmvp::eval
