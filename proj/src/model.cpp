#include "drmvp/model.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "drmvp/util.hpp"

namespace drmvp::model {

namespace {

constexpr double kZeroCoef = 1e-12;
constexpr double kLossFloor = 1e-300;

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

using RowBlock = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// one horizon block of feature columns for response row d (absolute day index)
void fill_lag_block(const Eigen::MatrixXd& weights, const LagSpec& spec,
                    int h_idx, int day, RowBlock out) {
    const int h = spec.horizons[static_cast<size_t>(h_idx)];
    if (spec.kind == LagSpec::AR) {
        out = weights.row(day - h);
    } else {
        out = weights.block(day - h, 0, h, weights.cols()).colwise().mean();
    }
}

struct Standardized {
    Eigen::MatrixXd xt;       // centered, unit population sd per column
    Eigen::VectorXd means;
    Eigen::VectorXd sds;      // 1.0 where the raw column is constant
};

Standardized standardize(const Eigen::MatrixXd& x) {
    Standardized s;
    const Eigen::Index n = x.rows();
    s.means = x.colwise().mean();
    s.xt = x.rowwise() - s.means.transpose();
    s.sds = (s.xt.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
    for (Eigen::Index j = 0; j < s.sds.size(); ++j) {
        if (s.sds(j) <= 0.0) s.sds(j) = 1.0;
        s.xt.col(j) /= s.sds(j);
    }
    return s;
}

struct CdState {
    Eigen::VectorXd theta;    // standardized scale
    double intercept = 0.0;   // standardized scale
    bool converged = true;
};

#ifndef NDEBUG
double cd_objective(const Eigen::VectorXd& r, const CdState& st, double lambda,
                    bool penalize_intercept) {
    double pen = st.theta.cwiseAbs().sum();
    if (penalize_intercept) pen += std::abs(st.intercept);
    return r.squaredNorm() / static_cast<double>(r.size()) + lambda * pen;
}
#endif

// cyclic coordinate descent; st carries the warm start in and the solution out
void cd_solve(const Standardized& s, const Eigen::VectorXd& y, double lambda,
              bool penalize_intercept, const LassoConfig& cfg, CdState& st,
              Eigen::VectorXd& r) {
    const Eigen::Index n = y.size();
    const Eigen::Index big_p = s.xt.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    r = y - s.xt * st.theta;
    r.array() -= st.intercept;
    st.converged = true;
#ifndef NDEBUG
    double prev_obj = cd_objective(r, st, lambda, penalize_intercept);
#endif
    int sweep = 0;
    for (; sweep < cfg.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        // intercept coordinate first; its column is all ones, 1'1 = n
        {
            double z = r.sum() * inv_n + st.intercept;
            double next = penalize_intercept ? soft_threshold(z, lambda / 2.0) : z;
            double delta = next - st.intercept;
            if (delta != 0.0) {
                r.array() -= delta;
                st.intercept = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        for (Eigen::Index j = 0; j < big_p; ++j) {
            double z = s.xt.col(j).dot(r) * inv_n + st.theta(j);
            double next = soft_threshold(z, lambda / 2.0);
            double delta = next - st.theta(j);
            if (delta != 0.0) {
                r -= delta * s.xt.col(j);
                st.theta(j) = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
#ifndef NDEBUG
        double obj = cd_objective(r, st, lambda, penalize_intercept);
        assert(obj <= prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)));
        prev_obj = obj;
#endif
        if (max_delta < cfg.tol) break;
    }
    if (sweep == cfg.max_sweeps) st.converged = false;
}

// worst stationarity violation of the penalized problem, standardized scale
double kkt_residual_of(const Standardized& s, const Eigen::VectorXd& r,
                       const CdState& st, double lambda, bool penalize_intercept) {
    const double inv_n = 1.0 / static_cast<double>(r.size());
    double worst = 0.0;
    auto coordinate = [&](double grad, double coef, bool penalized) {
        if (!penalized)
            worst = std::max(worst, std::abs(grad));
        else if (std::abs(coef) < kZeroCoef)
            worst = std::max(worst, std::abs(grad) - lambda);
        else
            worst = std::max(worst, std::abs(grad + lambda * (coef > 0 ? 1.0 : -1.0)));
    };
    coordinate(-2.0 * inv_n * r.sum(), st.intercept, penalize_intercept);
    for (Eigen::Index j = 0; j < s.xt.cols(); ++j)
        coordinate(-2.0 * inv_n * s.xt.col(j).dot(r), st.theta(j), true);
    return worst;
}

LassoFit package_fit(const Standardized& s, const CdState& st,
                     const Eigen::VectorXd& r, double lambda,
                     bool penalize_intercept) {
    LassoFit out;
    out.lambda = lambda;
    out.converged = st.converged;
    out.theta = st.theta.cwiseQuotient(s.sds);
    out.intercept = st.intercept - out.theta.dot(s.means);
    out.loss = r.squaredNorm() / static_cast<double>(r.size());
    out.kkt_residual = kkt_residual_of(s, r, st, lambda, penalize_intercept);
    out.residuals = r;
    out.nonzero_count = 0;
    for (Eigen::Index j = 0; j < st.theta.size(); ++j)
        if (std::abs(st.theta(j)) >= kZeroCoef) ++out.nonzero_count;
    if (penalize_intercept && std::abs(st.intercept) >= kZeroCoef) ++out.nonzero_count;
    return out;
}

} // namespace

FeaturePanel build_features(const Eigen::MatrixXd& weights, const LagSpec& spec) {
    spec.validate();
    const int n_days = static_cast<int>(weights.rows());
    const int p = static_cast<int>(weights.cols());
    const int lag = spec.max_lag();
    if (n_days <= lag)
        throw InsufficientHistory("build_features: need more days than the max lag");
    const int n_lags = static_cast<int>(spec.horizons.size());

    FeaturePanel panel;
    panel.spec = spec;
    panel.p = p;
    panel.max_lag = lag;
    panel.n = n_days - lag;
    panel.P = p * n_lags;
    panel.x.resize(panel.n, panel.P);
    panel.y.resize(panel.n, p);
    for (int row = 0; row < panel.n; ++row) {
        const int day = lag + row;
        panel.y.row(row) = weights.row(day);
        for (int h = 0; h < n_lags; ++h)
            fill_lag_block(weights, spec, h, day, panel.x.row(row).segment(h * p, p));
    }
    return panel;
}

Eigen::VectorXd latest_features(const Eigen::MatrixXd& weights, const LagSpec& spec) {
    spec.validate();
    const int n_days = static_cast<int>(weights.rows());
    const int p = static_cast<int>(weights.cols());
    const int lag = spec.max_lag();
    if (n_days < lag)
        throw InsufficientHistory("latest_features: need at least max lag days");
    const int n_lags = static_cast<int>(spec.horizons.size());
    Eigen::RowVectorXd row(p * n_lags);
    for (int h = 0; h < n_lags; ++h)
        fill_lag_block(weights, spec, h, n_days, row.segment(h * p, p));
    return row.transpose();
}

LassoFit lasso_fit(const FeaturePanel& panel, int asset, const LassoConfig& cfg) {
    if (asset < 0 || asset >= panel.p)
        throw std::invalid_argument("lasso_fit: asset index out of range");
    if (cfg.lambda < 0.0 || !std::isfinite(cfg.lambda))
        throw std::invalid_argument("lasso_fit: lambda must be >= 0");
    Standardized s = standardize(panel.x);
    CdState st;
    st.theta = Eigen::VectorXd::Zero(panel.P);
    Eigen::VectorXd r;
    cd_solve(s, panel.y.col(asset), cfg.lambda, cfg.penalize_intercept, cfg, st, r);
    return package_fit(s, st, r, cfg.lambda, cfg.penalize_intercept);
}

double lambda_max(const FeaturePanel& panel, int asset) {
    if (asset < 0 || asset >= panel.p)
        throw std::invalid_argument("lambda_max: asset index out of range");
    Standardized s = standardize(panel.x);
    Eigen::VectorXd y = panel.y.col(asset);
    Eigen::VectorXd centered = y.array() - y.mean();
    return 2.0 / static_cast<double>(panel.n) *
           (s.xt.transpose() * centered).cwiseAbs().maxCoeff();
}

std::vector<double> lambda_grid() {
    std::vector<double> grid(100);
    const double lo = std::log(1e-6), hi = std::log(10.0);
    for (int i = 0; i < 100; ++i)
        grid[static_cast<size_t>(i)] = std::exp(lo + (hi - lo) * i / 99.0);
    return grid;
}

double ebic_value(double loss, int nonzero, int n, int big_p) {
    return static_cast<double>(n) * std::log(loss) +
           nonzero * std::log(static_cast<double>(n)) +
           2.0 * nonzero * 0.5 * std::log(static_cast<double>(big_p));
}

EbicChoice ebic_select(const FeaturePanel& panel, int asset,
                       const std::vector<double>& grid, bool penalize_intercept) {
    if (grid.empty())
        throw std::invalid_argument("ebic_select: empty grid");
    if (asset < 0 || asset >= panel.p)
        throw std::invalid_argument("ebic_select: asset index out of range");
    Standardized s = standardize(panel.x);
    const Eigen::VectorXd y = panel.y.col(asset);
    LassoConfig cfg;
    cfg.penalize_intercept = penalize_intercept;

    CdState st;
    st.theta = Eigen::VectorXd::Zero(panel.P);
    Eigen::VectorXd r;
    EbicChoice best;
    double best_ebic = std::numeric_limits<double>::infinity();
    bool found = false;
    // descending path keeps the warm starts cheap; ties keep the first
    // (larger, sparser) lambda because replacement needs strict improvement
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        cfg.lambda = *it;
        cd_solve(s, y, cfg.lambda, penalize_intercept, cfg, st, r);
        LassoFit fit = package_fit(s, st, r, cfg.lambda, penalize_intercept);
        bool floored = fit.loss <= kLossFloor;
        double ebic =
            ebic_value(floored ? kLossFloor : fit.loss, fit.nonzero_count, panel.n, panel.P);
        if (!found || ebic < best_ebic - 1e-10) {
            best_ebic = ebic;
            best.fit = std::move(fit);
            best.ebic = ebic;
            best.overfit = floored;
            found = true;
        }
    }
    return best;
}

DrmvpFit fit_all(const FeaturePanel& panel, const std::vector<double>& grid,
                 bool penalize_intercept, int jobs) {
    DrmvpFit out;
    out.spec = panel.spec;
    out.assets.resize(static_cast<size_t>(panel.p));
    parallel_for(jobs, panel.p, [&](int i) {
        out.assets[static_cast<size_t>(i)] =
            ebic_select(panel, i, grid, penalize_intercept);
    });
    return out;
}

Prediction predict_g(const DrmvpFit& fit, const Eigen::VectorXd& features) {
    const int p = static_cast<int>(fit.assets.size());
    if (p == 0) throw std::invalid_argument("predict_g: no fitted assets");
    Prediction out;
    out.g_hat.resize(p);
    for (int i = 0; i < p; ++i) {
        const LassoFit& f = fit.assets[static_cast<size_t>(i)].fit;
        if (f.theta.size() != features.size())
            throw std::invalid_argument("predict_g: feature length mismatch");
        out.g_hat(i) = f.intercept + f.theta.dot(features);
    }
    double total = out.g_hat.sum();
    if (std::abs(total) < 1e-12)
        throw DegenerateNormalizer("predict_g: 1'g_hat is numerically zero");
    out.w_bar = out.g_hat / total;
    return out;
}

OlsFit har_ols_baseline(const FeaturePanel& panel, int asset) {
    if (asset < 0 || asset >= panel.p)
        throw std::invalid_argument("har_ols_baseline: asset index out of range");
    const int n_lags = static_cast<int>(panel.spec.horizons.size());
    if (panel.n < n_lags + 2)
        throw InsufficientHistory("har_ols_baseline: need more rows than coefficients");
    Eigen::MatrixXd design(panel.n, n_lags + 1);
    design.col(0).setOnes();
    for (int h = 0; h < n_lags; ++h)
        design.col(h + 1) = panel.x.col(h * panel.p + asset);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    OlsFit out;
    out.coef = cod.solve(panel.y.col(asset));
    out.rank_deficient = cod.rank() < design.cols();
    out.residuals = panel.y.col(asset) - design * out.coef;
    return out;
}

BacktestResult rolling_backtest(const Eigen::MatrixXd& weights,
                                const BacktestConfig& cfg) {
    cfg.spec.validate();
    const int n_days = static_cast<int>(weights.rows());
    const int p = static_cast<int>(weights.cols());
    if (cfg.window < 1)
        throw std::invalid_argument("rolling_backtest: window must be >= 1");
    if (n_days < cfg.window + 1)
        throw InsufficientHistory("rolling_backtest: no out-of-sample day");
    const bool fits = cfg.kind != BacktestModel::Martingale;
    if (fits && cfg.window - cfg.spec.max_lag() < 10)
        throw InsufficientHistory(
            "rolling_backtest: window leaves fewer than 10 training rows");

    const int n_oos = n_days - cfg.window;
    std::vector<Eigen::VectorXd> g_hat(static_cast<size_t>(n_oos));
    std::vector<char> degenerate(static_cast<size_t>(n_oos), 0);

    parallel_for(cfg.jobs, n_oos, [&](int k) {
        const int t = cfg.window + k;
        Eigen::MatrixXd train = weights.block(t - cfg.window, 0, cfg.window, p);
        Eigen::VectorXd g(p);
        if (cfg.kind == BacktestModel::Martingale) {
            g = weights.row(t - 1);
        } else {
            FeaturePanel panel = build_features(train, cfg.spec);
            Eigen::VectorXd feats = latest_features(train, cfg.spec);
            if (cfg.kind == BacktestModel::DrmvpLasso) {
                DrmvpFit fit =
                    fit_all(panel, lambda_grid(), cfg.penalize_intercept, 1);
                for (int i = 0; i < p; ++i) {
                    const LassoFit& f = fit.assets[static_cast<size_t>(i)].fit;
                    g(i) = f.intercept + f.theta.dot(feats);
                }
            } else {
                const int n_lags = static_cast<int>(cfg.spec.horizons.size());
                for (int i = 0; i < p; ++i) {
                    OlsFit f = har_ols_baseline(panel, i);
                    double v = f.coef(0);
                    for (int h = 0; h < n_lags; ++h)
                        v += f.coef(h + 1) * feats(h * p + i);
                    g(i) = v;
                }
            }
        }
        g_hat[static_cast<size_t>(k)] = g;
        degenerate[static_cast<size_t>(k)] = std::abs(g.sum()) < 1e-12 ? 1 : 0;
    });

    // normalization and the fallback chain are sequential by construction
    BacktestResult out;
    out.days.resize(static_cast<size_t>(n_oos));
    Eigen::VectorXd prev;
    {
        double s0 = weights.row(cfg.window - 1).sum();
        if (std::abs(s0) < 1e-12)
            prev = Eigen::VectorXd::Constant(p, 1.0 / p);
        else
            prev = weights.row(cfg.window - 1).transpose() / s0;
    }
    for (int k = 0; k < n_oos; ++k) {
        BacktestDay& day = out.days[static_cast<size_t>(k)];
        day.day = cfg.window + k;
        day.g_hat = g_hat[static_cast<size_t>(k)];
        if (degenerate[static_cast<size_t>(k)]) {
            day.fallback = true;
            day.w_bar = prev;
            out.warnings.push_back("day " + std::to_string(day.day) +
                                   ": degenerate normalizer, previous portfolio reused");
        } else {
            day.w_bar = day.g_hat / day.g_hat.sum();
        }
        prev = day.w_bar;
    }
    return out;
}

} // namespace drmvp::model
