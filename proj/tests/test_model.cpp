#include "doctest.h"
#include "drmvp/market_sim.hpp"
#include "drmvp/model.hpp"
#include "drmvp/rng.hpp"

#include <cmath>
#include <vector>

using namespace drmvp;
using model::FeaturePanel;
using model::LagSpec;

namespace {

Eigen::MatrixXd random_weights(int n_days, int p, Rng& rng, double offset = 1.0) {
    Eigen::MatrixXd w(n_days, p);
    for (int d = 0; d < n_days; ++d)
        for (int j = 0; j < p; ++j) w(d, j) = offset + 0.3 * rng.normal();
    return w;
}

// regression fixtures that bypass the lag construction
FeaturePanel manual_panel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    FeaturePanel panel;
    panel.x = x;
    panel.y = y;
    panel.n = static_cast<int>(x.rows());
    panel.P = static_cast<int>(x.cols());
    panel.p = static_cast<int>(y.cols());
    panel.max_lag = 0;
    return panel;
}

double population_sd(const Eigen::VectorXd& v) {
    Eigen::VectorXd c = v.array() - v.mean();
    return std::sqrt(c.squaredNorm() / static_cast<double>(v.size()));
}

double soft(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

} // namespace

TEST_CASE("feature rows are trailing means taken strictly before the response day") {
    // scalar series 1..6 with a single 5-day horizon: the one usable response
    // day is the last one, and its feature is (1+2+3+4+5)/5 = 3
    Eigen::MatrixXd w(6, 1);
    w << 1, 2, 3, 4, 5, 6;
    LagSpec spec{LagSpec::HAR, {5}};
    FeaturePanel panel = model::build_features(w, spec);
    CHECK(panel.n == 1);
    CHECK(panel.P == 1);
    CHECK(panel.max_lag == 5);
    CHECK(panel.y(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(panel.x(0, 0) == doctest::Approx(3.0).epsilon(1e-15));

    // a 1-day horizon is the same thing as an AR lag of one
    Rng rng(31, 0);
    Eigen::MatrixXd w2 = random_weights(8, 2, rng);
    FeaturePanel har1 = model::build_features(w2, LagSpec{LagSpec::HAR, {1}});
    FeaturePanel ar1 = model::build_features(w2, LagSpec{LagSpec::AR, {1}});
    CHECK((har1.x - ar1.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((har1.y - ar1.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lag-two panel loses exactly the first max-lag days and lays columns out by horizon") {
    Rng rng(32, 0);
    Eigen::MatrixXd w = random_weights(10, 2, rng);
    LagSpec spec{LagSpec::AR, {1, 2}};
    FeaturePanel panel = model::build_features(w, spec);
    CHECK(panel.n == 8);
    CHECK(panel.P == 4);
    CHECK(panel.p == 2);
    for (int row = 0; row < panel.n; ++row) {
        const int day = 2 + row;
        for (int j = 0; j < 2; ++j) {
            CHECK(panel.y(row, j) == w(day, j));
            CHECK(panel.x(row, 0 * 2 + j) == w(day - 1, j));   // lag-1 block first
            CHECK(panel.x(row, 1 * 2 + j) == w(day - 2, j));   // then the lag-2 block
        }
    }

    Eigen::VectorXd latest = model::latest_features(w, spec);
    CHECK(latest.size() == 4);
    CHECK(latest(0) == w(9, 0));
    CHECK(latest(1) == w(9, 1));
    CHECK(latest(2) == w(8, 0));
    CHECK(latest(3) == w(8, 1));

    Eigen::VectorXd latest_mean = model::latest_features(w, LagSpec{LagSpec::HAR, {2}});
    CHECK(latest_mean(0) == doctest::Approx(0.5 * (w(8, 0) + w(9, 0))).epsilon(1e-15));
}

TEST_CASE("feature construction refuses histories no longer than the max lag") {
    Rng rng(33, 0);
    Eigen::MatrixXd w = random_weights(22, 2, rng);
    LagSpec preset{LagSpec::HAR, {1, 5, 22}};
    CHECK_THROWS_AS(model::build_features(w, preset), model::InsufficientHistory);
    CHECK_THROWS_AS(model::latest_features(random_weights(21, 2, rng), preset),
                    model::InsufficientHistory);

    Eigen::MatrixXd w23 = random_weights(23, 2, rng);
    FeaturePanel panel = model::build_features(w23, preset);
    CHECK(panel.n == 1);
    CHECK(model::latest_features(w23, preset).size() == 6);
}

TEST_CASE("unpenalized fit matches the normal equations") {
    Rng rng(34, 0);
    const int n = 60, big_p = 4;
    Eigen::MatrixXd x(n, big_p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < big_p; ++j) x(i, j) = rng.normal() + 0.5 * j;
        y(i) = 0.7 + 1.5 * x(i, 0) - 0.8 * x(i, 2) + 0.1 * rng.normal();
    }
    FeaturePanel panel = manual_panel(x, y);

    Eigen::MatrixXd design(n, big_p + 1);
    design.col(0).setOnes();
    design.rightCols(big_p) = x;
    Eigen::VectorXd ols =
        (design.transpose() * design).ldlt().solve(design.transpose() * y);

    model::LassoConfig cfg;
    cfg.lambda = 0.0;
    model::LassoFit fit = model::lasso_fit(panel, 0, cfg);
    CHECK(fit.converged);
    CHECK(fit.intercept == doctest::Approx(ols(0)).epsilon(1e-6));
    for (int j = 0; j < big_p; ++j)
        CHECK(fit.theta(j) == doctest::Approx(ols(j + 1)).epsilon(1e-6));
    double ols_loss = (y - design * ols).squaredNorm() / n;
    CHECK(fit.loss == doctest::Approx(ols_loss).epsilon(1e-9));
    CHECK(fit.kkt_residual <= 1e-6);
}

TEST_CASE("single-predictor fit equals the closed-form soft threshold") {
    Rng rng(35, 0);
    const int n = 40;
    Eigen::VectorXd x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x(i) = 1.0 + 2.0 * rng.normal();
        y(i) = 0.5 + 0.8 * x(i) + 0.2 * rng.normal();
    }
    FeaturePanel panel = manual_panel(x, y);

    const double m = x.mean();
    const double s = population_sd(x);
    Eigen::VectorXd z = (x.array() - m) / s;
    const double y_bar = y.mean();

    for (double lambda : {0.05, 0.2, 5.0}) {
        // with a free intercept and a centered predictor the optimum is
        // beta0 = mean(y), theta_std = ST(z'y/n, lambda/2)
        double theta_std = soft(z.dot(y) / n, lambda / 2.0);
        model::LassoConfig cfg;
        cfg.lambda = lambda;
        cfg.penalize_intercept = false;
        model::LassoFit fit = model::lasso_fit(panel, 0, cfg);
        CHECK(fit.theta(0) == doctest::Approx(theta_std / s).epsilon(1e-8));
        CHECK(fit.intercept ==
              doctest::Approx(y_bar - theta_std * m / s).epsilon(1e-8));
        if (theta_std == 0.0) {
            CHECK(fit.theta(0) == 0.0);
            CHECK(fit.nonzero_count == 0);
        }
    }
}

TEST_CASE("the penalty boundary kills every slope") {
    Rng rng(36, 0);
    const int n = 50, big_p = 6;
    Eigen::MatrixXd x(n, big_p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < big_p; ++j) x(i, j) = rng.normal();
        y(i) = 0.3 + x(i, 1) - 0.5 * x(i, 4) + 0.1 * rng.normal();
    }
    FeaturePanel panel = manual_panel(x, y);
    const double lam_max = model::lambda_max(panel, 0);
    CHECK(lam_max > 0.0);

    for (bool penalize : {true, false}) {
        model::LassoConfig cfg;
        cfg.penalize_intercept = penalize;

        cfg.lambda = lam_max;
        model::LassoFit at = model::lasso_fit(panel, 0, cfg);
        CHECK(at.theta.cwiseAbs().maxCoeff() <= 1e-10);
        bool intercept_active = penalize && std::abs(at.intercept) >= 1e-12;
        CHECK(at.nonzero_count == (intercept_active ? 1 : 0));

        cfg.lambda = lam_max * (1.0 + 1e-9);
        model::LassoFit above = model::lasso_fit(panel, 0, cfg);
        CHECK(above.theta.cwiseAbs().maxCoeff() == 0.0);

        cfg.lambda = 0.98 * lam_max;
        model::LassoFit below = model::lasso_fit(panel, 0, cfg);
        CHECK(below.theta.cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("stationarity certificate holds on tuned fits") {
    Rng rng(37, 0);
    Eigen::MatrixXd w = random_weights(42, 3, rng);
    FeaturePanel panel = model::build_features(w, LagSpec{LagSpec::AR, {1, 2}});
    for (int asset = 0; asset < 3; ++asset) {
        model::EbicChoice choice =
            model::ebic_select(panel, asset, model::lambda_grid());
        CHECK(choice.fit.converged);
        CHECK(choice.fit.kkt_residual <= 1e-6);
        CHECK_FALSE(choice.overfit);
    }

    model::LassoConfig cfg;
    cfg.lambda = 0.3;
    CHECK(model::lasso_fit(panel, 1, cfg).kkt_residual <= 1e-6);
}

TEST_CASE("information criterion arithmetic") {
    // 202*log(0.01) + 5*log(202) + 2*5*0.5*log(10000), evaluated by hand
    CHECK(model::ebic_value(0.01, 5, 202, 10000) ==
          doctest::Approx(-857.6513372227075).epsilon(1e-12));
    // at equal loss the sparser model always scores lower
    CHECK(model::ebic_value(0.01, 3, 202, 10000) <
          model::ebic_value(0.01, 5, 202, 10000));
    CHECK(model::ebic_value(0.01, 0, 202, 10000) ==
          doctest::Approx(202.0 * std::log(0.01)).epsilon(1e-12));
}

TEST_CASE("criterion selection: singleton grids, ties, and the degenerate-grid guard") {
    Rng rng(38, 0);
    Eigen::MatrixXd w = random_weights(30, 2, rng);
    FeaturePanel panel = model::build_features(w, LagSpec{LagSpec::AR, {1}});

    model::EbicChoice single = model::ebic_select(panel, 0, {0.5});
    CHECK(single.fit.lambda == 0.5);

    // both grid points sit above the penalty boundary, so the fits and their
    // scores coincide; the tie must resolve to the larger lambda
    const double lam_max = model::lambda_max(panel, 0);
    model::EbicChoice tied =
        model::ebic_select(panel, 0, {2.0 * lam_max, 4.0 * lam_max}, false);
    CHECK(tied.fit.lambda == 4.0 * lam_max);
    CHECK(tied.fit.nonzero_count == 0);

    CHECK_THROWS_AS(model::ebic_select(panel, 0, {}), std::invalid_argument);
    CHECK_THROWS_AS(model::ebic_select(panel, 5, {0.1}), std::invalid_argument);
}

TEST_CASE("selection is invariant to the ordering of the asset columns") {
    Rng rng(39, 0);
    Eigen::MatrixXd w = random_weights(40, 3, rng);
    const std::vector<int> perm = {1, 2, 0};
    Eigen::MatrixXd wp(40, 3);
    for (int j = 0; j < 3; ++j) wp.col(j) = w.col(perm[static_cast<size_t>(j)]);

    LagSpec spec{LagSpec::AR, {1}};
    FeaturePanel panel = model::build_features(w, spec);
    FeaturePanel panel_p = model::build_features(wp, spec);

    // asset 0 of the permuted panel is asset 1 of the original
    model::EbicChoice a = model::ebic_select(panel, 1, model::lambda_grid());
    model::EbicChoice b = model::ebic_select(panel_p, 0, model::lambda_grid());
    CHECK(a.fit.lambda == b.fit.lambda);
    CHECK(a.fit.loss == doctest::Approx(b.fit.loss).epsilon(1e-9));
    CHECK(a.ebic == doctest::Approx(b.ebic).epsilon(1e-7));
    CHECK(a.fit.intercept == doctest::Approx(b.fit.intercept).epsilon(1e-7));
    for (int j = 0; j < 3; ++j)
        CHECK(b.fit.theta(j) ==
              doctest::Approx(a.fit.theta(perm[static_cast<size_t>(j)])).epsilon(1e-7));
}

TEST_CASE("fitting every asset is deterministic across thread counts") {
    Rng rng(40, 0);
    Eigen::MatrixXd w = random_weights(35, 3, rng);
    FeaturePanel panel = model::build_features(w, LagSpec{LagSpec::AR, {1, 2}});
    model::DrmvpFit one = model::fit_all(panel, model::lambda_grid(), true, 1);
    model::DrmvpFit four = model::fit_all(panel, model::lambda_grid(), true, 4);
    REQUIRE(one.assets.size() == 3);
    REQUIRE(four.assets.size() == 3);
    CHECK(one.spec.kind == panel.spec.kind);
    for (int i = 0; i < 3; ++i) {
        const auto& f1 = one.assets[static_cast<size_t>(i)].fit;
        const auto& f4 = four.assets[static_cast<size_t>(i)].fit;
        CHECK(f1.lambda == f4.lambda);
        CHECK((f1.theta - f4.theta).cwiseAbs().maxCoeff() == 0.0);
        CHECK(f1.intercept == f4.intercept);
    }
}

TEST_CASE("prediction normalizes the fitted numerators") {
    model::DrmvpFit fit;
    fit.assets.resize(2);
    fit.assets[0].fit.theta = Eigen::VectorXd::Zero(2);
    fit.assets[1].fit.theta = Eigen::VectorXd::Zero(2);

    // zero slopes reduce to the stored intercepts, already a portfolio
    fit.assets[0].fit.intercept = 0.6;
    fit.assets[1].fit.intercept = 0.4;
    Eigen::VectorXd feats(2);
    feats << 3.0, 4.0;
    model::Prediction pred = model::predict_g(fit, feats);
    CHECK(pred.w_bar(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(pred.w_bar(1) == doctest::Approx(0.4).epsilon(1e-15));

    // hand dot products: g = (0.1 + 3 + 8, -0.2 + 1.5) = (11.1, 1.3)
    fit.assets[0].fit.intercept = 0.1;
    fit.assets[0].fit.theta << 1.0, 2.0;
    fit.assets[1].fit.intercept = -0.2;
    fit.assets[1].fit.theta << 0.5, 0.0;
    pred = model::predict_g(fit, feats);
    CHECK(pred.g_hat(0) == doctest::Approx(11.1).epsilon(1e-12));
    CHECK(pred.g_hat(1) == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(pred.w_bar(0) == doctest::Approx(11.1 / 12.4).epsilon(1e-12));
    CHECK(pred.w_bar.sum() == doctest::Approx(1.0).epsilon(1e-12));

    // numerators summing to zero cannot be normalized
    fit.assets[0].fit.theta.setZero();
    fit.assets[1].fit.theta.setZero();
    fit.assets[0].fit.intercept = 0.5;
    fit.assets[1].fit.intercept = -0.5;
    CHECK_THROWS_AS(model::predict_g(fit, feats), model::DegenerateNormalizer);

    Eigen::VectorXd short_feats(1);
    short_feats << 1.0;
    fit.assets[0].fit.intercept = 0.6;
    CHECK_THROWS_AS(model::predict_g(fit, short_feats), std::invalid_argument);
}

TEST_CASE("own-lag least squares flags a constant series and reproduces it") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(30, 2, 0.7);
    FeaturePanel panel = model::build_features(w, LagSpec{LagSpec::HAR, {1, 5, 22}});
    model::OlsFit fit = model::har_ols_baseline(panel, 0);
    CHECK(fit.rank_deficient);
    CHECK(fit.residuals.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(fit.coef.size() == 4);
}

TEST_CASE("own-lag least squares recovers an exact recursion and ignores other assets") {
    // asset 0 follows w_d = 0.1 + 0.5 w_{d-1} + 0.2 mean_5 + 0.1 mean_22
    // exactly; asset 1 is unrelated noise and must not leak into the fit
    Rng rng(41, 0);
    const int n_days = 60;
    Eigen::MatrixXd w(n_days, 2);
    for (int d = 0; d < 22; ++d) {
        w(d, 0) = 0.5 + 0.1 * rng.normal();
        w(d, 1) = rng.normal();
    }
    for (int d = 22; d < n_days; ++d) {
        double mean5 = w.block(d - 5, 0, 5, 1).mean();
        double mean22 = w.block(d - 22, 0, 22, 1).mean();
        w(d, 0) = 0.1 + 0.5 * w(d - 1, 0) + 0.2 * mean5 + 0.1 * mean22;
        w(d, 1) = rng.normal();
    }
    FeaturePanel panel = model::build_features(w, LagSpec{LagSpec::HAR, {1, 5, 22}});
    model::OlsFit fit = model::har_ols_baseline(panel, 0);
    CHECK_FALSE(fit.rank_deficient);
    CHECK(fit.residuals.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(fit.coef(0) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(fit.coef(1) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(fit.coef(2) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(fit.coef(3) == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("a window one day short of the sample yields exactly one prediction") {
    Rng rng(42, 0);
    Eigen::MatrixXd w = random_weights(12, 2, rng);
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1}};
    cfg.window = 11;
    cfg.kind = model::BacktestModel::Martingale;
    model::BacktestResult res = model::rolling_backtest(w, cfg);
    REQUIRE(res.days.size() == 1);
    CHECK(res.days[0].day == 11);
    CHECK((res.days[0].g_hat - w.row(10).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.days[0].w_bar.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(res.days[0].fallback);
}

TEST_CASE("the martingale policy emits yesterday's normalized portfolio") {
    Rng rng(43, 0);
    Eigen::MatrixXd w = random_weights(20, 3, rng);
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1}};
    cfg.window = 5;
    cfg.kind = model::BacktestModel::Martingale;
    model::BacktestResult res = model::rolling_backtest(w, cfg);
    REQUIRE(res.days.size() == 15);
    CHECK(res.warnings.empty());
    for (const auto& day : res.days) {
        Eigen::VectorXd expect = w.row(day.day - 1).transpose();
        expect /= expect.sum();
        CHECK((day.w_bar - expect).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("degenerate numerators fall back to the previous emitted portfolio") {
    Rng rng(44, 0);
    Eigen::MatrixXd w = random_weights(10, 2, rng);
    w.row(7) << 0.5, -0.5;   // day 8 sees a zero-sum numerator
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1}};
    cfg.window = 5;
    cfg.kind = model::BacktestModel::Martingale;
    model::BacktestResult res = model::rolling_backtest(w, cfg);
    REQUIRE(res.days.size() == 5);
    CHECK(res.days[3].day == 8);
    CHECK(res.days[3].fallback);
    CHECK((res.days[3].w_bar - res.days[2].w_bar).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(res.warnings.size() == 1);
    CHECK(res.warnings[0].find("degenerate") != std::string::npos);
    CHECK(res.warnings[0].find("day 8") != std::string::npos);
    for (int k : {0, 1, 2, 4}) CHECK_FALSE(res.days[static_cast<size_t>(k)].fallback);

    // a degenerate first day falls back to the seed portfolio, and a zero-sum
    // seed row degrades to equal weights
    Eigen::MatrixXd w2 = random_weights(8, 2, rng);
    w2.row(4) << 0.5, -0.5;   // both the seed row and day 5's numerator
    cfg.window = 5;
    model::BacktestResult res2 = model::rolling_backtest(w2, cfg);
    REQUIRE(res2.days.size() == 3);
    CHECK(res2.days[0].fallback);
    CHECK(res2.days[0].w_bar(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(res2.days[0].w_bar(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("predictions never look at days after their own") {
    Rng rng(45, 0);
    Eigen::MatrixXd w = random_weights(31, 2, rng);
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1}};
    cfg.window = 29;
    cfg.kind = model::BacktestModel::DrmvpLasso;
    model::BacktestResult base = model::rolling_backtest(w, cfg);
    REQUIRE(base.days.size() == 2);

    Eigen::MatrixXd bumped = w;
    bumped.row(29) *= 3.0;   // inside day 30's window, after day 29's
    model::BacktestResult pert = model::rolling_backtest(bumped, cfg);
    CHECK((base.days[0].g_hat - pert.days[0].g_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((base.days[0].w_bar - pert.days[0].w_bar).cwiseAbs().maxCoeff() == 0.0);
    CHECK((base.days[1].g_hat - pert.days[1].g_hat).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("backtests are deterministic across thread counts and validate their window") {
    Rng rng(46, 0);
    Eigen::MatrixXd w = random_weights(45, 2, rng);
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1}};
    cfg.window = 40;
    cfg.kind = model::BacktestModel::DrmvpLasso;
    model::BacktestResult one = model::rolling_backtest(w, cfg);
    cfg.jobs = 4;
    model::BacktestResult four = model::rolling_backtest(w, cfg);
    REQUIRE(one.days.size() == four.days.size());
    for (size_t k = 0; k < one.days.size(); ++k) {
        CHECK((one.days[k].g_hat - four.days[k].g_hat).cwiseAbs().maxCoeff() == 0.0);
        CHECK((one.days[k].w_bar - four.days[k].w_bar).cwiseAbs().maxCoeff() == 0.0);
    }

    cfg.window = 10;   // leaves 9 training rows for a lag-1 model
    CHECK_THROWS_AS(model::rolling_backtest(w, cfg), model::InsufficientHistory);
    cfg.kind = model::BacktestModel::Martingale;
    CHECK_NOTHROW(model::rolling_backtest(w, cfg));
    cfg.window = 45;   // no out-of-sample day left
    CHECK_THROWS_AS(model::rolling_backtest(w, cfg), model::InsufficientHistory);
}

TEST_CASE("own-lag baseline backtest stays sane on a smooth panel") {
    Rng rng(47, 0);
    Eigen::MatrixXd w = random_weights(40, 2, rng, 2.0);
    model::BacktestConfig cfg;
    cfg.spec = LagSpec{LagSpec::AR, {1, 2}};
    cfg.window = 30;
    cfg.kind = model::BacktestModel::HarOls;
    model::BacktestResult res = model::rolling_backtest(w, cfg);
    REQUIRE(res.days.size() == 10);
    for (const auto& day : res.days) {
        CHECK(day.w_bar.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(day.fallback);
        CHECK(day.g_hat.allFinite());
    }
}

TEST_CASE("normalized weights drift less from their martingale baseline as the panel widens"
          * doctest::timeout(1200)) {
    // the modeling premise behind the persistence baseline: the day-ahead
    // conditional mean of the normalized weight vector approaches the current
    // weight as the cross-section grows
    auto mean_gap = [](int p) {
        const std::vector<unsigned long long> seeds = {101, 102, 103, 104};
        double total = 0.0;
        for (unsigned long long seed : seeds) {
            sim::SimConfig cfg;
            cfg.p = p;
            cfg.days = 40;
            cfg.seed = seed;
            cfg.emit_ticks = false;
            sim::SimOutput out = sim::simulate(cfg);
            Eigen::VectorXd w_last = out.truth.back().w;
            w_last /= w_last.sum();
            Eigen::VectorXd cond = sim::mc_conditional_wbar(
                out.next_inputs, cfg, out.coeffs, 1500, Rng(seed * 7 + 1));
            total += (cond - w_last).cwiseAbs().maxCoeff();
        }
        return total / static_cast<double>(seeds.size());
    };
    double gap10 = mean_gap(10);
    double gap20 = mean_gap(20);
    MESSAGE("mean max-norm martingale gap: p=10 " << gap10 << ", p=20 " << gap20);
    CHECK(gap20 < gap10);
}
