#include "drmvp/realized_vol.hpp"
#include "drmvp/linalg.hpp"
#include "drmvp/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drmvp::rv {

namespace {

double g_weight(double x) { return std::min(x, 1.0 - x); }

int window_for(int m) {
    if (m <= 0) return 0;
    int w = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
    while ((w + 1) * (w + 1) <= m) ++w;   // guard the double sqrt at perfect squares
    while (w > 0 && w * w > m) --w;
    return w;
}

// increment array and its running sums; Q carries index-weighted sums so the
// piecewise-linear pre-averaging weights reduce to range queries
struct IncrementSums {
    std::vector<double> d;
    std::vector<double> P;   // P[k] = sum of d[0..k-1]
    std::vector<double> Q;   // Q[k] = sum of t*d[t] over t < k

    explicit IncrementSums(const std::vector<double>& prices) {
        const int m = static_cast<int>(prices.size()) - 1;
        d.resize(std::max(m, 0));
        P.assign(static_cast<size_t>(std::max(m, 0)) + 1, 0.0);
        Q.assign(static_cast<size_t>(std::max(m, 0)) + 1, 0.0);
        for (int t = 0; t < m; ++t) {
            d[static_cast<size_t>(t)] = prices[static_cast<size_t>(t) + 1] - prices[static_cast<size_t>(t)];
            P[static_cast<size_t>(t) + 1] = P[static_cast<size_t>(t)] + d[static_cast<size_t>(t)];
            Q[static_cast<size_t>(t) + 1] = Q[static_cast<size_t>(t)] + static_cast<double>(t) * d[static_cast<size_t>(t)];
        }
    }

    double sum(int a, int b) const {               // sum of d[a..b], empty if a > b
        return a > b ? 0.0 : P[static_cast<size_t>(b) + 1] - P[static_cast<size_t>(a)];
    }
    double weighted(int a, int b) const {          // sum of t*d[t] for t in [a, b]
        return a > b ? 0.0 : Q[static_cast<size_t>(b) + 1] - Q[static_cast<size_t>(a)];
    }
};

// all pre-averaged window values for one asset: xbar[u] = sum_s g(s/w) d[u+s]
std::vector<double> preaveraged(const IncrementSums& s, int m, int w) {
    const int n_win = m - w + 1;
    const int h = w / 2;
    std::vector<double> xbar(static_cast<size_t>(n_win));
    for (int u = 0; u < n_win; ++u) {
        // rising half g(s/w) = s/w for s <= h, falling half (w-s)/w after
        double rise = s.weighted(u + 1, u + h) - static_cast<double>(u) * s.sum(u + 1, u + h);
        double fall = static_cast<double>(w + u) * s.sum(u + h + 1, u + w - 1)
                      - s.weighted(u + h + 1, u + w - 1);
        xbar[static_cast<size_t>(u)] = (rise + fall) / static_cast<double>(w);
    }
    return xbar;
}

double truncation_level(const std::vector<double>& xbar, int m, int w, const PreAvgConfig& cfg) {
    double ss = 0.0;
    for (double v : xbar) ss += v * v;
    return cfg.trunc_const * std::pow(static_cast<double>(w) / static_cast<double>(m), cfg.trunc_exponent)
           * std::sqrt(ss / static_cast<double>(w));
}

} // namespace

void PreAvgConfig::validate() const {
    if (trunc_const <= 0.0 || trunc_exponent <= 0.0)
        throw std::invalid_argument("PreAvgConfig: truncation constants must be positive");
    // Simpson check that phi matches the actual integral of g^2
    const int n = 4096;
    double integral = 0.0;
    for (int k = 0; k < n; ++k) {
        double a = static_cast<double>(k) / n;
        double b = static_cast<double>(k + 1) / n;
        double ga = g_weight(a), gm = g_weight(0.5 * (a + b)), gb = g_weight(b);
        integral += (ga * ga + 4.0 * gm * gm + gb * gb) * (b - a) / 6.0;
    }
    if (std::abs(integral - phi) > 1e-6)
        throw std::invalid_argument("PreAvgConfig: phi does not match the integral of g^2");
}

SyncedPair pairwise_refresh(const TickSeries& a, const TickSeries& b) {
    SyncedPair out;
    if (a.frac.empty() || b.frac.empty()) return out;

    size_t ia = 0, ib = 0;   // last tick at or before the current refresh time
    double tau = std::max(a.frac.front(), b.frac.front());
    for (;;) {
        while (ia + 1 < a.frac.size() && a.frac[ia + 1] <= tau) ++ia;
        while (ib + 1 < b.frac.size() && b.frac[ib + 1] <= tau) ++ib;
        out.time.push_back(tau);
        out.x.push_back(a.price[ia]);
        out.y.push_back(b.price[ib]);
        if (ia + 1 >= a.frac.size() || ib + 1 >= b.frac.size()) break;
        tau = std::max(a.frac[ia + 1], b.frac[ib + 1]);
    }
    return out;
}

PairEntry jprvm_entry(const SyncedPair& pair, const PreAvgConfig& cfg) {
    cfg.validate();
    PairEntry out;
    out.m = static_cast<int>(pair.time.size()) - 1;
    if (out.m < 0) out.m = 0;
    out.window = window_for(out.m);
    if (out.window < 1 || out.m < 2 * out.window) {
        out.flagged = true;
        return out;
    }
    const int m = out.m, w = out.window;
    const int n_win = m - w + 1;
    const int h = w / 2;

    IncrementSums sx(pair.x), sy(pair.y);
    std::vector<double> xbar = preaveraged(sx, m, w);
    std::vector<double> ybar = preaveraged(sy, m, w);

    // cross-product running sum for the bias correction; the weight
    // (g(s/w) - g((s-1)/w))^2 is 1/w^2 everywhere except one zero step at the
    // peak when w is odd
    std::vector<double> R(static_cast<size_t>(m) + 1, 0.0);
    for (int t = 0; t < m; ++t)
        R[static_cast<size_t>(t) + 1] = R[static_cast<size_t>(t)]
                                        + sx.d[static_cast<size_t>(t)] * sy.d[static_cast<size_t>(t)];
    const bool odd = (w % 2 == 1);

    double vx = 0.0, vy = 0.0;
    if (cfg.jump_robust) {
        vx = truncation_level(xbar, m, w, cfg);
        vy = truncation_level(ybar, m, w, cfg);
    }

    double acc = 0.0;
    const double w2 = static_cast<double>(w) * static_cast<double>(w);
    for (int u = 0; u < n_win; ++u) {
        if (cfg.jump_robust
            && !(std::abs(xbar[static_cast<size_t>(u)]) < vx && std::abs(ybar[static_cast<size_t>(u)]) < vy))
            continue;
        double corr = R[static_cast<size_t>(u + w)] - R[static_cast<size_t>(u)];
        if (odd) corr -= sx.d[static_cast<size_t>(u + h)] * sy.d[static_cast<size_t>(u + h)];
        acc += xbar[static_cast<size_t>(u)] * ybar[static_cast<size_t>(u)] - 0.5 * corr / w2;
    }
    out.value = acc / (static_cast<double>(w) * cfg.phi);
    return out;
}

PairEntry jprvm_entry_reference(const SyncedPair& pair, const PreAvgConfig& cfg) {
    cfg.validate();
    PairEntry out;
    out.m = static_cast<int>(pair.time.size()) - 1;
    if (out.m < 0) out.m = 0;
    out.window = window_for(out.m);
    if (out.window < 1 || out.m < 2 * out.window) {
        out.flagged = true;
        return out;
    }
    const int m = out.m, w = out.window;
    const int n_win = m - w + 1;

    std::vector<double> dx(static_cast<size_t>(m)), dy(static_cast<size_t>(m));
    for (int t = 0; t < m; ++t) {
        dx[static_cast<size_t>(t)] = pair.x[static_cast<size_t>(t) + 1] - pair.x[static_cast<size_t>(t)];
        dy[static_cast<size_t>(t)] = pair.y[static_cast<size_t>(t) + 1] - pair.y[static_cast<size_t>(t)];
    }
    auto bar = [&](const std::vector<double>& d, int u) {
        double s_acc = 0.0;
        for (int s = 1; s <= w - 1; ++s)
            s_acc += g_weight(static_cast<double>(s) / w) * d[static_cast<size_t>(u + s)];
        return s_acc;
    };
    std::vector<double> xbar(static_cast<size_t>(n_win)), ybar(static_cast<size_t>(n_win));
    for (int u = 0; u < n_win; ++u) {
        xbar[static_cast<size_t>(u)] = bar(dx, u);
        ybar[static_cast<size_t>(u)] = bar(dy, u);
    }
    double vx = 0.0, vy = 0.0;
    if (cfg.jump_robust) {
        vx = truncation_level(xbar, m, w, cfg);
        vy = truncation_level(ybar, m, w, cfg);
    }
    double acc = 0.0;
    for (int u = 0; u < n_win; ++u) {
        if (cfg.jump_robust
            && !(std::abs(xbar[static_cast<size_t>(u)]) < vx && std::abs(ybar[static_cast<size_t>(u)]) < vy))
            continue;
        double corr = 0.0;
        for (int s = 1; s <= w; ++s) {
            double dg = g_weight(static_cast<double>(s) / w) - g_weight(static_cast<double>(s - 1) / w);
            corr += dg * dg * dx[static_cast<size_t>(u + s - 1)] * dy[static_cast<size_t>(u + s - 1)];
        }
        acc += xbar[static_cast<size_t>(u)] * ybar[static_cast<size_t>(u)] - 0.5 * corr;
    }
    out.value = acc / (static_cast<double>(w) * cfg.phi);
    return out;
}

RealizedCov assemble_matrix(int p, const std::vector<PairEntry>& entries, int day) {
    if (static_cast<int>(entries.size()) != p * (p + 1) / 2)
        throw std::invalid_argument("assemble_matrix: need p(p+1)/2 pair entries");
    RealizedCov rc;
    rc.day = day;
    rc.matrix = Eigen::MatrixXd::Zero(p, p);
    rc.n_obs = Eigen::MatrixXi::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            const PairEntry& e = entries[static_cast<size_t>(pair_index(p, i, j))];
            rc.n_obs(i, j) = e.m;
            rc.n_obs(j, i) = e.m;
            if (e.flagged) {
                if (i == j)
                    throw std::runtime_error("assemble_matrix: diagonal entry flagged for asset "
                                             + std::to_string(i) + " (too few synchronized ticks)");
                ++rc.warning_count;   // off-diagonal: impute zero and warn
                continue;
            }
            rc.matrix(i, j) = e.value;
            rc.matrix(j, i) = e.value;
        }
    }
    return rc;
}

RealizedCov poet_regularize(const RealizedCov& raw, int factors, const std::vector<int>& sectors) {
    const int p = static_cast<int>(raw.matrix.rows());
    if (p < 1 || raw.matrix.cols() != p)
        throw std::invalid_argument("poet_regularize: matrix must be square");
    if (factors < 0 || factors >= p)
        throw std::invalid_argument("poet_regularize: need 0 <= factors < p");
    if (!sectors.empty() && static_cast<int>(sectors.size()) != p)
        throw std::invalid_argument("poet_regularize: sector label length != p");

    SymEig e = sym_eig(raw.matrix);
    Eigen::MatrixXd principal = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < factors; ++k) {
        const auto v = e.vectors.col(p - 1 - k);
        principal += e.values(p - 1 - k) * v * v.transpose();
    }
    Eigen::MatrixXd resid = raw.matrix - principal;

    double threshold = 0.0;
    if (sectors.empty()) {
        std::vector<int> counts;
        counts.reserve(static_cast<size_t>(p * (p + 1) / 2));
        for (int i = 0; i < p; ++i)
            for (int j = i; j < p; ++j) counts.push_back(raw.n_obs(i, j));
        std::sort(counts.begin(), counts.end());
        const size_t n = counts.size();
        double med = (n % 2 == 1) ? counts[n / 2] : 0.5 * (counts[n / 2 - 1] + counts[n / 2]);
        if (med < 1.0)
            throw std::invalid_argument("poet_regularize: n_obs not populated");
        threshold = std::sqrt(std::log(static_cast<double>(p)) / std::sqrt(med))
                    + 1.0 / std::sqrt(static_cast<double>(p));
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (i != j && std::abs(resid(i, j)) <= threshold) resid(i, j) = 0.0;
    } else {
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (i != j && sectors[static_cast<size_t>(i)] != sectors[static_cast<size_t>(j)])
                    resid(i, j) = 0.0;
    }

    Eigen::MatrixXd out = principal + resid;
    out = 0.5 * (out + out.transpose()).eval();
    double scale = out.trace() / p;
    if (scale <= 0.0) scale = 1e-4;   // degenerate input still comes back PD
    RealizedCov rc = raw;
    rc.matrix = pd_clip(out, 1e-8 * scale);
    rc.regularized = true;
    rc.poet_factors = factors;
    rc.poet_threshold = threshold;
    return rc;
}

void EstimateConfig::validate(int p) const {
    preavg.validate();
    if (poet_factors < 0 || (regularize && poet_factors >= p))
        throw std::invalid_argument("EstimateConfig: need 0 <= poet_factors < p");
    if (!sectors.empty() && static_cast<int>(sectors.size()) != p)
        throw std::invalid_argument("EstimateConfig: sector label length != p");
}

RealizedCov estimate_day(const std::vector<TickSeries>& series, const EstimateConfig& cfg,
                         int day, std::vector<std::string>* warnings) {
    const int p = static_cast<int>(series.size());
    if (p < 1) throw std::invalid_argument("estimate_day: empty asset list");
    cfg.validate(p);

    std::vector<PairEntry> entries(static_cast<size_t>(p * (p + 1) / 2));
    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            SyncedPair sp = pairwise_refresh(series[static_cast<size_t>(i)], series[static_cast<size_t>(j)]);
            entries[static_cast<size_t>(pair_index(p, i, j))] = jprvm_entry(sp, cfg.preavg);
        }
    }
    RealizedCov rc = assemble_matrix(p, entries, day);
    if (rc.warning_count > 0 && warnings != nullptr)
        warnings->push_back("day " + std::to_string(day) + ": " + std::to_string(rc.warning_count)
                            + " pair(s) had too few synchronized ticks, entries imputed as zero");
    if (cfg.regularize) rc = poet_regularize(rc, cfg.poet_factors, cfg.sectors);
    return rc;
}

std::vector<RealizedCov> estimate_iv(const TickPanel& panel, const EstimateConfig& cfg,
                                     int jobs, std::vector<std::string>* warnings) {
    std::vector<RealizedCov> out(static_cast<size_t>(panel.days));
    std::vector<std::vector<std::string>> day_warnings(static_cast<size_t>(panel.days));
    parallel_for(jobs, panel.days, [&](int d) {
        out[static_cast<size_t>(d)] = estimate_day(panel.data[static_cast<size_t>(d)], cfg, d,
                                                   &day_warnings[static_cast<size_t>(d)]);
    });
    if (warnings != nullptr)
        for (const auto& dw : day_warnings)
            warnings->insert(warnings->end(), dw.begin(), dw.end());
    return out;
}

} // namespace drmvp::rv
