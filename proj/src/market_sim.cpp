#include "drmvp/market_sim.hpp"
#include "drmvp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drmvp::sim {

namespace {

// substream labels; one family per stochastic purpose, day index as the second key
constexpr uint64_t kStreamSigma1 = 1;
constexpr uint64_t kStreamPi = 2;
constexpr uint64_t kStreamDiffusion = 3;
constexpr uint64_t kStreamJumps = 4;
constexpr uint64_t kStreamNoise = 5;
constexpr uint64_t kStreamInner = 6;

Eigen::MatrixXd pd_inverse(const Eigen::MatrixXd& m, const char* what) {
    SymEig e = sym_eig(m);
    if (e.values(0) <= 0.0)
        throw std::runtime_error(std::string(what) + ": matrix not positive definite (min eig "
                                 + std::to_string(e.values(0)) + ")");
    return e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose();
}

} // namespace

int LagSpec::max_lag() const {
    int m = 0;
    for (int h : horizons) m = std::max(m, h);
    return m;
}

void LagSpec::validate() const {
    if (horizons.empty()) throw std::invalid_argument("LagSpec: empty horizon list");
    int prev = 0;
    for (int h : horizons) {
        if (h <= prev) throw std::invalid_argument("LagSpec: horizons must be positive and strictly increasing");
        prev = h;
    }
}

CoefficientSet har_preset(int p) {
    if (p < 2) throw std::invalid_argument("har_preset: p must be >= 2");

    CoefficientSet cs;
    cs.p = p;
    cs.lags = LagSpec{LagSpec::HAR, {1, 5, 22}};

    Eigen::MatrixXd beta_full = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        beta_full(i, i) = 0.2;
        if (i > 0) beta_full(i, i - 1) = 0.7;
    }
    const std::vector<double> weights = {0.3, 0.6, 0.1};
    for (double c : weights) cs.beta.push_back(c * beta_full);

    // eigenvalue targets: 40, 80, 120, then 250, 251, ... and an 800 uplift on beta0
    Eigen::VectorXd q(p);
    for (int i = 0; i < p; ++i) {
        int k = i + 1;
        q(i) = k == 1 ? 40.0 : k == 2 ? 80.0 : k == 3 ? 120.0 : 246.0 + k;
    }
    const double q0 = 800.0;

    SymEig eb = sym_eig(beta_full + beta_full.transpose());
    cs.U = eb.vectors;

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);
    cs.beta0 = cs.U * q.asDiagonal() * cs.U.transpose() * ones + q0 * ones;
    cs.B0 = cs.U * q.cwiseSqrt().asDiagonal() * cs.U.transpose();

    for (const auto& bj : cs.beta) {
        Eigen::MatrixXd bar = 0.5 * (bj + bj.transpose());
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);
        for (int l = 0; l < p; ++l) {
            double colsum = bar.col(l).sum();
            if (colsum > 0.0) B.col(l) = bar.col(l) / std::sqrt(colsum);
        }
        cs.B.push_back(std::move(B));
    }

    // stationarity of the AR expansion: coefficient on lag k is sum_{h >= k} beta_h / h
    int maxlag = cs.lags.max_lag();
    std::vector<Eigen::MatrixXd> ar(static_cast<size_t>(maxlag), Eigen::MatrixXd::Zero(p, p));
    for (size_t j = 0; j < cs.lags.horizons.size(); ++j) {
        int h = cs.lags.horizons[j];
        for (int k = 0; k < h; ++k) ar[static_cast<size_t>(k)] += cs.beta[j] / double(h);
    }
    cs.companion_radius = companion_spectral_radius(ar);
    if (cs.companion_radius >= 1.0)
        throw std::runtime_error("har_preset: companion spectral radius >= 1");
    return cs;
}

void SimConfig::validate() const {
    if (p < 2) throw std::invalid_argument("SimConfig: p must be >= 2");
    if (days < 1) throw std::invalid_argument("SimConfig: days must be >= 1");
    if (steps_per_day < 2) throw std::invalid_argument("SimConfig: steps_per_day must be >= 2");
    if (burn_in < 0) throw std::invalid_argument("SimConfig: burn_in must be >= 0");
    if (noise_scale < 0.0) throw std::invalid_argument("SimConfig: noise_scale must be >= 0");
    if (jump_intensity < 0.0) throw std::invalid_argument("SimConfig: jump_intensity must be >= 0");
    if (jump_sd < 0.0) throw std::invalid_argument("SimConfig: jump_sd must be >= 0");
    if (clip_sigma1 <= 0.0 || clip_pi <= 0.0)
        throw std::invalid_argument("SimConfig: clip constants must be > 0");
    if (har_inverse_source != "gamma1" && har_inverse_source != "total")
        throw std::invalid_argument("SimConfig: har_inverse_source must be 'gamma1' or 'total'");
}

namespace {

struct History {
    std::deque<Eigen::MatrixXd> inv;   // front = most recent day
    std::deque<Eigen::VectorXd> w;
};

DayInputs make_day_inputs(const CoefficientSet& cs, const History& h,
                          const Eigen::MatrixXd& sigma1_prev, const Eigen::VectorXd& pi_prev) {
    const int p = cs.p;
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);
    DayInputs in;
    in.G1 = cs.B0 * cs.B0.transpose();
    in.g = cs.beta0;
    for (size_t j = 0; j < cs.lags.horizons.size(); ++j) {
        int hz = cs.lags.horizons[j];
        Eigen::MatrixXd ombar = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd wbar = Eigen::VectorXd::Zero(p);
        for (int k = 0; k < hz; ++k) {
            ombar += h.inv[static_cast<size_t>(k)];
            wbar += h.w[static_cast<size_t>(k)];
        }
        in.G1 += cs.B[j] * (ombar / double(hz)) * cs.B[j].transpose();
        in.g += cs.beta[j] * (wbar / double(hz));
    }
    in.G1 = 0.5 * (in.G1 + in.G1.transpose());
    in.r = in.G1 * ones - in.g;
    if ((in.r.array() >= 0.0).any())
        throw std::runtime_error("market_sim: auxiliary target r_d has a non-negative entry; "
                                 "the negative-diagonal construction is degenerate at this state");
    in.sigma1_prev = sigma1_prev;
    in.pi_prev = pi_prev;
    return in;
}

} // namespace

DayEvolution evolve_day(const DayInputs& in, const SimConfig& cfg,
                        const CoefficientSet& coeffs,
                        Rng& rng_sigma1, Rng& rng_pi, bool with_increments) {
    const int p = coeffs.p;
    const int m = cfg.steps_per_day;
    const double dt = 1.0 / double(m);
    const double sqdt = std::sqrt(dt);
    const Eigen::MatrixXd& U = coeffs.U;
    const Eigen::MatrixXd Ut = U.transpose();

    Eigen::MatrixXd S_inv = pd_inverse(in.sigma1_prev, "evolve_day: sigma1 at open");
    Eigen::VectorXd u1 = (Ut * in.sigma1_prev * U).diagonal();
    Eigen::VectorXd pinv_prev = in.pi_prev.cwiseInverse();

    Eigen::VectorXd Z1 = Eigen::VectorXd::Zero(p), Z2 = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd m1_prev = Eigen::VectorXd::Zero(p), m2_prev = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p), m2 = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd tau1 = Eigen::VectorXd::Zero(p), tau2 = Eigen::VectorXd::Zero(p);

    DayEvolution ev;
    Eigen::MatrixXd itot_prev = Eigen::MatrixXd::Zero(p, p);
    if (with_increments) ev.increments.reserve(static_cast<size_t>(m));

    for (int k = 1; k <= m; ++k) {
        const double s = double(k) / double(m);
        if (!cfg.martingale_off) {
            for (int i = 0; i < p; ++i) Z1(i) += sqdt * rng_sigma1.normal();
            for (int i = 0; i < p; ++i) Z2(i) += sqdt * rng_pi.normal();
            m1 = u1.cwiseProduct(Z1.cwiseMin(cfg.clip_sigma1).cwiseMax(-cfg.clip_sigma1));
            m2 = in.pi_prev.cwiseProduct(Z2.cwiseMin(cfg.clip_pi).cwiseMax(-cfg.clip_pi));
            tau1 += (0.5 * dt) * (m1_prev + m1);
            tau2 += (0.5 * dt) * (m2_prev + m2);
            m1_prev = m1;
            m2_prev = m2;
        }
        if (with_increments) {
            // V_t in closed form: (s - 2s^2 + s^3) S_inv + (2s^2 - s^3) G1 + U diag(tau1) U^T
            const double a = s - 2.0 * s * s + s * s * s;
            const double c = 2.0 * s * s - s * s * s;
            Eigen::MatrixXd W = a * S_inv + c * in.G1 + U * tau1.asDiagonal() * Ut;
            Eigen::VectorXd v2k = a * pinv_prev + c * in.r + tau2;
            W.diagonal() -= v2k;
            Eigen::MatrixXd itot = s * s * pd_inverse(W, "evolve_day: integrated covariance");
            Eigen::MatrixXd d = itot - itot_prev;
            ev.increments.emplace_back(0.5 * (d + d.transpose()));
            itot_prev = std::move(itot);
        }
    }

    ev.gamma1_inv = in.G1 + U * tau1.asDiagonal() * Ut;
    ev.gamma1_inv = 0.5 * (ev.gamma1_inv + ev.gamma1_inv.transpose());
    ev.v2 = in.r + tau2;
    ev.omega = ev.gamma1_inv;
    ev.omega.diagonal() -= ev.v2;

    SymEig eo = sym_eig(ev.omega);
    if (eo.values(0) <= 0.0)
        throw std::runtime_error("evolve_day: integrated inverse lost positive definiteness");
    ev.gamma = eo.vectors * eo.values.cwiseInverse().asDiagonal() * eo.vectors.transpose();
    ev.min_eig_gamma = 1.0 / eo.values(eo.values.size() - 1);
    ev.w = ev.omega * Eigen::VectorXd::Ones(p);

    // day-close spots from the explicit spot formula at <t> = 1:
    //   Sigma_1 = 2A - A (G1 + M) A with A = V_1^{-1}
    Eigen::MatrixXd A = pd_inverse(ev.gamma1_inv, "evolve_day: gamma1 inverse at close");
    Eigen::MatrixXd close = 2.0 * A - A * (in.G1 + U * m1_prev.asDiagonal() * Ut) * A;
    close = 0.5 * (close + close.transpose());
    double tr = close.trace();
    if (min_eigenvalue(close) < -1e-10 * std::abs(tr))
        throw std::runtime_error("evolve_day: Sigma_1 close spot violates positive semidefiniteness; "
                                 "martingale fluctuation exceeded the admissible band");
    ev.sigma1_close = pd_clip(close, 1e-12 * std::abs(tr) / double(p));

    ev.pi_close.resize(p);
    for (int i = 0; i < p; ++i) {
        double a2 = 1.0 / ev.v2(i);
        ev.pi_close(i) = 2.0 * a2 - (in.r(i) + m2_prev(i)) * a2 * a2;
        if (ev.pi_close(i) >= 0.0)
            throw std::runtime_error("evolve_day: Pi close spot lost negativity");
    }

    if (with_increments) {
        // total spot at the day open, for the observation-noise variances:
        // (Sigma_1^{-1} - Pi^{-1})^{-1} taken at t = open
        Eigen::MatrixXd tot_inv = S_inv;
        tot_inv.diagonal() -= pinv_prev;
        Eigen::MatrixXd tot = pd_inverse(tot_inv, "evolve_day: total spot at open");
        ev.open_spot_diag = tot.diagonal().cwiseMax(0.0);
    }
    return ev;
}

namespace {

// one day of observations; the k=0 row repeats the previous close observation
int emit_day_ticks(const DayEvolution& ev, const SimConfig& cfg, int day_slot,
                   Rng& rdiff, Rng& rjump, Rng& rnoise,
                   Eigen::VectorXd& X, Eigen::VectorXd& last_obs, bool first_day,
                   TickPanel& panel) {
    const int p = cfg.p;
    const int m = static_cast<int>(ev.increments.size());
    const double dt = 1.0 / double(m);

    Eigen::VectorXd noise_sd = Eigen::VectorXd::Zero(p);
    if (cfg.noise_scale > 0.0)
        noise_sd = (cfg.noise_scale * ev.open_spot_diag).cwiseSqrt();

    auto& row = panel.data[static_cast<size_t>(day_slot)];
    for (int a = 0; a < p; ++a) {
        row[static_cast<size_t>(a)].frac.reserve(static_cast<size_t>(m) + 1);
        row[static_cast<size_t>(a)].price.reserve(static_cast<size_t>(m) + 1);
    }

    if (first_day) {
        for (int a = 0; a < p; ++a) {
            double e = cfg.noise_scale > 0.0 ? noise_sd(a) * rnoise.normal() : 0.0;
            last_obs(a) = X(a) + e;
        }
    }
    for (int a = 0; a < p; ++a) {
        row[static_cast<size_t>(a)].frac.push_back(0.0);
        row[static_cast<size_t>(a)].price.push_back(last_obs(a));
    }

    int jumps = 0;
    Eigen::VectorXd xi(p);
    for (int k = 1; k <= m; ++k) {
        const Eigen::MatrixXd& D = ev.increments[static_cast<size_t>(k - 1)];
        SymEig e = sym_eig(D);
        double tr = D.trace();
        if (e.values(0) < -1e-10 * std::abs(tr))
            throw std::runtime_error("emit_ticks: tick covariance increment violates positive "
                                     "semidefiniteness beyond tolerance");
        Eigen::MatrixXd R = e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
        for (int i = 0; i < p; ++i) xi(i) = rdiff.normal();
        X += R * xi;
        if (cfg.jump_intensity > 0.0) {
            for (int a = 0; a < p; ++a) {
                int n = rjump.poisson(cfg.jump_intensity * dt);
                for (int t = 0; t < n; ++t) {
                    double size = cfg.jump_mean + cfg.jump_sd * rjump.normal();
                    double sign = rjump.uniform() < 0.5 ? -1.0 : 1.0;
                    X(a) += sign * size;
                }
                jumps += n;
            }
        }
        for (int a = 0; a < p; ++a) {
            double e_obs = cfg.noise_scale > 0.0 ? noise_sd(a) * rnoise.normal() : 0.0;
            double obs = X(a) + e_obs;
            row[static_cast<size_t>(a)].frac.push_back(double(k) / double(m));
            row[static_cast<size_t>(a)].price.push_back(obs);
            if (k == m) last_obs(a) = obs;
        }
    }
    return jumps;
}

} // namespace

SimOutput simulate(const SimConfig& cfg) {
    cfg.validate();
    SimOutput out;
    out.cfg = cfg;
    out.coeffs = har_preset(cfg.p);
    const CoefficientSet& cs = out.coeffs;
    const int p = cfg.p;
    const int maxlag = cs.lags.max_lag();
    const bool use_total = cfg.har_inverse_source == "total";
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);

    // stationary warm start: joint fixed point of the BEKK recursion and the
    // AR mean, w* = (I - sum beta_j)^{-1} beta0
    Eigen::MatrixXd beta_sum = Eigen::MatrixXd::Zero(p, p);
    for (const auto& b : cs.beta) beta_sum += b;
    Eigen::VectorXd w_star =
        (Eigen::MatrixXd::Identity(p, p) - beta_sum).partialPivLu().solve(cs.beta0);

    // the BEKK map contracts at roughly 0.9 per sweep, so a generous cap is
    // needed to actually reach the stationary point
    Eigen::MatrixXd X_star = cs.B0 * cs.B0.transpose();
    Eigen::MatrixXd G1_star = X_star;
    for (int it = 0; it < 2000; ++it) {
        Eigen::MatrixXd next = cs.B0 * cs.B0.transpose();
        for (const auto& B : cs.B) next += B * X_star * B.transpose();
        G1_star = 0.5 * (next + next.transpose());
        Eigen::MatrixXd cand = G1_star;
        if (use_total) {
            Eigen::VectorXd r_star = G1_star * ones - w_star;
            cand -= r_star.asDiagonal();
        }
        double delta = (cand - X_star).cwiseAbs().maxCoeff();
        X_star = cand;
        if (delta < 1e-12 * std::max(1.0, X_star.cwiseAbs().maxCoeff())) break;
    }

    History hist;
    for (int k = 0; k < maxlag; ++k) {
        hist.inv.push_back(X_star);
        hist.w.push_back(w_star);
    }

    Eigen::MatrixXd sigma1_prev = pd_inverse(G1_star, "simulate: stationary Gamma1 inverse");
    Eigen::VectorXd r0 = G1_star * ones - w_star;
    if ((r0.array() >= 0.0).any())
        throw std::runtime_error("simulate: stationary auxiliary target is not negative; "
                                 "preset unusable at this dimension");
    Eigen::VectorXd pi_prev = r0.cwiseInverse();

    Rng master(cfg.seed);
    const int total_days = cfg.burn_in + cfg.days;
    if (cfg.emit_ticks) out.ticks.init(p, cfg.days);

    Eigen::VectorXd X = Eigen::VectorXd::Zero(p);       // latent log price
    Eigen::VectorXd last_obs = Eigen::VectorXd::Zero(p);
    out.truth.reserve(static_cast<size_t>(cfg.days));

    for (int day = 1; day <= total_days; ++day) {
        DayInputs in = make_day_inputs(cs, hist, sigma1_prev, pi_prev);
        Rng r_s1 = master.substream(kStreamSigma1, static_cast<uint64_t>(day));
        Rng r_pi = master.substream(kStreamPi, static_cast<uint64_t>(day));
        bool recorded = day > cfg.burn_in;
        bool with_inc = cfg.emit_ticks && recorded;
        DayEvolution ev = evolve_day(in, cfg, cs, r_s1, r_pi, with_inc);

        if (recorded) {
            int slot = day - cfg.burn_in - 1;
            int jumps = 0;
            if (cfg.emit_ticks) {
                Rng r_diff = master.substream(kStreamDiffusion, static_cast<uint64_t>(day));
                Rng r_jump = master.substream(kStreamJumps, static_cast<uint64_t>(day));
                Rng r_noise = master.substream(kStreamNoise, static_cast<uint64_t>(day));
                jumps = emit_day_ticks(ev, cfg, slot, r_diff, r_jump, r_noise,
                                       X, last_obs, slot == 0, out.ticks);
            }
            Eigen::MatrixXd g_target = in.G1;
            g_target.diagonal() -= in.r;
            out.truth.push_back(DayTruth{ev.gamma, ev.omega, std::move(g_target), in.g, ev.w, jumps});
        }

        hist.inv.push_front(use_total ? ev.omega : ev.gamma1_inv);
        hist.w.push_front(ev.w);
        while (static_cast<int>(hist.inv.size()) > maxlag) hist.inv.pop_back();
        while (static_cast<int>(hist.w.size()) > maxlag) hist.w.pop_back();
        sigma1_prev = ev.sigma1_close;
        pi_prev = ev.pi_close;
    }

    out.next_inputs = make_day_inputs(cs, hist, sigma1_prev, pi_prev);
    return out;
}

Eigen::VectorXd mc_conditional_wbar(const DayInputs& in, const SimConfig& cfg,
                                    const CoefficientSet& coeffs,
                                    int n_paths, const Rng& base) {
    if (n_paths < 1) throw std::invalid_argument("mc_conditional_wbar: n_paths must be >= 1");
    const int p = coeffs.p;
    const int m = cfg.steps_per_day;
    const double dt = 1.0 / double(m);
    const double sqdt = std::sqrt(dt);
    const Eigen::MatrixXd& U = coeffs.U;
    Eigen::VectorXd Ut1 = U.transpose() * Eigen::VectorXd::Ones(p);
    Eigen::VectorXd u1 = (U.transpose() * in.sigma1_prev * U).diagonal();

    Eigen::VectorXd accum = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd Z1(p), Z2(p), m1(p), m2(p), m1_prev(p), m2_prev(p), tau1(p), tau2(p);
    for (int path = 0; path < n_paths; ++path) {
        Rng rng = base.substream(kStreamInner, static_cast<uint64_t>(path));
        Z1.setZero(); Z2.setZero();
        m1_prev.setZero(); m2_prev.setZero();
        tau1.setZero(); tau2.setZero();
        if (!cfg.martingale_off) {
            for (int k = 1; k <= m; ++k) {
                for (int i = 0; i < p; ++i) Z1(i) += sqdt * rng.normal();
                for (int i = 0; i < p; ++i) Z2(i) += sqdt * rng.normal();
                m1 = u1.cwiseProduct(Z1.cwiseMin(cfg.clip_sigma1).cwiseMax(-cfg.clip_sigma1));
                m2 = in.pi_prev.cwiseProduct(Z2.cwiseMin(cfg.clip_pi).cwiseMax(-cfg.clip_pi));
                tau1 += (0.5 * dt) * (m1_prev + m1);
                tau2 += (0.5 * dt) * (m2_prev + m2);
                m1_prev = m1;
                m2_prev = m2;
            }
        }
        // day-end identity: w = g + U (tau1 .* U^T 1) - tau2
        Eigen::VectorXd w = in.g + U * tau1.cwiseProduct(Ut1) - tau2;
        double denom = w.sum();
        if (std::abs(denom) < 1e-300)
            throw std::runtime_error("mc_conditional_wbar: degenerate weight normalizer");
        accum += w / denom;
    }
    return accum / double(n_paths);
}

} // namespace drmvp::sim
