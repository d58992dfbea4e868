#pragma once
// High-frequency market simulator.
//
// The data-generating process drives the *inverse integrated volatility*
// directly. Within day d, write s = <t> for the day fraction and
//   V_t = s^2 * (integral of Sigma_1 over the day so far)^{-1}.
// The model's construction telescopes to
//   dV/dt = S_inv - (4s - 3s^2)(S_inv - G_d) + M_t,   S_inv = Sigma_{1,d-1}^{-1},
// with M_t a clipped-Brownian martingale. We integrate this identity exactly:
// the deterministic part in closed form, the martingale part by trapezoid on
// the clipped Brownian path (itself exactly a martingale). Hence, on the grid
// and for any step count,
//   Gamma_{1,d}^{-1} = V_1 = G_{1,d} + U_{1,d},      E[U_{1,d} | F_{d-1}] = 0,
// and with the martingale disabled Gamma_{1,d}^{-1} == G_{1,d} to round-off.
// A second scalar channel V2 with diagonal target r_d plays the same game for
// the negative auxiliary process Pi; the total integrated covariance follows
// by the Woodbury split  Omega_d = Gamma_d^{-1} = V_1 - diag(V2_1).
// Tick increments are exact differences of the integrated process, so ticks,
// truth matrices and martingale identities are mutually consistent.

#include <Eigen/Dense>
#include <deque>
#include <string>
#include <vector>

#include "drmvp/rng.hpp"
#include "drmvp/ticks.hpp"

namespace drmvp::sim {

struct LagSpec {
    enum Kind { AR, HAR };
    Kind kind = HAR;
    std::vector<int> horizons = {1, 5, 22};   // AR: 1..q listed explicitly

    int max_lag() const;
    void validate() const;
};

struct CoefficientSet {
    int p = 0;
    LagSpec lags;
    Eigen::VectorXd beta0;                  // AR intercept
    std::vector<Eigen::MatrixXd> beta;      // per horizon
    Eigen::MatrixXd B0;                     // BEKK intercept factor
    std::vector<Eigen::MatrixXd> B;         // BEKK loadings per horizon
    Eigen::MatrixXd U;                      // clip basis (eigenvectors of beta+beta^T)
    double companion_radius = 0.0;          // of the AR expansion, must be < 1
};

// the named HAR(1,5,22) preset; throws for p < 2
CoefficientSet har_preset(int p);

struct SimConfig {
    int p = 10;
    int days = 250;
    int steps_per_day = 390;
    int burn_in = 30;
    unsigned long long seed = 1;
    bool emit_ticks = true;
    double noise_scale = 0.01;        // observation noise variance multiplier, 0 disables
    double jump_intensity = 5.0;      // Poisson arrivals per asset-day, 0 disables
    double jump_mean = 0.05;
    double jump_sd = 0.005;
    double clip_sigma1 = 0.2;
    double clip_pi = 1.0;
    bool martingale_off = false;      // M == 0: Omega_d == G_d exactly
    std::string har_inverse_source = "gamma1";   // "gamma1" | "total"

    void validate() const;
};

// everything F_{d-1}-measurable that the day evolution needs
struct DayInputs {
    Eigen::MatrixXd G1;            // BEKK target for Gamma_1^{-1}
    Eigen::VectorXd g;             // conditional mean of w_d
    Eigen::VectorXd r;             // diagonal target for the Pi channel, negative
    Eigen::MatrixXd sigma1_prev;   // Sigma_1 spot at day open
    Eigen::VectorXd pi_prev;       // Pi spot at day open (diagonal, negative)
};

struct DayEvolution {
    Eigen::MatrixXd gamma1_inv;    // V at day end = G1 + martingale integral
    Eigen::VectorXd v2;            // diag of Gamma2-tilde^{-1} at day end
    Eigen::MatrixXd omega;         // gamma1_inv - diag(v2)
    Eigen::MatrixXd gamma;         // omega^{-1}
    Eigen::VectorXd w;             // omega * 1
    Eigen::MatrixXd sigma1_close;
    Eigen::VectorXd pi_close;
    double min_eig_gamma = 0.0;
    // filled only when increments are requested
    std::vector<Eigen::MatrixXd> increments;   // D_k, covariance of tick k
    Eigen::VectorXd open_spot_diag;            // total spot variance at day open
    double min_increment_eig_ratio = 0.0;      // min over k of mineig(D_k)/trace(D_k)
};

DayEvolution evolve_day(const DayInputs& in, const SimConfig& cfg,
                        const CoefficientSet& coeffs,
                        Rng& rng_sigma1, Rng& rng_pi, bool with_increments);

struct DayTruth {
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd omega;
    Eigen::MatrixXd g_target;   // E[omega | F_{d-1}] = G1 - diag(r)
    Eigen::VectorXd g;
    Eigen::VectorXd w;
    int jump_count = 0;
};

struct SimOutput {
    SimConfig cfg;
    CoefficientSet coeffs;
    std::vector<DayTruth> truth;   // days 1..N
    TickPanel ticks;               // empty when emit_ticks is off
    DayInputs next_inputs;         // day N+1 conditionals, g_next = next_inputs.g
    std::vector<std::string> warnings;
};

SimOutput simulate(const SimConfig& cfg);

// E[normalized weight | F_N] by inner Monte Carlo on the one-day evolution;
// uses the closed-form day-end identity, so each path costs O(steps * p)
Eigen::VectorXd mc_conditional_wbar(const DayInputs& in, const SimConfig& cfg,
                                    const CoefficientSet& coeffs,
                                    int n_paths, const Rng& base);

} // namespace drmvp::sim
