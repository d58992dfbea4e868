#pragma once
// Daily realized inverse-volatility inputs from raw ticks.
//
// Three stages, each a pure function:
//   1. pairwise refresh-time synchronization of two tick series,
//   2. jump-robust pre-averaged (co)variance of the synchronized pair,
//   3. symmetric assembly plus POET factor/threshold regularization.
// The pre-averaging window is w = floor(sqrt(m)) with m the pair's
// synchronized increment count, and the POET threshold uses the day's
// median pairwise count.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "drmvp/ticks.hpp"

namespace drmvp::rv {

struct PreAvgConfig {
    double phi = 1.0 / 12.0;      // integral of g(x)^2 for g(x) = min(x, 1-x)
    double trunc_const = 3.0;     // truncation level v = c * (w/m)^e * rms
    double trunc_exponent = 0.47;
    bool jump_robust = true;      // off: no truncation (quadratic-covariation estimand)

    // recomputes the g^2 integral numerically and rejects |phi - integral| > 1e-6
    void validate() const;
};

// refresh-time synchronized pair: last-tick log prices of both assets at the
// common refresh grid
struct SyncedPair {
    std::vector<double> time;
    std::vector<double> x;
    std::vector<double> y;
};

// tau_1 = max of the two first timestamps; tau_{k+1} = max over both assets of
// the first timestamp strictly after tau_k; empty if either input is empty
SyncedPair pairwise_refresh(const TickSeries& a, const TickSeries& b);

struct PairEntry {
    double value = 0.0;
    int m = 0;            // synchronized increment count
    int window = 0;       // w = floor(sqrt(m))
    bool flagged = false; // m < 2w: too short, value withheld
};

// pre-averaged, bias-corrected, truncated covariance of one synchronized pair;
// O(m) via prefix sums
PairEntry jprvm_entry(const SyncedPair& pair, const PreAvgConfig& cfg);

// direct O(m*w) evaluation of the same sums; kept for equivalence testing
PairEntry jprvm_entry_reference(const SyncedPair& pair, const PreAvgConfig& cfg);

struct RealizedCov {
    int day = 0;
    Eigen::MatrixXd matrix;
    Eigen::MatrixXi n_obs;        // per-pair synchronized increment counts
    int warning_count = 0;        // flagged off-diagonals imputed as zero
    bool regularized = false;
    int poet_factors = 0;
    double poet_threshold = 0.0;
};

// row-major upper-triangular position of pair (i, j), i <= j
inline int pair_index(int p, int i, int j) {
    return i * p - i * (i - 1) / 2 + (j - i);
}

// entries holds p(p+1)/2 pair results in pair_index order; flagged
// off-diagonals become 0 and bump warning_count, a flagged diagonal throws
RealizedCov assemble_matrix(int p, const std::vector<PairEntry>& entries, int day = 0);

// keep the top-`factors` principal component part, hard-threshold the residual
// at sqrt(log p / sqrt(m)) + 1/sqrt(p) with m the median of n_obs (or zero
// cross-sector residual entries when sector labels are given), then clip
// eigenvalues up to 1e-8 * trace / p; rejects factors >= p
RealizedCov poet_regularize(const RealizedCov& raw, int factors,
                            const std::vector<int>& sectors = {});

struct EstimateConfig {
    PreAvgConfig preavg;
    bool regularize = true;
    int poet_factors = 3;
    std::vector<int> sectors;   // empty: hard thresholding

    void validate(int p) const;
};

// one day's matrix from that day's tick series (one series per asset)
RealizedCov estimate_day(const std::vector<TickSeries>& series, const EstimateConfig& cfg,
                         int day, std::vector<std::string>* warnings = nullptr);

// full panel, day-parallel
std::vector<RealizedCov> estimate_iv(const TickPanel& panel, const EstimateConfig& cfg,
                                     int jobs = 1, std::vector<std::string>* warnings = nullptr);

} // namespace drmvp::rv
