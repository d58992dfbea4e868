#pragma once
// Sparse inverse estimation by constrained l1-minimization, one linear
// program per column:
//
//   minimize ||a||_1   subject to   ||Gamma_hat a - e_k||_inf <= tau,
//
// solved in split variables a = a+ - a- (2p variables, 2p inequalities).
// Columns are glued into one matrix by the smaller-magnitude symmetrization
// convention, and tau is selected on a fixed grid by the likelihood loss
// <Omega, Gamma_hat> - logdet(Omega), candidates that are not positive
// definite (or not feasible at all) sitting at +infinity.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmvp::clime {

struct ColumnSolution {
    bool feasible = false;
    Eigen::VectorXd a;        // the column, valid when feasible
    double objective = 0.0;   // ||a||_1 at the optimum
    double residual = 0.0;    // ||Gamma_hat a - e_k||_inf at the optimum
};

// column k of the inverse estimate; tau >= 0, k in [0, p)
ColumnSolution clime_column(const Eigen::MatrixXd& gamma_hat, int k, double tau);

// smaller-magnitude entry wins; |A_ij| == |A_ji| keeps A_ij with i <= j
Eigen::MatrixXd symmetrize_columns(const Eigen::MatrixXd& a);

struct InverseCov {
    int day = 0;
    Eigen::MatrixXd omega;               // symmetrized estimate
    double tau_used = 0.0;               // -1 when the pseudo-inverse fallback fired
    double feasibility_residual = 0.0;   // ||Gamma_hat A - I||_max before symmetrization
    double l1_norm = 0.0;                // max absolute column sum of omega
    bool fallback = false;
};

// tau candidates: C m^{-1/4} sqrt(log(max(p, N))) over 100 log-spaced C
// in [1e-6, 10]; N is the day count of the estimation window
std::vector<double> tau_grid(int m, int p, int n_days);

// thrown by tune_tau when no grid point gives a PD symmetrized estimate
struct AllInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// minimize the likelihood loss over the grid; ties within 1e-10 go to the
// smaller tau; throws AllInfeasible when every candidate is rejected
InverseCov tune_tau(const Eigen::MatrixXd& gamma_hat,
                    const std::vector<double>& grid, int day = 0);

// tune_tau with the AllInfeasible fallback applied: pseudo-inverse of
// gamma_hat, tau_used = -1, and a warning appended
InverseCov invert_day(const Eigen::MatrixXd& gamma_hat,
                      const std::vector<double>& grid, int day,
                      std::vector<std::string>* warnings = nullptr);

struct Weights {
    Eigen::VectorXd w;              // omega * 1
    Eigen::VectorXd w_normalized;   // w / (1'w)
};

// thrown when |1'w| < 1e-12 and the normalization is undefined
struct DegenerateNormalizer : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Weights weights_from_inverse(const InverseCov& inv);

} // namespace drmvp::clime
