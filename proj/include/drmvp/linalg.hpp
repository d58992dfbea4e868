#pragma once
// Small dense helpers shared by the simulator and the estimators.
// Everything routes through symmetric eigendecompositions so positive
// semidefiniteness is handled the same way everywhere.

#include <Eigen/Dense>

namespace drmvp {

struct SymEig {
    Eigen::VectorXd values;    // ascending
    Eigen::MatrixXd vectors;
};

SymEig sym_eig(const Eigen::MatrixXd& m);

// U max(L,0)^{1/2} U^T; guards against -1e-12 round-off
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m);

// clip eigenvalues below floor up to floor
Eigen::MatrixXd pd_clip(const Eigen::MatrixXd& m, double floor);

// Moore-Penrose inverse of a symmetric matrix
Eigen::MatrixXd sym_pinv(const Eigen::MatrixXd& m, double rel_tol = 1e-12);

double min_eigenvalue(const Eigen::MatrixXd& m);

// log det of a PD matrix; throws if an eigenvalue is <= 0
double logdet_pd(const Eigen::MatrixXd& m);

// spectral radius of the companion matrix of a VAR with lag matrices A_1..A_q
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& lags);

} // namespace drmvp
