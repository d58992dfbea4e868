#include "drmvp/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace drmvp {

SymEig sym_eig(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("sym_eig: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    SymEig e = sym_eig(m);
    Eigen::VectorXd s = e.values.cwiseMax(0.0).cwiseSqrt();
    return e.vectors * s.asDiagonal() * e.vectors.transpose();
}

Eigen::MatrixXd pd_clip(const Eigen::MatrixXd& m, double floor) {
    SymEig e = sym_eig(m);
    if (e.values(0) >= floor) return m;
    Eigen::VectorXd v = e.values.cwiseMax(floor);
    return e.vectors * v.asDiagonal() * e.vectors.transpose();
}

Eigen::MatrixXd sym_pinv(const Eigen::MatrixXd& m, double rel_tol) {
    SymEig e = sym_eig(m);
    double scale = e.values.cwiseAbs().maxCoeff();
    double tol = scale * rel_tol;
    Eigen::VectorXd inv = e.values;
    for (Eigen::Index i = 0; i < inv.size(); ++i)
        inv(i) = std::abs(inv(i)) > tol ? 1.0 / inv(i) : 0.0;
    return e.vectors * inv.asDiagonal() * e.vectors.transpose();
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    return sym_eig(m).values(0);
}

double logdet_pd(const Eigen::MatrixXd& m) {
    SymEig e = sym_eig(m);
    if (e.values(0) <= 0.0)
        throw std::runtime_error("logdet_pd: matrix not positive definite");
    return e.values.array().log().sum();
}

double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& lags) {
    if (lags.empty()) throw std::invalid_argument("companion_spectral_radius: no lags");
    const Eigen::Index p = lags[0].rows();
    const Eigen::Index q = static_cast<Eigen::Index>(lags.size());
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p * q, p * q);
    for (Eigen::Index j = 0; j < q; ++j)
        comp.block(0, j * p, p, p) = lags[static_cast<size_t>(j)];
    for (Eigen::Index j = 1; j < q; ++j)
        comp.block(j * p, (j - 1) * p, p, p).setIdentity();
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("companion_spectral_radius: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace drmvp
