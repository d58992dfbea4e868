#include "drmvp/clime.hpp"

#include <cmath>
#include <limits>

#include "drmvp/linalg.hpp"
#include "drmvp/lp.hpp"

namespace drmvp::clime {

ColumnSolution clime_column(const Eigen::MatrixXd& gamma_hat, int k, double tau) {
    const Eigen::Index p = gamma_hat.rows();
    if (gamma_hat.cols() != p)
        throw std::invalid_argument("clime_column: matrix not square");
    if (k < 0 || k >= p)
        throw std::invalid_argument("clime_column: column index out of range");
    if (tau < 0.0 || !std::isfinite(tau))
        throw std::invalid_argument("clime_column: tau must be >= 0");
    if (!gamma_hat.allFinite())
        throw std::invalid_argument("clime_column: matrix has non-finite entries");

    //   x = (a+, a-),  Gamma a <= e + tau,  -Gamma a <= tau - e,  x >= 0
    Eigen::MatrixXd A(2 * p, 2 * p);
    A.topLeftCorner(p, p) = gamma_hat;
    A.topRightCorner(p, p) = -gamma_hat;
    A.bottomLeftCorner(p, p) = -gamma_hat;
    A.bottomRightCorner(p, p) = gamma_hat;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
    e(k) = 1.0;
    Eigen::VectorXd b(2 * p);
    b.head(p) = e.array() + tau;
    b.tail(p) = tau - e.array();
    Eigen::VectorXd c = Eigen::VectorXd::Ones(2 * p);

    lp::LpSolution sol = lp::solve_min(A, b, c);
    ColumnSolution out;
    if (sol.status != lp::LpStatus::Optimal) return out;
    out.feasible = true;
    out.a = sol.x.head(p) - sol.x.tail(p);
    out.objective = sol.x.sum();
    out.residual = (gamma_hat * out.a - e).cwiseAbs().maxCoeff();
    return out;
}

Eigen::MatrixXd symmetrize_columns(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("symmetrize_columns: matrix not square");
    Eigen::MatrixXd out = a;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
            double keep = std::abs(a(j, i)) < std::abs(a(i, j)) ? a(j, i) : a(i, j);
            out(i, j) = keep;
            out(j, i) = keep;
        }
    }
    return out;
}

std::vector<double> tau_grid(int m, int p, int n_days) {
    if (m < 1 || p < 1 || n_days < 1)
        throw std::invalid_argument("tau_grid: m, p, n_days must be >= 1");
    const double scale =
        std::pow(static_cast<double>(m), -0.25) *
        std::sqrt(std::log(static_cast<double>(std::max(p, n_days))));
    std::vector<double> grid(100);
    const double lo = std::log(1e-6), hi = std::log(10.0);
    for (int i = 0; i < 100; ++i)
        grid[static_cast<size_t>(i)] = std::exp(lo + (hi - lo) * i / 99.0) * scale;
    return grid;
}

namespace {

double max_abs_col_sum(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

// <Omega, Gamma_hat> - logdet(Omega); +inf when Omega is not PD
double likelihood_loss(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& gamma_hat) {
    SymEig e = sym_eig(omega);
    if (e.values(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return omega.cwiseProduct(gamma_hat).sum() - e.values.array().log().sum();
}

} // namespace

InverseCov tune_tau(const Eigen::MatrixXd& gamma_hat,
                    const std::vector<double>& grid, int day) {
    if (grid.empty())
        throw std::invalid_argument("tune_tau: empty grid");
    const Eigen::Index p = gamma_hat.rows();

    InverseCov best;
    double best_loss = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double tau : grid) {
        Eigen::MatrixXd cols(p, p);
        double residual = 0.0;
        bool ok = true;
        for (int k = 0; k < p; ++k) {
            ColumnSolution s = clime_column(gamma_hat, k, tau);
            if (!s.feasible) {
                ok = false;
                break;
            }
            cols.col(k) = s.a;
            residual = std::max(residual, s.residual);
        }
        if (!ok) continue;
        Eigen::MatrixXd omega = symmetrize_columns(cols);
        double loss = likelihood_loss(omega, gamma_hat);
        // strict improvement beyond the tie window; the grid ascends, so
        // ties keep the earlier (smaller) tau
        if (loss < best_loss - 1e-10) {
            best_loss = loss;
            best.omega = omega;
            best.tau_used = tau;
            best.feasibility_residual = residual;
            best.l1_norm = max_abs_col_sum(omega);
            found = true;
        }
    }
    if (!found)
        throw AllInfeasible("tune_tau: no grid point gave a positive definite estimate");
    best.day = day;
    return best;
}

InverseCov invert_day(const Eigen::MatrixXd& gamma_hat,
                      const std::vector<double>& grid, int day,
                      std::vector<std::string>* warnings) {
    try {
        return tune_tau(gamma_hat, grid, day);
    } catch (const AllInfeasible&) {
        InverseCov out;
        out.day = day;
        out.omega = sym_pinv(gamma_hat);
        out.tau_used = -1.0;
        out.feasibility_residual =
            (gamma_hat * out.omega - Eigen::MatrixXd::Identity(gamma_hat.rows(), gamma_hat.cols()))
                .cwiseAbs()
                .maxCoeff();
        out.l1_norm = max_abs_col_sum(out.omega);
        out.fallback = true;
        if (warnings)
            warnings->push_back("day " + std::to_string(day) +
                                ": no tau gave a positive definite estimate, "
                                "pseudo-inverse fallback used");
        return out;
    }
}

Weights weights_from_inverse(const InverseCov& inv) {
    Weights out;
    out.w = inv.omega.rowwise().sum();
    double total = out.w.sum();
    if (std::abs(total) < 1e-12)
        throw DegenerateNormalizer("weights_from_inverse: 1'w is numerically zero");
    out.w_normalized = out.w / total;
    return out;
}

} // namespace drmvp::clime
