#include "drmvp/lp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace drmvp::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kRatioTie = 1e-12;

} // namespace

LpSolution solve_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& c) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (b.size() != m || c.size() != n)
        throw std::invalid_argument("solve_min: shape mismatch");
    if (n > 0 && c.minCoeff() < 0.0)
        throw std::invalid_argument("solve_min: requires c >= 0");

    // tableau over [structural | slack] columns; basis starts as the slacks
    Eigen::MatrixXd T(m, n + m);
    T << A, Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = b;
    Eigen::VectorXd red(n + m);          // reduced costs, stay >= 0 throughout
    red << c, Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Index> basis(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<size_t>(i)] = n + i;

    const long max_pivots = 10000L * static_cast<long>(m + n + 1);
    for (long pivot = 0;; ++pivot) {
        if (pivot > max_pivots)
            throw std::runtime_error("solve_min: pivot limit exceeded");

        // leaving row: most negative rhs is the usual choice, but Bland's
        // anti-cycling argument needs the smallest basic variable index
        Eigen::Index row = -1;
        Eigen::Index row_var = -1;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (rhs(i) < -kPivotTol) {
                Eigen::Index var = basis[static_cast<size_t>(i)];
                if (row < 0 || var < row_var) {
                    row = i;
                    row_var = var;
                }
            }
        }
        if (row < 0) break;   // primal feasible = optimal for a dual simplex

        // entering column: min ratio red_j / -T(row,j) over negative entries,
        // smallest column index on ties
        Eigen::Index col = -1;
        double best = 0.0;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            if (j == row_var) continue;
            double t = T(row, j);
            if (t < -kPivotTol) {
                double ratio = red(j) / (-t);
                if (col < 0 || ratio < best - kRatioTie * (1.0 + std::abs(best))) {
                    col = j;
                    best = ratio;
                }
            }
        }
        if (col < 0) return {LpStatus::Infeasible, Eigen::VectorXd(), 0.0};

        // pivot (row, col)
        double piv = T(row, col);
        T.row(row) /= piv;
        rhs(row) /= piv;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (i == row) continue;
            double f = T(i, col);
            if (f != 0.0) {
                T.row(i) -= f * T.row(row);
                T(i, col) = 0.0;
                rhs(i) -= f * rhs(row);
            }
        }
        double fr = red(col);
        if (fr != 0.0) {
            red -= fr * T.row(row).transpose();
            red(col) = 0.0;
        }
        basis[static_cast<size_t>(row)] = col;
    }

    LpSolution out;
    out.status = LpStatus::Optimal;
    out.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index var = basis[static_cast<size_t>(i)];
        if (var < n) out.x(var) = rhs(i);
    }
    out.objective = c.dot(out.x);
    return out;
}

LpSolution solve_min_by_enumeration(const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& c) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (b.size() != m || c.size() != n)
        throw std::invalid_argument("solve_min_by_enumeration: shape mismatch");

    // rows of the full system  [A; -I] x <= [b; 0]
    auto row_of = [&](Eigen::Index r, Eigen::VectorXd& coef, double& rhs_r) {
        if (r < m) {
            coef = A.row(r).transpose();
            rhs_r = b(r);
        } else {
            coef = Eigen::VectorXd::Zero(n);
            coef(r - m) = -1.0;
            rhs_r = 0.0;
        }
    };

    const Eigen::Index total = m + n;
    std::vector<Eigen::Index> pick(static_cast<size_t>(n));
    LpSolution best;
    best.status = LpStatus::Infeasible;

    // walk every n-subset of the m+n constraints
    for (Eigen::Index i = 0; i < n; ++i) pick[static_cast<size_t>(i)] = i;
    while (true) {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd rv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd coef;
            double r = 0.0;
            row_of(pick[static_cast<size_t>(i)], coef, r);
            M.row(i) = coef.transpose();
            rv(i) = r;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (lu.isInvertible()) {
            Eigen::VectorXd x = lu.solve(rv);
            bool feasible = x.minCoeff() >= -1e-9;
            for (Eigen::Index r = 0; feasible && r < m; ++r)
                if (A.row(r).dot(x) > b(r) + 1e-9) feasible = false;
            if (feasible) {
                double obj = c.dot(x);
                if (best.status == LpStatus::Infeasible || obj < best.objective) {
                    best.status = LpStatus::Optimal;
                    best.x = x;
                    best.objective = obj;
                }
            }
        }
        // next combination
        Eigen::Index k = n - 1;
        while (k >= 0 && pick[static_cast<size_t>(k)] == total - n + k) --k;
        if (k < 0) break;
        ++pick[static_cast<size_t>(k)];
        for (Eigen::Index j = k + 1; j < n; ++j)
            pick[static_cast<size_t>(j)] = pick[static_cast<size_t>(j - 1)] + 1;
    }
    return best;
}

} // namespace drmvp::lp
