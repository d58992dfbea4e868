#pragma once
// Dense linear programming, sized for the inverse-estimation columns
// (tens of variables). One algorithm, fully deterministic:
//
//   minimize c'x   subject to   A x <= b,  x >= 0,   with c >= 0.
//
// The all-slack basis is dual-feasible because c >= 0, so a dual simplex
// walks straight from it; Bland's smallest-index rule on both the leaving
// and entering choice makes every pivot sequence reproducible and cycle-free.

#include <Eigen/Dense>

namespace drmvp::lp {

enum class LpStatus { Optimal, Infeasible };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd x;       // primal point, only valid when Optimal
    double objective = 0.0;
};

// throws std::invalid_argument on shape mismatch or any c_j < 0
LpSolution solve_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& c);

// Independent reference: enumerate every basic point of {Ax <= b, x >= 0}
// and take the feasible one with the smallest objective. Exponential in the
// dimension, usable only for tiny instances; exists so the simplex above can
// be checked against something that shares none of its machinery.
LpSolution solve_min_by_enumeration(const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& c);

} // namespace drmvp::lp
