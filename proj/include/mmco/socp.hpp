#pragma once

// Primal-dual interior-point solver for second-order cone programs
//
//   minimize    c'x
//   subject to  A x = b
//               G x + s = h,   s in K
//
// where K is the product of a nonnegative orthant of dimension `linear`
// followed by second-order cones {(u0, u1) : ||u1|| <= u0}. Uses Nesterov-Todd
// scaling, Mehrotra predictor-corrector steps, Ruiz equilibration and a
// regularized sparse LDL' factorization of the quasi-definite KKT system.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace mmco::socp {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct ConeDims {
    int linear = 0;
    std::vector<int> soc;

    int total() const;
    int degree() const { return linear + static_cast<int>(soc.size()); }
};

struct Problem {
    Eigen::VectorXd c;
    SparseMatrix A;
    Eigen::VectorXd b;
    SparseMatrix G;
    Eigen::VectorXd h;
    ConeDims cones;
};

struct Settings {
    double feasibility_tol = 1e-8;
    double gap_tol = 1e-8;
    double infeasibility_tol = 1e-8;
    int max_iterations = 100;
    bool equilibrate = true;
    int equilibration_passes = 15;
    double static_regularization = 1e-10;
    int refinement_steps = 4;
    double step_fraction = 0.99;
    bool verbose = false;  // per-iteration log on stderr
};

enum class Status { optimal, primal_infeasible, dual_infeasible, max_iterations, numerical_failure };

std::string to_string(Status status);

struct Result {
    Status status = Status::numerical_failure;
    Eigen::VectorXd x, y, s, z;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    // Residuals measured on the equilibrated data at exit.
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
};

// Throws std::invalid_argument on dimension mismatches.
Result solve(const Problem& problem, const Settings& settings = {});

// Cone helpers, exposed for testing.
namespace cone {
// Largest alpha in [0, inf) with u + alpha*du in the cone (inf if unbounded).
double max_step(const ConeDims& dims, const Eigen::VectorXd& u, const Eigen::VectorXd& du);
// Smallest "eigenvalue" of u with respect to the cone (negative => outside).
double min_eigenvalue(const ConeDims& dims, const Eigen::VectorXd& u);
}  // namespace cone

}  // namespace mmco::socp
