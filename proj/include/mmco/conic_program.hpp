#pragma once

// Solver-agnostic second-order cone program with a named variable layout.
//
//   minimize    c'x + objective_constant
//   subject to  A_eq x = b_eq
//               G x + s = h,   s in (R+^linear) x SOC(d_1) x ... x SOC(d_q)
//
// The first `cones.linear` rows of G are plain inequalities G_i x <= h_i; the
// remaining rows are grouped into second-order cones of the listed sizes.

#include "mmco/socp.hpp"

#include <map>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace mmco {

struct VarBlock {
    std::string name;
    int offset = 0;
    int size = 0;
};

struct RowGroup {
    std::string tag;
    int first = 0;
    int count = 0;
};

struct ProgramMeta {
    double dt = 1.0;
    int steps = 0;             // N
    double p_em_max_w = 0.0;
    double m_bar = 0.0;        // kg, gross mass used for P_req
    std::string transmission;  // FGT or CVT
    double d_cycle_m = 0.0;
    std::string power_unit = "kW";
    std::string energy_unit = "kWh";
    std::string initial_soe = "full";
};

struct ConicProgram {
    std::vector<VarBlock> layout;
    Eigen::VectorXd c;
    double objective_constant = 0.0;
    socp::SparseMatrix A_eq;
    Eigen::VectorXd b_eq;
    socp::SparseMatrix G;
    Eigen::VectorXd h;
    socp::ConeDims cones;
    std::vector<RowGroup> eq_groups;
    std::vector<RowGroup> in_groups;  // covers linear rows and cone rows
    ProgramMeta meta;

    int num_vars() const { return static_cast<int>(c.size()); }
    const VarBlock& block(const std::string& name) const;
    bool has(const std::string& name) const;
    int index(const std::string& name, int k = 0) const;

    socp::Problem to_problem() const;
};

// Incremental builder collecting triplets.
class ProgramBuilder {
public:
    int add_block(const std::string& name, int size);
    int num_vars() const { return n_; }

    // Linear inequality sum coef*x <= rhs.
    void add_le(const std::vector<std::pair<int, double>>& terms, double rhs, const std::string& tag);
    void add_eq(const std::vector<std::pair<int, double>>& terms, double rhs, const std::string& tag);
    // Second-order cone: every row is (h_i - G_i x) with G_i = -terms, h_i = constant, i.e.
    // each row describes the affine expression sum coef*x + constant; first row is the bound.
    struct AffineRow {
        std::vector<std::pair<int, double>> terms;
        double constant = 0.0;
    };
    void add_cone(const std::vector<AffineRow>& rows, const std::string& tag);

    ConicProgram finish(Eigen::VectorXd c, double constant, ProgramMeta meta);

private:
    struct Row {
        std::vector<std::pair<int, double>> terms;
        double rhs = 0.0;
    };
    void push_group(std::vector<RowGroup>& groups, const std::string& tag, int row);

    int n_ = 0;
    std::vector<VarBlock> layout_;
    std::vector<Row> eq_, le_;
    std::vector<std::vector<Row>> cones_;
    std::vector<std::string> cone_tags_;
    std::vector<RowGroup> eq_groups_, le_groups_;
};

struct Solution {
    std::string status = "numerical-failure";  // optimal | infeasible | unbounded | max-iterations | numerical-failure
    double objective = 0.0;                    // including the constant
    std::map<std::string, std::vector<double>> values;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    double feasibility_tol = 0.0;
    double gap_tol = 0.0;
    Eigen::VectorXd x;

    bool optimal() const { return status == "optimal"; }
    const std::vector<double>& at(const std::string& name) const;
};

Solution make_solution(const ConicProgram& program, const socp::Result& result, const socp::Settings& settings);

// Largest violation of the equality and inequality/cone blocks at x, in
// program units (cone violation measured as ||u1|| - u0).
struct Violation {
    double equality = 0.0;
    double inequality = 0.0;
    double cone = 0.0;
    std::string worst_tag;
};
Violation constraint_violation(const ConicProgram& program, const Eigen::VectorXd& x);

// Interchange format: {"format": "mmco-socp", "version": 1, "variables": [...],
// "objective": {...}, "A_eq": {rows, cols, triplets}, "b_eq": [...], "A_in": ..., "b_in": ...,
// "cones": [{"dim", "G": triplets, "h"}], "meta": {...}}
nlohmann::json program_to_json(const ConicProgram& program);
ConicProgram program_from_json(const nlohmann::json& j);
nlohmann::json solution_to_json(const Solution& s);
Solution solution_from_json(const nlohmann::json& j, const ConicProgram& program);

}  // namespace mmco
