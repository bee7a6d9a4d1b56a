#pragma once

// Mass fixed-point iteration at a fixed motor size, motor-size sweep and
// scenario comparison.

#include "mmco/transcribe.hpp"

#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmco {

struct SolverTolerances {
    double feasibility = 1e-8;
    double gap = 1e-8;
};

class SolverAdapter {
public:
    virtual ~SolverAdapter() = default;
    // Must be safe to call concurrently on independent programs.
    virtual Solution solve(const ConicProgram& program, const SolverTolerances& tol) const = 0;
    virtual std::string name() const = 0;
};

// The in-repo interior-point solver.
class InteriorPointAdapter : public SolverAdapter {
public:
    Solution solve(const ConicProgram& program, const SolverTolerances& tol) const override;
    std::string name() const override { return "mmco-ipm"; }
};

const SolverAdapter& default_solver();

struct LoopOptions {
    double m_v0 = -1.0;  // kg, negative selects frame mass + 3 kg
    double eps = 1e-3;   // kg
    int max_iter = 25;
    SolverTolerances tolerances;
    TranscribeOptions transcribe;
};

struct MassIterate {
    double m_v_bar = 0.0;   // vehicle mass used in the solve
    double m_v_star = 0.0;  // mass closure of the solution
    double objective = 0.0;
    int solver_iterations = 0;
};

struct DesignPoint {
    std::string label;
    Transmission transmission = Transmission::fgt;
    double p_em_max = 0.0;   // W
    double e_b_max = 0.0;    // Wh
    double gamma = 0.0;      // FGT ratio or CVT upper ratio
    double gamma_min = 0.0;  // CVT only
    double gamma_max = 0.0;  // CVT only
    MassBreakdown mass;      // closure of the final solution
    double m_bar = 0.0;      // gross mass of the final solve
    int iterations = 0;
    bool trace_monotone = true;
    std::vector<MassIterate> trace;
    CostBreakdown cost;
    double delta_e = 0.0;  // Wh over one cycle
    RelaxationResiduals residuals;
    Violation violation;

    std::vector<double> gamma_k;  // per step
    std::vector<double> p_em;     // W
    std::vector<double> p_dc;     // W
    std::vector<double> p_b;      // W
    std::vector<double> p_i;      // W
    std::vector<double> e_b;      // Wh, N + 1 samples
};

class DesignInfeasible : public std::runtime_error {
public:
    DesignInfeasible(std::string binding, const std::string& detail)
        : std::runtime_error(binding + ": " + detail), binding_(std::move(binding)) {}
    const std::string& binding() const { return binding_; }

private:
    std::string binding_;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, std::vector<MassIterate> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<MassIterate>& trace() const { return trace_; }

private:
    std::vector<MassIterate> trace_;
};

class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

DesignPoint mass_fixed_point(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                             const BatteryModel& battery, const LoopOptions& options = {},
                             const SolverAdapter& solver = default_solver());

// Design point from a single solve at a fixed vehicle mass.
DesignPoint solve_at_mass(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                          const BatteryModel& battery, double m_v, const LoopOptions& options = {},
                          const SolverAdapter& solver = default_solver());

enum class EntryStatus { optimal, infeasible, non_converged, solver_failure };
std::string to_string(EntryStatus s);

struct SweepEntry {
    double p_em_max = 0.0;
    EntryStatus status = EntryStatus::infeasible;
    std::string binding;
    std::string detail;
    std::optional<DesignPoint> point;
};

struct SweepResult {
    std::string label;
    std::vector<double> grid;
    std::vector<SweepEntry> entries;
    int best = -1;

    const DesignPoint& best_point() const;
    int feasible_count() const;
    double mean_solves() const;
};

class SweepError : public std::runtime_error {
public:
    SweepError(const std::string& what, SweepResult result) : std::runtime_error(what), result_(std::move(result)) {}
    const SweepResult& result() const { return result_; }

private:
    SweepResult result_;
};

std::vector<double> make_grid(double lo, double hi, double step);

// threads <= 0 uses the hardware concurrency. Throws SweepError when no size is feasible.
SweepResult sweep(const DriveCycle& cycle, const VehicleParams& p, std::shared_ptr<const MotorModel> motor,
                  const BatteryModel& battery, const std::vector<double>& grid, const LoopOptions& options = {},
                  int threads = 0, const SolverAdapter& solver = default_solver());

struct ScenarioDelta {
    std::string from, to;
    double tco_pct = 0.0;
    double comp_pct = 0.0;
    double el_pct = 0.0;
    double gamma = 0.0;    // absolute
    double p_em_max = 0.0; // W
    double e_b_max = 0.0;  // Wh
};

ScenarioDelta compare_designs(const DesignPoint& a, const DesignPoint& b);
ScenarioDelta compare_scenarios(const SweepResult& a, const SweepResult& b);

nlohmann::json design_to_json(const DesignPoint& d, bool trajectories = true);
DesignPoint design_from_json(const nlohmann::json& j);
nlohmann::json sweep_to_json(const SweepResult& r);
SweepResult sweep_from_json(const nlohmann::json& j);
nlohmann::json delta_to_json(const ScenarioDelta& d);

// Columns: t_s,v_mps,p_em_w,p_i_w,e_b_wh,gamma,omega_em_radps
void write_trajectory_csv(std::ostream& out, const DesignPoint& d, const DriveCycle& cycle, const VehicleParams& p);

}  // namespace mmco
