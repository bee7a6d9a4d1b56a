#pragma once

// Euler-forward transcription of the sizing-and-control problem at a fixed
// motor size and fixed vehicle mass into a second-order cone program.
//
// Variables (powers in kW, energies in kWh):
//   P_em[N], P_dc[N], P_b[N], P_i[N], E_b[N+1],
//   gamma (FGT: 1, or N when the per-step encoding is requested; CVT: N),
//   gamma_min (CVT), E_b_max, dE_b

#include "mmco/battery.hpp"
#include "mmco/conic_program.hpp"
#include "mmco/cycle.hpp"
#include "mmco/dynamics.hpp"
#include "mmco/motor.hpp"
#include "mmco/params.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace mmco {

class TranscriptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TranscribeOptions {
    bool range_constraint = true;
    // FGT only: one ratio variable per step, tied together by equalities.
    bool fgt_per_step_ratio = false;
};

// Analytic feasibility of the ratio decision (FGT ratio or CVT lower ratio)
// from the per-step torque, power and overspeed limits plus gradeability and
// top speed.
struct RatioPresolve {
    bool feasible = true;
    double lo = 0.0;
    double hi = 0.0;
    std::string binding;  // constraint names when infeasible
    std::string detail;
};

RatioPresolve presolve_ratio(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor, double m_bar);

struct Transcription {
    ConicProgram program;
    VehicleParams params;
    BatteryModel battery;
    std::vector<double> p_req_kw;     // at m_bar
    std::vector<double> p_em_bar_kw;  // exogenous motor power
    std::vector<double> omega_per_ratio;  // rad/s per unit ratio, v*gamma_fd/r_w
    std::vector<LossCoefficients> coeff_kw;
    RequirementReport requirements;
    double t_max_kw = 0.0;  // kW per rad/s
    double km1_kw = 0.0;
    double km2_kw = 0.0;
    double d_cycle_km = 0.0;
};

Transcription transcribe(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                         const BatteryModel& battery, double m_bar, const TranscribeOptions& options = {});

// For CVT steps at standstill the ratio is free; report it as the upper ratio.
void tie_break_standstill_ratio(const Transcription& t, Solution& s);

// |(P_i - P_b)*P_oc - P_i^2| / max(P_oc^2, 1) per step, powers in W.
std::vector<double> battery_cone_residual(const Solution& s, const Transcription& t);
double battery_cone_residual(double p_i_w, double p_b_w, double p_oc_w);

struct RelaxationResiduals {
    double drive = 0.0;    // relative, max over unclamped steps
    double loss = 0.0;
    double battery = 0.0;
    int drive_checked = 0;
    int loss_checked = 0;
    int battery_checked = 0;
};
RelaxationResiduals relaxation_residuals(const Solution& s, const Transcription& t);

struct CostBreakdown {
    double c_op = 0.0;    // EUR
    double c_comp = 0.0;  // EUR
    double j_tco = 0.0;   // EUR
};
CostBreakdown objective_breakdown(const Solution& s, const VehicleParams& p, double p_em_max_w, double d_cycle_m);

}  // namespace mmco
