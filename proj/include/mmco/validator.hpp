#pragma once

// Forward quasi-static simulation of a finished design on the reference loss
// map and the cell table, to measure the gap to the optimizer's consumption.

#include "mmco/battery.hpp"
#include "mmco/cycle.hpp"
#include "mmco/design_loop.hpp"
#include "mmco/motor.hpp"
#include "mmco/params.hpp"

#include <nlohmann/json_fwd.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace mmco {

struct SimulationStep {
    double p_req = 0.0;    // W
    double p_em = 0.0;     // W
    double p_brake = 0.0;  // W, friction brake, >= 0
    double omega = 0.0;    // rad/s
    double torque = 0.0;   // Nm
    double p_loss = 0.0;   // W
    double p_b = 0.0;      // W
    double p_oc = 0.0;     // W
    double p_i = 0.0;      // W
    double e_b = 0.0;      // Wh at the start of the step
    bool torque_limited = false;
    bool power_limited = false;
    bool overspeed = false;
    bool map_clamped = false;
    bool cone_infeasible = false;
};

struct SimulationTrace {
    std::string label;
    Transmission transmission = Transmission::fgt;
    double dt = 1.0;
    std::vector<SimulationStep> steps;
    double e_b_end = 0.0;     // Wh
    double delta_e_sim = 0.0; // Wh
    double delta_e_opt = 0.0; // Wh
    double gap = 0.0;         // |sim - opt| / opt

    int count(bool SimulationStep::*flag) const;
    bool feasible() const;
};

// Smaller root of P_i^2 - P_oc*P_i + P_oc*P_b = 0; false when the discriminant is negative.
bool internal_power(double p_b, double p_oc, double& p_i);

struct SimulateOptions {
    // Use the fitted loss polynomial and the affine P_oc instead of the map
    // and the table, isolating fit error from relaxation error.
    bool fitted_models = false;
    // Relative slack on the torque, power and speed limits. The replay runs at
    // the closure mass, which differs from the solved mass by up to the loop
    // tolerance, so limit-riding steps can exceed a limit by a few ppm.
    double limit_tolerance = 1e-5;
};

SimulationTrace simulate(const DesignPoint& design, const DriveCycle& cycle, const VehicleParams& p,
                         const ScaledMotor& motor, const CellTable& cell, const BatteryModel& battery,
                         const SimulateOptions& options = {});

struct OperatingPoint {
    double omega = 0.0;
    double torque = 0.0;  // negative while regenerating
    double efficiency = 0.0;
};

struct OperatingSummary {
    std::vector<OperatingPoint> points;
    int motoring = 0;
    int regenerating = 0;
    double mean_motoring_efficiency = 0.0;
    double mean_regen_efficiency = 0.0;
    double share_above_80 = 0.0;  // motoring points with efficiency >= 0.8
};

OperatingSummary operating_points(const SimulationTrace& trace);

// Columns: t_s,p_req_w,p_em_w,p_brake_w,omega_radps,torque_nm,p_loss_w,p_b_w,p_oc_w,p_i_w,e_b_wh,flags
void write_trace_csv(std::ostream& out, const SimulationTrace& trace, const DriveCycle& cycle);
nlohmann::json trace_summary_json(const SimulationTrace& trace);

}  // namespace mmco
