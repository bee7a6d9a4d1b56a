#pragma once

// Longitudinal dynamics, driveline power split, mass closure, costs and
// performance requirements.

#include "mmco/cycle.hpp"
#include "mmco/params.hpp"

#include <string>
#include <vector>

namespace mmco {

// Propulsion power at the wheels, W.
double required_power(const VehicleParams& p, double m, double v, double a, double grade_angle);
std::vector<double> required_power(const DriveCycle& cycle, const VehicleParams& p, double m);

// Motor power the driveline asks for when the motor is the only mover, W.
double exogenous_motor_power(double p_req, const VehicleParams& p, double p_em_max);
std::vector<double> exogenous_motor_power(const DriveCycle& cycle, const VehicleParams& p, double m_bar,
                                          double p_em_max);

struct MassBreakdown {
    double m_em = 0.0;
    double m_bat = 0.0;
    double m_gb = 0.0;
    double m_f = 0.0;
    double m_v = 0.0;
    double m = 0.0;  // gross, including the driver
};

// gamma_sizing is the FGT ratio or the CVT's upper ratio.
MassBreakdown mass_closure(const VehicleParams& p, double p_em_max_w, double e_b_max_wh, double gamma_sizing);

// Component cost, EUR.
double component_cost(const VehicleParams& p, double p_em_max_w, double e_b_max_wh);

// Smallest mass the vehicle can have at a given motor size (empty battery and
// gearbox), used for the acceleration pre-filter.
double minimum_gross_mass(const VehicleParams& p, double p_em_max_w);

struct RequirementReport {
    // Gradeability: lower bound on the ratio that carries it (FGT ratio, or
    // CVT upper ratio).
    double grade_gamma_min = 0.0;
    // Top speed: torque-limit lower bound and power-limit upper bound on the
    // ratio that carries it (FGT ratio, or CVT lower ratio).
    double top_gamma_min = 0.0;
    double top_gamma_max = 0.0;
    // Acceleration: required motor power, W.
    double accel_power_required = 0.0;
    bool acceleration_ok = false;
    // Admissible interval of the scalar ratio decision (FGT ratio or CVT lower
    // ratio) after combining gradeability and top speed.
    double band_lo = 0.0;
    double band_hi = 0.0;
    bool feasible = false;
    std::string binding;  // empty when feasible
};

RequirementReport check_requirements(const VehicleParams& p, double p_em_max_w, double t_em_max, double km1,
                                     double km2, double m);

}  // namespace mmco
