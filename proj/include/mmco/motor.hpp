#pragma once

// Electric motor: a synthetic reference loss map, its speed-polynomial fit per
// mechanical power level, and linear size scaling.

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <vector>

namespace mmco {

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// loss(omega, T) = c_cu*T^2 + c_fr*omega + c_fe*omega^2 + c_0 + c_st*(omega*T)^2   [W]
// The stray-load term c_st grows with output power and moves the efficiency
// peak off the envelope boundary.
struct LossShape {
    double c_cu = 0.4;
    double c_fr = 0.01;
    double c_fe = 1e-5;
    double c_0 = 60.0;
    double c_st = 1e-4;

    double loss(double omega, double torque) const {
        const double p = omega * torque;
        return c_cu * torque * torque + c_fr * omega + c_fe * omega * omega + c_0 + c_st * p * p;
    }
};

struct MotorMapSpec {
    LossShape shape;
    double p_max_ref = 1000.0;   // W
    double t_max_ref = 4.0;      // Nm
    double omega_max = 600.0;    // rad/s
    // Power limit at omega_max as a fraction of p_max_ref; sets km1, km2.
    double power_frac_at_omega_max = 0.8;
    int omega_points = 61;
    int torque_points = 81;
};

struct LossCoefficients {
    double a1 = 0.0;  // W
    double a2 = 0.0;  // W s/rad
    double a3 = 0.0;  // W s^2/rad^2
};

struct MotorModel {
    LossShape shape;
    double p_max_ref = 0.0;
    double t_max_ref = 0.0;
    double omega_max = 0.0;
    double km1_ref = 0.0;  // W s/rad, <= 0
    double km2_ref = 0.0;  // W, >= 0

    std::vector<double> omega_grid;   // ascending from 0
    std::vector<double> torque_grid;  // ascending, symmetric
    Eigen::MatrixXd loss_map;         // omega x torque, W

    std::vector<double> levels;  // mechanical power levels, W
    std::vector<LossCoefficients> coeffs;
    std::vector<int> excluded_levels;  // indices with too few contour points
    double fit_rmse_norm = -1.0;  // < 0 until fitted

    bool fitted() const { return !coeffs.empty(); }

    // Torque limit from the constant-torque and power-line segments, Nm.
    double torque_limit(double omega) const;
    double power_limit(double omega) const { return km1_ref * omega + km2_ref; }
    bool in_envelope(double omega, double torque, double tol = 1e-9) const;

    // Bilinear lookup in the map, clamped at the grid edges. `clamped` is set
    // when the point lies outside the grid or the envelope.
    double map_loss(double omega, double torque, bool* clamped = nullptr) const;
    double map_efficiency(double omega, double torque) const;

    // Nearest-level lookup in the coefficient table.
    const LossCoefficients& lookup(double p_em) const;
    double fitted_loss(double p_em, double omega) const;
};

MotorModel synthesize_motor_map(const MotorMapSpec& spec);

// Fits a1 + a2*omega + a3*omega^2 (a3 >= 0) along every constant-power
// contour of the map, sampled at the map's speed nodes.
MotorModel fit_loss_coefficients(MotorModel model, int level_count = 201);

// A motor of size p_em_max derived from the reference by linear scaling.
struct ScaledMotor {
    std::shared_ptr<const MotorModel> ref;
    double p_em_max = 0.0;
    double scale = 1.0;  // p_em_max / p_max_ref
    double t_max = 0.0;
    double km1 = 0.0;
    double km2 = 0.0;
    double omega_max = 0.0;

    LossCoefficients coefficients(double p_em) const;
    double fitted_loss(double p_em, double omega) const;
    double map_loss(double omega, double torque, bool* clamped = nullptr) const;
    double torque_limit(double omega) const;
};

ScaledMotor scale_motor(std::shared_ptr<const MotorModel> model, double p_em_max);
ScaledMotor scale_motor(const ScaledMotor& motor, double p_em_max);

}  // namespace mmco
