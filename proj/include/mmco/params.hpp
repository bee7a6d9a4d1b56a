#pragma once

// Vehicle, cost and requirement parameters. Stored in SI units except where
// the unit is part of the name (kW, kWh, km).

#include <string>

namespace mmco {

enum class Transmission { fgt, cvt };

std::string to_string(Transmission t);
Transmission transmission_from_string(const std::string& s);

struct VehicleParams {
    std::string name = "vehicle";
    Transmission transmission = Transmission::fgt;

    double m_d = 75.0;           // kg, driver
    double m_f = 10.0;           // kg, frame
    double c_rr = 0.03;
    double g = 9.81;             // m/s^2
    double rho_a = 1.225;        // kg/m^3
    double c_d = 1.0;
    double A_f = 0.68;           // m^2
    double r_w = 0.125;          // m
    double gamma_fd = 1.0;
    double eta_gb = 0.97;
    double eta_fd = 1.0;
    double R_b = 0.5;            // regenerative braking fraction
    double mu_x = 0.4;           // parsed, not used by any constraint
    double omega_em_max = 600.0; // rad/s
    double P_aux = 10.0;         // W
    double zeta_min = 0.2;
    double zeta_max = 1.0;

    double rho_em = 0.5;       // kg/kW
    double rho_bat = 4.73;     // kg/kWh
    double rho_fgt = 0.01;     // kg
    double m_cvt_base = 0.0;   // kg
    double rho_cvt = 0.0;      // kg
    double c_f = 0.0;          // CVT ratio coverage

    double c_el = 0.22;   // EUR/kWh
    double c_bat = 285.0; // EUR/kWh
    double c_em = 101.0;  // EUR/kW
    double c_add = 88.0;  // EUR
    double D_max = 8000.0; // km
    double D_exp = 25.0;   // km

    double t_acc = 7.5;          // s
    double theta_start = 0.10;   // grade fraction
    double v_max = 25.0 / 3.6;   // m/s

    double eta() const { return eta_gb * eta_fd; }
    bool is_cvt() const { return transmission == Transmission::cvt; }

    // Throws ValidationError naming the first offending key.
    void validate() const;
};

VehicleParams scooter_preset();
VehicleParams moped_preset(Transmission t);
VehicleParams preset(const std::string& name, Transmission t);

}  // namespace mmco
