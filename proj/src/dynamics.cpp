#include "mmco/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmco {

double required_power(const VehicleParams& p, double m, double v, double a, double grade_angle) {
    const double force = m * (a + p.c_rr * p.g * std::cos(grade_angle) + p.g * std::sin(grade_angle)) +
                         0.5 * p.rho_a * p.c_d * p.A_f * v * v;
    return force * v;
}

std::vector<double> required_power(const DriveCycle& cycle, const VehicleParams& p, double m) {
    if (!(m > 0.0)) throw ValidationError("mass must be positive");
    std::vector<double> out(cycle.size());
    for (std::size_t k = 0; k < cycle.size(); ++k) {
        out[k] = required_power(p, m, cycle.speed[k], cycle.accel[k], cycle.grade_angle[k]);
    }
    return out;
}

double exogenous_motor_power(double p_req, const VehicleParams& p, double p_em_max) {
    const double eta = p.eta();
    return std::max({p_req / eta, p_req * eta * p.R_b, -p_em_max});
}

std::vector<double> exogenous_motor_power(const DriveCycle& cycle, const VehicleParams& p, double m_bar,
                                          double p_em_max) {
    std::vector<double> out = required_power(cycle, p, m_bar);
    for (double& x : out) x = exogenous_motor_power(x, p, p_em_max);
    return out;
}

MassBreakdown mass_closure(const VehicleParams& p, double p_em_max_w, double e_b_max_wh, double gamma_sizing) {
    MassBreakdown mb;
    mb.m_em = p.rho_em * p_em_max_w / 1000.0;
    mb.m_bat = p.rho_bat * e_b_max_wh / 1000.0;
    mb.m_gb = p.is_cvt() ? p.m_cvt_base + p.rho_cvt * gamma_sizing * gamma_sizing
                         : p.rho_fgt * gamma_sizing * gamma_sizing;
    mb.m_f = p.m_f;
    mb.m_v = mb.m_em + mb.m_bat + mb.m_gb + mb.m_f;
    mb.m = mb.m_v + p.m_d;
    return mb;
}

double component_cost(const VehicleParams& p, double p_em_max_w, double e_b_max_wh) {
    return p.c_bat * e_b_max_wh / 1000.0 + p.c_em * p_em_max_w / 1000.0 + p.c_add;
}

double minimum_gross_mass(const VehicleParams& p, double p_em_max_w) {
    return p.m_d + p.m_f + p.rho_em * p_em_max_w / 1000.0 + (p.is_cvt() ? p.m_cvt_base : 0.0);
}

RequirementReport check_requirements(const VehicleParams& p, double p_em_max_w, double t_em_max, double km1,
                                     double km2, double m) {
    if (!(p_em_max_w > 0.0) || !(t_em_max > 0.0) || !(m > 0.0)) {
        throw ValidationError("requirement check needs positive motor size, torque and mass");
    }
    RequirementReport r;
    const double eta = p.eta();
    const double inf = std::numeric_limits<double>::infinity();

    const double theta = std::atan(p.theta_start);
    r.grade_gamma_min = m * p.g * std::sin(theta) * p.r_w / (eta * t_em_max * p.gamma_fd);

    const double t_req = required_power(p, m, p.v_max, 0.0, 0.0) / p.v_max * p.r_w;
    r.top_gamma_min = t_req / (t_em_max * eta * p.gamma_fd);
    // (km1*gamma*gamma_fd + km2*r_w/v_max)*eta >= t_req, km1 <= 0
    const double slack = km2 * p.r_w / p.v_max - t_req / eta;
    if (km1 < 0.0) {
        r.top_gamma_max = slack / (-km1 * p.gamma_fd);
    } else {
        r.top_gamma_max = slack >= 0.0 ? inf : -inf;
    }

    r.accel_power_required = p.v_max * p.v_max * m / (p.t_acc * eta);
    r.acceleration_ok = p_em_max_w >= r.accel_power_required;

    const double grade_on_decision = p.is_cvt() ? r.grade_gamma_min / p.c_f : r.grade_gamma_min;
    r.band_lo = std::max(grade_on_decision, r.top_gamma_min);
    r.band_hi = r.top_gamma_max;
    if (!r.acceleration_ok) {
        r.binding = "acceleration";
    } else if (r.top_gamma_min > r.top_gamma_max) {
        r.binding = "top-speed";
    } else if (grade_on_decision > r.top_gamma_max) {
        r.binding = "gradeability";
    }
    r.feasible = r.binding.empty();
    return r;
}

}  // namespace mmco
