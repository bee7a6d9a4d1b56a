#include "mmco/validator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mmco {

int SimulationTrace::count(bool SimulationStep::*flag) const {
    int n = 0;
    for (const auto& s : steps) n += (s.*flag) ? 1 : 0;
    return n;
}

bool SimulationTrace::feasible() const {
    for (const auto& s : steps) {
        if (s.torque_limited || s.power_limited || s.overspeed || s.cone_infeasible) return false;
    }
    return true;
}

bool internal_power(double p_b, double p_oc, double& p_i) {
    const double disc = p_oc * p_oc - 4.0 * p_oc * p_b;
    if (disc < 0.0) {
        p_i = 0.5 * p_oc;
        return false;
    }
    // Written to avoid cancellation when P_b is small against P_oc.
    const double root = std::sqrt(disc);
    p_i = p_oc + root > 0.0 ? 2.0 * p_oc * p_b / (p_oc + root) : 0.0;
    return true;
}

SimulationTrace simulate(const DesignPoint& design, const DriveCycle& cycle, const VehicleParams& p,
                         const ScaledMotor& motor, const CellTable& cell, const BatteryModel& battery,
                         const SimulateOptions& options) {
    const std::size_t n = cycle.size() - 1;
    if (design.transmission != p.transmission) throw std::invalid_argument("design and parameters disagree on transmission");
    if (p.is_cvt() && design.gamma_k.size() != n) throw std::invalid_argument("CVT design needs a ratio per step");

    SimulationTrace tr;
    tr.label = design.label;
    tr.transmission = design.transmission;
    tr.dt = cycle.dt;
    tr.delta_e_opt = design.delta_e;
    const double eta = p.eta();
    const double emax = design.e_b_max;
    double e = p.zeta_max * emax;
    const double tol = options.limit_tolerance;

    for (std::size_t k = 0; k < n; ++k) {
        SimulationStep s;
        s.e_b = e;
        const double gamma = p.is_cvt() ? design.gamma_k[k] : design.gamma;
        s.omega = cycle.speed[k] * p.gamma_fd * gamma / p.r_w;
        s.p_req = required_power(p, design.mass.m, cycle.speed[k], cycle.accel[k], cycle.grade_angle[k]);

        const double t_lim = motor.t_max * s.omega;
        const double p_lim = motor.km1 * s.omega + motor.km2;
        if (s.p_req >= 0.0) {
            s.p_em = s.p_req / eta;
            s.torque_limited = s.p_em > t_lim * (1.0 + tol) + 1e-9;
            s.power_limited = s.p_em > p_lim * (1.0 + tol) + 1e-9;
        } else {
            // Regeneration capped by the braking split and the envelope; the rest goes to the friction brake.
            s.p_em = std::max({eta * p.R_b * s.p_req, -t_lim, -p_lim});
            s.p_brake = s.p_em / eta - s.p_req;
        }
        s.overspeed = s.omega > motor.omega_max * (1.0 + tol);
        s.torque = s.omega > 0.0 ? s.p_em / s.omega : 0.0;

        if (s.omega <= 0.0) {
            s.p_loss = 0.0;
        } else if (options.fitted_models) {
            const double pem_bar = exogenous_motor_power(
                required_power(p, design.m_bar, cycle.speed[k], cycle.accel[k], cycle.grade_angle[k]), p, motor.p_em_max);
            s.p_loss = motor.fitted_loss(pem_bar, s.omega);
        } else {
            s.p_loss = motor.map_loss(s.omega, s.torque, &s.map_clamped);
        }
        s.p_b = s.p_em + s.p_loss + p.P_aux;
        s.p_oc = options.fitted_models ? battery.poc(e, emax) : table_open_circuit_power(cell, battery, e, emax);
        s.cone_infeasible = !internal_power(s.p_b, s.p_oc, s.p_i);
        e -= s.p_i * cycle.dt / 3600.0;
        tr.steps.push_back(s);
    }
    tr.e_b_end = e;
    tr.delta_e_sim = p.zeta_max * emax - e;
    tr.gap = tr.delta_e_opt != 0.0 ? std::abs(tr.delta_e_sim - tr.delta_e_opt) / std::abs(tr.delta_e_opt) : 0.0;
    return tr;
}

OperatingSummary operating_points(const SimulationTrace& trace) {
    OperatingSummary out;
    double sum_m = 0.0, sum_r = 0.0;
    int above = 0;
    for (const auto& s : trace.steps) {
        if (s.omega <= 0.0 || s.p_em == 0.0) continue;
        OperatingPoint op{s.omega, s.torque, 0.0};
        if (s.p_em > 0.0) {
            op.efficiency = s.p_em / (s.p_em + s.p_loss);
            sum_m += op.efficiency;
            ++out.motoring;
            if (op.efficiency >= 0.8) ++above;
        } else {
            op.efficiency = std::max(0.0, (-s.p_em - s.p_loss) / -s.p_em);
            sum_r += op.efficiency;
            ++out.regenerating;
        }
        out.points.push_back(op);
    }
    if (out.motoring) {
        out.mean_motoring_efficiency = sum_m / out.motoring;
        out.share_above_80 = static_cast<double>(above) / out.motoring;
    }
    if (out.regenerating) out.mean_regen_efficiency = sum_r / out.regenerating;
    return out;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace, const DriveCycle& cycle) {
    out << "t_s,p_req_w,p_em_w,p_brake_w,omega_radps,torque_nm,p_loss_w,p_b_w,p_oc_w,p_i_w,e_b_wh,flags\n";
    char buf[512];
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const auto& s = trace.steps[k];
        std::string flags;
        auto add = [&flags](bool on, const char* name) {
            if (!on) return;
            if (!flags.empty()) flags += '|';
            flags += name;
        };
        add(s.torque_limited, "torque");
        add(s.power_limited, "power");
        add(s.overspeed, "overspeed");
        add(s.map_clamped, "map");
        add(s.cone_infeasible, "cone");
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,",
                      cycle.time[k], s.p_req, s.p_em, s.p_brake, s.omega, s.torque, s.p_loss, s.p_b, s.p_oc, s.p_i,
                      s.e_b);
        out << buf << flags << '\n';
    }
}

nlohmann::json trace_summary_json(const SimulationTrace& trace) {
    const OperatingSummary ops = operating_points(trace);
    return {{"label", trace.label},
            {"transmission", to_string(trace.transmission)},
            {"steps", trace.steps.size()},
            {"delta_e_sim_wh", trace.delta_e_sim},
            {"delta_e_opt_wh", trace.delta_e_opt},
            {"gap_pct", 100.0 * trace.gap},
            {"feasible", trace.feasible()},
            {"flags",
             {{"torque_limited", trace.count(&SimulationStep::torque_limited)},
              {"power_limited", trace.count(&SimulationStep::power_limited)},
              {"overspeed", trace.count(&SimulationStep::overspeed)},
              {"map_clamped", trace.count(&SimulationStep::map_clamped)},
              {"cone_infeasible", trace.count(&SimulationStep::cone_infeasible)}}},
            {"operating_points",
             {{"motoring", ops.motoring},
              {"regenerating", ops.regenerating},
              {"mean_motoring_efficiency", ops.mean_motoring_efficiency},
              {"mean_regen_efficiency", ops.mean_regen_efficiency},
              {"share_above_80", ops.share_above_80}}}};
}

}  // namespace mmco
