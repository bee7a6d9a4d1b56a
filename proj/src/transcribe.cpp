#include "mmco/transcribe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mmco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cycle_km(const DriveCycle& cycle) { return std::max(cycle.distance, 1.0) / 1000.0; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

}  // namespace

RatioPresolve presolve_ratio(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor, double m_bar) {
    RatioPresolve r;
    const RequirementReport req = check_requirements(p, motor.p_em_max, motor.t_max, motor.km1, motor.km2, m_bar);
    const double cf = p.is_cvt() ? p.c_f : 1.0;
    // Lower bounds act on gamma_max = cf*gamma_min for the per-step torque limits.
    double lo = req.band_lo;
    std::string lo_name = req.top_gamma_min >= (p.is_cvt() ? req.grade_gamma_min / cf : req.grade_gamma_min)
                              ? "top-speed"
                              : "gradeability";
    double hi = req.band_hi;
    std::string hi_name = "top-speed";

    const std::size_t n = cycle.size() - 1;
    const double eta = p.eta();
    for (std::size_t k = 0; k < n; ++k) {
        const double ck = cycle.speed[k] * p.gamma_fd / p.r_w;
        if (ck <= 0.0) continue;
        const double over = motor.omega_max / ck;
        if (over < hi) {
            hi = over;
            hi_name = "overspeed (step " + std::to_string(k) + ")";
        }
        const double preq = required_power(p, m_bar, cycle.speed[k], cycle.accel[k], cycle.grade_angle[k]);
        const double p_lo = std::max(preq / eta, preq * eta * p.R_b);
        if (p_lo <= 0.0) continue;
        const double torque_lo = p_lo / (motor.t_max * ck) / cf;
        if (torque_lo > lo) {
            lo = torque_lo;
            lo_name = "torque-limit (step " + std::to_string(k) + ")";
        }
        double power_hi = kInf;
        if (motor.km1 < 0.0) {
            power_hi = (motor.km2 - p_lo) / (-motor.km1 * ck);
        } else if (p_lo > motor.km2) {
            power_hi = -kInf;
        }
        if (power_hi < hi) {
            hi = power_hi;
            hi_name = "power-limit (step " + std::to_string(k) + ")";
        }
        if (p.is_cvt()) {
            // The step's own ratio must fit between its torque and upper limits.
            const double step_hi = std::min(over, power_hi);
            if (torque_lo * cf > step_hi) {
                r.feasible = false;
                r.binding = "torque-limit/" + std::string(step_hi == over ? "overspeed" : "power-limit");
                r.detail = "step " + std::to_string(k) + " needs " + fmt(p_lo) + " W";
                r.lo = lo;
                r.hi = hi;
                return r;
            }
        }
    }
    r.lo = lo;
    r.hi = hi;
    if (lo > hi) {
        r.feasible = false;
        r.binding = lo_name + " vs " + hi_name;
        r.detail = "ratio must be >= " + fmt(lo) + " and <= " + fmt(hi);
    }
    return r;
}

Transcription transcribe(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                         const BatteryModel& battery, double m_bar, const TranscribeOptions& options) {
    if (cycle.size() < 2) throw TranscriptionError("cycle needs at least two samples");
    if (!(m_bar > 0.0)) throw TranscriptionError("mass must be positive");
    const int n = static_cast<int>(cycle.size()) - 1;
    const double dt = cycle.dt;
    const bool cvt = p.is_cvt();
    const bool per_step = cvt || options.fgt_per_step_ratio;

    Transcription t;
    t.params = p;
    t.battery = battery;
    t.d_cycle_km = cycle_km(cycle);
    t.requirements = check_requirements(p, motor.p_em_max, motor.t_max, motor.km1, motor.km2, m_bar);
    t.t_max_kw = motor.t_max / 1000.0;
    t.km1_kw = motor.km1 / 1000.0;
    t.km2_kw = motor.km2 / 1000.0;

    const std::vector<double> preq = required_power(cycle, p, m_bar);
    for (int k = 0; k < n; ++k) {
        const double pem_bar = exogenous_motor_power(preq[static_cast<std::size_t>(k)], p, motor.p_em_max);
        LossCoefficients c = motor.coefficients(pem_bar);
        if (c.a3 < 0.0) {
            throw TranscriptionError("loss coefficient a3 is negative at step " + std::to_string(k) +
                                     " (convexity violated)");
        }
        t.p_req_kw.push_back(preq[static_cast<std::size_t>(k)] / 1000.0);
        t.p_em_bar_kw.push_back(pem_bar / 1000.0);
        t.omega_per_ratio.push_back(cycle.speed[static_cast<std::size_t>(k)] * p.gamma_fd / p.r_w);
        t.coeff_kw.push_back({c.a1 / 1000.0, c.a2 / 1000.0, c.a3 / 1000.0});
    }

    ProgramBuilder b;
    const int i_pem = b.add_block("P_em", n);
    const int i_pdc = b.add_block("P_dc", n);
    const int i_pb = b.add_block("P_b", n);
    const int i_pi = b.add_block("P_i", n);
    const int i_e = b.add_block("E_b", n + 1);
    const int i_g = b.add_block("gamma", per_step ? n : 1);
    const int i_gmin = cvt ? b.add_block("gamma_min", 1) : -1;
    const int i_emax = b.add_block("E_b_max", 1);
    const int i_de = b.add_block("dE_b", 1);

    const double eta = p.eta();
    const double T = t.t_max_kw, k1 = t.km1_kw, k2 = t.km2_kw;
    double fgt_over = kInf;
    for (int k = 0; k < n; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const int pem = i_pem + k, pdc = i_pdc + k, g = i_g + (per_step ? k : 0);
        const double ck = t.omega_per_ratio[ks];
        const double pr = t.p_req_kw[ks];

        b.add_le({{pem, -eta}}, -pr, "drive");
        b.add_le({{pem, -1.0}}, -eta * p.R_b * pr, "drive");

        const LossCoefficients& c = t.coeff_kw[ks];
        if (ck <= 0.0) {
            // Standstill: the motor is de-energized and carries no loss.
            b.add_le({{pem, 1.0}, {pdc, -1.0}}, 0.0, "loss");
        } else if (c.a3 > 0.0) {
            // a3*(ck*g)^2 <= P_dc - P_em - a1 - a2*ck*g  as a rotated cone with unit second side.
            const double sq = std::sqrt(c.a3) * ck;
            const std::vector<std::pair<int, double>> tt{{pdc, 1.0}, {pem, -1.0}, {g, -c.a2 * ck}};
            b.add_cone({{tt, -c.a1 + 1.0}, {{{g, 2.0 * sq}}, 0.0}, {tt, -c.a1 - 1.0}}, "loss");
        } else {
            b.add_le({{pem, 1.0}, {pdc, -1.0}, {g, c.a2 * ck}}, -c.a1, "loss");
        }

        b.add_le({{pem, 1.0}, {g, -T * ck}}, 0.0, "torque");
        b.add_le({{pem, -1.0}, {g, -T * ck}}, 0.0, "torque");
        if (ck > 0.0) {
            b.add_le({{pem, 1.0}, {g, -k1 * ck}}, k2, "power");
            b.add_le({{pem, -1.0}, {g, -k1 * ck}}, k2, "power");
            if (per_step) {
                b.add_le({{g, 1.0}}, motor.omega_max / ck, "overspeed");
            } else {
                fgt_over = std::min(fgt_over, motor.omega_max / ck);
            }
        }
        if (cvt) {
            b.add_le({{i_gmin, 1.0}, {g, -1.0}}, 0.0, "cvt-band");
            b.add_le({{g, 1.0}, {i_gmin, -p.c_f}}, 0.0, "cvt-band");
        } else if (per_step && k > 0) {
            b.add_eq({{g, 1.0}, {i_g, -1.0}}, 0.0, "fgt-tie");
        }
    }
    if (!per_step && std::isfinite(fgt_over)) b.add_le({{i_g, 1.0}}, fgt_over, "overspeed");

    const RequirementReport& req = t.requirements;
    if (cvt) {
        b.add_le({{i_gmin, -p.c_f}}, -req.grade_gamma_min, "gradeability");
        b.add_le({{i_gmin, -1.0}}, -req.top_gamma_min, "top-speed");
        if (std::isfinite(req.top_gamma_max)) b.add_le({{i_gmin, 1.0}}, req.top_gamma_max, "top-speed");
    } else {
        b.add_le({{i_g, -1.0}}, -req.grade_gamma_min, "gradeability");
        b.add_le({{i_g, -1.0}}, -req.top_gamma_min, "top-speed");
        if (std::isfinite(req.top_gamma_max)) b.add_le({{i_g, 1.0}}, req.top_gamma_max, "top-speed");
    }

    for (int k = 0; k < n; ++k) {
        const int pb = i_pb + k, pi = i_pi + k, e = i_e + k;
        b.add_eq({{pb, 1.0}, {i_pdc + k, -1.0}}, p.P_aux / 1000.0, "battery-terminal");
        // ||(2 P_i, P_i - P_b - P_oc)|| <= P_i - P_b + P_oc,  P_oc = p1 E_b + p2 E_b,max
        b.add_cone({{{{pi, 1.0}, {pb, -1.0}, {e, battery.p1}, {i_emax, battery.p2}}, 0.0},
                    {{{pi, 2.0}}, 0.0},
                    {{{pi, 1.0}, {pb, -1.0}, {e, -battery.p1}, {i_emax, -battery.p2}}, 0.0}},
                   "battery-cone");
        b.add_le({{pi, 1.0}, {e, -battery.b1}, {i_emax, -battery.b2}}, 0.0, "battery-power");
        b.add_le({{pi, -1.0}, {e, -battery.b1}, {i_emax, -battery.b2}}, 0.0, "battery-power");
        b.add_eq({{e + 1, 1.0}, {e, -1.0}, {pi, dt / 3600.0}}, 0.0, "soe-dynamics");
        b.add_le({{i_emax, p.zeta_min}, {e + 1, -1.0}}, 0.0, "soe-box");
        b.add_le({{e + 1, 1.0}, {i_emax, -p.zeta_max}}, 0.0, "soe-box");
    }
    b.add_eq({{i_e, 1.0}, {i_emax, -p.zeta_max}}, 0.0, "initial-soe");
    b.add_eq({{i_de, 1.0}, {i_e, -1.0}, {i_e + n, 1.0}}, 0.0, "energy-delta");
    b.add_le({{i_emax, -1.0}}, 0.0, "capacity");
    // A cycle that covers no distance says nothing about range.
    if (options.range_constraint && cycle.distance > 0.0) {
        b.add_le({{i_emax, -1.0}, {i_de, p.D_exp / ((1.0 - p.zeta_min) * t.d_cycle_km)}}, 0.0, "range");
    }

    Eigen::VectorXd c = Eigen::VectorXd::Zero(b.num_vars());
    c(i_de) = p.c_el * p.D_max / t.d_cycle_km;
    c(i_emax) = p.c_bat;
    ProgramMeta meta;
    meta.dt = dt;
    meta.steps = n;
    meta.p_em_max_w = motor.p_em_max;
    meta.m_bar = m_bar;
    meta.transmission = to_string(p.transmission);
    meta.d_cycle_m = cycle.distance;
    t.program = b.finish(std::move(c), p.c_em * motor.p_em_max / 1000.0 + p.c_add, meta);
    return t;
}

void tie_break_standstill_ratio(const Transcription& t, Solution& s) {
    if (!s.optimal() || !t.params.is_cvt()) return;
    auto& g = s.values.at("gamma");
    const double gmax = t.params.c_f * s.at("gamma_min")[0];
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (t.omega_per_ratio[k] <= 0.0) g[k] = gmax;
    }
}

double battery_cone_residual(double p_i_w, double p_b_w, double p_oc_w) {
    return std::abs((p_i_w - p_b_w) * p_oc_w - p_i_w * p_i_w) / std::max(p_oc_w * p_oc_w, 1.0);
}

std::vector<double> battery_cone_residual(const Solution& s, const Transcription& t) {
    const auto& pi = s.at("P_i");
    const auto& pb = s.at("P_b");
    const auto& e = s.at("E_b");
    const double emax = s.at("E_b_max")[0];
    std::vector<double> out(pi.size());
    for (std::size_t k = 0; k < pi.size(); ++k) {
        const double poc = 1000.0 * t.battery.poc(e[k], emax);
        out[k] = battery_cone_residual(1000.0 * pi[k], 1000.0 * pb[k], poc);
    }
    return out;
}

RelaxationResiduals relaxation_residuals(const Solution& s, const Transcription& t) {
    RelaxationResiduals r;
    if (!s.optimal()) return r;
    const auto& pem = s.at("P_em");
    const auto& pdc = s.at("P_dc");
    const auto& pi = s.at("P_i");
    const auto& e = s.at("E_b");
    const auto& g = s.at("gamma");
    const double emax = s.at("E_b_max")[0];
    const VehicleParams& p = t.params;
    const double p_kw = t.program.meta.p_em_max_w / 1000.0;
    const double tol = 1e-5 * std::max(p_kw, emax);
    const double eta = p.eta();
    const std::vector<double> cone = battery_cone_residual(s, t);

    for (std::size_t k = 0; k < pem.size(); ++k) {
        const double gk = g.size() == 1 ? g[0] : g[k];
        const double w = t.omega_per_ratio[k] * gk;
        const bool soe_clamped = e[k + 1] >= p.zeta_max * emax - tol || e[k + 1] <= p.zeta_min * emax + tol;
        const bool pi_clamped = std::abs(pi[k]) >= t.battery.pi_max(e[k], emax) - tol;
        if (soe_clamped || pi_clamped) continue;

        const bool torque_clamped = std::abs(pem[k]) >= t.t_max_kw * w - tol;
        const bool power_clamped = std::abs(pem[k]) >= t.km1_kw * w + t.km2_kw - tol;
        const double pr = t.p_req_kw[k];
        const double target = std::max(pr / eta, eta * p.R_b * pr);
        if (!torque_clamped && !power_clamped) {
            r.drive = std::max(r.drive, std::abs(pem[k] - target) / std::max(std::abs(target), 0.01 * p_kw));
            ++r.drive_checked;
        }

        const LossCoefficients& c = t.coeff_kw[k];
        const double loss = t.omega_per_ratio[k] > 0.0 ? c.a1 + c.a2 * w + c.a3 * w * w : 0.0;
        r.loss = std::max(r.loss, std::abs(pdc[k] - pem[k] - loss) / std::max(std::abs(pem[k]) + loss, 0.01 * p_kw));
        ++r.loss_checked;

        r.battery = std::max(r.battery, cone[k]);
        ++r.battery_checked;
    }
    return r;
}

CostBreakdown objective_breakdown(const Solution& s, const VehicleParams& p, double p_em_max_w, double d_cycle_m) {
    CostBreakdown c;
    const double de = s.at("dE_b")[0];
    const double emax = s.at("E_b_max")[0];
    c.c_op = de * p.c_el * p.D_max / (std::max(d_cycle_m, 1.0) / 1000.0);
    c.c_comp = component_cost(p, p_em_max_w, emax * 1000.0);
    c.j_tco = c.c_op + c.c_comp;
    return c;
}

}  // namespace mmco
