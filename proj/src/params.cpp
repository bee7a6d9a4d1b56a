#include "mmco/params.hpp"

#include "mmco/cycle.hpp"

#include <cmath>

namespace mmco {

std::string to_string(Transmission t) { return t == Transmission::cvt ? "CVT" : "FGT"; }

Transmission transmission_from_string(const std::string& s) {
    if (s == "FGT" || s == "fgt") return Transmission::fgt;
    if (s == "CVT" || s == "cvt") return Transmission::cvt;
    throw ValidationError("transmission must be FGT or CVT, got '" + s + "'");
}

namespace {

void require(bool ok, const char* key, const char* what) {
    if (!ok) throw ValidationError(std::string(key) + " " + what);
}

void positive(double v, const char* key) { require(std::isfinite(v) && v > 0.0, key, "must be positive"); }

void efficiency(double v, const char* key) {
    require(std::isfinite(v) && v > 0.0 && v <= 1.0, key, "must lie in (0, 1]");
}

}  // namespace

void VehicleParams::validate() const {
    positive(m_d, "m_d");
    positive(m_f, "m_f");
    positive(c_rr, "c_rr");
    positive(g, "g");
    positive(rho_a, "rho_a");
    positive(c_d, "c_d");
    positive(A_f, "A_f");
    positive(r_w, "r_w");
    positive(gamma_fd, "gamma_fd");
    efficiency(eta_gb, "eta_gb");
    efficiency(eta_fd, "eta_fd");
    require(std::isfinite(R_b) && R_b >= 0.0 && R_b <= 1.0, "R_b", "must lie in [0, 1]");
    positive(omega_em_max, "omega_em_max");
    require(std::isfinite(P_aux) && P_aux >= 0.0, "P_aux", "must be non-negative");
    require(zeta_min >= 0.0 && zeta_min < zeta_max && zeta_max <= 1.0, "zeta_min",
            "and zeta_max must satisfy 0 <= zeta_min < zeta_max <= 1");
    positive(rho_em, "rho_em");
    positive(rho_bat, "rho_bat");
    positive(c_el, "c_el");
    positive(c_bat, "c_bat");
    positive(c_em, "c_em");
    require(std::isfinite(c_add) && c_add >= 0.0, "c_add", "must be non-negative");
    positive(D_max, "D_max");
    positive(D_exp, "D_exp");
    positive(t_acc, "t_acc");
    require(std::isfinite(theta_start) && theta_start >= 0.0 && theta_start < 1.0, "theta_start",
            "must lie in [0, 100) percent");
    positive(v_max, "v_max");
    if (is_cvt()) {
        require(std::isfinite(c_f) && c_f > 1.0, "c_f", "must be greater than 1 for a CVT");
        positive(m_cvt_base, "m_cvt_base");
        positive(rho_cvt, "rho_cvt");
    } else {
        positive(rho_fgt, "rho_fgt");
    }
}

VehicleParams scooter_preset() {
    VehicleParams p;
    p.name = "scooter";
    return p;
}

VehicleParams moped_preset(Transmission t) {
    VehicleParams p;
    p.name = "moped";
    p.transmission = t;
    p.m_f = 60.0;
    p.c_rr = 0.015;
    p.A_f = 0.7;
    p.c_d = 0.7;
    p.r_w = 0.193;
    p.rho_fgt = 0.075;
    p.c_add = 209.0;
    p.D_max = 120000.0;
    p.D_exp = 100.0;
    p.t_acc = 11.0;
    p.theta_start = 0.20;
    p.v_max = 45.0 / 3.6;
    if (t == Transmission::cvt) {
        p.c_f = 2.7;
        p.eta_fd = 0.97;
        p.eta_gb = 0.88;
        p.c_em = 150.0;
        p.m_cvt_base = 0.5;
        p.rho_cvt = 0.05;
    }
    return p;
}

VehicleParams preset(const std::string& name, Transmission t) {
    if (name == "scooter") {
        if (t == Transmission::cvt) throw ValidationError("the scooter preset has no CVT parameters");
        return scooter_preset();
    }
    if (name == "moped") return moped_preset(t);
    throw ValidationError("unknown preset '" + name + "' (expected scooter or moped)");
}

}  // namespace mmco
