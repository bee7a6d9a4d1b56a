#pragma once

#include "mmco/transcribe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mmco::testing {

// Exhaustive search over (E_b,max, gamma, P_em[k]) for a tiny horizon, using
// the exact battery quadratic instead of its cone relaxation.
inline double grid_optimum(const Transcription& t, const DriveCycle& cycle, double g_lo, double g_hi, double e_hi) {
    const VehicleParams& p = t.params;
    const BatteryModel& b = t.battery;
    const int n = static_cast<int>(t.p_req_kw.size());
    const double eta = p.eta();
    const double dt = cycle.dt;
    const double range_k = p.D_exp / ((1.0 - p.zeta_min) * t.d_cycle_km);
    const double op_k = p.c_el * p.D_max / t.d_cycle_km;
    const double constant = t.program.objective_constant;

    double best = std::numeric_limits<double>::infinity();
    const int n_gamma = 60, n_e = 1500;
    std::vector<double> pem(n), pb(n);
    for (int ig = 0; ig < n_gamma; ++ig) {
        const double g = g_lo + (g_hi - g_lo) * ig / (n_gamma - 1);
        for (int combo = 0; combo < (1 << n); ++combo) {
            bool ok = true;
            for (int k = 0; k < n && ok; ++k) {
                const double w = t.omega_per_ratio[k] * g;
                const double lb = std::max(t.p_req_kw[k] / eta, eta * p.R_b * t.p_req_kw[k]);
                const int j = (combo >> k) & 1;
                pem[k] = lb + j * 0.02 * 0.6;
                const double cap = std::min(t.t_max_kw * w, t.km1_kw * w + t.km2_kw);
                if (std::abs(pem[k]) > cap + 1e-12) ok = false;
                const auto& c = t.coeff_kw[k];
                const double loss = w > 0.0 ? c.a1 + c.a2 * w + c.a3 * w * w : 0.0;
                pb[k] = pem[k] + loss + p.P_aux / 1000.0;
            }
            if (!ok) continue;
            for (int ie = 1; ie <= n_e; ++ie) {
                const double emax = e_hi * ie / n_e;
                double e = p.zeta_max * emax;
                bool feasible = true;
                for (int k = 0; k < n && feasible; ++k) {
                    const double poc = b.poc(e, emax);
                    const double disc = poc * poc - 4.0 * poc * pb[k];
                    if (disc < 0.0) {
                        feasible = false;
                        break;
                    }
                    const double pi = 0.5 * (poc - std::sqrt(disc));
                    if (std::abs(pi) > b.pi_max(e, emax)) feasible = false;
                    e -= pi * dt / 3600.0;
                    if (e < p.zeta_min * emax || e > p.zeta_max * emax) feasible = false;
                }
                if (!feasible) continue;
                const double de = p.zeta_max * emax - e;
                if (de * range_k > emax) continue;
                best = std::min(best, op_k * de + p.c_bat * emax + constant);
            }
        }
    }
    return best;
}

}  // namespace mmco::testing
