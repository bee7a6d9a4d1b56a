#pragma once

// Battery pack: equivalent-circuit cell table and the affine open-circuit
// power / internal power limit fits in (E_b, E_b,max).

#include <string>
#include <vector>

namespace mmco {

struct CellPoint {
    double voc = 0.0;    // V
    double r = 0.0;      // Ohm
    double i_max = 0.0;  // A
};

struct CellTable {
    std::vector<double> soe;
    std::vector<double> voc;
    std::vector<double> r;
    std::vector<double> i_max;

    // Linear interpolation in SoE, clamped at the table ends.
    CellPoint at(double soe) const;
    void validate() const;
};

// CSV with header `soe,voc_v,r_ohm,i_max_a`.
CellTable load_cell_table(const std::string& path);

// Table with affine open-circuit voltage and constant resistance and current
// limit, sampled at `points` SoE values over [0, 1].
CellTable affine_cell_table(double voc_empty, double voc_full, double r, double i_max, int points = 101);

struct PackConfig {
    int series = 13;
    int parallel = 1;
    double capacity_ah = 2.5;     // per cell
    double nominal_voltage = 3.7; // per cell, V
    double soe_lo = 0.2;          // fit window
    double soe_hi = 1.0;
};

// Battery coefficients are called p1, p2 (open-circuit power) and b1, b2
// (internal power limit) to keep them apart from the motor loss a_j.
//   P_oc   = p1*E_b + p2*E_b,max
//   P_i,max = b1*E_b + b2*E_b,max
// with powers in W and energies in Wh, so the coefficients carry 1/h.
struct BatteryModel {
    double p1 = 0.0, p2 = 0.0;
    double b1 = 0.0, b2 = 0.0;
    double e_pack_ref_wh = 0.0;
    double v_nom = 0.0;  // pack nominal voltage
    PackConfig pack;
    double fit_rmse_norm = 0.0;     // open-circuit power fit
    double pi_fit_rmse_norm = 0.0;  // internal power limit fit

    double poc(double e_b, double e_b_max) const { return p1 * e_b + p2 * e_b_max; }
    double pi_max(double e_b, double e_b_max) const { return b1 * e_b + b2 * e_b_max; }
};

// Reference pack quantities straight from the table, W.
double pack_open_circuit_power(const CellTable& cell, const PackConfig& pack, double soe);
double pack_max_internal_power(const CellTable& cell, const PackConfig& pack, double soe);

// Throws FitError when the normalized RMSE of the P_oc fit exceeds 5%.
BatteryModel fit_battery(const CellTable& cell, const PackConfig& pack, int grid_points = 81);

// Table-based open-circuit power for a pack of capacity e_b_max, scaled by
// parallel branches, at energy e_b.
double table_open_circuit_power(const CellTable& cell, const BatteryModel& model, double e_b, double e_b_max);

}  // namespace mmco
