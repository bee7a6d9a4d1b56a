#include "mmco/battery.hpp"

#include "mmco/cycle.hpp"
#include "mmco/motor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mmco {

CellPoint CellTable::at(double s) const {
    if (soe.empty()) throw ValidationError("cell table is empty");
    if (s <= soe.front()) return {voc.front(), r.front(), i_max.front()};
    if (s >= soe.back()) return {voc.back(), r.back(), i_max.back()};
    const auto it = std::upper_bound(soe.begin(), soe.end(), s);
    const auto j = static_cast<std::size_t>(it - soe.begin());
    const std::size_t i = j - 1;
    const double f = (s - soe[i]) / (soe[j] - soe[i]);
    return {voc[i] + f * (voc[j] - voc[i]), r[i] + f * (r[j] - r[i]), i_max[i] + f * (i_max[j] - i_max[i])};
}

void CellTable::validate() const {
    if (soe.size() < 2) throw ValidationError("cell table needs at least two rows");
    if (voc.size() != soe.size() || r.size() != soe.size() || i_max.size() != soe.size()) {
        throw ValidationError("cell table columns have different lengths");
    }
    for (std::size_t k = 0; k < soe.size(); ++k) {
        if (k > 0 && !(soe[k] > soe[k - 1])) throw ValidationError("cell table SoE must be strictly increasing");
        if (!(voc[k] > 0.0) || !(r[k] > 0.0) || !(i_max[k] > 0.0)) {
            throw ValidationError("cell table needs positive Voc, R and I_max (row " + std::to_string(k + 1) + ")");
        }
    }
    if (soe.front() > 0.0 || soe.back() < 1.0) throw ValidationError("cell table must cover SoE 0 to 1");
}

CellTable load_cell_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open cell table '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("cell table '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "soe,voc_v,r_ohm,i_max_a") {
        throw ParseError("cell table header must be 'soe,voc_v,r_ohm,i_max_a'");
    }
    CellTable t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string cell;
        double v[4];
        for (double& x : v) {
            if (!std::getline(ss, cell, ',')) {
                throw ParseError("cell table line " + std::to_string(line_no) + " has fewer than 4 columns");
            }
            try {
                std::size_t used = 0;
                x = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw ParseError("cell table line " + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        t.soe.push_back(v[0]);
        t.voc.push_back(v[1]);
        t.r.push_back(v[2]);
        t.i_max.push_back(v[3]);
    }
    t.validate();
    return t;
}

CellTable affine_cell_table(double voc_empty, double voc_full, double r, double i_max, int points) {
    CellTable t;
    for (int k = 0; k < points; ++k) {
        const double s = static_cast<double>(k) / (points - 1);
        t.soe.push_back(s);
        t.voc.push_back(voc_empty + s * (voc_full - voc_empty));
        t.r.push_back(r);
        t.i_max.push_back(i_max);
    }
    return t;
}

double pack_open_circuit_power(const CellTable& cell, const PackConfig& pack, double soe) {
    const CellPoint c = cell.at(soe);
    const double v = pack.series * c.voc;
    const double r = pack.series * c.r / pack.parallel;
    return v * v / r;
}

double pack_max_internal_power(const CellTable& cell, const PackConfig& pack, double soe) {
    const CellPoint c = cell.at(soe);
    return pack.series * c.voc * c.i_max * pack.parallel;
}

BatteryModel fit_battery(const CellTable& cell, const PackConfig& pack, int grid_points) {
    cell.validate();
    if (pack.series < 1 || pack.parallel < 1) throw ValidationError("pack needs at least one cell in series and parallel");
    if (!(pack.capacity_ah > 0.0) || !(pack.nominal_voltage > 0.0)) {
        throw ValidationError("cell capacity and nominal voltage must be positive");
    }
    if (!(pack.soe_lo >= 0.0 && pack.soe_lo < pack.soe_hi && pack.soe_hi <= 1.0)) {
        throw ValidationError("battery fit window must satisfy 0 <= lo < hi <= 1");
    }
    BatteryModel m;
    m.pack = pack;
    m.v_nom = pack.series * pack.nominal_voltage;
    m.e_pack_ref_wh = m.v_nom * pack.capacity_ah * pack.parallel;

    const auto n = static_cast<Eigen::Index>(grid_points);
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd poc(n), pim(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double s = pack.soe_lo + (pack.soe_hi - pack.soe_lo) * static_cast<double>(k) / (grid_points - 1);
        X(k, 0) = s;
        X(k, 1) = 1.0;
        poc(k) = pack_open_circuit_power(cell, pack, s);
        pim(k) = pack_max_internal_power(cell, pack, s);
    }
    const auto qr = X.colPivHouseholderQr();
    const Eigen::Vector2d cp = qr.solve(poc);
    const Eigen::Vector2d ci = qr.solve(pim);
    // P(s) = alpha*s + beta with s = E_b/E_b,max  =>  divide by the reference energy.
    m.p1 = cp(0) / m.e_pack_ref_wh;
    m.p2 = cp(1) / m.e_pack_ref_wh;
    m.b1 = ci(0) / m.e_pack_ref_wh;
    m.b2 = ci(1) / m.e_pack_ref_wh;
    m.fit_rmse_norm = std::sqrt((X * cp - poc).squaredNorm() / n) / poc.mean();
    m.pi_fit_rmse_norm = std::sqrt((X * ci - pim).squaredNorm() / n) / pim.mean();
    if (m.fit_rmse_norm > 0.05) {
        throw FitError("battery open-circuit power fit rejected: normalized RMSE " +
                       std::to_string(100.0 * m.fit_rmse_norm) + "% exceeds 5%");
    }
    for (double s : {pack.soe_lo, pack.soe_hi}) {
        if (!(m.poc(s, 1.0) > 0.0) || !(m.pi_max(s, 1.0) > 0.0)) {
            throw FitError("battery fit is not positive over the SoE window");
        }
    }
    return m;
}

double table_open_circuit_power(const CellTable& cell, const BatteryModel& model, double e_b, double e_b_max) {
    const double soe = e_b / e_b_max;
    return pack_open_circuit_power(cell, model.pack, soe) * e_b_max / model.e_pack_ref_wh;
}

}  // namespace mmco
