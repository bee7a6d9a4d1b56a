#include "mmco/study.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mmco {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

// Vehicle keys in configuration units; `scale` converts to the stored unit.
struct VehicleKey {
    const char* key;
    double VehicleParams::*field;
    double scale;
    const char* unit;
};

const VehicleKey kVehicleKeys[] = {
    {"m_d", &VehicleParams::m_d, 1.0, "kg"},
    {"c_rr", &VehicleParams::c_rr, 1.0, "-"},
    {"g", &VehicleParams::g, 1.0, "m/s^2"},
    {"rho_a", &VehicleParams::rho_a, 1.0, "kg/m^3"},
    {"A_f", &VehicleParams::A_f, 1.0, "m^2"},
    {"c_d", &VehicleParams::c_d, 1.0, "-"},
    {"c_f", &VehicleParams::c_f, 1.0, "-"},
    {"eta_fd", &VehicleParams::eta_fd, 1.0, "-"},
    {"eta_gb", &VehicleParams::eta_gb, 1.0, "-"},
    {"gamma_fd", &VehicleParams::gamma_fd, 1.0, "-"},
    {"R_b", &VehicleParams::R_b, 1.0, "-"},
    {"r_w", &VehicleParams::r_w, 1.0, "m"},
    {"mu_x", &VehicleParams::mu_x, 1.0, "-"},
    {"omega_em_max", &VehicleParams::omega_em_max, 1.0, "rad/s"},
    {"P_aux", &VehicleParams::P_aux, 1.0, "W"},
    {"zeta_min", &VehicleParams::zeta_min, 1.0, "-"},
    {"zeta_max", &VehicleParams::zeta_max, 1.0, "-"},
    {"m_f", &VehicleParams::m_f, 1.0, "kg"},
    {"m_cvt_base", &VehicleParams::m_cvt_base, 1.0, "kg"},
    {"D_max", &VehicleParams::D_max, 1.0, "km"},
    {"rho_em", &VehicleParams::rho_em, 1.0, "kg/kW"},
    {"rho_bat", &VehicleParams::rho_bat, 1.0, "kg/kWh"},
    {"rho_fgt", &VehicleParams::rho_fgt, 1.0, "kg"},
    {"rho_cvt", &VehicleParams::rho_cvt, 1.0, "kg"},
    {"c_el", &VehicleParams::c_el, 1.0, "EUR/kWh"},
    {"c_bat", &VehicleParams::c_bat, 1.0, "EUR/kWh"},
    {"c_em", &VehicleParams::c_em, 1.0, "EUR/kW"},
    {"c_add", &VehicleParams::c_add, 1.0, "EUR"},
    {"t_acc", &VehicleParams::t_acc, 1.0, "s"},
    {"theta_start", &VehicleParams::theta_start, 0.01, "%"},
    {"D_exp", &VehicleParams::D_exp, 1.0, "km"},
    {"v_max", &VehicleParams::v_max, 1.0 / 3.6, "km/h"},
};

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = [] {
        std::map<std::string, std::set<std::string>> k;
        k["study"] = {"name", "description"};
        k["vehicle"] = {"preset", "transmission"};
        for (const auto& v : kVehicleKeys) k["vehicle"].insert(v.key);
        k["motor"] = {"p_max_ref", "t_max_ref", "omega_max", "power_frac_at_omega_max", "c_cu", "c_fr",
                      "c_fe", "c_0", "c_st", "omega_points", "torque_points", "levels"};
        k["battery"] = {"cell", "series", "parallel", "capacity_ah", "nominal_voltage", "soe_lo", "soe_hi"};
        k["cycle"] = {"path", "dt", "v_cap_kmh", "gradient", "smoothing", "speed_adjust"};
        k["sweep"] = {"min_w", "max_w", "step_w", "m_v0_kg", "eps_kg", "max_iter", "tol_feasibility", "tol_gap",
                      "threads"};
        k["output"] = {"directory", "trace_csv"};
        return k;
    }();
    return keys;
}

class Reader {
public:
    explicit Reader(const pt::ptree& root) : root_(root) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        const auto s = root_.get_child_optional(section);
        if (!s) return std::nullopt;
        const auto v = s->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return *v;
    }

    std::optional<double> number(const std::string& section, const std::string& key) const {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(*v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || v->find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(x)) {
            throw ConfigError(section + "." + key, "expected a number, got '" + *v + "'");
        }
        return x;
    }

    std::optional<int> integer(const std::string& section, const std::string& key) const {
        const auto x = number(section, key);
        if (!x) return std::nullopt;
        if (*x != std::floor(*x)) throw ConfigError(section + "." + key, "expected an integer");
        return static_cast<int>(*x);
    }

    std::optional<bool> boolean(const std::string& section, const std::string& key) const {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        if (*v == "true" || *v == "yes" || *v == "on" || *v == "1") return true;
        if (*v == "false" || *v == "no" || *v == "off" || *v == "0") return false;
        throw ConfigError(section + "." + key, "expected true or false, got '" + *v + "'");
    }

private:
    const pt::ptree& root_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StudyError(exit_code::config, "write", "cannot write " + path.string());
    out << text;
    if (!out) throw StudyError(exit_code::config, "write", "failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw StudyError(exit_code::config, "report", "missing artifact " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw StudyError(exit_code::config, "report", path.string() + ": " + e.what());
    }
}

}  // namespace

StudyConfig parse_study_config(std::istream& in, const fs::path& base_dir, std::string source) {
    pt::ptree root;
    try {
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", std::string("malformed INI: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    const auto& known = known_keys();
    for (const auto& [section, tree] : root) {
        const auto it = known.find(section);
        if (it == known.end()) throw ConfigError(section, "unknown section");
        if (!tree.data().empty() && tree.empty()) throw ConfigError(section, "key outside of a section");
        for (const auto& [key, value] : tree) {
            if (!it->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
        }
    }
    const Reader r(root);
    StudyConfig c;
    c.source = source;

    c.name = r.raw("study", "name").value_or("");
    if (c.name.empty()) {
        c.name = source.empty() ? "study" : fs::path(source).stem().string();
        c.notices.push_back("study.name defaulted to '" + c.name + "'");
    }

    // Vehicle: the preset fills every parameter that the file leaves out.
    const std::string preset_name = r.raw("vehicle", "preset").value_or("scooter");
    if (!r.raw("vehicle", "preset")) c.notices.push_back("vehicle.preset defaulted to scooter");
    Transmission t = Transmission::fgt;
    try {
        if (const auto s = r.raw("vehicle", "transmission")) t = transmission_from_string(*s);
        c.vehicle = preset(preset_name, t);
    } catch (const ValidationError& e) {
        throw ConfigError("vehicle", e.what());
    }
    c.vehicle.name = c.name;
    if (t == Transmission::cvt && !r.raw("vehicle", "c_f")) {
        throw ConfigError("vehicle.c_f", "c_f (CVT ratio coverage) is required when transmission = CVT");
    }
    for (const auto& k : kVehicleKeys) {
        const bool cvt_only = std::string(k.key) == "c_f" || std::string(k.key) == "m_cvt_base" ||
                              std::string(k.key) == "rho_cvt";
        const bool fgt_only = std::string(k.key) == "rho_fgt";
        if (const auto v = r.number("vehicle", k.key)) {
            c.vehicle.*k.field = *v * k.scale;
        } else if ((cvt_only && t == Transmission::cvt) || (fgt_only && t == Transmission::fgt) ||
                   (!cvt_only && !fgt_only)) {
            c.notices.push_back("vehicle." + std::string(k.key) + " defaulted to " +
                                fmt_short(c.vehicle.*k.field / k.scale) + " " + k.unit + " (" + preset_name +
                                " preset)");
        }
    }
    try {
        c.vehicle.validate();
    } catch (const ValidationError& e) {
        throw ConfigError("vehicle", e.what());
    }

    auto set = [&r](const char* section, const char* key, double& field) {
        if (const auto v = r.number(section, key)) field = *v;
    };
    auto set_int = [&r](const char* section, const char* key, int& field) {
        if (const auto v = r.integer(section, key)) field = *v;
    };
    auto require_positive = [](bool ok, const std::string& key) {
        if (!ok) throw ConfigError(key, "must be positive");
    };

    set("motor", "p_max_ref", c.motor.p_max_ref);
    set("motor", "t_max_ref", c.motor.t_max_ref);
    set("motor", "omega_max", c.motor.omega_max);
    set("motor", "power_frac_at_omega_max", c.motor.power_frac_at_omega_max);
    set("motor", "c_cu", c.motor.shape.c_cu);
    set("motor", "c_fr", c.motor.shape.c_fr);
    set("motor", "c_fe", c.motor.shape.c_fe);
    set("motor", "c_0", c.motor.shape.c_0);
    set("motor", "c_st", c.motor.shape.c_st);
    set_int("motor", "omega_points", c.motor.omega_points);
    set_int("motor", "torque_points", c.motor.torque_points);
    set_int("motor", "levels", c.loss_levels);
    require_positive(c.motor.p_max_ref > 0.0, "motor.p_max_ref");
    require_positive(c.motor.t_max_ref > 0.0, "motor.t_max_ref");
    require_positive(c.motor.omega_max > 0.0, "motor.omega_max");
    require_positive(c.loss_levels > 2, "motor.levels");

    const auto cell = r.raw("battery", "cell");
    if (!cell) throw ConfigError("battery.cell", "path to the cell table is required");
    c.cell_path = resolve(base_dir, *cell);
    set_int("battery", "series", c.pack.series);
    set_int("battery", "parallel", c.pack.parallel);
    set("battery", "capacity_ah", c.pack.capacity_ah);
    set("battery", "nominal_voltage", c.pack.nominal_voltage);
    set("battery", "soe_lo", c.pack.soe_lo);
    set("battery", "soe_hi", c.pack.soe_hi);
    require_positive(c.pack.series > 0, "battery.series");
    require_positive(c.pack.parallel > 0, "battery.parallel");
    require_positive(c.pack.capacity_ah > 0.0, "battery.capacity_ah");
    if (!(c.pack.soe_lo >= 0.0 && c.pack.soe_lo < c.pack.soe_hi && c.pack.soe_hi <= 1.0)) {
        throw ConfigError("battery.soe_lo", "fit window must satisfy 0 <= soe_lo < soe_hi <= 1");
    }

    const auto cycle_path = r.raw("cycle", "path");
    if (!cycle_path) throw ConfigError("cycle.path", "path to the drive cycle is required");
    c.cycle.path = resolve(base_dir, *cycle_path);
    set("cycle", "dt", c.cycle.dt);
    require_positive(c.cycle.dt > 0.0, "cycle.dt");
    if (const auto v = r.number("cycle", "v_cap_kmh")) {
        require_positive(*v > 0.0, "cycle.v_cap_kmh");
        c.cycle.v_cap = *v / 3.6;
    }
    if (const auto g = r.raw("cycle", "gradient")) {
        try {
            c.cycle.gradient.segments = parse_gradient_segments(*g);
        } catch (const std::exception& e) {
            throw ConfigError("cycle.gradient", e.what());
        }
    }
    set_int("cycle", "smoothing", c.cycle.gradient.smoothing_window);
    require_positive(c.cycle.gradient.smoothing_window >= 1, "cycle.smoothing");
    c.cycle.speed_adjust = r.boolean("cycle", "speed_adjust").value_or(false);

    set("sweep", "min_w", c.sweep.min_w);
    set("sweep", "max_w", c.sweep.max_w);
    set("sweep", "step_w", c.sweep.step_w);
    set("sweep", "m_v0_kg", c.sweep.m_v0);
    set("sweep", "eps_kg", c.sweep.eps);
    set_int("sweep", "max_iter", c.sweep.max_iter);
    set("sweep", "tol_feasibility", c.sweep.tolerances.feasibility);
    set("sweep", "tol_gap", c.sweep.tolerances.gap);
    set_int("sweep", "threads", c.sweep.threads);
    require_positive(c.sweep.min_w > 0.0, "sweep.min_w");
    require_positive(c.sweep.step_w > 0.0, "sweep.step_w");
    if (c.sweep.max_w < c.sweep.min_w) throw ConfigError("sweep.max_w", "must not be below sweep.min_w");
    require_positive(c.sweep.eps > 0.0, "sweep.eps_kg");
    require_positive(c.sweep.max_iter > 0, "sweep.max_iter");
    require_positive(c.sweep.tolerances.feasibility > 0.0, "sweep.tol_feasibility");
    require_positive(c.sweep.tolerances.gap > 0.0, "sweep.tol_gap");

    c.output.directory = r.raw("output", "directory").value_or("results/" + c.name);
    c.output.trace_csv = r.boolean("output", "trace_csv").value_or(true);
    return c;
}

StudyConfig load_study_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config " + path.string());
    return parse_study_config(in, path.parent_path(), path.string());
}

void apply_environment(StudyConfig& config) {
    const char* tol = std::getenv("MMCO_SOLVER_TOL");
    if (!tol || !*tol) return;
    char* end = nullptr;
    const double v = std::strtod(tol, &end);
    if (end == tol || *end != '\0' || !(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError("MMCO_SOLVER_TOL", std::string("expected a positive number, got '") + tol + "'");
    }
    config.sweep.tolerances.feasibility = v;
    config.sweep.tolerances.gap = v;
    config.notices.push_back("solver tolerances set to " + fmt_short(v) + " from MMCO_SOLVER_TOL");
}

nlohmann::json config_to_json(const StudyConfig& c) {
    nlohmann::json vehicle = {{"name", c.vehicle.name}, {"transmission", to_string(c.vehicle.transmission)}};
    for (const auto& k : kVehicleKeys) vehicle[k.key] = c.vehicle.*k.field / k.scale;
    nlohmann::json gradient = nlohmann::json::array();
    for (const auto& s : c.cycle.gradient.segments) gradient.push_back({{"length_m", s.length_m}, {"grade", s.grade}});
    return {
        {"name", c.name},
        {"source", c.source.string()},
        {"vehicle", vehicle},
        {"motor",
         {{"p_max_ref", c.motor.p_max_ref},
          {"t_max_ref", c.motor.t_max_ref},
          {"omega_max", c.motor.omega_max},
          {"power_frac_at_omega_max", c.motor.power_frac_at_omega_max},
          {"c_cu", c.motor.shape.c_cu},
          {"c_fr", c.motor.shape.c_fr},
          {"c_fe", c.motor.shape.c_fe},
          {"c_0", c.motor.shape.c_0},
          {"c_st", c.motor.shape.c_st},
          {"omega_points", c.motor.omega_points},
          {"torque_points", c.motor.torque_points},
          {"levels", c.loss_levels}}},
        {"battery",
         {{"cell", c.cell_path.string()},
          {"series", c.pack.series},
          {"parallel", c.pack.parallel},
          {"capacity_ah", c.pack.capacity_ah},
          {"nominal_voltage", c.pack.nominal_voltage},
          {"soe_lo", c.pack.soe_lo},
          {"soe_hi", c.pack.soe_hi}}},
        {"cycle",
         {{"path", c.cycle.path.string()},
          {"dt_s", c.cycle.dt},
          {"v_cap_kmh", c.cycle.v_cap * 3.6},
          {"gradient", gradient},
          {"smoothing", c.cycle.gradient.smoothing_window},
          {"speed_adjust", c.cycle.speed_adjust},
          {"speed_adjust_rule", "v / (1 + 4*grade) on climbs, not below 2 m/s while moving"}}},
        {"sweep",
         {{"min_w", c.sweep.min_w},
          {"max_w", c.sweep.max_w},
          {"step_w", c.sweep.step_w},
          {"grid", make_grid(c.sweep.min_w, c.sweep.max_w, c.sweep.step_w)},
          {"m_v0_kg", c.sweep.m_v0},
          {"eps_kg", c.sweep.eps},
          {"max_iter", c.sweep.max_iter},
          {"tol_feasibility", c.sweep.tolerances.feasibility},
          {"tol_gap", c.sweep.tolerances.gap},
          {"threads", c.sweep.threads}}},
        {"output", {{"directory", c.output.directory.string()}, {"trace_csv", c.output.trace_csv}}},
        {"notices", c.notices},
    };
}

DriveCycle build_cycle(const StudyConfig& config) {
    DriveCycle c = load_cycle(config.cycle.path.string(), config.cycle.dt);
    if (config.cycle.v_cap > 0.0) c = cap_speed(c, config.cycle.v_cap);
    if (!config.cycle.gradient.segments.empty()) c = synthesize_gradient(c, config.cycle.gradient, config.cycle.speed_adjust);
    c.label = config.name;
    return c;
}

FittedModels fit_models(const StudyConfig& config) {
    FittedModels m;
    m.motor = std::make_shared<const MotorModel>(fit_loss_coefficients(synthesize_motor_map(config.motor), config.loss_levels));
    m.cell = load_cell_table(config.cell_path.string());
    m.battery = fit_battery(m.cell, config.pack);
    return m;
}

nlohmann::json fitted_models_json(const FittedModels& models) {
    const MotorModel& mm = *models.motor;
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t i = 0; i < mm.levels.size(); ++i) {
        levels.push_back({{"p_w", mm.levels[i]}, {"a1_w", mm.coeffs[i].a1}, {"a2_ws_per_rad", mm.coeffs[i].a2},
                          {"a3_ws2_per_rad2", mm.coeffs[i].a3}});
    }
    const BatteryModel& b = models.battery;
    return {{"format", "mmco-models"},
            {"version", 1},
            {"motor",
             {{"p_max_ref_w", mm.p_max_ref},
              {"t_max_ref_nm", mm.t_max_ref},
              {"omega_max_radps", mm.omega_max},
              {"km1_ref_ws_per_rad", mm.km1_ref},
              {"km2_ref_w", mm.km2_ref},
              {"fit_rmse_norm", mm.fit_rmse_norm},
              {"excluded_levels", mm.excluded_levels},
              {"levels", levels}}},
            {"battery",
             {{"p1_per_h", b.p1},
              {"p2_per_h", b.p2},
              {"b1_per_h", b.b1},
              {"b2_per_h", b.b2},
              {"e_pack_ref_wh", b.e_pack_ref_wh},
              {"v_nom", b.v_nom},
              {"fit_rmse_norm", b.fit_rmse_norm},
              {"pi_fit_rmse_norm", b.pi_fit_rmse_norm}}}};
}

SweepResult optimize(const StudyConfig& config, const DriveCycle& cycle, const FittedModels& models) {
    LoopOptions o;
    o.m_v0 = config.sweep.m_v0;
    o.eps = config.sweep.eps;
    o.max_iter = config.sweep.max_iter;
    o.tolerances = config.sweep.tolerances;
    const auto grid = make_grid(config.sweep.min_w, config.sweep.max_w, config.sweep.step_w);
    SweepResult r = sweep(cycle, config.vehicle, models.motor, models.battery, grid, o, config.sweep.threads);
    r.label = config.name;
    return r;
}

ValidationReport validate_design(const StudyConfig& config, const DriveCycle& cycle, const FittedModels& models,
                                 const DesignPoint& design) {
    const ScaledMotor motor = scale_motor(models.motor, design.p_em_max);
    ValidationReport v;
    v.map = simulate(design, cycle, config.vehicle, motor, models.cell, models.battery);
    SimulateOptions fitted;
    fitted.fitted_models = true;
    v.fitted = simulate(design, cycle, config.vehicle, motor, models.cell, models.battery, fitted);
    return v;
}

nlohmann::json validation_json(const ValidationReport& report) {
    return {{"format", "mmco-validation"},
            {"version", 1},
            {"map", trace_summary_json(report.map)},
            {"fitted", trace_summary_json(report.fitted)}};
}

std::vector<ResultRow> results_table(const DesignPoint& d) {
    std::vector<ResultRow> rows = {
        {"TCO", "EUR", d.cost.j_tco},
        {"C_comp", "EUR", d.cost.c_comp},
        {"C_el", "EUR", d.cost.c_op},
        {"P_em_max", "W", d.p_em_max},
        {"E_b_max", "Wh", d.e_b_max},
        {"m_v", "kg", d.mass.m_v},
    };
    if (d.transmission == Transmission::cvt) {
        rows.push_back({"gamma_min", "-", d.gamma_min});
        rows.push_back({"gamma_max", "-", d.gamma_max});
    } else {
        rows.push_back({"gamma_fgt", "-", d.gamma});
    }
    return rows;
}

nlohmann::json error_json(const std::string& stage, int code, const std::string& message) {
    return {{"error", {{"stage", stage}, {"exit_code", code}, {"message", message}}}};
}

namespace {

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string s = "quantity,unit,value\n";
    for (const auto& r : rows) s += r.quantity + "," + r.unit + "," + fmt(r.value) + "\n";
    return s;
}

std::string display(const ResultRow& r) {
    char buf[64];
    if (r.unit == "-") {
        std::snprintf(buf, sizeof buf, "%.2f", r.value);
    } else if (r.unit == "kg") {
        std::snprintf(buf, sizeof buf, "%.1f", r.value);
    } else {
        std::snprintf(buf, sizeof buf, "%.0f", r.value);
    }
    return buf;
}

std::string results_markdown(const std::string& name, const std::vector<ResultRow>& rows) {
    std::string s = "| Quantity | Unit | " + name + " |\n|---|---|---:|\n";
    for (const auto& r : rows) s += "| " + r.quantity + " | " + r.unit + " | " + display(r) + " |\n";
    return s;
}

std::string operating_points_csv(const OperatingSummary& ops) {
    std::string s = "omega_radps,torque_nm,efficiency\n";
    for (const auto& p : ops.points) s += fmt(p.omega) + "," + fmt(p.torque) + "," + fmt(p.efficiency) + "\n";
    return s;
}

}  // namespace

StudyOutcome run_study(const StudyConfig& config, std::ostream& log) {
    StudyOutcome outcome;
    outcome.directory = config.output.directory;
    const fs::path dir = config.output.directory;
    std::string stage = "write";
    auto fail = [&dir](const std::string& stage, int code, const std::string& message) -> StudyError {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (!ec) {
            std::ofstream out(dir / "error.json");
            out << error_json(stage, code, message).dump(2) << '\n';
        }
        return StudyError(code, stage, message);
    };

    try {
        fs::create_directories(dir);
        fs::remove(dir / "error.json");
        for (const auto& n : config.notices) log << "notice: " << n << '\n';
        write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");

        stage = "cycle";
        const DriveCycle cycle = build_cycle(config);
        {
            std::ostringstream out;
            write_cycle(cycle, out);
            write_text(dir / "cycle.csv", out.str());
        }
        log << "cycle: " << cycle.size() << " samples, " << fmt_short(cycle.distance) << " m, net climb "
            << fmt_short(net_altitude_change(cycle)) << " m\n";

        stage = "fit";
        const FittedModels models = fit_models(config);
        write_text(dir / "fitted_models.json", fitted_models_json(models).dump(2) + "\n");
        log << "fit: motor RMSE " << fmt_short(100.0 * models.motor->fit_rmse_norm) << "%, battery RMSE "
            << fmt_short(100.0 * models.battery.fit_rmse_norm) << "%\n";

        stage = "optimize";
        try {
            outcome.sweep = optimize(config, cycle, models);
        } catch (const SweepError& e) {
            write_text(dir / "sweep.json", sweep_to_json(e.result()).dump(2) + "\n");
            bool all_failed = !e.result().entries.empty();
            for (const auto& entry : e.result().entries) {
                all_failed = all_failed && entry.status == EntryStatus::solver_failure;
            }
            throw fail(stage, all_failed ? exit_code::solver : exit_code::infeasible, e.what());
        }
        write_text(dir / "sweep.json", sweep_to_json(outcome.sweep).dump(2) + "\n");
        const DesignPoint& best = outcome.sweep.best_point();
        {
            std::ostringstream out;
            write_trajectory_csv(out, best, cycle, config.vehicle);
            write_text(dir / "trajectory.csv", out.str());
        }
        log << "optimize: " << outcome.sweep.feasible_count() << "/" << outcome.sweep.entries.size()
            << " sizes feasible, best " << fmt_short(best.p_em_max) << " W, TCO " << fmt_short(best.cost.j_tco)
            << " EUR, mean solves " << fmt_short(outcome.sweep.mean_solves()) << "\n";

        stage = "validate";
        outcome.validation = validate_design(config, cycle, models, best);
        write_text(dir / "validation.json", validation_json(outcome.validation).dump(2) + "\n");
        write_text(dir / "operating_points.csv", operating_points_csv(operating_points(outcome.validation.map)));
        if (config.output.trace_csv) {
            std::ostringstream out;
            write_trace_csv(out, outcome.validation.map, cycle);
            write_text(dir / "validation_trace.csv", out.str());
        }
        log << "validate: energy gap " << fmt_short(100.0 * outcome.validation.map.gap) << "% on the map, "
            << fmt_short(100.0 * outcome.validation.fitted.gap) << "% on the fitted models\n";

        stage = "write";
        const auto rows = results_table(best);
        write_text(dir / "results.csv", results_csv(rows));
        write_text(dir / "results.md", results_markdown(config.name, rows));
        const nlohmann::json manifest = {
            {"format", "mmco-study"},
            {"version", 1},
            {"name", config.name},
            {"transmission", to_string(config.vehicle.transmission)},
            {"files",
             {"config.json", "cycle.csv", "fitted_models.json", "sweep.json", "trajectory.csv", "validation.json",
              "operating_points.csv", "results.csv", "results.md"}}};
        write_text(dir / "study.json", manifest.dump(2) + "\n");
        log << results_markdown(config.name, rows);
    } catch (const StudyError&) {
        throw;
    } catch (const ConfigError& e) {
        throw fail(stage, exit_code::config, e.what());
    } catch (const ParseError& e) {
        throw fail(stage, exit_code::config, e.what());
    } catch (const ValidationError& e) {
        throw fail(stage, exit_code::config, e.what());
    } catch (const FitError& e) {
        throw fail(stage, exit_code::config, e.what());
    } catch (const SolverFailure& e) {
        throw fail(stage, exit_code::solver, e.what());
    } catch (const fs::filesystem_error& e) {
        throw fail(stage, exit_code::config, e.what());
    }
    return outcome;
}

namespace {

struct LoadedStudy {
    std::string name;
    DesignPoint best;
    std::vector<std::vector<double>> trajectory;  // rows of trajectory.csv
    std::vector<std::vector<double>> points;      // rows of operating_points.csv
};

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw StudyError(exit_code::config, "report", "missing artifact " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != columns) throw StudyError(exit_code::config, "report", "malformed row in " + path.string());
        rows.push_back(std::move(row));
    }
    return rows;
}

LoadedStudy load_study(const fs::path& dir) {
    const nlohmann::json manifest = read_json(dir / "study.json");
    if (manifest.value("format", "") != "mmco-study" || manifest.value("version", 0) != 1) {
        throw StudyError(exit_code::config, "report",
                         dir.string() + ": incompatible artifact version (expected mmco-study v1)");
    }
    LoadedStudy s;
    s.name = manifest.at("name").get<std::string>();
    try {
        s.best = sweep_from_json(read_json(dir / "sweep.json")).best_point();
    } catch (const StudyError&) {
        throw;
    } catch (const std::exception& e) {
        throw StudyError(exit_code::config, "report", dir.string() + ": " + e.what());
    }
    s.trajectory = read_numeric_csv(dir / "trajectory.csv", 7);
    s.points = read_numeric_csv(dir / "operating_points.csv", 3);
    return s;
}

void write_plot(const fs::path& path, const std::vector<LoadedStudy>& studies, std::size_t column,
                const std::string& suffix) {
    std::string s = "t_s";
    std::size_t rows = 0;
    for (const auto& st : studies) {
        s += "," + st.name + "_" + suffix;
        rows = std::max(rows, st.trajectory.size());
    }
    s += "\n";
    for (std::size_t k = 0; k < rows; ++k) {
        std::string t;
        std::string line;
        for (const auto& st : studies) {
            line += ",";
            if (k < st.trajectory.size()) {
                if (t.empty()) t = fmt(st.trajectory[k][0]);
                line += fmt(st.trajectory[k][column]);
            }
        }
        s += t + line + "\n";
    }
    write_text(path, s);
}

}  // namespace

void report(const std::vector<fs::path>& dirs, const fs::path& out, std::ostream& log) {
    if (dirs.empty()) throw StudyError(exit_code::config, "report", "no study directories given");
    std::vector<LoadedStudy> studies;
    std::map<std::string, int> seen;
    for (const auto& d : dirs) {
        studies.push_back(load_study(d));
        const int n = seen[studies.back().name]++;
        if (n > 0) studies.back().name += "_" + std::to_string(n + 1);
    }
    fs::create_directories(out);

    // Union of result rows in first-seen order.
    std::vector<std::pair<std::string, std::string>> quantities;
    std::vector<std::map<std::string, double>> values;
    for (const auto& s : studies) {
        std::map<std::string, double> v;
        for (const auto& r : results_table(s.best)) {
            v[r.quantity] = r.value;
            bool known = false;
            for (const auto& q : quantities) known = known || q.first == r.quantity;
            if (!known) quantities.emplace_back(r.quantity, r.unit);
        }
        values.push_back(std::move(v));
    }

    std::string csv = "study,quantity,unit,value,delta_pct\n";
    std::string md = "| Quantity | Unit |";
    std::string rule = "|---|---|";
    for (const auto& s : studies) {
        md += " " + s.name + " |";
        rule += "---:|";
    }
    md += "\n" + rule + "\n";
    for (const auto& [q, unit] : quantities) {
        md += "| " + q + " | " + unit + " |";
        for (std::size_t i = 0; i < studies.size(); ++i) {
            const auto it = values[i].find(q);
            if (it == values[i].end()) {
                md += " - |";
                continue;
            }
            const ResultRow row{q, unit, it->second};
            md += " " + display(row);
            std::string delta;
            const auto base = values[0].find(q);
            if (i > 0 && base != values[0].end() && base->second != 0.0) {
                const double pct = (it->second - base->second) / base->second * 100.0;
                delta = fmt(pct);
                char buf[32];
                std::snprintf(buf, sizeof buf, " (%+.1f%%)", pct);
                md += buf;
            }
            md += " |";
            csv += studies[i].name + "," + q + "," + unit + "," + fmt(it->second) + "," + delta + "\n";
        }
        md += "\n";
    }
    write_text(out / "report.csv", csv);
    write_text(out / "report.md", md);

    write_plot(out / "plot_p_em.csv", studies, 2, "p_em_w");
    write_plot(out / "plot_e_b.csv", studies, 4, "e_b_wh");
    write_plot(out / "plot_gamma.csv", studies, 5, "gamma");
    write_plot(out / "plot_omega.csv", studies, 6, "omega_em_radps");

    std::string ops = "study,omega_radps,torque_nm,efficiency\n";
    for (const auto& s : studies) {
        for (const auto& p : s.points) ops += s.name + "," + fmt(p[0]) + "," + fmt(p[1]) + "," + fmt(p[2]) + "\n";
    }
    write_text(out / "plot_operating_points.csv", ops);
    log << md;
}

}  // namespace mmco
