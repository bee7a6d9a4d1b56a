#pragma once

// Study configuration and the fit -> sweep -> validate -> report pipeline.
//
// The INI file has the sections [study], [vehicle], [motor], [battery],
// [cycle], [sweep] and [output]. Vehicle keys use the units of the parameter
// table: theta_start in percent, v_max in km/h, rho_em in kg/kW, rho_bat in
// kg/kWh, costs in EUR, D_max and D_exp in km.

#include "mmco/design_loop.hpp"
#include "mmco/validator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmco {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Failure of a pipeline stage, carrying the process exit code.
class StudyError : public std::runtime_error {
public:
    StudyError(int exit_code, std::string stage, const std::string& what)
        : std::runtime_error(what), code_(exit_code), stage_(std::move(stage)) {}
    int exit_code() const { return code_; }
    const std::string& stage() const { return stage_; }

private:
    int code_;
    std::string stage_;
};

namespace exit_code {
constexpr int ok = 0;
constexpr int config = 2;
constexpr int infeasible = 3;
constexpr int solver = 4;
}  // namespace exit_code

struct CycleConfig {
    std::filesystem::path path;
    double dt = 1.0;              // s
    double v_cap = 0.0;           // m/s, 0 leaves the cycle uncapped
    GradientProfileSpec gradient; // empty for a flat road
    bool speed_adjust = false;
};

struct SweepConfig {
    double min_w = 300.0;
    double max_w = 800.0;
    double step_w = 10.0;
    double m_v0 = -1.0;  // kg
    double eps = 1e-3;   // kg
    int max_iter = 25;
    SolverTolerances tolerances;
    int threads = 0;
};

struct OutputConfig {
    std::filesystem::path directory;
    bool trace_csv = true;
};

struct StudyConfig {
    std::string name;
    std::filesystem::path source;
    VehicleParams vehicle;
    MotorMapSpec motor;
    int loss_levels = 201;
    PackConfig pack;
    std::filesystem::path cell_path;
    CycleConfig cycle;
    SweepConfig sweep;
    OutputConfig output;
    std::vector<std::string> notices;  // defaulted keys and overrides
};

// Relative paths resolve against `base_dir`. Throws ConfigError naming the key.
StudyConfig parse_study_config(std::istream& in, const std::filesystem::path& base_dir, std::string source = {});
StudyConfig load_study_config(const std::filesystem::path& path);

// Applies MMCO_SOLVER_TOL (both tolerances) when set.
void apply_environment(StudyConfig& config);

nlohmann::json config_to_json(const StudyConfig& config);

struct FittedModels {
    std::shared_ptr<const MotorModel> motor;
    CellTable cell;
    BatteryModel battery;
};

DriveCycle build_cycle(const StudyConfig& config);
FittedModels fit_models(const StudyConfig& config);
nlohmann::json fitted_models_json(const FittedModels& models);
SweepResult optimize(const StudyConfig& config, const DriveCycle& cycle, const FittedModels& models);

struct ValidationReport {
    SimulationTrace map;     // reference loss map and cell table
    SimulationTrace fitted;  // fitted polynomials, isolates the relaxation
};
ValidationReport validate_design(const StudyConfig& config, const DriveCycle& cycle, const FittedModels& models,
                                 const DesignPoint& design);
nlohmann::json validation_json(const ValidationReport& report);

struct ResultRow {
    std::string quantity;
    std::string unit;
    double value = 0.0;
};
// TCO, C_comp, C_el, P_em,max, E_b,max, m_v and the ratio rows.
std::vector<ResultRow> results_table(const DesignPoint& d);

struct StudyOutcome {
    std::filesystem::path directory;
    SweepResult sweep;
    ValidationReport validation;
};

// Runs every stage and writes the artifacts. Stage failures are rethrown as
// StudyError; error.json is written to the output directory when possible.
StudyOutcome run_study(const StudyConfig& config, std::ostream& log);

// Reads studies written by run_study and writes report.csv, report.md and
// plot_*.csv into `out`. The first study is the baseline for the deltas.
void report(const std::vector<std::filesystem::path>& studies, const std::filesystem::path& out, std::ostream& log);

nlohmann::json error_json(const std::string& stage, int code, const std::string& message);

}  // namespace mmco
