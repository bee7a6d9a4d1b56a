// mmco: component sizing for micromobility vehicles.

#include "mmco/study.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace mmco;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string output;
    int threads = -1;
    double min_w = -1.0, max_w = -1.0, step_w = -1.0;
    double tol = -1.0;
};

void add_overrides(CLI::App* app, Overrides& o, bool sweep_flags) {
    app->add_option("--output", o.output, "Output directory (or file for cycle and fit)");
    if (!sweep_flags) return;
    app->add_option("--threads", o.threads, "Sweep worker threads, 0 for all cores");
    app->add_option("--min-w", o.min_w, "Smallest motor size, W");
    app->add_option("--max-w", o.max_w, "Largest motor size, W");
    app->add_option("--step-w", o.step_w, "Motor size step, W");
    app->add_option("--tol", o.tol, "Solver feasibility and gap tolerance");
}

StudyConfig load(const std::string& path, const Overrides& o) {
    StudyConfig c = load_study_config(path);
    apply_environment(c);
    if (!o.output.empty()) c.output.directory = o.output;
    if (o.threads >= 0) c.sweep.threads = o.threads;
    if (o.min_w > 0.0) c.sweep.min_w = o.min_w;
    if (o.max_w > 0.0) c.sweep.max_w = o.max_w;
    if (o.step_w > 0.0) c.sweep.step_w = o.step_w;
    if (o.tol > 0.0) c.sweep.tolerances = {o.tol, o.tol};
    if (c.sweep.max_w < c.sweep.min_w) throw ConfigError("sweep.max_w", "must not be below sweep.min_w");
    return c;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw StudyError(exit_code::config, "write", "cannot write " + path.string());
    out << text;
}

int report_error(const std::string& stage, int code, const std::string& message) {
    std::cerr << error_json(stage, code, message).dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sizing and energy management co-design for electric micromobility vehicles"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides o;
    bool dry_run = false;
    std::string sweep_path;
    std::vector<std::string> studies;

    auto* cycle = app.add_subcommand("cycle", "Load, cap and add gradients to the configured drive cycle");
    cycle->add_option("--config", config_path, "Study INI file")->required();
    add_overrides(cycle, o, false);

    auto* fit = app.add_subcommand("fit", "Fit the motor loss and battery models");
    fit->add_option("--config", config_path, "Study INI file")->required();
    add_overrides(fit, o, false);

    auto* opt = app.add_subcommand("optimize", "Sweep motor sizes and write sweep.json and trajectory.csv");
    opt->add_option("--config", config_path, "Study INI file")->required();
    add_overrides(opt, o, true);

    auto* val = app.add_subcommand("validate", "Replay the best design of a sweep on the reference models");
    val->add_option("--config", config_path, "Study INI file")->required();
    val->add_option("--sweep", sweep_path, "sweep.json written by optimize")->required();
    add_overrides(val, o, false);

    auto* run = app.add_subcommand("run", "Run the full pipeline");
    run->add_option("--config", config_path, "Study INI file")->required();
    run->add_flag("--dry-run", dry_run, "Print the resolved configuration and grid, write nothing");
    add_overrides(run, o, true);

    auto* rep = app.add_subcommand("report", "Compare studies and write plot data");
    rep->add_option("studies", studies, "Study output directories, baseline first")->required();
    rep->add_option("--output", o.output, "Report directory")->required();

    CLI11_PARSE(app, argc, argv);

    std::string stage = "config";
    try {
        if (*rep) {
            stage = "report";
            std::vector<fs::path> dirs(studies.begin(), studies.end());
            report(dirs, o.output, std::cout);
            return exit_code::ok;
        }

        const StudyConfig c = load(config_path, o);
        for (const auto& n : c.notices) std::cerr << "notice: " << n << '\n';

        if (*run) {
            if (dry_run) {
                std::cout << config_to_json(c).dump(2) << '\n';
                return exit_code::ok;
            }
            run_study(c, std::cout);
            std::cout << "artifacts: " << c.output.directory.string() << '\n';
            return exit_code::ok;
        }

        if (*cycle) {
            stage = "cycle";
            const DriveCycle dc = build_cycle(c);
            std::ostringstream out;
            write_cycle(dc, out);
            const fs::path path = o.output.empty() ? fs::path(c.output.directory) / "cycle.csv" : fs::path(o.output);
            write_file(path, out.str());
            std::cout << nlohmann::json{{"path", path.string()},
                                        {"samples", dc.size()},
                                        {"dt_s", dc.dt},
                                        {"distance_m", dc.distance},
                                        {"max_speed_mps", dc.max_speed()},
                                        {"net_altitude_m", net_altitude_change(dc)}}
                             .dump(2)
                      << '\n';
            return exit_code::ok;
        }

        if (*fit) {
            stage = "fit";
            const FittedModels m = fit_models(c);
            const fs::path path =
                o.output.empty() ? fs::path(c.output.directory) / "fitted_models.json" : fs::path(o.output);
            write_file(path, fitted_models_json(m).dump(2) + "\n");
            std::cout << "motor fit RMSE " << 100.0 * m.motor->fit_rmse_norm << "%, battery fit RMSE "
                      << 100.0 * m.battery.fit_rmse_norm << "%\nwrote " << path.string() << '\n';
            return exit_code::ok;
        }

        const DriveCycle dc = build_cycle(c);
        stage = "fit";
        const FittedModels m = fit_models(c);
        const fs::path dir = c.output.directory;

        if (*opt) {
            stage = "optimize";
            SweepResult r;
            try {
                r = optimize(c, dc, m);
            } catch (const SweepError& e) {
                write_file(dir / "sweep.json", sweep_to_json(e.result()).dump(2) + "\n");
                return report_error(stage, exit_code::infeasible, e.what());
            }
            write_file(dir / "sweep.json", sweep_to_json(r).dump(2) + "\n");
            std::ostringstream traj;
            write_trajectory_csv(traj, r.best_point(), dc, c.vehicle);
            write_file(dir / "trajectory.csv", traj.str());
            const DesignPoint& b = r.best_point();
            std::cout << "best " << b.p_em_max << " W, E_b,max " << b.e_b_max << " Wh, TCO " << b.cost.j_tco
                      << " EUR\nwrote " << (dir / "sweep.json").string() << '\n';
            return exit_code::ok;
        }

        if (*val) {
            stage = "validate";
            std::ifstream in(sweep_path);
            if (!in) throw StudyError(exit_code::config, stage, "cannot open " + sweep_path);
            const SweepResult r = sweep_from_json(nlohmann::json::parse(in));
            if (r.best < 0) throw StudyError(exit_code::infeasible, stage, "sweep has no feasible design");
            const ValidationReport v = validate_design(c, dc, m, r.best_point());
            write_file(dir / "validation.json", validation_json(v).dump(2) + "\n");
            std::ostringstream trace;
            write_trace_csv(trace, v.map, dc);
            write_file(dir / "validation_trace.csv", trace.str());
            std::cout << "energy gap " << 100.0 * v.map.gap << "% (map), " << 100.0 * v.fitted.gap
                      << "% (fitted)\nwrote " << (dir / "validation.json").string() << '\n';
            return exit_code::ok;
        }
    } catch (const StudyError& e) {
        return report_error(e.stage(), e.exit_code(), e.what());
    } catch (const ConfigError& e) {
        return report_error(stage, exit_code::config, e.what());
    } catch (const ParseError& e) {
        return report_error(stage, exit_code::config, e.what());
    } catch (const ValidationError& e) {
        return report_error(stage, exit_code::config, e.what());
    } catch (const FitError& e) {
        return report_error(stage, exit_code::config, e.what());
    } catch (const SolverFailure& e) {
        return report_error(stage, exit_code::solver, e.what());
    } catch (const std::exception& e) {
        return report_error(stage, 1, e.what());
    }
    return exit_code::ok;
}
