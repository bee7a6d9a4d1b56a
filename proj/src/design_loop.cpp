#include "mmco/design_loop.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace mmco {

Solution InteriorPointAdapter::solve(const ConicProgram& program, const SolverTolerances& tol) const {
    socp::Settings s;
    s.feasibility_tol = tol.feasibility;
    s.gap_tol = tol.gap;
    return make_solution(program, socp::solve(program.to_problem(), s), s);
}

const SolverAdapter& default_solver() {
    static const InteriorPointAdapter adapter;
    return adapter;
}

namespace {

std::vector<double> scaled(const std::vector<double>& v, double f) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [f](double x) { return x * f; });
    return out;
}

double initial_mass(const VehicleParams& p, const LoopOptions& o) { return o.m_v0 < 0.0 ? p.m_f + 3.0 : o.m_v0; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

DesignPoint solve_at_mass(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                          const BatteryModel& battery, double m_v, const LoopOptions& options,
                          const SolverAdapter& solver) {
    const double m_bar = m_v + p.m_d;
    const RatioPresolve pre = presolve_ratio(cycle, p, motor, m_bar);
    if (!pre.feasible) throw DesignInfeasible(pre.binding, pre.detail);

    const Transcription t = transcribe(cycle, p, motor, battery, m_bar, options.transcribe);
    Solution s = solver.solve(t.program, options.tolerances);
    if (s.status == "infeasible") {
        throw DesignInfeasible("battery/state-of-energy", "conic program infeasible at " + fmt(m_bar) + " kg");
    }
    if (!s.optimal()) throw SolverFailure("solver returned " + s.status + " at " + fmt(motor.p_em_max) + " W");
    tie_break_standstill_ratio(t, s);

    DesignPoint d;
    d.label = cycle.label;
    d.transmission = p.transmission;
    d.p_em_max = motor.p_em_max;
    d.e_b_max = 1000.0 * s.at("E_b_max")[0];
    const int n = t.program.meta.steps;
    if (p.is_cvt()) {
        d.gamma_min = s.at("gamma_min")[0];
        d.gamma_max = p.c_f * d.gamma_min;
        d.gamma = d.gamma_max;
        d.gamma_k = s.at("gamma");
    } else {
        d.gamma = s.at("gamma")[0];
        d.gamma_k.assign(static_cast<std::size_t>(n), d.gamma);
    }
    d.mass = mass_closure(p, d.p_em_max, d.e_b_max, d.gamma);
    d.m_bar = m_bar;
    d.cost = objective_breakdown(s, p, motor.p_em_max, cycle.distance);
    d.delta_e = 1000.0 * s.at("dE_b")[0];
    d.residuals = relaxation_residuals(s, t);
    d.violation = constraint_violation(t.program, s.x);
    d.p_em = scaled(s.at("P_em"), 1000.0);
    d.p_dc = scaled(s.at("P_dc"), 1000.0);
    d.p_b = scaled(s.at("P_b"), 1000.0);
    d.p_i = scaled(s.at("P_i"), 1000.0);
    d.e_b = scaled(s.at("E_b"), 1000.0);
    d.iterations = 1;
    d.trace.push_back({m_v, d.mass.m_v, s.objective, s.iterations});
    return d;
}

DesignPoint mass_fixed_point(const DriveCycle& cycle, const VehicleParams& p, const ScaledMotor& motor,
                             const BatteryModel& battery, const LoopOptions& options, const SolverAdapter& solver) {
    if (options.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    double m_v = initial_mass(p, options);
    // Acceleration involves no decision variable: necessary condition first,
    // the binding check at the converged mass below.
    const double m_min = minimum_gross_mass(p, motor.p_em_max);
    RequirementReport req = check_requirements(p, motor.p_em_max, motor.t_max, motor.km1, motor.km2, m_min);
    if (!req.acceleration_ok) {
        throw DesignInfeasible("acceleration", "needs " + fmt(req.accel_power_required) + " W even at " +
                                                   fmt(m_min) + " kg, motor has " + fmt(motor.p_em_max) + " W");
    }
    std::vector<MassIterate> trace;
    for (int it = 1; it <= options.max_iter; ++it) {
        DesignPoint d = solve_at_mass(cycle, p, motor, battery, m_v, options, solver);
        trace.push_back(d.trace.front());
        if (std::abs(m_v - d.mass.m_v) < options.eps) {
            req = check_requirements(p, motor.p_em_max, motor.t_max, motor.km1, motor.km2, d.mass.m);
            if (!req.acceleration_ok) {
                throw DesignInfeasible("acceleration", "needs " + fmt(req.accel_power_required) + " W at the converged " +
                                                           fmt(d.mass.m) + " kg, motor has " + fmt(motor.p_em_max) + " W");
            }
            d.iterations = it;
            d.trace = trace;
            for (std::size_t k = 2; k < trace.size(); ++k) {
                const double prev = std::abs(trace[k - 1].m_v_star - trace[k - 1].m_v_bar);
                const double cur = std::abs(trace[k].m_v_star - trace[k].m_v_bar);
                if (cur > prev) d.trace_monotone = false;
            }
            return d;
        }
        m_v = d.mass.m_v;
    }
    throw NonConvergence("mass iteration did not converge in " + std::to_string(options.max_iter) + " iterations",
                         trace);
}

std::string to_string(EntryStatus s) {
    switch (s) {
        case EntryStatus::optimal: return "optimal";
        case EntryStatus::infeasible: return "infeasible";
        case EntryStatus::non_converged: return "non-converged";
        case EntryStatus::solver_failure: return "solver-failure";
    }
    return "unknown";
}

namespace {

EntryStatus entry_status_from_string(const std::string& s) {
    for (EntryStatus e : {EntryStatus::optimal, EntryStatus::infeasible, EntryStatus::non_converged,
                          EntryStatus::solver_failure}) {
        if (to_string(e) == s) return e;
    }
    throw std::invalid_argument("unknown entry status '" + s + "'");
}

}  // namespace

const DesignPoint& SweepResult::best_point() const {
    if (best < 0) throw std::logic_error("sweep has no feasible point");
    return *entries[static_cast<std::size_t>(best)].point;
}

int SweepResult::feasible_count() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [](const SweepEntry& e) { return e.status == EntryStatus::optimal; }));
}

double SweepResult::mean_solves() const {
    int count = 0, solves = 0;
    for (const auto& e : entries) {
        if (e.point) {
            ++count;
            solves += e.point->iterations;
        }
    }
    return count ? static_cast<double>(solves) / count : 0.0;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("grid needs step > 0 and max >= min");
    std::vector<double> g;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= count; ++i) g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

SweepResult sweep(const DriveCycle& cycle, const VehicleParams& p, std::shared_ptr<const MotorModel> motor,
                  const BatteryModel& battery, const std::vector<double>& grid, const LoopOptions& options,
                  int threads, const SolverAdapter& solver) {
    if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("sweep grid must be ascending");

    SweepResult r;
    r.label = cycle.label;
    r.grid = grid;
    r.entries.resize(grid.size());

    auto run_one = [&](std::size_t i) {
        SweepEntry& e = r.entries[i];
        e.p_em_max = grid[i];
        const ScaledMotor m = scale_motor(motor, grid[i]);
        const double m_min = minimum_gross_mass(p, grid[i]);
        const RequirementReport req = check_requirements(p, m.p_em_max, m.t_max, m.km1, m.km2, m_min);
        if (!req.acceleration_ok) {
            e.status = EntryStatus::infeasible;
            e.binding = "acceleration";
            e.detail = "needs " + fmt(req.accel_power_required) + " W even at " + fmt(m_min) + " kg";
            return;
        }
        try {
            e.point = mass_fixed_point(cycle, p, m, battery, options, solver);
            e.status = EntryStatus::optimal;
        } catch (const DesignInfeasible& ex) {
            e.status = EntryStatus::infeasible;
            e.binding = ex.binding();
            e.detail = ex.what();
        } catch (const NonConvergence& ex) {
            e.status = EntryStatus::non_converged;
            e.binding = "mass-iteration";
            e.detail = ex.what();
        } catch (const std::exception& ex) {
            e.status = EntryStatus::solver_failure;
            e.binding = "solver";
            e.detail = ex.what();
        }
    };

    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(grid.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < grid.size(); i = next++) run_one(i);
        });
    }
    for (auto& th : pool) th.join();

    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const auto& e = r.entries[i];
        if (e.status != EntryStatus::optimal) continue;
        if (r.best < 0 || e.point->cost.j_tco < r.entries[static_cast<std::size_t>(r.best)].point->cost.j_tco) {
            r.best = static_cast<int>(i);
        }
    }
    if (r.best < 0) {
        std::string msg = "no feasible motor size in [" + fmt(grid.front()) + ", " + fmt(grid.back()) + "] W";
        for (const auto& e : r.entries) msg += "\n  " + fmt(e.p_em_max) + " W: " + to_string(e.status) + " (" + e.binding + ")";
        throw SweepError(msg, r);
    }
    return r;
}

ScenarioDelta compare_designs(const DesignPoint& a, const DesignPoint& b) {
    auto pct = [](double from, double to) { return from != 0.0 ? 100.0 * (to - from) / from : 0.0; };
    ScenarioDelta d;
    d.from = a.label;
    d.to = b.label;
    d.tco_pct = pct(a.cost.j_tco, b.cost.j_tco);
    d.comp_pct = pct(a.cost.c_comp, b.cost.c_comp);
    d.el_pct = pct(a.cost.c_op, b.cost.c_op);
    d.gamma = b.gamma - a.gamma;
    d.p_em_max = b.p_em_max - a.p_em_max;
    d.e_b_max = b.e_b_max - a.e_b_max;
    return d;
}

ScenarioDelta compare_scenarios(const SweepResult& a, const SweepResult& b) {
    return compare_designs(a.best_point(), b.best_point());
}

nlohmann::json design_to_json(const DesignPoint& d, bool trajectories) {
    nlohmann::json j;
    j["label"] = d.label;
    j["transmission"] = to_string(d.transmission);
    j["p_em_max_w"] = d.p_em_max;
    j["e_b_max_wh"] = d.e_b_max;
    j["gamma"] = d.gamma;
    j["gamma_min"] = d.gamma_min;
    j["gamma_max"] = d.gamma_max;
    j["mass_kg"] = {{"m_em", d.mass.m_em}, {"m_bat", d.mass.m_bat}, {"m_gb", d.mass.m_gb},
                    {"m_f", d.mass.m_f},   {"m_v", d.mass.m_v},     {"m", d.mass.m}};
    j["m_bar_kg"] = d.m_bar;
    j["iterations"] = d.iterations;
    j["trace_monotone"] = d.trace_monotone;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : d.trace) {
        trace.push_back({{"m_v_bar", t.m_v_bar}, {"m_v_star", t.m_v_star}, {"objective", t.objective},
                         {"solver_iterations", t.solver_iterations}});
    }
    j["trace"] = trace;
    j["cost_eur"] = {{"c_op", d.cost.c_op}, {"c_comp", d.cost.c_comp}, {"j_tco", d.cost.j_tco}};
    j["delta_e_wh"] = d.delta_e;
    j["residuals"] = {{"drive", d.residuals.drive},
                      {"loss", d.residuals.loss},
                      {"battery", d.residuals.battery},
                      {"drive_checked", d.residuals.drive_checked},
                      {"loss_checked", d.residuals.loss_checked},
                      {"battery_checked", d.residuals.battery_checked}};
    j["violation"] = {{"equality", d.violation.equality},
                      {"inequality", d.violation.inequality},
                      {"cone", d.violation.cone},
                      {"worst_tag", d.violation.worst_tag}};
    if (trajectories) {
        j["trajectories"] = {{"gamma", d.gamma_k}, {"p_em_w", d.p_em}, {"p_dc_w", d.p_dc},
                             {"p_b_w", d.p_b},     {"p_i_w", d.p_i},    {"e_b_wh", d.e_b}};
    }
    return j;
}

DesignPoint design_from_json(const nlohmann::json& j) {
    DesignPoint d;
    d.label = j.at("label").get<std::string>();
    d.transmission = transmission_from_string(j.at("transmission").get<std::string>());
    d.p_em_max = j.at("p_em_max_w").get<double>();
    d.e_b_max = j.at("e_b_max_wh").get<double>();
    d.gamma = j.at("gamma").get<double>();
    d.gamma_min = j.at("gamma_min").get<double>();
    d.gamma_max = j.at("gamma_max").get<double>();
    const auto& m = j.at("mass_kg");
    d.mass = {m.at("m_em").get<double>(), m.at("m_bat").get<double>(), m.at("m_gb").get<double>(),
              m.at("m_f").get<double>(),  m.at("m_v").get<double>(),   m.at("m").get<double>()};
    d.m_bar = j.at("m_bar_kg").get<double>();
    d.iterations = j.at("iterations").get<int>();
    d.trace_monotone = j.at("trace_monotone").get<bool>();
    for (const auto& t : j.at("trace")) {
        d.trace.push_back({t.at("m_v_bar").get<double>(), t.at("m_v_star").get<double>(),
                           t.at("objective").get<double>(), t.at("solver_iterations").get<int>()});
    }
    const auto& c = j.at("cost_eur");
    d.cost = {c.at("c_op").get<double>(), c.at("c_comp").get<double>(), c.at("j_tco").get<double>()};
    d.delta_e = j.at("delta_e_wh").get<double>();
    const auto& r = j.at("residuals");
    d.residuals = {r.at("drive").get<double>(),      r.at("loss").get<double>(),
                   r.at("battery").get<double>(),    r.at("drive_checked").get<int>(),
                   r.at("loss_checked").get<int>(),  r.at("battery_checked").get<int>()};
    const auto& v = j.at("violation");
    d.violation = {v.at("equality").get<double>(), v.at("inequality").get<double>(), v.at("cone").get<double>(),
                   v.at("worst_tag").get<std::string>()};
    if (j.contains("trajectories")) {
        const auto& t = j.at("trajectories");
        d.gamma_k = t.at("gamma").get<std::vector<double>>();
        d.p_em = t.at("p_em_w").get<std::vector<double>>();
        d.p_dc = t.at("p_dc_w").get<std::vector<double>>();
        d.p_b = t.at("p_b_w").get<std::vector<double>>();
        d.p_i = t.at("p_i_w").get<std::vector<double>>();
        d.e_b = t.at("e_b_wh").get<std::vector<double>>();
    }
    return d;
}

nlohmann::json sweep_to_json(const SweepResult& r) {
    nlohmann::json j;
    j["format"] = "mmco-sweep";
    j["version"] = 1;
    j["label"] = r.label;
    j["grid_w"] = r.grid;
    j["best"] = r.best;
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const auto& e = r.entries[i];
        nlohmann::json je{{"p_em_max_w", e.p_em_max}, {"status", to_string(e.status)}, {"binding", e.binding},
                          {"detail", e.detail}};
        // Trajectories only for the selected design; the rest keep the summary.
        if (e.point) je["design"] = design_to_json(*e.point, static_cast<int>(i) == r.best);
        entries.push_back(je);
    }
    j["entries"] = entries;
    return j;
}

SweepResult sweep_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mmco-sweep" || j.value("version", 0) != 1) {
        throw std::runtime_error("not an mmco-sweep v1 document");
    }
    SweepResult r;
    r.label = j.at("label").get<std::string>();
    r.grid = j.at("grid_w").get<std::vector<double>>();
    r.best = j.at("best").get<int>();
    for (const auto& je : j.at("entries")) {
        SweepEntry e;
        e.p_em_max = je.at("p_em_max_w").get<double>();
        e.status = entry_status_from_string(je.at("status").get<std::string>());
        e.binding = je.at("binding").get<std::string>();
        e.detail = je.at("detail").get<std::string>();
        if (je.contains("design")) e.point = design_from_json(je.at("design"));
        r.entries.push_back(std::move(e));
    }
    return r;
}

nlohmann::json delta_to_json(const ScenarioDelta& d) {
    return {{"from", d.from},         {"to", d.to},           {"tco_pct", d.tco_pct},
            {"comp_pct", d.comp_pct}, {"el_pct", d.el_pct},   {"gamma", d.gamma},
            {"p_em_max_w", d.p_em_max}, {"e_b_max_wh", d.e_b_max}};
}

void write_trajectory_csv(std::ostream& out, const DesignPoint& d, const DriveCycle& cycle, const VehicleParams& p) {
    out << "t_s,v_mps,p_em_w,p_i_w,e_b_wh,gamma,omega_em_radps\n";
    char buf[512];
    for (std::size_t k = 0; k < d.p_em.size(); ++k) {
        const double g = k < d.gamma_k.size() ? d.gamma_k[k] : d.gamma;
        const double w = cycle.speed[k] * p.gamma_fd * g / p.r_w;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", cycle.time[k], cycle.speed[k],
                      d.p_em[k], d.p_i[k], d.e_b[k], g, w);
        out << buf;
    }
}

}  // namespace mmco
