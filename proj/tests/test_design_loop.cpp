#include "doctest.h"

#include "grid_oracle.hpp"
#include "mmco/design_loop.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <sstream>

using namespace mmco;

namespace {

std::shared_ptr<const MotorModel> reference_motor() {
    static const auto model = std::make_shared<const MotorModel>(fit_loss_coefficients(synthesize_motor_map({})));
    return model;
}

const BatteryModel& battery() {
    static const BatteryModel b = fit_battery(load_cell_table(MMCO_DATA_DIR "/cells/default_cell.csv"), PackConfig{});
    return b;
}

const DriveCycle& scooter_cycle() {
    static const DriveCycle c = load_cycle(MMCO_DATA_DIR "/cycles/scooter_urban.csv", 1.0);
    return c;
}

}  // namespace

TEST_CASE("fixed point converges to a mass that reproduces its own closure") {
    const VehicleParams p = scooter_preset();
    LoopOptions o;
    o.m_v0 = 15.0;
    const DesignPoint d = mass_fixed_point(scooter_cycle(), p, scale_motor(reference_motor(), 590.0), battery(), o);
    CHECK(d.iterations <= 10);
    CHECK(d.trace.size() == static_cast<std::size_t>(d.iterations));
    const MassBreakdown again = mass_closure(p, d.p_em_max, d.e_b_max, d.gamma);
    CHECK(std::abs(again.m_v - d.m_bar + p.m_d) < o.eps);
    CHECK(std::abs(d.mass.m_v - 12.7) < 0.5);
    CHECK(d.cost.j_tco == doctest::Approx(d.cost.c_op + d.cost.c_comp).epsilon(1e-12));
    CHECK(d.residuals.drive <= 1e-4);
    CHECK(d.residuals.loss <= 1e-4);
    CHECK(d.residuals.battery <= 1e-4);
}

TEST_CASE("converged mass does not depend on the initial guess") {
    const VehicleParams p = scooter_preset();
    const ScaledMotor m = scale_motor(reference_motor(), 720.0);
    std::vector<double> masses;
    for (double m0 : {5.0, 15.0, 30.0}) {
        LoopOptions o;
        o.m_v0 = m0;
        const DesignPoint d = mass_fixed_point(scooter_cycle(), p, m, battery(), o);
        CHECK(d.iterations <= 10);
        masses.push_back(d.mass.m_v);
    }
    for (double mv : masses) CHECK(std::abs(mv - masses[0]) <= 5e-4 * masses[0]);
}

TEST_CASE("standstill cycle converges quickly") {
    const VehicleParams p = scooter_preset();
    const DriveCycle idle = make_cycle(std::vector<double>(30, 0.0), std::vector<double>(30, 0.0), 1.0, 0.0, "idle");
    const DesignPoint d = mass_fixed_point(idle, p, scale_motor(reference_motor(), 700.0), battery());
    CHECK(d.iterations <= 3);
    double sum_pi = 0.0;
    for (std::size_t k = 0; k < d.p_b.size(); ++k) {
        CHECK(d.p_b[k] == doctest::Approx(p.P_aux).epsilon(1e-6));
        sum_pi += d.p_i[k];
    }
    // Internal power exceeds the terminal draw by the ohmic loss.
    CHECK(d.delta_e >= p.P_aux * 29.0 / 3600.0);
    CHECK(d.delta_e == doctest::Approx(sum_pi / 3600.0).epsilon(1e-6));
}

TEST_CASE("iteration cap raises non-convergence with the mass trace") {
    LoopOptions o;
    o.m_v0 = 30.0;
    o.max_iter = 1;
    try {
        mass_fixed_point(scooter_cycle(), scooter_preset(), scale_motor(reference_motor(), 720.0), battery(), o);
        FAIL("expected non-convergence");
    } catch (const NonConvergence& e) {
        REQUIRE(e.trace().size() == 1);
        CHECK(e.trace()[0].m_v_bar == 30.0);
    }
}

TEST_CASE("sweep below the acceleration bound is infeasible everywhere") {
    const VehicleParams p = scooter_preset();
    try {
        sweep(scooter_cycle(), p, reference_motor(), battery(), make_grid(300.0, 570.0, 30.0));
        FAIL("expected a sweep error");
    } catch (const SweepError& e) {
        CHECK(e.result().best == -1);
        for (const auto& entry : e.result().entries) {
            CHECK(entry.status == EntryStatus::infeasible);
            CHECK(entry.binding == "acceleration");
            CHECK_FALSE(entry.point.has_value());
        }
    }
}

TEST_CASE("sweep selection, determinism and serialization") {
    const VehicleParams p = scooter_preset();
    const SweepResult single = sweep(scooter_cycle(), p, reference_motor(), battery(), {650.0});
    CHECK(single.best == 0);

    const std::vector<double> grid = make_grid(560.0, 680.0, 20.0);
    CHECK(grid.size() == 7);
    const SweepResult a = sweep(scooter_cycle(), p, reference_motor(), battery(), grid, {}, 4);
    const SweepResult b = sweep(scooter_cycle(), p, reference_motor(), battery(), grid, {}, 1);
    CHECK(sweep_to_json(a).dump() == sweep_to_json(b).dump());

    REQUIRE(a.best >= 0);
    for (const auto& e : a.entries) {
        if (e.status == EntryStatus::optimal) CHECK(a.best_point().cost.j_tco <= e.point->cost.j_tco);
    }
    CHECK(a.entries[0].binding == "acceleration");
    CHECK(a.mean_solves() <= 5.0);

    const nlohmann::json j = sweep_to_json(a);
    const SweepResult back = sweep_from_json(nlohmann::json::parse(j.dump()));
    CHECK(sweep_to_json(back).dump() == j.dump());
    CHECK(back.best_point().p_i == a.best_point().p_i);
}

TEST_CASE("trajectory csv re-parses to the stored values") {
    const VehicleParams p = scooter_preset();
    const DesignPoint d = mass_fixed_point(scooter_cycle(), p, scale_motor(reference_motor(), 600.0), battery());
    std::ostringstream out;
    write_trajectory_csv(out, d, scooter_cycle(), p);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t_s,v_mps,p_em_w,p_i_w,e_b_wh,gamma,omega_em_radps");
    std::size_t k = 0;
    while (std::getline(in, line)) {
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
        REQUIRE(cols.size() == 7);
        CHECK(cols[2] == d.p_em[k]);
        CHECK(cols[3] == d.p_i[k]);
        CHECK(cols[4] == d.e_b[k]);
        ++k;
    }
    CHECK(k == d.p_em.size());
}

TEST_CASE("scenario comparison") {
    DesignPoint flat, hills;
    flat.cost = {24.0, 272.0, 296.0};
    hills.cost = {25.0, 293.0, 318.0};
    const ScenarioDelta same = compare_designs(flat, flat);
    CHECK(same.tco_pct == 0.0);
    CHECK(same.comp_pct == 0.0);
    CHECK(same.el_pct == 0.0);
    CHECK(same.gamma == 0.0);

    const ScenarioDelta d = compare_designs(flat, hills);
    CHECK(d.tco_pct == doctest::Approx(7.4).epsilon(0.01));
    CHECK(d.comp_pct == doctest::Approx(7.7).epsilon(0.01));
    CHECK(d.el_pct == doctest::Approx(4.2).epsilon(0.01));

    DesignPoint fgt, cvt;
    fgt.cost.j_tco = 1713.0;
    cvt.cost.j_tco = 2018.0;
    CHECK(compare_designs(fgt, cvt).tco_pct == doctest::Approx(17.8).epsilon(0.005));
}

TEST_CASE("tiny-horizon grid search agrees with the conic optimum") {
    const VehicleParams p = scooter_preset();
    const DriveCycle cycle = make_cycle({0.0, 1.5, 3.0, 4.0, 4.5, 4.5, 3.0}, std::vector<double>(7, 0.0), 1.0, 0.0, "tiny");
    const ScaledMotor m = scale_motor(reference_motor(), 600.0);
    const Transcription t = transcribe(cycle, p, m, battery(), 88.0);
    const Solution s = default_solver().solve(t.program, {});
    REQUIRE(s.optimal());

    const auto start = std::chrono::steady_clock::now();
    const RatioPresolve band = presolve_ratio(cycle, p, m, 88.0);
    REQUIRE(band.feasible);
    const double grid = testing::grid_optimum(t, cycle, band.lo, band.hi, 2.0 * s.at("E_b_max")[0]);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 60.0);
    REQUIRE(std::isfinite(grid));
    CHECK(grid >= s.objective * (1.0 - 1e-6));
    CHECK(grid <= s.objective * 1.01);
    // The variable part alone is also close.
    const double var_socp = s.objective - t.program.objective_constant;
    const double var_grid = grid - t.program.objective_constant;
    CHECK(var_grid <= var_socp * 1.01);
}
