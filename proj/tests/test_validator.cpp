#include "doctest.h"

#include "mmco/validator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

using namespace mmco;

namespace {

std::shared_ptr<const MotorModel> reference_motor() {
    static const auto model = std::make_shared<const MotorModel>(fit_loss_coefficients(synthesize_motor_map({})));
    return model;
}

const CellTable& cell() {
    static const CellTable c = load_cell_table(MMCO_DATA_DIR "/cells/default_cell.csv");
    return c;
}

const BatteryModel& battery() {
    static const BatteryModel b = fit_battery(cell(), PackConfig{});
    return b;
}

const DriveCycle& scooter_cycle() {
    static const DriveCycle c = load_cycle(MMCO_DATA_DIR "/cycles/scooter_urban.csv", 1.0);
    return c;
}

struct Fixture {
    VehicleParams p = scooter_preset();
    ScaledMotor motor = scale_motor(reference_motor(), 600.0);
    DesignPoint design;
    Fixture() { design = mass_fixed_point(scooter_cycle(), p, motor, battery()); }
};

const Fixture& scooter() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("internal power root") {
    double pi = 0.0;
    CHECK(internal_power(0.0, 5000.0, pi));
    CHECK(pi == 0.0);
    CHECK(internal_power(1000.0, 5000.0, pi));
    CHECK(pi * pi - 5000.0 * pi + 5000.0 * 1000.0 == doctest::Approx(0.0).scale(5000.0 * 1000.0));
    CHECK(pi > 1000.0);
    CHECK(internal_power(-500.0, 5000.0, pi));
    CHECK(pi < 0.0);
    CHECK(pi > -500.0);
    CHECK_FALSE(internal_power(1300.0, 5000.0, pi));
    // Tiny draw against a large pack keeps full relative precision.
    CHECK(internal_power(1e-6, 1e6, pi));
    CHECK(pi == doctest::Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("replay of the optimized scooter design") {
    const Fixture& f = scooter();
    const SimulationTrace tr = simulate(f.design, scooter_cycle(), f.p, f.motor, cell(), battery());
    REQUIRE(tr.steps.size() == scooter_cycle().size() - 1);
    CHECK(tr.feasible());
    CHECK(tr.gap <= 0.02);

    // Telescoping of the state of energy.
    double sum = 0.0;
    for (const auto& s : tr.steps) sum += s.p_i * tr.dt / 3600.0;
    CHECK(sum == doctest::Approx(tr.delta_e_sim).epsilon(1e-9));
    CHECK(tr.e_b_end == doctest::Approx(f.p.zeta_max * f.design.e_b_max - sum).epsilon(1e-12));

    for (const auto& s : tr.steps) {
        CHECK(s.p_brake >= 0.0);
        if (s.p_em >= 0.0 && s.p_req >= 0.0) CHECK(s.p_brake == 0.0);
        if (s.p_em < 0.0) CHECK(s.torque < 0.0);
        CHECK(s.p_b == doctest::Approx(s.p_em + s.p_loss + f.p.P_aux));
        if (s.omega == 0.0) CHECK(s.p_loss == 0.0);
    }

    const OperatingSummary ops = operating_points(tr);
    CHECK(ops.motoring > 0);
    CHECK(ops.regenerating > 0);
    for (const auto& op : ops.points) {
        CHECK(op.efficiency >= 0.0);
        CHECK(op.efficiency <= 1.0);
    }
}

TEST_CASE("fitted-model replay reproduces the optimizer's internal power") {
    const Fixture& f = scooter();
    SimulateOptions o;
    o.fitted_models = true;
    const SimulationTrace tr = simulate(f.design, scooter_cycle(), f.p, f.motor, cell(), battery(), o);
    CHECK(tr.gap <= 1e-3);
    double peak = 0.0;
    for (double v : f.design.p_i) peak = std::max(peak, std::abs(v));
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
        CHECK(std::abs(tr.steps[k].p_i - f.design.p_i[k]) <= 0.01 * std::max(std::abs(f.design.p_i[k]), 0.05 * peak));
    }
}

TEST_CASE("standstill replay drains only the auxiliary load") {
    const Fixture& f = scooter();
    const DriveCycle idle = make_cycle(std::vector<double>(61, 0.0), std::vector<double>(61, 0.0), 1.0, 0.0, "idle");
    DesignPoint d = f.design;
    d.delta_e = 0.0;
    const SimulationTrace tr = simulate(d, idle, f.p, f.motor, cell(), battery());
    double expected = 0.0;
    double e = f.p.zeta_max * d.e_b_max;
    for (int k = 0; k < 60; ++k) {
        double pi = 0.0;
        REQUIRE(internal_power(f.p.P_aux, table_open_circuit_power(cell(), battery(), e, d.e_b_max), pi));
        expected += pi / 3600.0;
        e -= pi / 3600.0;
    }
    CHECK(tr.delta_e_sim == doctest::Approx(expected).epsilon(1e-12));
    CHECK(tr.delta_e_sim == doctest::Approx(f.p.P_aux * 60.0 / 3600.0).epsilon(1e-3));
    for (const auto& s : tr.steps) {
        CHECK(s.p_em == 0.0);
        CHECK(s.p_loss == 0.0);
        CHECK(s.p_b == f.p.P_aux);
    }
}

TEST_CASE("limit flags mark exactly the offending steps") {
    const Fixture& f = scooter();
    std::vector<double> v(40, 5.0);
    for (int k = 21; k < 40; ++k) v[k] = 8.0;  // 3 m/s^2 at step 20
    const DriveCycle c = make_cycle(v, std::vector<double>(40, 0.0), 1.0, 0.0, "jump");
    const SimulationTrace tr = simulate(f.design, c, f.p, f.motor, cell(), battery());
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
        const auto& s = tr.steps[k];
        const bool over = s.p_em > f.motor.t_max * s.omega + 1e-9 || s.p_em > f.motor.km1 * s.omega + f.motor.km2 + 1e-9;
        CHECK((s.torque_limited || s.power_limited) == over);
        CHECK((s.torque_limited || s.power_limited) == (k == 20));
    }
    CHECK_FALSE(tr.feasible());
}

TEST_CASE("constant cruise collapses to one operating point") {
    const Fixture& f = scooter();
    const DriveCycle c = make_cycle(std::vector<double>(30, 5.0), std::vector<double>(30, 0.0), 1.0, 0.0, "cruise");
    const SimulationTrace tr = simulate(f.design, c, f.p, f.motor, cell(), battery());
    const OperatingSummary ops = operating_points(tr);
    REQUIRE(ops.points.size() == 29);
    for (const auto& op : ops.points) {
        CHECK(op.omega == ops.points[0].omega);
        CHECK(op.torque == ops.points[0].torque);
        CHECK(op.efficiency == ops.points[0].efficiency);
    }
    CHECK(ops.regenerating == 0);
}

TEST_CASE("trace csv and summary") {
    const Fixture& f = scooter();
    const SimulationTrace tr = simulate(f.design, scooter_cycle(), f.p, f.motor, cell(), battery());
    std::ostringstream out;
    write_trace_csv(out, tr, scooter_cycle());
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t_s,p_req_w,p_em_w,p_brake_w,omega_radps,torque_nm,p_loss_w,p_b_w,p_oc_w,p_i_w,e_b_wh,flags");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == tr.steps.size());

    const nlohmann::json j = trace_summary_json(tr);
    CHECK(j.at("steps") == tr.steps.size());
    CHECK(j.at("gap_pct").get<double>() == doctest::Approx(100.0 * tr.gap));
    CHECK(j.at("feasible").get<bool>());
}

TEST_CASE("mismatched transmission is rejected") {
    const Fixture& f = scooter();
    VehicleParams cvt = moped_preset(Transmission::cvt);
    CHECK_THROWS_AS(simulate(f.design, scooter_cycle(), cvt, f.motor, cell(), battery()), std::invalid_argument);
}

TEST_CASE("continuously variable transmission runs the motor at least as efficiently") {
    const DriveCycle cycle = load_cycle(MMCO_DATA_DIR "/cycles/moped_urban.csv", 1.0);
    const VehicleParams fgt = moped_preset(Transmission::fgt);
    const VehicleParams cvt = moped_preset(Transmission::cvt);
    const ScaledMotor motor = scale_motor(reference_motor(), 2700.0);
    const DesignPoint a = mass_fixed_point(cycle, fgt, motor, battery());
    const DesignPoint b = mass_fixed_point(cycle, cvt, motor, battery());
    const OperatingSummary oa = operating_points(simulate(a, cycle, fgt, motor, cell(), battery()));
    const OperatingSummary ob = operating_points(simulate(b, cycle, cvt, motor, cell(), battery()));
    MESSAGE("FGT " << oa.mean_motoring_efficiency << ", CVT " << ob.mean_motoring_efficiency);
    CHECK(ob.mean_motoring_efficiency >= oa.mean_motoring_efficiency);
}
