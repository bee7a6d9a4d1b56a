#include "doctest.h"

#include "mmco/battery.hpp"
#include "mmco/dynamics.hpp"
#include "mmco/motor.hpp"

#include <cmath>
#include <memory>
#include <random>

using namespace mmco;

namespace {

std::shared_ptr<const MotorModel> reference_motor() {
    static const auto model = std::make_shared<const MotorModel>(fit_loss_coefficients(synthesize_motor_map({})));
    return model;
}

}  // namespace

TEST_CASE("required power") {
    const VehicleParams p = scooter_preset();
    CHECK(required_power(p, 87.7, 0.0, 0.0, 0.0) == 0.0);
    const double oracle = (87.7 * 0.03 * 9.81 + 0.5 * 1.225 * 1.0 * 0.68 * 25.0) * 5.0;
    CHECK(required_power(p, 87.7, 5.0, 0.0, 0.0) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(required_power(p, 87.7, 5.0, 0.0, 0.0) == doctest::Approx(181.1).epsilon(1e-3));

    const double theta = std::atan(0.10);
    const double grade_term = 87.7 * 9.81 * std::sin(theta) * 5.0;
    CHECK(std::abs(grade_term - 428.1) < 0.1);
    const double rolling_change = 87.7 * 0.03 * 9.81 * (std::cos(theta) - 1.0) * 5.0;
    CHECK(required_power(p, 87.7, 5.0, 0.0, theta) - required_power(p, 87.7, 5.0, 0.0, 0.0) ==
          doctest::Approx(grade_term + rolling_change).epsilon(1e-12));
}

TEST_CASE("exogenous motor power") {
    VehicleParams p = scooter_preset();
    p.eta_gb = 0.97;
    p.eta_fd = 1.0;
    p.R_b = 0.5;
    CHECK(exogenous_motor_power(100.0, p, 590.0) == doctest::Approx(100.0 / 0.97));
    CHECK(exogenous_motor_power(100.0, p, 590.0) == doctest::Approx(103.09).epsilon(1e-4));
    CHECK(exogenous_motor_power(-100.0, p, 590.0) == doctest::Approx(-48.5));
    CHECK(exogenous_motor_power(0.0, p, 590.0) == 0.0);
    CHECK(exogenous_motor_power(-5000.0, p, 590.0) == -590.0);
    p.R_b = 0.0;
    CHECK(exogenous_motor_power(-100.0, p, 590.0) == 0.0);
}

TEST_CASE("synthetic motor map") {
    const MotorModel m = synthesize_motor_map({});
    const LossShape s;
    CHECK(m.map_loss(0.0, 0.0) == doctest::Approx(s.c_0));
    CHECK(s.loss(0.0, 2.0) - s.c_0 == doctest::Approx(4.0 * (s.loss(0.0, 1.0) - s.c_0)));
    CHECK(m.map_loss(250.0, 4.0) == doctest::Approx(s.loss(250.0, 4.0)).epsilon(1e-12));

    // Peak efficiency over the grid lies strictly inside the envelope.
    double best = -1.0, best_w = 0.0, best_t = 0.0;
    for (double w : m.omega_grid) {
        for (double t : m.torque_grid) {
            if (t <= 0.0 || w <= 0.0 || !m.in_envelope(w, t)) continue;
            const double eta = m.map_efficiency(w, t);
            if (eta > best) {
                best = eta;
                best_w = w;
                best_t = t;
            }
        }
    }
    CHECK(best == doctest::Approx(0.85).epsilon(0.02));
    CHECK(best_w > 0.3 * m.omega_max);
    CHECK(best_w < 0.7 * m.omega_max);
    CHECK(best_w < m.omega_max);
    CHECK(best_t < m.torque_limit(best_w) - 1e-9);
    CHECK(best_w > m.omega_grid[1]);

    // Envelope passes through (base speed, p_max) and (omega_max, 0.8 p_max).
    CHECK(m.power_limit(250.0) == doctest::Approx(1000.0));
    CHECK(m.power_limit(600.0) == doctest::Approx(800.0));
    CHECK(m.km1_ref <= 0.0);
    CHECK(m.km2_ref >= 0.0);

    MotorMapSpec bad;
    bad.shape.c_0 = -100.0;
    CHECK_THROWS_AS(synthesize_motor_map(bad), ValidationError);
}

TEST_CASE("loss fit on a torque-independent map is exact") {
    MotorMapSpec spec;
    spec.shape.c_cu = 0.0;
    spec.shape.c_st = 0.0;
    const MotorModel m = fit_loss_coefficients(synthesize_motor_map(spec));
    CHECK(m.fit_rmse_norm < 1e-10);
    const LossCoefficients& c = m.lookup(300.0);
    CHECK(c.a1 == doctest::Approx(spec.shape.c_0).epsilon(1e-9));
    CHECK(c.a2 == doctest::Approx(spec.shape.c_fr).epsilon(1e-9));
    CHECK(c.a3 == doctest::Approx(spec.shape.c_fe).epsilon(1e-9));
}

TEST_CASE("loss fit quality and convexity") {
    const auto m = reference_motor();
    CHECK(m->levels.size() == 201);
    CHECK(m->fit_rmse_norm <= 0.03);
    for (const auto& c : m->coeffs) CHECK(c.a3 >= 0.0);
    CHECK(10 * m->excluded_levels.size() <= m->levels.size());
    // Independent evaluation of the RMSE at the map grid points.
    double sse = 0.0, sum = 0.0;
    int n = 0;
    for (std::size_t i = 1; i < m->omega_grid.size(); ++i) {
        for (std::size_t j = 0; j < m->torque_grid.size(); ++j) {
            const double w = m->omega_grid[i], t = m->torque_grid[j];
            if (std::abs(t) > std::min(m->t_max_ref, (m->km1_ref * w + m->km2_ref) / w) + 1e-9) continue;
            const double truth = m->shape.loss(w, t);
            const double pred = m->fitted_loss(w * t, w);
            sse += (pred - truth) * (pred - truth);
            sum += truth;
            ++n;
        }
    }
    CHECK(std::sqrt(sse / n) / (sum / n) == doctest::Approx(m->fit_rmse_norm).epsilon(1e-9));
}

TEST_CASE("property: adjacent power levels predict close losses") {
    const auto m = reference_motor();
    for (std::size_t l = 0; l + 1 < m->levels.size(); ++l) {
        for (double w = 1.0; w <= m->omega_max; w += 1.0) {
            // Only speeds on both levels' feasible contours.
            const double lim = m->torque_limit(w) * w + 1e-9;
            if (std::abs(m->levels[l]) > lim || std::abs(m->levels[l + 1]) > lim) continue;
            const auto& a = m->coeffs[l];
            const auto& b = m->coeffs[l + 1];
            const double la = a.a1 + a.a2 * w + a.a3 * w * w;
            const double lb = b.a1 + b.a2 * w + b.a3 * w * w;
            if (std::abs(la - lb) >= 0.01 * m->p_max_ref) {
                FAIL("levels " << l << "," << l + 1 << " differ by " << std::abs(la - lb) << " W at " << w);
            }
        }
    }
}

TEST_CASE("motor scaling") {
    const auto ref = reference_motor();
    const ScaledMotor same = scale_motor(ref, ref->p_max_ref);
    CHECK(same.t_max == ref->t_max_ref);
    CHECK(same.km1 == ref->km1_ref);
    CHECK(same.coefficients(420.0).a2 == ref->lookup(420.0).a2);

    const ScaledMotor twice = scale_motor(ref, 2.0 * ref->p_max_ref);
    CHECK(twice.t_max == doctest::Approx(2.0 * ref->t_max_ref));
    CHECK(twice.km2 == doctest::Approx(2.0 * ref->km2_ref));
    const LossCoefficients c1 = ref->lookup(300.0), c2 = twice.coefficients(600.0);
    CHECK(c2.a1 == doctest::Approx(2.0 * c1.a1));
    CHECK(c2.a2 == doctest::Approx(2.0 * c1.a2));
    CHECK(c2.a3 == doctest::Approx(2.0 * c1.a3));

    // Efficiency at matched relative points is size invariant.
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int i = 0; i < 100; ++i) {
        const double w = u(rng) * ref->omega_max;
        const double rel = u(rng);
        const double t_ref = rel * ref->torque_limit(w);
        const double eta_ref = w * t_ref / (w * t_ref + ref->map_loss(w, t_ref));
        const double t_big = rel * twice.torque_limit(w);
        const double eta_big = w * t_big / (w * t_big + twice.map_loss(w, t_big));
        CHECK(eta_big == doctest::Approx(eta_ref).epsilon(1e-12));
        const double p_rel = w * t_ref;
        const double fit_ref = p_rel / (p_rel + ref->fitted_loss(p_rel, w));
        const double fit_big = 2 * p_rel / (2 * p_rel + twice.fitted_loss(2 * p_rel, w));
        CHECK(fit_big == doctest::Approx(fit_ref).epsilon(1e-12));
    }

    const ScaledMotor back = scale_motor(scale_motor(ref, 737.0), ref->p_max_ref);
    CHECK(std::abs(back.t_max - ref->t_max_ref) <= 1e-12 * ref->t_max_ref);
    CHECK(std::abs(back.km2 - ref->km2_ref) <= 1e-12 * ref->km2_ref);
    for (double p = -990.0; p <= 990.0; p += 45.0) {
        const double a = back.fitted_loss(p, 300.0), b = ref->fitted_loss(p, 300.0);
        CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
    }
}

TEST_CASE("battery fit: constant cell") {
    const CellTable cell = affine_cell_table(3.7, 3.7, 0.02, 20.0);
    const BatteryModel m = fit_battery(cell, {});
    CHECK(std::abs(m.p1) < 1e-9 * m.p2);
    CHECK(m.fit_rmse_norm < 1e-12);
}

TEST_CASE("battery fit: affine voltage") {
    const CellTable cell = affine_cell_table(2.8, 4.2, 0.02, 20.0);
    const PackConfig pack;
    const BatteryModel m = fit_battery(cell, pack);
    CHECK(m.fit_rmse_norm <= 0.01);
    CHECK(m.e_pack_ref_wh == doctest::Approx(13 * 3.7 * 2.5));
    CHECK(m.v_nom == doctest::Approx(48.1));

    // Oracle: normal equations for the quadratic P_oc(s) = 13*(2.8+1.4 s)^2/0.02
    // on the same 81-point grid.
    double s1 = 0, s2 = 0, y0 = 0, y1 = 0;
    const int n = 81;
    for (int k = 0; k < n; ++k) {
        const double s = 0.2 + 0.8 * k / (n - 1.0);
        const double y = 13.0 * (2.8 + 1.4 * s) * (2.8 + 1.4 * s) / 0.02;
        s1 += s;
        s2 += s * s;
        y0 += y;
        y1 += s * y;
    }
    const double det = n * s2 - s1 * s1;
    const double alpha = (n * y1 - s1 * y0) / det;
    const double beta = (s2 * y0 - s1 * y1) / det;
    CHECK(m.p1 * m.e_pack_ref_wh == doctest::Approx(alpha).epsilon(1e-10));
    CHECK(m.p2 * m.e_pack_ref_wh == doctest::Approx(beta).epsilon(1e-10));

    PackConfig twice = pack;
    twice.parallel = 2;
    for (double s = 0.0; s <= 1.0; s += 0.05) {
        CHECK(pack_open_circuit_power(cell, twice, s) == doctest::Approx(2 * pack_open_circuit_power(cell, pack, s)));
        CHECK(pack_max_internal_power(cell, twice, s) == doctest::Approx(2 * pack_max_internal_power(cell, pack, s)));
    }
}

TEST_CASE("property: battery fits stay positive for any capacity") {
    const BatteryModel m = fit_battery(affine_cell_table(2.8, 4.2, 0.02, 20.0), {});
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> cap(1.0, 1e5), frac(0.2, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double e_max = cap(rng);
        const double e = frac(rng) * e_max;
        CHECK(m.poc(e, e_max) > 0.0);
        CHECK(m.pi_max(e, e_max) > 0.0);
    }
}

TEST_CASE("battery fit rejects a poor affine model") {
    CellTable cell = affine_cell_table(2.8, 4.2, 0.02, 20.0);
    for (std::size_t k = 0; k < cell.soe.size(); ++k) cell.r[k] = 0.002 + 0.2 * std::pow(cell.soe[k] - 0.6, 2);
    CHECK_THROWS_AS(fit_battery(cell, {}), FitError);
}

TEST_CASE("mass closure reproduces the reference vehicle masses") {
    const MassBreakdown s = mass_closure(scooter_preset(), 590.0, 435.0, 5.91);
    CHECK(s.m_em == doctest::Approx(0.295));
    CHECK(s.m_bat == doctest::Approx(2.05755));
    CHECK(s.m_gb == doctest::Approx(0.349281));
    CHECK(std::abs(s.m_v - 12.7) <= 0.1);
    CHECK(s.m == doctest::Approx(s.m_v + 75.0));

    const MassBreakdown f = mass_closure(moped_preset(Transmission::fgt), 2370.0, 2549.0, 5.03);
    CHECK(std::abs(f.m_v - 75.1) <= 0.1);
    const MassBreakdown c = mass_closure(moped_preset(Transmission::cvt), 2550.0, 2874.0, 7.57);
    CHECK(std::abs(c.m_v - 78.2) <= 0.1);
    CHECK(c.m_v == doctest::Approx(c.m_em + c.m_bat + c.m_gb + c.m_f));
}

TEST_CASE("component cost reproduces the reference values") {
    CHECK(std::abs(component_cost(scooter_preset(), 590.0, 435.0) - 272.0) <= 1.0);
    CHECK(std::abs(component_cost(moped_preset(Transmission::fgt), 2370.0, 2549.0) - 1175.0) <= 1.0);
    CHECK(std::abs(component_cost(moped_preset(Transmission::cvt), 2550.0, 2874.0) - 1411.0) <= 1.0);
}

TEST_CASE("performance requirements") {
    const VehicleParams p = scooter_preset();
    const auto ref = reference_motor();
    const ScaledMotor m = scale_motor(ref, 590.0);
    const RequirementReport r = check_requirements(p, 590.0, m.t_max, m.km1, m.km2, 87.7);
    const double accel_oracle = (25.0 / 3.6) * (25.0 / 3.6) * 87.7 / 7.5 / 0.97;
    CHECK(r.accel_power_required == doctest::Approx(accel_oracle));
    CHECK(r.accel_power_required == doctest::Approx(581.3).epsilon(1e-3));
    CHECK(r.acceleration_ok);

    // Torque needed to start on a 10% grade at ratio 5.91: grade bound scales as 1/T.
    const double t_needed = r.grade_gamma_min * m.t_max / 5.91;
    CHECK(t_needed == doctest::Approx(87.7 * 9.81 * std::sin(std::atan(0.1)) * 0.125 / (0.97 * 5.91)));
    CHECK(t_needed == doctest::Approx(1.87).epsilon(2e-3));

    VehicleParams flat = p;
    flat.theta_start = 0.0;
    CHECK(check_requirements(flat, 590.0, m.t_max, m.km1, m.km2, 87.7).grade_gamma_min == 0.0);

    const RequirementReport weak = check_requirements(p, 500.0, m.t_max, m.km1, m.km2, 87.7);
    CHECK_FALSE(weak.feasible);
    CHECK(weak.binding == "acceleration");

    // Overspeed bound at top speed: omega_max*r_w/(gamma_fd*v).
    CHECK(600.0 * 0.125 / (25.0 / 3.6) == doctest::Approx(10.80).epsilon(1e-3));
}

TEST_CASE("presets and validation") {
    VehicleParams p = moped_preset(Transmission::cvt);
    CHECK_NOTHROW(p.validate());
    p.c_f = 1.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("c_f"), ValidationError);
    VehicleParams q = scooter_preset();
    q.eta_gb = 1.2;
    CHECK_THROWS_WITH_AS(q.validate(), doctest::Contains("eta_gb"), ValidationError);
    CHECK_THROWS_AS(preset("scooter", Transmission::cvt), ValidationError);
    CHECK(moped_preset(Transmission::cvt).c_f * 2.80 == doctest::Approx(7.56));
}
