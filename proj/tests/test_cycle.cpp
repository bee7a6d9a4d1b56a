#include "doctest.h"

#include "mmco/cycle.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace mmco;

namespace {

DriveCycle parse(const std::string& text, double dt = 1.0) {
    std::istringstream in(text);
    return parse_cycle(in, dt, "t");
}

std::vector<double> recompute_accel(const DriveCycle& c) {
    std::vector<double> a(c.size(), 0.0);
    for (std::size_t k = 0; k + 1 < c.size(); ++k) a[k] = (c.speed[k + 1] - c.speed[k]) / c.dt;
    return a;
}

double distance_sum(const std::vector<double>& v, double dt) {
    double d = 0.0;
    for (double x : v) d += x * dt;
    return d;
}

DriveCycle random_cycle(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 15.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return make_cycle(v, {}, 1.0);
}

}  // namespace

TEST_CASE("three-row file") {
    const DriveCycle c = parse("t_s,v_mps,grade\n0,0,0\n1,1,0\n2,2,0\n");
    REQUIRE(c.size() == 3);
    CHECK(c.accel == std::vector<double>{1.0, 1.0, 0.0});
    CHECK(c.distance == 3.0);
    CHECK(c.dt == 1.0);
}

TEST_CASE("constant speed") {
    std::string text = "t_s,v_mps,grade\n";
    for (int k = 0; k < 100; ++k) text += std::to_string(k) + ",5,0\n";
    const DriveCycle c = parse(text);
    CHECK(c.distance == doctest::Approx(500.0));
    for (double a : c.accel) CHECK(a == 0.0);
}

TEST_CASE("downsampling a 0.1 s trace") {
    // Speed trace sampled at 0.1 s over 60 s.
    std::ostringstream out;
    out << "t_s,v_mps,grade\n";
    std::vector<double> t, v;
    for (int k = 0; k <= 600; ++k) {
        const double tk = 0.1 * k;
        const double vk = std::max(0.0, 8.0 * std::sin(tk / 9.0) + 2.0 * std::sin(tk * 1.7));
        t.push_back(tk);
        v.push_back(vk);
        out.precision(17);
        out << tk << ',' << vk << ",0\n";
    }
    const DriveCycle c = parse(out.str());
    CHECK(c.size() == static_cast<std::size_t>(std::ceil(60.0)) + 1);
    // Oracle: evaluate the piecewise-linear interpolant directly at integer seconds.
    double max_step = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double tq = static_cast<double>(k);
        std::size_t j = 0;
        while (j + 1 < t.size() && t[j + 1] <= tq) ++j;
        double expect = v[j];
        if (j + 1 < t.size() && t[j] < tq) expect = v[j] + (tq - t[j]) / (t[j + 1] - t[j]) * (v[j + 1] - v[j]);
        CHECK(c.speed[k] == doctest::Approx(expect).epsilon(1e-12));
        if (k > 0) max_step = std::max(max_step, std::abs(c.speed[k] - c.speed[k - 1]));
    }
    const double vmax = *std::max_element(v.begin(), v.end());
    CHECK(vmax - c.max_speed() <= max_step);
    CHECK(c.max_speed() <= vmax);
}

TEST_CASE("altitude variant converts km/h and derives grade") {
    // 36 km/h = 10 m/s, altitude rises 1 m per step => grade 0.1.
    std::string text = "t_s,v_kmh,alt_m\n";
    for (int k = 0; k < 10; ++k) text += std::to_string(k) + ",36," + std::to_string(k) + "\n";
    const DriveCycle c = parse(text);
    CHECK(c.speed[3] == doctest::Approx(10.0));
    CHECK(std::tan(c.grade_angle[4]) == doctest::Approx(0.1));
    // Standstill with altitude change is bounded by the 0.1 m floor.
    const DriveCycle s = parse("t_s,v_kmh,alt_m\n0,0,0\n1,0,0.01\n2,3.6,0.02\n");
    for (double a : s.grade_angle) CHECK(std::isfinite(a));
    CHECK(std::tan(s.grade_angle[0]) == doctest::Approx(0.1));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse(""), ValidationError);
    CHECK_THROWS_AS(parse("t_s,v_mps,grade\n"), ValidationError);
    CHECK_THROWS_WITH_AS(parse("t_s,v_mps\n0,1\n1,1\n"), doctest::Contains("grade"), ParseError);
    CHECK_THROWS_WITH_AS(parse("time,v_mps,grade\n0,1,0\n"), doctest::Contains("t_s"), ParseError);
    CHECK_THROWS_AS(parse("t_s,v_mps,grade\n0,1,0\n2,1,0\n1,1,0\n"), ValidationError);
    CHECK_THROWS_AS(parse("t_s,v_mps,grade\n0,abc,0\n1,1,0\n"), ParseError);
    CHECK_THROWS_AS(parse("t_s,v_mps,grade\n0,-1,0\n1,1,0\n"), ValidationError);
    CHECK_THROWS_AS(parse("t_s,v_mps,grade\n0,0,0\n1,0,0\n"), ValidationError);
    CHECK_THROWS_AS(load_cycle("/nonexistent/cycle.csv"), ValidationError);
}

TEST_CASE("write and reload is lossless") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> g(-0.08, 0.08);
    DriveCycle c = random_cycle(rng, 50);
    std::vector<double> angle(c.size());
    for (auto& a : angle) a = std::atan(g(rng));
    c = make_cycle(c.speed, angle, 1.0);
    std::stringstream buf;
    write_cycle(c, buf);
    const DriveCycle r = parse_cycle(buf, 1.0);
    CHECK(r.speed == c.speed);
    CHECK(r.accel == c.accel);
    CHECK(r.time == c.time);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(r.grade_angle[k] == doctest::Approx(c.grade_angle[k]).epsilon(1e-15));
    // Resampling at the stored step is idempotent.
    std::stringstream again;
    write_cycle(r, again);
    CHECK(parse_cycle(again, 1.0).speed == r.speed);
}

TEST_CASE("cap speed") {
    std::vector<double> v{0, 5, 10, 20, 15, 8, 0};
    const DriveCycle c = make_cycle(v, {}, 1.0);
    const DriveCycle capped = cap_speed(c, 12.5);
    CHECK(capped.max_speed() == 12.5);
    CHECK(capped.accel == recompute_accel(capped));
    CHECK(capped.distance == distance_sum(capped.speed, 1.0));

    const DriveCycle same = cap_speed(c, 25.0);
    CHECK(same.speed == c.speed);
    CHECK(same.accel == c.accel);
    CHECK(same.distance == c.distance);

    CHECK(cap_speed(c, 0.5 * c.max_speed()).distance < c.distance);
    CHECK_THROWS_AS(cap_speed(c, 0.0), ValidationError);
}

TEST_CASE("property: capping is idempotent and monotone") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> cap(0.5, 16.0);
    for (int trial = 0; trial < 50; ++trial) {
        const DriveCycle c = random_cycle(rng, 40);
        double v1 = cap(rng), v2 = cap(rng);
        if (v1 > v2) std::swap(v1, v2);
        const DriveCycle once = cap_speed(c, v1);
        CHECK(cap_speed(once, v1).speed == once.speed);
        CHECK(once.distance <= cap_speed(c, v2).distance);
        CHECK(once.accel == recompute_accel(once));
    }
}

TEST_CASE("antisymmetric hill returns to start altitude") {
    const DriveCycle flat = make_cycle(std::vector<double>(101, 5.0), {}, 1.0);
    REQUIRE(flat.distance == doctest::Approx(505.0));
    GradientProfileSpec spec{{{250.0, 0.10}, {250.0, -0.10}}, 1};
    const DriveCycle hilly = synthesize_gradient(flat, spec, false);
    CHECK(std::abs(net_altitude_change(hilly)) < 0.1);
    CHECK(hilly.size() == flat.size());
    CHECK(hilly.dt == flat.dt);
    CHECK(std::tan(hilly.grade_angle[10]) == doctest::Approx(0.10));
    CHECK(hilly.accel == recompute_accel(hilly));

    const DriveCycle adjusted = synthesize_gradient(flat, {{{250.0, 0.10}, {250.0, -0.10}}, 5}, true);
    CHECK(std::abs(net_altitude_change(adjusted)) < 0.1);
    CHECK(adjusted.accel == recompute_accel(adjusted));
}

TEST_CASE("all-zero profile leaves the cycle unchanged") {
    std::mt19937 rng(5);
    const DriveCycle c = random_cycle(rng, 30);
    const DriveCycle out = synthesize_gradient(c, {{{100.0, 0.0}}, 3}, true);
    CHECK(out.speed == c.speed);
    CHECK(out.grade_angle == c.grade_angle);
    CHECK(out.distance == c.distance);
}

TEST_CASE("speed adjustment slows the climb") {
    const DriveCycle flat = make_cycle(std::vector<double>(200, 6.0), {}, 1.0);
    const GradientProfileSpec spec{{{300.0, 0.10}, {300.0, -0.10}}, 1};
    const DriveCycle plain = synthesize_gradient(flat, spec, false);
    const DriveCycle slow = synthesize_gradient(flat, spec, true);
    double sum_flat = 0.0, sum_slow = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < slow.size(); ++k) {
        if (slow.grade_angle[k] > 0.0) {
            sum_slow += slow.speed[k];
            sum_flat += plain.speed[k];
            ++n;
        }
    }
    REQUIRE(n > 0);
    CHECK(sum_slow / n < sum_flat / n);
    CHECK(std::abs(net_altitude_change(slow)) < 0.1);
    CHECK(attenuate_climb_speed(6.0, 0.1) == doctest::Approx(6.0 / 1.4));
    CHECK(attenuate_climb_speed(2.5, 0.2) == doctest::Approx(2.0));
    CHECK(attenuate_climb_speed(1.0, 0.2) == doctest::Approx(1.0));
    CHECK(attenuate_climb_speed(6.0, -0.1) == 6.0);
}

TEST_CASE("gradient synthesis errors") {
    const DriveCycle flat = make_cycle(std::vector<double>(10, 5.0), {}, 1.0);
    CHECK_THROWS_AS(synthesize_gradient(flat, {{{250.0, 0.1}, {250.0, -0.1}}, 1}, false), ValidationError);
    CHECK_THROWS_AS(synthesize_gradient(flat, {{{10.0, 0.1}}, 1}, false), ValidationError);
    CHECK_THROWS_AS(synthesize_gradient(flat, {{{10.0, 0.6}, {10.0, -0.6}}, 1}, false), ValidationError);
    const DriveCycle tilted = make_cycle(std::vector<double>(10, 5.0), std::vector<double>(10, 0.01), 1.0);
    CHECK_THROWS_AS(synthesize_gradient(tilted, {{{10.0, 0.0}}, 1}, false), ValidationError);
}

TEST_CASE("gradient segment parsing") {
    const auto segs = parse_gradient_segments("250:0.06, 250:-0.06");
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].length_m == 250.0);
    CHECK(segs[1].grade == -0.06);
    CHECK_THROWS_AS(parse_gradient_segments("250"), ParseError);
}
