#include "mmco/cycle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mmco {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    return out;
}

double parse_number(const std::string& text, std::size_t line_no) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (!text.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
    }
    return v;
}

std::vector<double> forward_accel(const std::vector<double>& speed, double dt) {
    std::vector<double> a(speed.size(), 0.0);
    for (std::size_t k = 0; k + 1 < speed.size(); ++k) a[k] = (speed[k + 1] - speed[k]) / dt;
    return a;
}

// Linear interpolation of (t, y) at query time tq; t strictly increasing.
double interpolate(const std::vector<double>& t, const std::vector<double>& y, double tq, std::size_t& hint) {
    if (tq <= t.front()) return y.front();
    if (tq >= t.back()) return y.back();
    while (hint + 1 < t.size() && t[hint + 1] <= tq) ++hint;
    if (t[hint] == tq) return y[hint];
    const double w = (tq - t[hint]) / (t[hint + 1] - t[hint]);
    return y[hint] + w * (y[hint + 1] - y[hint]);
}

}  // namespace

double DriveCycle::max_speed() const {
    return speed.empty() ? 0.0 : *std::max_element(speed.begin(), speed.end());
}

DriveCycle make_cycle(std::vector<double> speed, std::vector<double> grade_angle, double dt, double t0,
                      std::string label) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("cycle step dt must be positive");
    if (speed.size() < 2) throw ValidationError("cycle needs at least two samples");
    if (grade_angle.empty()) grade_angle.assign(speed.size(), 0.0);
    if (grade_angle.size() != speed.size()) throw ValidationError("speed and grade sample counts differ");
    for (std::size_t k = 0; k < speed.size(); ++k) {
        if (!std::isfinite(speed[k]) || speed[k] < 0.0) {
            throw ValidationError("speed sample " + std::to_string(k) + " is negative or not finite");
        }
        if (!std::isfinite(grade_angle[k]) || std::abs(grade_angle[k]) >= M_PI / 2) {
            throw ValidationError("grade sample " + std::to_string(k) + " is out of range");
        }
    }
    DriveCycle c;
    c.dt = dt;
    c.label = std::move(label);
    c.time.resize(speed.size());
    for (std::size_t k = 0; k < speed.size(); ++k) c.time[k] = t0 + static_cast<double>(k) * dt;
    c.accel = forward_accel(speed, dt);
    double d = 0.0;
    for (double v : speed) d += v * dt;
    c.distance = d;
    c.speed = std::move(speed);
    c.grade_angle = std::move(grade_angle);
    return c;
}

DriveCycle parse_cycle(std::istream& in, double dt_target, std::string label) {
    if (!(dt_target > 0.0)) throw ValidationError("target step must be positive");
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv(line);
            break;
        }
    }
    if (header.empty()) throw ValidationError("cycle file is empty");

    auto column = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int col_t = column("t_s");
    if (col_t < 0) throw ParseError("cycle header is missing column 't_s'");
    const bool altitude_variant = column("v_kmh") >= 0;
    int col_v, col_g;
    if (altitude_variant) {
        col_v = column("v_kmh");
        col_g = column("alt_m");
        if (col_g < 0) throw ParseError("cycle header is missing column 'alt_m'");
    } else {
        col_v = column("v_mps");
        if (col_v < 0) throw ParseError("cycle header is missing column 'v_mps'");
        col_g = column("grade");
        if (col_g < 0) throw ParseError("cycle header is missing column 'grade'");
    }
    const std::size_t width = static_cast<std::size_t>(std::max({col_t, col_v, col_g})) + 1;

    std::vector<double> t, v, g;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() < width) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns");
        }
        const double tk = parse_number(cells[col_t], line_no);
        if (!t.empty() && !(tk > t.back())) {
            throw ValidationError("line " + std::to_string(line_no) + ": timestamps must be strictly increasing");
        }
        t.push_back(tk);
        v.push_back(parse_number(cells[col_v], line_no) * (altitude_variant ? 1.0 / 3.6 : 1.0));
        if (!(v.back() >= 0.0) || !std::isfinite(v.back())) {
            throw ValidationError("line " + std::to_string(line_no) + ": speed must be finite and non-negative");
        }
        g.push_back(parse_number(cells[col_g], line_no));
    }
    if (t.empty()) throw ValidationError("cycle file has no samples");
    if (t.size() < 2) throw ValidationError("cycle file needs at least two samples");

    const double span = t.back() - t.front();
    const auto count = static_cast<std::size_t>(std::floor(span / dt_target + 1e-9)) + 1;
    std::vector<double> speed(count), other(count);
    std::size_t hv = 0, hg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double tq = t.front() + static_cast<double>(k) * dt_target;
        speed[k] = interpolate(t, v, tq, hv);
        other[k] = interpolate(t, g, tq, hg);
    }

    std::vector<double> angle(count, 0.0);
    if (altitude_variant) {
        // Central differences of altitude over cumulative distance, with a
        // distance floor of 0.1 m per step.
        std::vector<double> s(count, 0.0);
        for (std::size_t k = 1; k < count; ++k) s[k] = s[k - 1] + speed[k - 1] * dt_target;
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t lo = k == 0 ? 0 : k - 1;
            const std::size_t hi = k + 1 == count ? k : k + 1;
            const double run = std::max(s[hi] - s[lo], 0.1 * static_cast<double>(hi - lo));
            angle[k] = std::atan((other[hi] - other[lo]) / run);
        }
    } else {
        for (std::size_t k = 0; k < count; ++k) angle[k] = std::atan(other[k]);
    }
    DriveCycle c = make_cycle(std::move(speed), std::move(angle), dt_target, t.front(), std::move(label));
    if (!(c.distance > 0.0)) throw ValidationError("cycle covers zero distance");
    return c;
}

DriveCycle load_cycle(const std::string& path, double dt_target) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open cycle file '" + path + "'");
    std::string label = path;
    if (const auto slash = label.find_last_of('/'); slash != std::string::npos) label = label.substr(slash + 1);
    if (const auto dot = label.rfind('.'); dot != std::string::npos) label = label.substr(0, dot);
    return parse_cycle(in, dt_target, label);
}

void write_cycle(const DriveCycle& cycle, std::ostream& out) {
    out << "t_s,v_mps,grade\n" << std::setprecision(17);
    for (std::size_t k = 0; k < cycle.size(); ++k) {
        out << cycle.time[k] << ',' << cycle.speed[k] << ',' << std::tan(cycle.grade_angle[k]) << '\n';
    }
}

void save_cycle(const DriveCycle& cycle, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write cycle file '" + path + "'");
    write_cycle(cycle, out);
}

DriveCycle cap_speed(const DriveCycle& cycle, double v_cap) {
    if (!(v_cap > 0.0)) throw ValidationError("speed cap must be positive");
    std::vector<double> speed = cycle.speed;
    for (double& v : speed) v = std::min(v, v_cap);
    return make_cycle(std::move(speed), cycle.grade_angle, cycle.dt, cycle.time.front(), cycle.label);
}

double attenuate_climb_speed(double v, double grade) {
    if (grade <= 0.0 || v <= 0.0) return v;
    return std::max(v / (1.0 + 4.0 * grade), std::min(v, 2.0));
}

double net_altitude_change(const DriveCycle& cycle) {
    double h = 0.0;
    for (std::size_t k = 0; k < cycle.size(); ++k) h += cycle.speed[k] * std::sin(cycle.grade_angle[k]) * cycle.dt;
    return h;
}

DriveCycle synthesize_gradient(const DriveCycle& cycle, const GradientProfileSpec& spec, bool speed_adjust) {
    double length = 0.0, climb = 0.0;
    for (const auto& seg : spec.segments) {
        if (!(seg.length_m >= 0.0)) throw ValidationError("gradient segment length must be non-negative");
        if (!(std::abs(seg.grade) < 0.5)) throw ValidationError("gradient magnitude must be below 0.5");
        length += seg.length_m;
        climb += seg.length_m * seg.grade;
    }
    if (std::abs(climb) > 1e-6 * std::max(1.0, length)) {
        throw ValidationError("gradient profile must have zero net climb");
    }
    if (length > cycle.distance) throw ValidationError("gradient profile is longer than the cycle");
    for (double a : cycle.grade_angle) {
        if (a != 0.0) throw ValidationError("gradient synthesis needs a flat input cycle");
    }
    if (spec.smoothing_window < 1) throw ValidationError("smoothing window must be at least one sample");

    const std::size_t n = cycle.size();
    std::vector<double> grade(n, 0.0);
    double position = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double start = 0.0;
        for (const auto& seg : spec.segments) {
            if (position >= start && position < start + seg.length_m) {
                grade[k] = seg.grade;
                break;
            }
            start += seg.length_m;
        }
        position += cycle.speed[k] * cycle.dt;
    }

    if (spec.smoothing_window > 1) {
        const auto half = static_cast<std::ptrdiff_t>(spec.smoothing_window / 2);
        std::vector<double> smooth(n, 0.0);
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - half);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, k + half);
            double sum = 0.0;
            for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += grade[j];
            smooth[k] = sum / static_cast<double>(hi - lo + 1);
        }
        grade = std::move(smooth);
    }

    std::vector<double> speed = cycle.speed;
    if (speed_adjust) {
        for (std::size_t k = 0; k < n; ++k) speed[k] = attenuate_climb_speed(speed[k], grade[k]);
    }

    // Rescale descents so the net altitude change vanishes.
    auto rise = [&](double scale_down) {
        double h = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double g = grade[k] < 0.0 ? scale_down * grade[k] : grade[k];
            h += speed[k] * std::sin(std::atan(g)) * cycle.dt;
        }
        return h;
    };
    double up = 0.0, down = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dh = speed[k] * std::sin(std::atan(grade[k])) * cycle.dt;
        (dh > 0.0 ? up : down) += dh;
    }
    if (up > 0.0 || down < 0.0) {
        if (!(up > 0.0) || !(down < 0.0)) throw ValidationError("gradient profile climbs without descending");
        double lo = 0.0, hi = 1.0;
        while (rise(hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e3) throw ValidationError("cannot balance gradient profile");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (rise(mid) > 0.0 ? lo : hi) = mid;
        }
        for (double& g : grade) {
            if (g < 0.0) g *= 0.5 * (lo + hi);
        }
    }
    std::vector<double> angle(n);
    for (std::size_t k = 0; k < n; ++k) angle[k] = std::atan(grade[k]);
    return make_cycle(std::move(speed), std::move(angle), cycle.dt, cycle.time.front(),
                      cycle.label + (length > 0.0 ? "-hilly" : ""));
}

std::vector<GradientSegment> parse_gradient_segments(const std::string& text) {
    std::vector<GradientSegment> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ParseError("gradient segment '" + item + "' is not length:grade");
        out.push_back({parse_number(trim(item.substr(0, colon)), 0), parse_number(trim(item.substr(colon + 1)), 0)});
    }
    return out;
}

}  // namespace mmco
