#pragma once

// Driving cycles: uniformly sampled speed / acceleration / grade trajectories.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmco {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DriveCycle {
    std::vector<double> time;         // s, time[k] = time[0] + k*dt
    std::vector<double> speed;        // m/s
    std::vector<double> accel;        // m/s^2, forward difference, last sample 0
    std::vector<double> grade_angle;  // rad
    double dt = 1.0;
    double distance = 0.0;  // m, sum of speed[k]*dt over all samples
    std::string label;

    std::size_t size() const { return speed.size(); }
    double duration() const { return time.empty() ? 0.0 : time.back() - time.front(); }
    double max_speed() const;
};

// One piece of a synthetic altitude profile: `grade` is rise/run.
struct GradientSegment {
    double length_m = 0.0;
    double grade = 0.0;
};

struct GradientProfileSpec {
    std::vector<GradientSegment> segments;
    int smoothing_window = 1;  // samples, centered box filter
};

// Builds a cycle from speed and grade samples, deriving accel and distance.
// Throws ValidationError on negative or non-finite speeds, dt <= 0 or fewer
// than two samples.
DriveCycle make_cycle(std::vector<double> speed, std::vector<double> grade_angle, double dt,
                      double t0 = 0.0, std::string label = {});

// CSV with header `t_s,v_mps,grade` (grade as rise/run) or `t_s,v_kmh,alt_m`,
// linearly resampled onto a uniform grid of step dt_target.
DriveCycle load_cycle(const std::string& path, double dt_target = 1.0);
DriveCycle parse_cycle(std::istream& in, double dt_target = 1.0, std::string label = {});

// Writes the `t_s,v_mps,grade` variant with full double precision.
void write_cycle(const DriveCycle& cycle, std::ostream& out);
void save_cycle(const DriveCycle& cycle, const std::string& path);

DriveCycle cap_speed(const DriveCycle& cycle, double v_cap);

// Speed multiplier applied on climbs when speed adjustment is requested:
// v / (1 + 4*grade) for grade > 0, not below 2 m/s while moving.
double attenuate_climb_speed(double v, double grade);

// Overlays a zero-net-climb gradient profile (by distance travelled) on a flat
// cycle. Descents are rescaled after smoothing/speed adjustment so that the
// net altitude change is zero.
DriveCycle synthesize_gradient(const DriveCycle& cycle, const GradientProfileSpec& spec, bool speed_adjust);

// Sum of speed*sin(grade)*dt, m.
double net_altitude_change(const DriveCycle& cycle);

// Parses "250:0.06, 250:-0.06" into segments.
std::vector<GradientSegment> parse_gradient_segments(const std::string& text);

}  // namespace mmco
