#include "mmco/motor.hpp"

#include "mmco/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmco {

namespace {

// Index i with grid[i] <= x < grid[i+1], clamped to [0, size-2].
std::size_t bracket(const std::vector<double>& grid, double x) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const auto i = static_cast<std::ptrdiff_t>(it - grid.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(grid.size()) - 2));
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace

double MotorModel::torque_limit(double omega) const {
    if (omega <= 0.0) return t_max_ref;
    return std::clamp(power_limit(omega) / omega, 0.0, t_max_ref);
}

bool MotorModel::in_envelope(double omega, double torque, double tol) const {
    if (omega < -tol || omega > omega_max * (1.0 + tol) + tol) return false;
    return std::abs(torque) <= torque_limit(omega) * (1.0 + tol) + tol;
}

double MotorModel::map_loss(double omega, double torque, bool* clamped) const {
    bool out = !in_envelope(omega, torque, 1e-9);
    const double w = std::clamp(omega, omega_grid.front(), omega_grid.back());
    const double t = std::clamp(torque, torque_grid.front(), torque_grid.back());
    if (w != omega || t != torque) out = true;
    if (clamped) *clamped = out;
    const std::size_t i = bracket(omega_grid, w);
    const std::size_t j = bracket(torque_grid, t);
    const double fw = (w - omega_grid[i]) / (omega_grid[i + 1] - omega_grid[i]);
    const double ft = (t - torque_grid[j]) / (torque_grid[j + 1] - torque_grid[j]);
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    return (1 - fw) * (1 - ft) * loss_map(ii, jj) + fw * (1 - ft) * loss_map(ii + 1, jj) +
           (1 - fw) * ft * loss_map(ii, jj + 1) + fw * ft * loss_map(ii + 1, jj + 1);
}

double MotorModel::map_efficiency(double omega, double torque) const {
    const double p = omega * torque;
    const double loss = map_loss(omega, torque);
    if (p >= 0.0) return p + loss > 0.0 ? p / (p + loss) : 0.0;
    // Generating: electrical output over mechanical input.
    return -p > 0.0 ? std::max(0.0, (-p - loss) / -p) : 0.0;
}

const LossCoefficients& MotorModel::lookup(double p_em) const {
    if (coeffs.empty()) throw FitError("motor loss coefficients have not been fitted");
    const double step = levels.size() > 1 ? levels[1] - levels[0] : 1.0;
    const double pos = std::round((p_em - levels.front()) / step);
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(levels.size() - 1)));
    return coeffs[idx];
}

double MotorModel::fitted_loss(double p_em, double omega) const {
    const LossCoefficients& c = lookup(p_em);
    return c.a1 + c.a2 * omega + c.a3 * omega * omega;
}

MotorModel synthesize_motor_map(const MotorMapSpec& spec) {
    const LossShape& sh = spec.shape;
    if (sh.c_cu < 0.0 || sh.c_fr < 0.0 || sh.c_fe < 0.0 || sh.c_st < 0.0) {
        throw ValidationError("loss shape coefficients must be non-negative");
    }
    if (!(spec.p_max_ref > 0.0) || !(spec.t_max_ref > 0.0) || !(spec.omega_max > 0.0)) {
        throw ValidationError("motor reference power, torque and speed must be positive");
    }
    const double omega_base = spec.p_max_ref / spec.t_max_ref;
    if (!(omega_base < spec.omega_max)) throw ValidationError("motor base speed must lie below omega_max");
    if (!(spec.power_frac_at_omega_max > 0.0 && spec.power_frac_at_omega_max <= 1.0)) {
        throw ValidationError("power_frac_at_omega_max must lie in (0, 1]");
    }
    if (spec.omega_points < 2 || spec.torque_points < 2) throw ValidationError("motor map grid is too small");

    MotorModel m;
    m.shape = spec.shape;
    m.p_max_ref = spec.p_max_ref;
    m.t_max_ref = spec.t_max_ref;
    m.omega_max = spec.omega_max;
    m.km1_ref = (spec.power_frac_at_omega_max - 1.0) * spec.p_max_ref / (spec.omega_max - omega_base);
    m.km2_ref = spec.p_max_ref - m.km1_ref * omega_base;
    m.omega_grid = linspace(0.0, spec.omega_max, spec.omega_points);
    m.torque_grid = linspace(-spec.t_max_ref, spec.t_max_ref, spec.torque_points);
    m.loss_map.resize(spec.omega_points, spec.torque_points);
    for (int i = 0; i < spec.omega_points; ++i) {
        for (int j = 0; j < spec.torque_points; ++j) {
            const double w = m.omega_grid[static_cast<std::size_t>(i)];
            const double t = m.torque_grid[static_cast<std::size_t>(j)];
            const double loss = spec.shape.loss(w, t);
            if (m.in_envelope(w, t) && !(loss >= 0.0)) {
                throw ValidationError("loss shape is negative at omega=" + std::to_string(w) +
                                      " rad/s, T=" + std::to_string(t) + " Nm");
            }
            m.loss_map(i, j) = loss;
        }
    }
    return m;
}

MotorModel fit_loss_coefficients(MotorModel model, int level_count) {
    if (model.loss_map.size() == 0) throw FitError("motor loss map is empty");
    if (level_count < 3 || level_count % 2 == 0) throw FitError("level count must be odd and at least 3");

    model.levels = linspace(-model.p_max_ref, model.p_max_ref, level_count);
    model.coeffs.assign(model.levels.size(), LossCoefficients{});
    model.excluded_levels.clear();
    std::vector<bool> ok(model.levels.size(), false);

    for (std::size_t l = 0; l < model.levels.size(); ++l) {
        const double p = model.levels[l];
        std::vector<double> w, y;
        for (double omega : model.omega_grid) {
            if (omega <= 0.0) continue;
            const double torque = p / omega;
            if (!model.in_envelope(omega, torque, 1e-12)) continue;
            w.push_back(omega / model.omega_max);
            y.push_back(model.map_loss(omega, torque));
        }
        if (w.size() < 3) {
            model.excluded_levels.push_back(static_cast<int>(l));
            continue;
        }
        const auto n = static_cast<Eigen::Index>(w.size());
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd Y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = w[static_cast<std::size_t>(i)];
            X(i, 2) = w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
            Y(i) = y[static_cast<std::size_t>(i)];
        }
        Eigen::Vector3d beta = X.colPivHouseholderQr().solve(Y);
        if (beta(2) < 0.0) {
            // The quadratic term is at its bound: refit the affine model.
            const Eigen::Vector2d b2 = X.leftCols(2).colPivHouseholderQr().solve(Y);
            beta << b2(0), b2(1), 0.0;
        }
        model.coeffs[l] = {beta(0), beta(1) / model.omega_max, beta(2) / (model.omega_max * model.omega_max)};
        ok[l] = true;
    }

    if (10 * model.excluded_levels.size() > model.levels.size()) {
        throw FitError(std::to_string(model.excluded_levels.size()) + " of " + std::to_string(model.levels.size()) +
                       " power levels have fewer than 3 feasible contour points");
    }
    for (int l : model.excluded_levels) {
        // Borrow the nearest fitted level.
        std::size_t best = 0;
        double dist = 1e300;
        for (std::size_t k = 0; k < ok.size(); ++k) {
            const double d = std::abs(model.levels[k] - model.levels[static_cast<std::size_t>(l)]);
            if (ok[k] && d < dist) {
                dist = d;
                best = k;
            }
        }
        model.coeffs[static_cast<std::size_t>(l)] = model.coeffs[best];
    }

    double sse = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < model.omega_grid.size(); ++i) {
        const double omega = model.omega_grid[i];
        if (omega <= 0.0) continue;
        for (std::size_t j = 0; j < model.torque_grid.size(); ++j) {
            const double torque = model.torque_grid[j];
            if (!model.in_envelope(omega, torque)) continue;
            const double actual = model.loss_map(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double pred = model.fitted_loss(omega * torque, omega);
            sse += (pred - actual) * (pred - actual);
            sum += actual;
            ++count;
        }
    }
    model.fit_rmse_norm = count > 0 && sum > 0.0 ? std::sqrt(sse / count) / (sum / count) : 0.0;
    return model;
}

LossCoefficients ScaledMotor::coefficients(double p_em) const {
    const LossCoefficients& c = ref->lookup(p_em / scale);
    return {c.a1 * scale, c.a2 * scale, c.a3 * scale};
}

double ScaledMotor::fitted_loss(double p_em, double omega) const {
    const LossCoefficients c = coefficients(p_em);
    return c.a1 + c.a2 * omega + c.a3 * omega * omega;
}

double ScaledMotor::map_loss(double omega, double torque, bool* clamped) const {
    return scale * ref->map_loss(omega, torque / scale, clamped);
}

double ScaledMotor::torque_limit(double omega) const { return scale * ref->torque_limit(omega); }

ScaledMotor scale_motor(std::shared_ptr<const MotorModel> model, double p_em_max) {
    if (!model) throw ValidationError("motor model is missing");
    if (!(p_em_max > 0.0)) throw ValidationError("motor size must be positive");
    ScaledMotor s;
    s.scale = p_em_max / model->p_max_ref;
    s.p_em_max = p_em_max;
    s.t_max = model->t_max_ref * s.scale;
    s.km1 = model->km1_ref * s.scale;
    s.km2 = model->km2_ref * s.scale;
    s.omega_max = model->omega_max;
    s.ref = std::move(model);
    return s;
}

ScaledMotor scale_motor(const ScaledMotor& motor, double p_em_max) { return scale_motor(motor.ref, p_em_max); }

}  // namespace mmco
