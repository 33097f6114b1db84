#include "deltapi/dynamics.hpp"

#include "deltapi/errors.hpp"

#include <cmath>

namespace deltapi {

namespace {

void require_dim(const Vector& v, Eigen::Index expected, const char* what) {
    if (v.size() != expected) {
        throw ContractViolation(std::string(what) + ": expected dimension " + std::to_string(expected) +
                                ", got " + std::to_string(v.size()));
    }
}

}  // namespace

void SystemModel::validate() const {
    if (state_dim <= 0 || control_dim <= 0 || disturbance_dim <= 0) {
        throw ContractViolation("system model dimensions must be positive");
    }
    if (!drift || !input_matrix || !disturbance_matrix || !reference_generator) {
        throw ContractViolation("system model '" + name + "' is missing a map");
    }
    const Vector zero = Vector::Zero(state_dim);
    const Vector f0 = drift(zero);
    const Vector h0 = reference_generator(zero);
    const Matrix g0 = input_matrix(zero);
    const Matrix k0 = disturbance_matrix(zero);
    require_dim(f0, state_dim, "drift");
    require_dim(h0, state_dim, "reference generator");
    if (g0.rows() != state_dim || g0.cols() != control_dim) {
        throw ContractViolation("input matrix has wrong shape");
    }
    if (k0.rows() != state_dim || k0.cols() != disturbance_dim) {
        throw ContractViolation("disturbance matrix has wrong shape");
    }
    if (f0.cwiseAbs().maxCoeff() != 0.0) throw ContractViolation("drift must vanish at the origin");
    if (h0.cwiseAbs().maxCoeff() != 0.0) throw ContractViolation("reference generator must vanish at the origin");
}

bool SystemModel::finite_at(const Vector& augmented_state) const {
    const Vector x = augmented_state.head(state_dim) + augmented_state.tail(state_dim);
    const Vector r = augmented_state.tail(state_dim);
    return drift(x).allFinite() && input_matrix(x).allFinite() && disturbance_matrix(x).allFinite() &&
           reference_generator(r).allFinite();
}

SystemModel benchmark_model() {
    SystemModel m;
    m.name = "benchmark";
    m.state_dim = 2;
    m.control_dim = 1;
    m.disturbance_dim = 1;
    m.drift = [](const Vector& x) {
        Vector dx(2);
        dx << x(1), -x(0) * x(0) * x(0) - 0.5 * x(1);
        return dx;
    };
    m.input_matrix = [](const Vector&) {
        Matrix g(2, 1);
        g << 0.0, 1.0;
        return g;
    };
    m.disturbance_matrix = [](const Vector&) {
        Matrix k(2, 1);
        k << 0.0, 1.0;
        return k;
    };
    m.reference_generator = [](const Vector& r) {
        Vector dr(2);
        dr << r(1), -2.25 * r(0);
        return dr;
    };
    return m;
}

SystemModel scalar_lq_model() {
    SystemModel m;
    m.name = "scalar_lq";
    m.state_dim = 1;
    m.control_dim = 1;
    m.disturbance_dim = 1;
    m.drift = [](const Vector& x) { return Vector(-x); };
    m.input_matrix = [](const Vector&) { return Matrix::Ones(1, 1); };
    m.disturbance_matrix = [](const Vector&) { return Matrix::Ones(1, 1); };
    m.reference_generator = [](const Vector& r) { return Vector::Zero(r.size()).eval(); };
    return m;
}

SystemModel model_preset(const std::string& name) {
    if (name == "benchmark") return benchmark_model();
    if (name == "scalar_lq") return scalar_lq_model();
    throw ContractViolation("unknown system preset '" + name + "'");
}

Vector AugmentedState::stacked() const {
    if (tracking_error.size() != reference.size()) {
        throw ContractViolation("tracking error and reference differ in dimension");
    }
    Vector x(tracking_error.size() * 2);
    x << tracking_error, reference;
    return x;
}

AugmentedState AugmentedState::from_stacked(const Vector& x, int state_dim) {
    require_dim(x, 2 * state_dim, "augmented state");
    return {x.head(state_dim), x.tail(state_dim)};
}

AugmentedState AugmentedState::from_plant(const Vector& x, const Vector& r) {
    require_dim(r, x.size(), "reference");
    return {x - r, r};
}

void SimulationGrid::validate() const {
    if (!(step > 0.0)) throw ContractViolation("simulation step must be positive");
    if (!(t_end > t0)) throw ContractViolation("simulation horizon must be positive");
    const double ratio = (t_end - t0) / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        throw ContractViolation("simulation horizon is not an integer number of steps");
    }
}

std::size_t SimulationGrid::steps() const {
    validate();
    return static_cast<std::size_t>(std::llround((t_end - t0) / step));
}

Vector augmented_drift(const SystemModel& model, const Vector& x) {
    const int n = model.state_dim;
    require_dim(x, 2 * n, "augmented state");
    const Vector r = x.tail(n);
    const Vector plant = x.head(n) + r;
    const Vector hd = model.reference_generator(r);
    Vector out(2 * n);
    out << model.drift(plant) - hd, hd;
    return out;
}

Matrix augmented_input_matrix(const SystemModel& model, const Vector& x) {
    const int n = model.state_dim;
    require_dim(x, 2 * n, "augmented state");
    Matrix out = Matrix::Zero(2 * n, model.control_dim);
    out.topRows(n) = model.input_matrix(x.head(n) + x.tail(n));
    return out;
}

Matrix augmented_disturbance_matrix(const SystemModel& model, const Vector& x) {
    const int n = model.state_dim;
    require_dim(x, 2 * n, "augmented state");
    Matrix out = Matrix::Zero(2 * n, model.disturbance_dim);
    out.topRows(n) = model.disturbance_matrix(x.head(n) + x.tail(n));
    return out;
}

Vector augmented_derivative(const SystemModel& model, const Vector& x, const Vector& u, const Vector& d) {
    const int n = model.state_dim;
    require_dim(x, 2 * n, "augmented state");
    require_dim(u, model.control_dim, "control");
    require_dim(d, model.disturbance_dim, "disturbance");
    const Vector r = x.tail(n);
    const Vector plant = x.head(n) + r;
    const Vector hd = model.reference_generator(r);
    Vector out(2 * n);
    out.head(n) = model.drift(plant) - hd + model.input_matrix(plant) * u + model.disturbance_matrix(plant) * d;
    out.tail(n) = hd;
    return out;
}

Vector rk4_step(const Derivative& derivative, double t, const Vector& x, double h) {
    if (!(h > 0.0)) throw ContractViolation("rk4 step must be positive");
    auto eval = [&](double ts, const Vector& xs) {
        Vector k = derivative(ts, xs);
        if (k.size() != x.size()) throw ContractViolation("derivative returned wrong dimension");
        if (!k.allFinite()) throw IntegrationFailure("non-finite derivative", ts);
        return k;
    };
    const Vector k1 = eval(t, x);
    const Vector k2 = eval(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = eval(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = eval(t + h, x + h * k3);
    Vector next = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4);
    if (!next.allFinite()) throw IntegrationFailure("non-finite state", t + h);
    return next;
}

Trajectory simulate_closed_loop(const SystemModel& model, const Vector& x0, const InputLaw& control,
                                const InputLaw& disturbance, const SimulationGrid& grid) {
    require_dim(x0, model.augmented_dim(), "initial state");
    const std::size_t steps = grid.steps();
    const Derivative field = [&](double t, const Vector& x) {
        return augmented_derivative(model, x, control(t, x), disturbance(t, x));
    };

    Trajectory out;
    out.reserve(steps + 1);
    Vector x = x0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = grid.time_at(k);
        out.push_back({t, x, control(t, x), disturbance(t, x)});
        if (k < steps) x = rk4_step(field, t, x, grid.step);
    }
    return out;
}

Trajectory simulate_trajectory(const SystemModel& model, const Vector& x0, const Signal& control,
                               const Signal& disturbance, const SimulationGrid& grid) {
    return simulate_closed_loop(
        model, x0, [&](double t, const Vector&) { return control(t); },
        [&](double t, const Vector&) { return disturbance(t); }, grid);
}

}  // namespace deltapi
