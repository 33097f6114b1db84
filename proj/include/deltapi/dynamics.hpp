#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace deltapi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Control-affine plant  x' = f(x) + g(x) u + k(x) d  together with the
 * command generator  r' = h_d(r)  that produces the reference to track.
 */
struct SystemModel {
    std::string name;
    int state_dim = 0;
    int control_dim = 0;
    int disturbance_dim = 0;
    std::function<Vector(const Vector&)> drift;
    std::function<Matrix(const Vector&)> input_matrix;
    std::function<Matrix(const Vector&)> disturbance_matrix;
    std::function<Vector(const Vector&)> reference_generator;

    int augmented_dim() const { return 2 * state_dim; }

    /// Checks dimensions, f(0) = 0 and h_d(0) = 0. Throws ContractViolation.
    void validate() const;

    /// True when f, g, k, h_d are finite at X (augmented coordinates).
    bool finite_at(const Vector& augmented_state) const;
};

/// Second-order nonlinear oscillator tracking a 1.5 rad/s sinusoid (two states, one input, one disturbance).
SystemModel benchmark_model();

/// x' = -x + u + d with a frozen reference (h_d = 0); used for the scalar LQ game oracle.
SystemModel scalar_lq_model();

/// Looks up a built-in model by name ("benchmark", "scalar_lq").
SystemModel model_preset(const std::string& name);

/// Augmented state X = [e_d; r] with e_d = x - r.
struct AugmentedState {
    Vector tracking_error;
    Vector reference;

    Vector stacked() const;
    static AugmentedState from_stacked(const Vector& x, int state_dim);
    static AugmentedState from_plant(const Vector& x, const Vector& r);
};

struct SimulationGrid {
    double t0 = 0.0;
    double t_end = 0.0;
    double step = 0.0;

    void validate() const;
    /// Number of fine steps; requires (t_end - t0) / step to be an integer within 1e-9.
    std::size_t steps() const;
    double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * step; }
};

/// F(X) = [f(e_d + r) - h_d(r); h_d(r)].
Vector augmented_drift(const SystemModel& model, const Vector& x);
/// G(X) = [g(e_d + r); 0].
Matrix augmented_input_matrix(const SystemModel& model, const Vector& x);
/// K(X) = [k(e_d + r); 0].
Matrix augmented_disturbance_matrix(const SystemModel& model, const Vector& x);

/// X' = F(X) + G(X) u + K(X) d.
Vector augmented_derivative(const SystemModel& model, const Vector& x, const Vector& u, const Vector& d);

using Derivative = std::function<Vector(double t, const Vector& x)>;

/// One classical fourth-order Runge-Kutta step. Throws IntegrationFailure on a non-finite stage.
Vector rk4_step(const Derivative& derivative, double t, const Vector& x, double h);

/// Exogenous signal of time.
using Signal = std::function<Vector(double t)>;
/// Input that may depend on time and the current augmented state.
using InputLaw = std::function<Vector(double t, const Vector& x)>;

struct TrajectorySample {
    double t = 0.0;
    Vector state;
    Vector control;
    Vector disturbance;
};

using Trajectory = std::vector<TrajectorySample>;

/**
 * Integrates the augmented system on a fixed grid. Inputs are evaluated at
 * every Runge-Kutta stage; the recorded u and d are those at the grid points.
 * Returns steps() + 1 samples including the initial one.
 */
Trajectory simulate_closed_loop(const SystemModel& model, const Vector& x0, const InputLaw& control,
                                const InputLaw& disturbance, const SimulationGrid& grid);

/// Open-loop variant with time-only input signals.
Trajectory simulate_trajectory(const SystemModel& model, const Vector& x0, const Signal& control,
                               const Signal& disturbance, const SimulationGrid& grid);

}  // namespace deltapi
