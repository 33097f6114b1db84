#pragma once

#include "deltapi/dynamics.hpp"
#include "deltapi/learner.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace deltapi {

/// Feedback law evaluated on the augmented state X = [x - r; r].
using ControlPolicy = std::function<Vector(const Vector& augmented_state)>;

/// Exogenous disturbance A e^{-beta t} cos(omega t).
struct DecayingCosine {
    double amplitude = 1.55;
    double decay = 0.08;
    double frequency = 0.3;

    double operator()(double t) const;
};

struct EvaluationSettings {
    double alpha = 0.0;
    Matrix Q;           // n x n, weights e_d
    Vector R;           // diagonal control weight
    double tail_start = 20.0;
};

/// Disturbance energies at or below this are treated as zero when forming the attenuation ratio.
inline constexpr double kMinDisturbanceEnergy = 1e-12;

struct EvaluationReport {
    EvaluationSettings settings;
    std::vector<double> t;
    std::vector<Vector> x, r, e, u, d;

    std::vector<double> cost_numerator;     // int_0^t e^{-a tau}(e'Qe + u'Ru)
    std::vector<double> disturbance_energy; // int_0^t e^{-a tau} d'd
    std::vector<std::optional<double>> ratio;
    double tail_max_error = 0.0;            // max |e_d|_inf over t >= tail_start

    double final_cost_numerator() const { return cost_numerator.empty() ? 0.0 : cost_numerator.back(); }
    double final_disturbance_energy() const { return disturbance_energy.empty() ? 0.0 : disturbance_energy.back(); }
    std::optional<double> final_ratio() const { return ratio.empty() ? std::nullopt : ratio.back(); }
};

/// Cumulative composite trapezoid of e^{-alpha t} * values on a uniform grid; out[0] = 0.
std::vector<double> cumulative_discounted_trapezoid(const std::vector<double>& t, const std::vector<double>& values,
                                                    double alpha);

/**
 * Runs the plant and the command generator jointly from (x0, r0) on `grid`.
 * The policy sees X = [x - r; r] at every integration stage; the disturbance
 * is the given exogenous signal.
 */
EvaluationReport closed_loop_run(const SystemModel& model, const ControlPolicy& policy, const Signal& disturbance,
                                 const Vector& x0, const Vector& r0, const SimulationGrid& grid,
                                 const EvaluationSettings& settings);

/// Cumulative ratio of discounted output energy to discounted disturbance energy;
/// empty where the disturbance energy is not above kMinDisturbanceEnergy.
std::vector<std::optional<double>> attenuation_ratio(const EvaluationReport& report);

/// Discounted game cost int_0^T e^{-a t}(X'Q_T X + u'Ru - gamma^2 d'd) over the report horizon.
double performance_index(const EvaluationReport& report, const TrainConfig& cfg);

}  // namespace deltapi
