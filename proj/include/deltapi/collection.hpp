#pragma once

#include "deltapi/basis.hpp"
#include "deltapi/dynamics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deltapi {

/**
 * Exploratory input: amplitude * mean of n seeded sinusoids plus uniform noise.
 *
 * Noise knots are spaced noise_hold seconds apart with values uniform in
 * [-1, 1]; between knots the noise is interpolated linearly, so the signal is
 * continuous and does not depend on the integration step.
 */
struct BehaviorSignalSpec {
    double amplitude = 0.0;
    int n_sinusoids = 10;
    double freq_low = 0.1;   // rad/s
    double freq_high = 10.0; // rad/s
    double noise_amplitude = 0.0;
    double noise_hold = 0.01; // s
    std::uint64_t seed = 0;

    void validate() const;
};

BehaviorSignalSpec default_control_signal(std::uint64_t seed);
BehaviorSignalSpec default_disturbance_signal(std::uint64_t seed);

class BehaviorSignal {
public:
    explicit BehaviorSignal(const BehaviorSignalSpec& spec);

    double operator()(double t) const;

private:
    BehaviorSignalSpec spec_;
    std::vector<double> frequencies_;
    std::vector<double> phases_;
    std::uint64_t noise_seed_;

    double knot(std::int64_t k) const;
};

/// Convenience one-shot evaluation; prefer BehaviorSignal for repeated use.
double behavior_signal(double t, const BehaviorSignalSpec& spec);

/**
 * Quadrature weights for int_0^{(points-1) h} exp(-alpha tau) value(tau) d tau.
 * The value is interpolated linearly between samples (trapezoid rule) while the
 * discount factor is integrated exactly on each step, so constant values are
 * integrated exactly for any alpha.
 */
std::vector<double> discounted_trapezoid_weights(std::size_t points, double alpha, double h);

/// Discounted integral of sampled values over a uniform grid starting at t.
double discounted_quadrature(std::span<const double> values, double alpha, double h);

/// Elementwise variant for vectors or matrices sampled on the grid.
template <typename EigenType>
EigenType discounted_quadrature(std::span<const EigenType> values, double alpha, double h) {
    const auto w = discounted_trapezoid_weights(values.size(), alpha, h);
    EigenType acc = EigenType::Zero(values.front().rows(), values.front().cols());
    for (std::size_t k = 0; k < values.size(); ++k) acc += w[k] * values[k];
    return acc;
}

/// Discounted-integral sufficient statistics of one sampling window [t, t+T].
struct WindowStatistics {
    double start_time = 0.0;
    double duration = 0.0;
    Vector rho_start;       // rho(X(t))
    Vector rho_end;         // rho(X(t+T))
    double I_Q = 0.0;       // int e^{-a(tau-t)} X'Q_T X
    Matrix I_phi_u;         // L2 x m, column j = int e phi(X) u_j
    Matrix I_phi_phi;       // L2 x L2
    Matrix I_vphi_d;        // L3 x q, column k = int e varphi(X) d_k
    Matrix I_vphi_vphi;     // L3 x L3
    Trajectory samples;     // fine grid, only kept in raw mode
};

WindowStatistics compute_window_statistics(const BasisSet& basis, std::span<const TrajectorySample> samples,
                                           double alpha, const Matrix& Q_T);

/// block-diag(Q, 0) acting on X = [e_d; r].
Matrix tracking_weight(const Matrix& Q);

struct DatasetFingerprint {
    double sample_period = 0.0; // T
    double alpha = 0.0;
    int substeps = 0;           // M
    Matrix Q_T;
    std::uint64_t seed = 0;
    int restarts = 1;
    std::string basis_hash;
};

struct WindowDataset {
    DatasetFingerprint fingerprint;
    int augmented_dim = 0;
    int control_dim = 0;
    int disturbance_dim = 0;
    BasisSet basis;
    std::vector<WindowStatistics> windows;
    std::string config_echo; // JSON text, may be empty

    int unknowns() const {
        return basis.critic_size() + control_dim * basis.actor_u_size() + disturbance_dim * basis.actor_d_size();
    }
};

struct CollectionConfig {
    double sample_period = 0.1;  // T
    int windows = 1000;          // N
    int substeps = 10;           // M
    double alpha = 0.1;
    Matrix Q;                    // n x n, embedded into Q_T
    Vector initial_state;        // X0
    std::vector<BehaviorSignalSpec> control_signals;
    std::vector<BehaviorSignalSpec> disturbance_signals;
    std::uint64_t seed = 0;
    int restarts = 1;            // >1: split N windows over independent episodes
    double restart_half_width = 1.0;
    bool keep_raw = false;
};

struct CollectionResult {
    WindowDataset dataset;
    Trajectory trace; // every fine-grid sample of every episode, in order
};

/// Rejects N <= L1 + m L2 + q L3 with RankConditionViolation.
void check_rank_condition(int windows, const BasisSet& basis, int control_dim, int disturbance_dim);

CollectionResult collect_dataset(const SystemModel& model, const BasisSet& basis, const CollectionConfig& cfg);

void save_dataset(const std::string& path, const WindowDataset& dataset);
WindowDataset load_dataset(const std::string& path);

}  // namespace deltapi
