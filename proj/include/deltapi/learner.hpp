#pragma once

#include "deltapi/basis.hpp"
#include "deltapi/collection.hpp"
#include "deltapi/dynamics.hpp"

#include <cstdint>
#include <vector>

namespace deltapi {

/// Critic weights W_c (L1), control actor W_a (L2 x m), disturbance actor W_d (L3 x q).
struct WeightSet {
    Vector critic;
    Matrix actor_u;
    Matrix actor_d;

    static WeightSet zeros(const BasisSet& basis, int control_dim, int disturbance_dim);
    /// [W_c; W_a(:,1); ...; W_a(:,m); W_d(:,1); ...; W_d(:,q)].
    Vector stacked() const;
    static WeightSet unstack(const Vector& w, const BasisSet& basis, int control_dim, int disturbance_dim);
    bool all_finite() const;
};

struct TrainConfig {
    double delta = 1.0;   // damped Newton step in (0, 1]
    double gamma = 1.0;   // attenuation level
    double alpha = 0.0;   // discount rate, 1/s
    Vector R;             // diagonal of the control weight
    Matrix Q;             // tracking-error weight, n x n
    double stop_tol = 1e-7;
    int max_iters = 500;
    double ridge = 0.0;

    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    double delta_w_norm = 0.0;
    double ls_residual = 0.0;
    double cond_estimate = 0.0; // of the normal matrix A'A
};

struct TrainResult {
    WeightSet weights;
    std::vector<IterationRecord> trace;
    std::vector<WeightSet> history; // iterate after each solve
    bool converged = false;

    int iterations() const { return static_cast<int>(trace.size()); }
};

/// Regressor row for one window given the policies of the previous iterate.
Vector assemble_regressor(const WindowStatistics& window, const WeightSet& prev, const TrainConfig& cfg);

/// Right-hand side of the damped off-policy Bellman equation for one window.
double assemble_target(const WindowStatistics& window, const WeightSet& prev, const TrainConfig& cfg);

struct LeastSquaresResult {
    Vector solution;
    double residual_norm = 0.0;
    double cond_estimate = 0.0; // of A'A
};

/// Singular-value ratio below which an unregularized regressor is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-12;

/**
 * min |A w - b|^2 + ridge |w|^2 by column-pivoted Householder QR.
 * Throws SingularRegressor when ridge == 0 and sigma_min / sigma_max < kRankTolerance,
 * and DataError on non-finite input.
 */
LeastSquaresResult solve_least_squares(const Matrix& A, const Vector& b, double ridge);

/// One policy-evaluation/improvement step on the stored windows.
WeightSet solve_weights(const WindowDataset& dataset, const WeightSet& prev, const TrainConfig& cfg,
                        IterationRecord* record = nullptr);

/// Throws FingerprintMismatch when the dataset was collected under a different alpha or Q.
void check_dataset_matches(const WindowDataset& dataset, const TrainConfig& cfg);

/// Off-policy damped policy iteration from W = 0 until |dW| < stop_tol or max_iters.
TrainResult offpolicy_train(const WindowDataset& dataset, const TrainConfig& cfg);

/// How the model-based variant regenerates its data each iteration.
struct EpisodeSpec {
    int initial_states = 20;
    int windows_per_state = 10;
    double sample_period = 0.1;
    int substeps = 10;
    Vector box_low;   // initial states drawn uniformly in [box_low, box_high]
    Vector box_high;
    std::uint64_t seed = 0;
    double divergence_bound = 1e3; // abort when |X|_inf exceeds this
};

/// Thrown when an intermediate policy drives the simulation out of bounds.
class IterationAborted : public std::runtime_error {
public:
    IterationAborted(const std::string& what, int iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/**
 * On-policy damped policy iteration. Only the critic is learned from data;
 * policies follow from its gradient through the model's G and K. The returned
 * actor weights are least-squares projections of the final gradient policies
 * onto the actor bases.
 */
TrainResult onpolicy_train(const SystemModel& model, const BasisSet& basis, const TrainConfig& cfg,
                           const EpisodeSpec& episodes);

/// u = -1/2 R^{-1} G(X)' (d rho/dX)' W_c.
Vector critic_control(const SystemModel& model, const BasisSet& basis, const Vector& critic, const TrainConfig& cfg,
                      const Vector& x);
/// d = 1/(2 gamma^2) K(X)' (d rho/dX)' W_c.
Vector critic_disturbance(const SystemModel& model, const BasisSet& basis, const Vector& critic,
                          const TrainConfig& cfg, const Vector& x);

/// Actor read-out u = W_a' phi(X), d = W_d' varphi(X).
class PolicyPair {
public:
    PolicyPair(WeightSet weights, BasisSet basis) : weights_(std::move(weights)), basis_(std::move(basis)) {}

    Vector control(const Vector& x) const;
    Vector disturbance(const Vector& x) const;

private:
    WeightSet weights_;
    BasisSet basis_;
};

PolicyPair extract_policies(const WeightSet& weights, const BasisSet& basis);

/// Tracking HJI residual of V = W_c' rho at X; zero for an exact game value.
double hji_residual(const SystemModel& model, const Vector& critic, const BasisSet& basis, const TrainConfig& cfg,
                    const Vector& x);

}  // namespace deltapi
