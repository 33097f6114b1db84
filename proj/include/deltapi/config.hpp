#pragma once

#include "deltapi/basis.hpp"
#include "deltapi/collection.hpp"
#include "deltapi/dynamics.hpp"
#include "deltapi/evaluation.hpp"
#include "deltapi/learner.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deltapi {

struct SignalShape {
    double amplitude = 0.0;
    int n_sinusoids = 10;
    double freq_low = 0.1;
    double freq_high = 10.0;
    double noise_amplitude = 0.0;
    double noise_hold = 0.01;
};

struct DisturbanceScenario {
    std::string preset = "decaying_cosine"; // or "none"
    DecayingCosine shape;
};

/**
 * Everything one collect/train/evaluate run needs.
 *
 * Physics parameters (delta, gamma, alpha, Q, R) have no defaults and must be
 * present in the file. Unknown keys are rejected at every level.
 */
struct RunConfig {
    std::string system = "benchmark";
    std::vector<int> critic_degrees{2, 4};
    std::vector<int> actor_degrees{1, 3};

    double gamma = 0.0;
    double alpha = 0.0;
    Matrix Q;
    Vector R;

    double delta = 0.0;
    double stop_tol = 1e-7;
    int max_iters = 500;
    double ridge = 0.0;

    double sample_period = 0.1;
    int windows = 1000;
    int substeps = 10;
    Vector initial_state;
    std::uint64_t seed = 0;
    int restarts = 1;
    double restart_half_width = 1.0;
    std::vector<SignalShape> control_signals;      // one per control channel
    std::vector<SignalShape> disturbance_signals;  // one per disturbance channel

    double eval_t_end = 50.0;
    double eval_step = 0.001;
    Vector eval_x0;
    Vector eval_r0;
    double tail_start = 20.0;
    DisturbanceScenario eval_disturbance;

    std::string output_dir = "out";

    SystemModel model() const;
    BasisSet basis() const;
    TrainConfig train_config() const;
    CollectionConfig collection_config() const;
    EvaluationSettings evaluation_settings() const;

    /// Canonical echo embedded in artifacts: applied defaults and the seed, but not output_dir.
    nlohmann::json to_json() const;
};

/// Parses and validates; throws ConfigError with a path-qualified message.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

}  // namespace deltapi
