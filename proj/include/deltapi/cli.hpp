#pragma once

#include "deltapi/basis.hpp"
#include "deltapi/config.hpp"
#include "deltapi/learner.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace deltapi {

/// Process exit codes shared by every subcommand.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kBadInput = 2;      // config parse error, missing or unreadable file
inline constexpr int kRankCondition = 3;  // too few windows, or a singular regressor without ridge
inline constexpr int kNotConverged = 4;
inline constexpr int kFingerprint = 5;
}  // namespace exit_code

struct CliOptions {
    std::string config;
    std::string dataset;  // default: <out_dir>/dataset.bin
    std::string weights;  // default: <out_dir>/weights.json
    std::string out_dir;  // default: output_dir from the config
    std::optional<std::uint64_t> seed;
};

/// Trained weights as stored in weights.json.
struct WeightsReport {
    std::string basis_hash;
    WeightSet weights;
    bool converged = false;
    int iterations = 0;
};

void save_weights_report(const std::string& path, const WeightsReport& report, const BasisSet& basis,
                         const nlohmann::json& config_echo, std::uint64_t seed);
/// Throws ConfigError when the file is missing, DataError when it does not parse
/// and FingerprintMismatch when its basis differs from `basis`.
WeightsReport load_weights_report(const std::string& path, const BasisSet& basis, int control_dim,
                                  int disturbance_dim);

// Each command writes its artifacts, prints a one-line JSON summary to `out`
// and diagnostics to `err`, and returns an exit code. They never throw.
int cmd_collect(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_evaluate(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_pipeline(const CliOptions& options, std::ostream& out, std::ostream& err);

}  // namespace deltapi
