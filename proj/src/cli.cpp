#include "deltapi/cli.hpp"

#include "deltapi/collection.hpp"
#include "deltapi/errors.hpp"
#include "deltapi/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace deltapi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class NotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open '" + path.string() + "' for writing");
        write_fields(header);
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> fields;
        fields.reserve(values.size());
        for (double v : values) fields.push_back(format_number(v));
        write_fields(fields);
    }

    void write_fields(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw DataError("failed writing '" + path_.string() + "'");
    }

private:
    fs::path path_;
    std::ofstream out_;
};

std::vector<std::string> indexed(const std::string& stem, int count, bool bare_when_single = false) {
    if (bare_when_single && count == 1) return {stem};
    std::vector<std::string> names;
    for (int i = 1; i <= count; ++i) names.push_back(stem + std::to_string(i));
    return names;
}

void append(std::vector<double>& row, const Vector& v) {
    row.insert(row.end(), v.data(), v.data() + v.size());
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

json vector_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector parse_vector(const json& v, Eigen::Index expected, const std::string& what) {
    if (!v.is_array()) throw DataError("weights report: '" + what + "' is not a list");
    auto values = v.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected) {
        throw FingerprintMismatch("weights report: '" + what + "' has " + std::to_string(values.size()) +
                                  " entries, the configured basis needs " + std::to_string(expected));
    }
    return Eigen::Map<const Vector>(values.data(), expected);
}

Matrix parse_columns(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != cols) {
        throw FingerprintMismatch("weights report: '" + what + "' needs one column per channel");
    }
    Matrix out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        out.col(j) = parse_vector(v[static_cast<std::size_t>(j)], rows, what);
    }
    return out;
}

json term_names(const MonomialTable& table) {
    json names = json::array();
    for (int i = 0; i < table.size(); ++i) names.push_back(table.term_name(i));
    return names;
}

struct Context {
    RunConfig cfg;
    fs::path out_dir;
    fs::path dataset_path;
    fs::path weights_path;
};

Context prepare(const CliOptions& options) {
    if (options.config.empty()) throw ConfigError("--config is required");
    Context ctx;
    ctx.cfg = load_run_config(options.config);
    if (options.seed) ctx.cfg.seed = *options.seed;
    ctx.out_dir = options.out_dir.empty() ? fs::path(ctx.cfg.output_dir) : fs::path(options.out_dir);
    ctx.dataset_path = options.dataset.empty() ? ctx.out_dir / "dataset.bin" : fs::path(options.dataset);
    ctx.weights_path = options.weights.empty() ? ctx.out_dir / "weights.json" : fs::path(options.weights);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + ctx.out_dir.string() + "': " + ec.message());
    return ctx;
}

json run_collect(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const SystemModel model = cfg.model();
    const BasisSet basis = cfg.basis();
    CollectionResult result = collect_dataset(model, basis, cfg.collection_config());
    result.dataset.config_echo = cfg.to_json().dump();
    save_dataset(ctx.dataset_path.string(), result.dataset);

    const int n_aug = model.augmented_dim();
    std::vector<std::string> header{"t"};
    for (const auto& name : indexed("X", n_aug)) header.push_back(name);
    for (const auto& name : indexed("u", model.control_dim, true)) header.push_back(name);
    for (const auto& name : indexed("d", model.disturbance_dim, true)) header.push_back(name);
    CsvWriter trace(ctx.out_dir / "collection_trace.csv", header);
    for (const auto& s : result.trace) {
        std::vector<double> row{s.t};
        append(row, s.state);
        append(row, s.control);
        append(row, s.disturbance);
        trace.row(row);
    }
    trace.close();

    return {{"command", "collect"},
            {"windows", result.dataset.windows.size()},
            {"unknowns", result.dataset.unknowns()},
            {"basis_hash", basis.ordering_hash()},
            {"seed", cfg.seed}};
}

void check_fingerprint(const WindowDataset& dataset, const RunConfig& cfg, const BasisSet& basis) {
    const auto& fp = dataset.fingerprint;
    if (fp.basis_hash != basis.ordering_hash()) {
        throw FingerprintMismatch("dataset basis hash " + fp.basis_hash + " does not match the configured basis " +
                                  basis.ordering_hash());
    }
    if (fp.sample_period != cfg.sample_period || fp.substeps != cfg.substeps) {
        throw FingerprintMismatch("dataset sampling (T, M) differs from the config");
    }
    if (fp.seed != cfg.seed) {
        throw FingerprintMismatch("dataset seed " + std::to_string(fp.seed) + " differs from the config seed " +
                                  std::to_string(cfg.seed));
    }
    const SystemModel model = cfg.model();
    if (dataset.augmented_dim != model.augmented_dim() || dataset.control_dim != model.control_dim ||
        dataset.disturbance_dim != model.disturbance_dim) {
        throw FingerprintMismatch("dataset dimensions differ from the configured system");
    }
}

json run_train(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const BasisSet basis = cfg.basis();
    const TrainConfig train_cfg = cfg.train_config();
    const WindowDataset dataset = load_dataset(ctx.dataset_path.string());
    check_fingerprint(dataset, cfg, basis);
    check_dataset_matches(dataset, train_cfg);

    const TrainResult result = offpolicy_train(dataset, train_cfg);

    CsvWriter trace(ctx.out_dir / "training_trace.csv", {"iter", "delta_w_norm", "ls_residual", "cond_estimate"});
    for (const auto& rec : result.trace) {
        trace.row({static_cast<double>(rec.iteration), rec.delta_w_norm, rec.ls_residual, rec.cond_estimate});
    }
    trace.close();

    const int m = dataset.control_dim;
    const int q = dataset.disturbance_dim;
    std::vector<std::string> header{"iter"};
    for (const auto& name : indexed("Wc_", basis.critic_size())) header.push_back(name);
    for (int j = 1; j <= m; ++j) {
        for (const auto& name : indexed("Wa" + std::to_string(j) + "_", basis.actor_u_size())) header.push_back(name);
    }
    for (int k = 1; k <= q; ++k) {
        for (const auto& name : indexed("Wd" + std::to_string(k) + "_", basis.actor_d_size())) header.push_back(name);
    }
    CsvWriter history(ctx.out_dir / "weight_history.csv", header);
    const WeightSet initial = WeightSet::zeros(basis, m, q);
    for (std::size_t i = 0; i <= result.history.size(); ++i) {
        const WeightSet& w = i == 0 ? initial : result.history[i - 1];
        std::vector<double> row{static_cast<double>(i)};
        append(row, w.stacked());
        history.row(row);
    }
    history.close();

    WeightsReport report{basis.ordering_hash(), result.weights, result.converged, result.iterations()};
    save_weights_report(ctx.weights_path.string(), report, basis, cfg.to_json(), cfg.seed);

    json summary = {{"command", "train"},
                    {"converged", result.converged},
                    {"iterations", result.iterations()},
                    {"final_delta_w_norm", result.trace.empty() ? 0.0 : result.trace.back().delta_w_norm},
                    {"basis_hash", basis.ordering_hash()},
                    {"seed", cfg.seed}};
    if (!result.converged) {
        throw NotConverged(summary.dump());
    }
    return summary;
}

json run_evaluate(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const SystemModel model = cfg.model();
    const BasisSet basis = cfg.basis();
    const WeightsReport weights =
        load_weights_report(ctx.weights_path.string(), basis, model.control_dim, model.disturbance_dim);
    const PolicyPair policies = extract_policies(weights.weights, basis);

    const int q = model.disturbance_dim;
    Signal disturbance;
    if (cfg.eval_disturbance.preset == "none") {
        disturbance = [q](double) { return Vector::Zero(q).eval(); };
    } else {
        const DecayingCosine shape = cfg.eval_disturbance.shape;
        disturbance = [q, shape](double t) { return Vector::Constant(q, shape(t)).eval(); };
    }
    const ControlPolicy control = [&policies](const Vector& X) { return policies.control(X); };
    const SimulationGrid grid{0.0, cfg.eval_t_end, cfg.eval_step};
    const EvaluationReport report =
        closed_loop_run(model, control, disturbance, cfg.eval_x0, cfg.eval_r0, grid, cfg.evaluation_settings());

    const int n = model.state_dim;
    std::vector<std::string> header{"t"};
    for (const auto& name : indexed("x", n)) header.push_back(name);
    for (const auto& name : indexed("r", n)) header.push_back(name);
    for (const auto& name : indexed("ed", n)) header.push_back(name);
    for (const auto& name : indexed("u", model.control_dim, true)) header.push_back(name);
    for (const auto& name : indexed("d", q, true)) header.push_back(name);
    CsvWriter trace(ctx.out_dir / "evaluation_trace.csv", header);
    for (std::size_t k = 0; k < report.t.size(); ++k) {
        std::vector<double> row{report.t[k]};
        append(row, report.x[k]);
        append(row, report.r[k]);
        append(row, report.e[k]);
        append(row, report.u[k]);
        append(row, report.d[k]);
        trace.row(row);
    }
    trace.close();

    const double gamma_sq = cfg.gamma * cfg.gamma;
    CsvWriter attenuation(ctx.out_dir / "attenuation.csv", {"t", "ratio", "gamma_sq"});
    for (std::size_t k = 0; k < report.t.size(); ++k) {
        const auto& r = report.ratio[k];
        attenuation.write_fields(
            {format_number(report.t[k]), r ? format_number(*r) : std::string(), format_number(gamma_sq)});
    }
    attenuation.close();

    const auto final_ratio = report.final_ratio();
    json summary = {{"command", "evaluate"},
                    {"final_ratio", final_ratio ? json(*final_ratio) : json(nullptr)},
                    {"gamma_sq", gamma_sq},
                    {"tail_max_error", report.tail_max_error},
                    {"tail_start", cfg.tail_start},
                    {"performance_index", performance_index(report, cfg.train_config())},
                    {"weights_converged", weights.converged},
                    {"seed", cfg.seed}};
    json file = summary;
    file["config"] = cfg.to_json();
    write_json(ctx.out_dir / "summary.json", file);
    return summary;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const NotConverged&) {
        err << "error: training stopped at max_iters without meeting stop_tol\n";
        return exit_code::kNotConverged;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::kBadInput;
    } catch (const DataError& e) {
        err << "input error: " << e.what() << '\n';
        return exit_code::kBadInput;
    } catch (const RankConditionViolation& e) {
        err << "rank condition: " << e.what() << '\n';
        return exit_code::kRankCondition;
    } catch (const SingularRegressor& e) {
        err << "singular regressor: " << e.what() << '\n';
        return exit_code::kRankCondition;
    } catch (const FingerprintMismatch& e) {
        err << "fingerprint mismatch: " << e.what() << '\n';
        return exit_code::kFingerprint;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kFailure;
    }
}

}  // namespace

void save_weights_report(const std::string& path, const WeightsReport& report, const BasisSet& basis,
                         const json& config_echo, std::uint64_t seed) {
    json actor_u = json::array();
    for (Eigen::Index j = 0; j < report.weights.actor_u.cols(); ++j) {
        actor_u.push_back(vector_json(report.weights.actor_u.col(j)));
    }
    json actor_d = json::array();
    for (Eigen::Index k = 0; k < report.weights.actor_d.cols(); ++k) {
        actor_d.push_back(vector_json(report.weights.actor_d.col(k)));
    }
    const json doc = {{"basis_hash", report.basis_hash},
                      {"terms",
                       {{"critic", term_names(basis.critic)},
                        {"actor_u", term_names(basis.actor_u)},
                        {"actor_d", term_names(basis.actor_d)}}},
                      {"critic", vector_json(report.weights.critic)},
                      {"actor_u", actor_u},
                      {"actor_d", actor_d},
                      {"converged", report.converged},
                      {"iterations", report.iterations},
                      {"seed", seed},
                      {"config", config_echo}};
    write_json(path, doc);
}

WeightsReport load_weights_report(const std::string& path, const BasisSet& basis, int control_dim,
                                  int disturbance_dim) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open weights file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
    try {
        WeightsReport report;
        report.basis_hash = doc.at("basis_hash").get<std::string>();
        if (report.basis_hash != basis.ordering_hash()) {
            throw FingerprintMismatch("weights basis hash " + report.basis_hash +
                                      " does not match the configured basis " + basis.ordering_hash());
        }
        report.weights.critic = parse_vector(doc.at("critic"), basis.critic_size(), "critic");
        report.weights.actor_u = parse_columns(doc.at("actor_u"), basis.actor_u_size(), control_dim, "actor_u");
        report.weights.actor_d = parse_columns(doc.at("actor_d"), basis.actor_d_size(), disturbance_dim, "actor_d");
        report.converged = doc.at("converged").get<bool>();
        report.iterations = doc.at("iterations").get<int>();
        if (!report.weights.all_finite()) throw DataError("weights report contains non-finite values");
        return report;
    } catch (const json::exception& e) {
        throw DataError("weights report '" + path + "' is malformed: " + e.what());
    }
}

int cmd_collect(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Context ctx = prepare(options);
        out << run_collect(ctx).dump() << '\n';
        return exit_code::kOk;
    });
}

int cmd_train(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Context ctx = prepare(options);
        try {
            out << run_train(ctx).dump() << '\n';
        } catch (const NotConverged& e) {
            out << e.what() << '\n';
            throw;
        }
        return exit_code::kOk;
    });
}

int cmd_evaluate(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Context ctx = prepare(options);
        out << run_evaluate(ctx).dump() << '\n';
        return exit_code::kOk;
    });
}

int cmd_pipeline(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Context ctx = prepare(options);
        json summary = {{"command", "pipeline"}};
        summary["collect"] = run_collect(ctx);
        try {
            summary["train"] = run_train(ctx);
        } catch (const NotConverged& e) {
            summary["train"] = json::parse(e.what());
            out << summary.dump() << '\n';
            throw;
        }
        summary["evaluate"] = run_evaluate(ctx);
        out << summary.dump() << '\n';
        return exit_code::kOk;
    });
}

}  // namespace deltapi
