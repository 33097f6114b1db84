#include "deltapi/config.hpp"

#include "deltapi/errors.hpp"
#include "deltapi/random.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace deltapi {

namespace {

using nlohmann::json;

// Strict view of one JSON object: every key must be consumed or listed.
class Section {
public:
    Section(const json& j, std::string path, std::set<std::string> allowed)
        : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string path(const std::string& key) const { return path_ + "." + key; }
    const json& raw(const std::string& key) const {
        if (!has(key)) throw ConfigError(path(key) + ": required key is missing");
        return j_.at(key);
    }

    template <typename T>
    T required(const std::string& key) const {
        return convert<T>(raw(key), path(key));
    }

    template <typename T>
    T optional(const std::string& key, T fallback) const {
        return has(key) ? convert<T>(j_.at(key), path(key)) : fallback;
    }

    template <typename T>
    static T convert(const json& v, const std::string& where) {
        try {
            if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(where + ": expected a number");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }

private:
    const json& j_;
    std::string path_;
};

Vector parse_vector(const json& v, const std::string& where) {
    const auto values = Section::convert<std::vector<double>>(v, where);
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json vector_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Matrix parse_square(const json& v, int n, const std::string& where) {
    if (v.is_number()) return v.get<double>() * Matrix::Identity(n, n);
    const auto rows = Section::convert<std::vector<std::vector<double>>>(v, where);
    if (static_cast<int>(rows.size()) != n) throw ConfigError(where + ": expected " + std::to_string(n) + " rows");
    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n) {
            throw ConfigError(where + ": row " + std::to_string(i) + " has wrong length");
        }
        for (int j = 0; j < n; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return out;
}

Vector parse_diagonal(const json& v, int m, const std::string& where) {
    if (v.is_number()) return Vector::Constant(m, v.get<double>());
    Vector out = parse_vector(v, where);
    if (out.size() != m) throw ConfigError(where + ": expected " + std::to_string(m) + " entries");
    return out;
}

SignalShape parse_signal(const json& v, const std::string& where, SignalShape defaults) {
    Section s(v, where, {"amplitude", "n_sinusoids", "freq_range", "noise_amplitude", "noise_hold"});
    SignalShape out = defaults;
    out.amplitude = s.optional("amplitude", defaults.amplitude);
    out.n_sinusoids = s.optional("n_sinusoids", defaults.n_sinusoids);
    if (s.has("freq_range")) {
        const auto range = Section::convert<std::vector<double>>(s.raw("freq_range"), s.path("freq_range"));
        if (range.size() != 2) throw ConfigError(s.path("freq_range") + ": expected [low, high]");
        out.freq_low = range[0];
        out.freq_high = range[1];
    }
    out.noise_amplitude = s.optional("noise_amplitude", defaults.noise_amplitude);
    out.noise_hold = s.optional("noise_hold", defaults.noise_hold);
    return out;
}

std::vector<SignalShape> parse_signals(const Section& parent, const std::string& key, int channels,
                                       SignalShape defaults) {
    if (!parent.has(key)) return std::vector<SignalShape>(static_cast<std::size_t>(channels), defaults);
    const json& v = parent.raw(key);
    std::vector<SignalShape> out;
    if (v.is_object()) {
        out.assign(static_cast<std::size_t>(channels), parse_signal(v, parent.path(key), defaults));
    } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(parse_signal(v[i], parent.path(key) + "[" + std::to_string(i) + "]", defaults));
        }
    } else {
        throw ConfigError(parent.path(key) + ": expected an object or a list of objects");
    }
    if (static_cast<int>(out.size()) != channels) {
        throw ConfigError(parent.path(key) + ": expected one signal per channel (" + std::to_string(channels) + ")");
    }
    return out;
}

json signal_json(const SignalShape& s) {
    return {{"amplitude", s.amplitude},
            {"n_sinusoids", s.n_sinusoids},
            {"freq_range", {s.freq_low, s.freq_high}},
            {"noise_amplitude", s.noise_amplitude},
            {"noise_hold", s.noise_hold}};
}

BehaviorSignalSpec to_spec(const SignalShape& s, std::uint64_t seed) {
    BehaviorSignalSpec spec;
    spec.amplitude = s.amplitude;
    spec.n_sinusoids = s.n_sinusoids;
    spec.freq_low = s.freq_low;
    spec.freq_high = s.freq_high;
    spec.noise_amplitude = s.noise_amplitude;
    spec.noise_hold = s.noise_hold;
    spec.seed = seed;
    return spec;
}

SignalShape shape_of(const BehaviorSignalSpec& s) {
    return {s.amplitude, s.n_sinusoids, s.freq_low, s.freq_high, s.noise_amplitude, s.noise_hold};
}

}  // namespace

SystemModel RunConfig::model() const {
    return model_preset(system);
}

BasisSet RunConfig::basis() const {
    const int n_vars = model().augmented_dim();
    return {build_even_basis(n_vars, critic_degrees), build_odd_basis(n_vars, actor_degrees),
            build_odd_basis(n_vars, actor_degrees)};
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.delta = delta;
    cfg.gamma = gamma;
    cfg.alpha = alpha;
    cfg.R = R;
    cfg.Q = Q;
    cfg.stop_tol = stop_tol;
    cfg.max_iters = max_iters;
    cfg.ridge = ridge;
    return cfg;
}

CollectionConfig RunConfig::collection_config() const {
    CollectionConfig c;
    c.sample_period = sample_period;
    c.windows = windows;
    c.substeps = substeps;
    c.alpha = alpha;
    c.Q = Q;
    c.initial_state = initial_state;
    c.seed = seed;
    c.restarts = restarts;
    c.restart_half_width = restart_half_width;
    for (std::size_t j = 0; j < control_signals.size(); ++j) {
        c.control_signals.push_back(to_spec(control_signals[j], derive_seed(seed, stream::kControlChannel + j)));
    }
    for (std::size_t k = 0; k < disturbance_signals.size(); ++k) {
        c.disturbance_signals.push_back(
            to_spec(disturbance_signals[k], derive_seed(seed, stream::kDisturbanceChannel + k)));
    }
    return c;
}

EvaluationSettings RunConfig::evaluation_settings() const {
    return {alpha, Q, R, tail_start};
}

nlohmann::json RunConfig::to_json() const {
    json signals_u = json::array();
    for (const auto& s : control_signals) signals_u.push_back(signal_json(s));
    json signals_d = json::array();
    for (const auto& s : disturbance_signals) signals_d.push_back(signal_json(s));
    json disturbance = {{"preset", eval_disturbance.preset}};
    if (eval_disturbance.preset == "decaying_cosine") {
        disturbance["amplitude"] = eval_disturbance.shape.amplitude;
        disturbance["decay"] = eval_disturbance.shape.decay;
        disturbance["frequency"] = eval_disturbance.shape.frequency;
    }
    return {
        {"system", {{"preset", system}}},
        {"basis", {{"critic_degrees", critic_degrees}, {"actor_degrees", actor_degrees}}},
        {"performance", {{"gamma", gamma}, {"alpha", alpha}, {"Q", matrix_json(Q)}, {"R", vector_json(R)}}},
        {"learner", {{"delta", delta}, {"stop_tol", stop_tol}, {"max_iters", max_iters}, {"ridge", ridge}}},
        {"collection",
         {{"T", sample_period},
          {"N", windows},
          {"M", substeps},
          {"X0", vector_json(initial_state)},
          {"seed", seed},
          {"restarts", restarts},
          {"restart_half_width", restart_half_width},
          {"control_signals", signals_u},
          {"disturbance_signals", signals_d}}},
        {"evaluation",
         {{"t_end", eval_t_end},
          {"step", eval_step},
          {"x0", vector_json(eval_x0)},
          {"r0", vector_json(eval_r0)},
          {"tail_start", tail_start},
          {"disturbance", disturbance}}},
    };
}

RunConfig parse_run_config(const nlohmann::json& doc) {
    Section root(doc, "config",
                 {"system", "basis", "performance", "learner", "collection", "evaluation", "output_dir"});
    RunConfig cfg;

    {
        Section s(root.raw("system"), "config.system", {"preset"});
        cfg.system = s.required<std::string>("preset");
        if (cfg.system == "custom") {
            throw ConfigError("config.system.preset: custom models are supplied through the library API, not files");
        }
    }
    SystemModel model;
    try {
        model = cfg.model();
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("config.system.preset: ") + e.what());
    }
    const int n = model.state_dim;
    const int m = model.control_dim;
    const int q = model.disturbance_dim;

    if (root.has("basis")) {
        Section s(root.raw("basis"), "config.basis", {"critic_degrees", "actor_degrees"});
        cfg.critic_degrees = s.optional("critic_degrees", cfg.critic_degrees);
        cfg.actor_degrees = s.optional("actor_degrees", cfg.actor_degrees);
    }

    {
        Section s(root.raw("performance"), "config.performance", {"gamma", "alpha", "Q", "R"});
        cfg.gamma = s.required<double>("gamma");
        cfg.alpha = s.required<double>("alpha");
        cfg.Q = parse_square(s.raw("Q"), n, s.path("Q"));
        cfg.R = parse_diagonal(s.raw("R"), m, s.path("R"));
    }
    {
        Section s(root.raw("learner"), "config.learner", {"delta", "stop_tol", "max_iters", "ridge"});
        cfg.delta = s.required<double>("delta");
        cfg.stop_tol = s.optional("stop_tol", cfg.stop_tol);
        cfg.max_iters = s.optional("max_iters", cfg.max_iters);
        cfg.ridge = s.optional("ridge", cfg.ridge);
    }
    {
        Section s(root.raw("collection"), "config.collection",
                  {"T", "N", "M", "X0", "seed", "restarts", "restart_half_width", "control_signals",
                   "disturbance_signals"});
        cfg.sample_period = s.optional("T", cfg.sample_period);
        cfg.windows = s.optional("N", cfg.windows);
        cfg.substeps = s.optional("M", cfg.substeps);
        cfg.initial_state = parse_vector(s.raw("X0"), s.path("X0"));
        if (cfg.initial_state.size() != 2 * n) {
            throw ConfigError(s.path("X0") + ": expected " + std::to_string(2 * n) + " entries");
        }
        cfg.seed = s.optional<std::uint64_t>("seed", 0);
        cfg.restarts = s.optional("restarts", cfg.restarts);
        cfg.restart_half_width = s.optional("restart_half_width", cfg.restart_half_width);
        cfg.control_signals = parse_signals(s, "control_signals", m, shape_of(default_control_signal(0)));
        cfg.disturbance_signals =
            parse_signals(s, "disturbance_signals", q, shape_of(default_disturbance_signal(0)));
    }
    {
        Section s(root.raw("evaluation"), "config.evaluation",
                  {"t_end", "step", "x0", "r0", "tail_start", "disturbance"});
        cfg.eval_t_end = s.optional("t_end", cfg.eval_t_end);
        cfg.eval_step = s.optional("step", cfg.eval_step);
        cfg.eval_x0 = parse_vector(s.raw("x0"), s.path("x0"));
        cfg.eval_r0 = parse_vector(s.raw("r0"), s.path("r0"));
        if (cfg.eval_x0.size() != n || cfg.eval_r0.size() != n) {
            throw ConfigError("config.evaluation: x0 and r0 need " + std::to_string(n) + " entries");
        }
        cfg.tail_start = s.optional("tail_start", cfg.tail_start);
        if (s.has("disturbance")) {
            Section d(s.raw("disturbance"), s.path("disturbance"), {"preset", "amplitude", "decay", "frequency"});
            cfg.eval_disturbance.preset = d.required<std::string>("preset");
            if (cfg.eval_disturbance.preset != "decaying_cosine" && cfg.eval_disturbance.preset != "none") {
                throw ConfigError(d.path("preset") + ": expected 'decaying_cosine' or 'none'");
            }
            cfg.eval_disturbance.shape.amplitude = d.optional("amplitude", cfg.eval_disturbance.shape.amplitude);
            cfg.eval_disturbance.shape.decay = d.optional("decay", cfg.eval_disturbance.shape.decay);
            cfg.eval_disturbance.shape.frequency = d.optional("frequency", cfg.eval_disturbance.shape.frequency);
        }
    }
    cfg.output_dir = root.optional<std::string>("output_dir", cfg.output_dir);

    // Re-check the invariants the library would enforce later, so bad files fail at load.
    try {
        cfg.train_config().validate();
        cfg.basis();
        for (const auto& spec : cfg.collection_config().control_signals) spec.validate();
        for (const auto& spec : cfg.collection_config().disturbance_signals) spec.validate();
        if (cfg.substeps < 2) throw ContractViolation("collection.M must be at least 2");
        if (!(cfg.sample_period > 0.0)) throw ContractViolation("collection.T must be positive");
        if (cfg.windows < 1) throw ContractViolation("collection.N must be positive");
        if (cfg.restarts < 1 || cfg.windows % cfg.restarts != 0) {
            throw ContractViolation("collection.restarts must divide collection.N");
        }
        SimulationGrid{0.0, cfg.eval_t_end, cfg.eval_step}.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

}  // namespace deltapi
