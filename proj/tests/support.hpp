#pragma once

#include "deltapi/basis.hpp"
#include "deltapi/collection.hpp"
#include "deltapi/config.hpp"
#include "deltapi/dynamics.hpp"
#include "deltapi/learner.hpp"
#include "deltapi/random.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace deltapi::testing {

/// Quadratic critic {e^2} and linear actors {e} on X = [e, r].
inline BasisSet scalar_lq_basis() {
    return {MonomialTable(2, {{2, 0}}), MonomialTable(2, {{1, 0}}), MonomialTable(2, {{1, 0}})};
}

/// Positive root of q - alpha p - 2 p - p^2 / r + p^2 / gamma^2 = 0, via the quadratic formula.
inline double scalar_riccati_root(double q, double r, double gamma, double alpha) {
    const double a = 1.0 / (gamma * gamma) - 1.0 / r;  // p^2 coefficient
    const double b = -(alpha + 2.0);
    const double c = q;
    const double disc = std::sqrt(b * b - 4.0 * a * c);
    const double r1 = (-b + disc) / (2.0 * a);
    const double r2 = (-b - disc) / (2.0 * a);
    return r1 > 0.0 ? r1 : r2;
}

inline TrainConfig scalar_lq_train_config(double delta) {
    TrainConfig cfg;
    cfg.delta = delta;
    cfg.gamma = 2.0;
    cfg.alpha = 0.1;
    cfg.R = Vector::Ones(1);
    cfg.Q = Matrix::Ones(1, 1);
    cfg.stop_tol = 1e-10;
    cfg.max_iters = 300;
    return cfg;
}

inline CollectionConfig scalar_lq_collection(std::uint64_t seed) {
    CollectionConfig c;
    c.sample_period = 0.1;
    c.windows = 200;
    c.substeps = 10;
    c.alpha = 0.1;
    c.Q = Matrix::Ones(1, 1);
    c.initial_state = Vector(2);
    c.initial_state << 1.0, 0.0;
    c.control_signals = {default_control_signal(derive_seed(seed, stream::kControlChannel))};
    c.disturbance_signals = {default_disturbance_signal(derive_seed(seed, stream::kDisturbanceChannel))};
    c.seed = seed;
    return c;
}

inline TrainConfig benchmark_train_config(double delta = 0.3) {
    TrainConfig cfg;
    cfg.delta = delta;
    cfg.gamma = 5.0;
    cfg.alpha = 0.1;
    cfg.R = Vector::Ones(1);
    cfg.Q = 10.0 * Matrix::Identity(2, 2);
    cfg.stop_tol = 1e-7;
    cfg.max_iters = 500;
    cfg.ridge = 1e-8;
    return cfg;
}

inline CollectionConfig benchmark_collection(std::uint64_t seed, int windows = 1000) {
    CollectionConfig c;
    c.sample_period = 0.1;
    c.windows = windows;
    c.substeps = 10;
    c.alpha = 0.1;
    c.Q = 10.0 * Matrix::Identity(2, 2);
    c.initial_state = Vector(4);
    c.initial_state << -1.0, 1.0, 1.0, 0.0;
    c.control_signals = {default_control_signal(derive_seed(seed, stream::kControlChannel))};
    c.disturbance_signals = {default_disturbance_signal(derive_seed(seed, stream::kDisturbanceChannel))};
    c.seed = seed;
    return c;
}

/// Plain off-policy Bellman assembly for the undamped step, coded from the integrals directly.
struct PlainAssembly {
    Vector regressor;
    double target;
};

inline PlainAssembly plain_bellman(const WindowStatistics& w, const WeightSet& prev, const TrainConfig& cfg) {
    const Eigen::Index L1 = prev.critic.size(), L2 = prev.actor_u.rows(), L3 = prev.actor_d.rows();
    const Eigen::Index m = prev.actor_u.cols(), q = prev.actor_d.cols();
    PlainAssembly out;
    out.regressor.resize(L1 + m * L2 + q * L3);
    out.regressor.head(L1) = std::exp(-cfg.alpha * w.duration) * w.rho_end - w.rho_start;
    double running_cost = w.I_Q;
    for (Eigen::Index j = 0; j < m; ++j) {
        const Vector a = prev.actor_u.col(j);
        const Vector v_integral = w.I_phi_u.col(j) - w.I_phi_phi * a;
        out.regressor.segment(L1 + j * L2, L2) = 2.0 * cfg.R(j) * v_integral;
        running_cost += cfg.R(j) * a.dot(w.I_phi_phi * a);
    }
    for (Eigen::Index k = 0; k < q; ++k) {
        const Vector b = prev.actor_d.col(k);
        const Vector v_integral = w.I_vphi_d.col(k) - w.I_vphi_vphi * b;
        out.regressor.segment(L1 + m * L2 + k * L3, L3) = -2.0 * cfg.gamma * cfg.gamma * v_integral;
        running_cost -= cfg.gamma * cfg.gamma * b.dot(w.I_vphi_vphi * b);
    }
    out.target = -running_cost;
    return out;
}

/// Independent oracle: linear interpolation of the integrand between samples, with the
/// discount integrated in closed form (extended precision) on every step.
template <typename Fn>
auto oracle_quadrature(const Trajectory& samples, double alpha, Fn integrand) {
    using Value = decltype(integrand(samples[0]));
    const long double h = samples[1].t - samples[0].t;
    const long double a = alpha;
    const long double x = a * h;
    const long double right = x == 0 ? h / 2 : (1.0L - std::exp(-x) * (1.0L + x)) / (a * a * h);
    const long double left = x == 0 ? h / 2 : (1.0L - std::exp(-x)) / a - right;
    Value acc = integrand(samples[0]) * 0.0;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const long double decay = std::exp(-a * static_cast<long double>(k) * h);
        acc += static_cast<double>(decay * left) * integrand(samples[k]) +
               static_cast<double>(decay * right) * integrand(samples[k + 1]);
    }
    return acc;
}

inline Vector random_vector(UniformSource& draw, Eigen::Index n, double scale = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = draw.next(-scale, scale);
    return v;
}

inline Matrix random_matrix(UniformSource& draw, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = draw.next(-scale, scale);
    }
    return m;
}

inline WeightSet random_weights(UniformSource& draw, const BasisSet& basis, int m, int q) {
    return {random_vector(draw, basis.critic_size()), random_matrix(draw, basis.actor_u_size(), m),
            random_matrix(draw, basis.actor_d_size(), q)};
}

/// Damped Bellman row and target for one window, integrated from its raw samples.
/// The window must have been collected with keep_raw.
inline PlainAssembly direct_assembly(const WindowStatistics& w, const WeightSet& prev, const TrainConfig& cfg,
                                     const BasisSet& basis) {
    const Matrix Q_T = tracking_weight(cfg.Q);
    const double g2 = cfg.gamma * cfg.gamma;
    const Eigen::Index L1 = basis.critic_size(), L2 = basis.actor_u_size(), L3 = basis.actor_d_size();
    const Eigen::Index m = prev.actor_u.cols(), q = prev.actor_d.cols();
    const auto u_policy = [&](const TrajectorySample& s) {
        return Vector(prev.actor_u.transpose() * eval_basis(basis.actor_u, s.state));
    };
    const auto d_policy = [&](const TrajectorySample& s) {
        return Vector(prev.actor_d.transpose() * eval_basis(basis.actor_d, s.state));
    };

    PlainAssembly out;
    out.regressor.resize(L1 + m * L2 + q * L3);
    out.regressor.head(L1) = std::exp(-cfg.alpha * w.duration) * eval_basis(basis.critic, w.samples.back().state) -
                             eval_basis(basis.critic, w.samples.front().state);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Vector v = oracle_quadrature(w.samples, cfg.alpha, [&](const TrajectorySample& s) {
            return Vector(eval_basis(basis.actor_u, s.state) * (s.control(j) - u_policy(s)(j)));
        });
        out.regressor.segment(L1 + j * L2, L2) = 2.0 * cfg.R(j) * v;
    }
    for (Eigen::Index k = 0; k < q; ++k) {
        const Vector v = oracle_quadrature(w.samples, cfg.alpha, [&](const TrajectorySample& s) {
            return Vector(eval_basis(basis.actor_d, s.state) * (s.disturbance(k) - d_policy(s)(k)));
        });
        out.regressor.segment(L1 + m * L2 + k * L3, L3) = -2.0 * g2 * v;
    }

    const double reward = oracle_quadrature(w.samples, cfg.alpha, [&](const TrajectorySample& s) {
        const Vector u = u_policy(s), d = d_policy(s);
        return s.state.dot(Q_T * s.state) + u.dot(cfg.R.cwiseProduct(u)) - g2 * d.squaredNorm();
    });
    const double cross = oracle_quadrature(w.samples, cfg.alpha, [&](const TrajectorySample& s) {
        const Vector u = u_policy(s), d = d_policy(s);
        return 2.0 * u.dot(cfg.R.cwiseProduct(s.control - u)) - 2.0 * g2 * d.dot(s.disturbance - d);
    });
    out.target = -cfg.delta * reward + (1.0 - cfg.delta) * (prev.critic.dot(out.regressor.head(L1)) + cross);
    return out;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        std::random_device entropy;
        path_ = std::filesystem::temp_directory_path() /
                ("deltapi_" + tag + "_" + std::to_string(entropy()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static std::uint64_t& counter() {
        static std::uint64_t c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Benchmark run configuration; callers patch fields before parsing.
inline nlohmann::json benchmark_config_json() {
    return nlohmann::json::parse(R"({
      "system": {"preset": "benchmark"},
      "performance": {"gamma": 5.0, "alpha": 0.1, "Q": 10.0, "R": 1.0},
      "learner": {"delta": 0.3, "stop_tol": 1e-7, "max_iters": 500, "ridge": 1e-8},
      "collection": {"T": 0.1, "N": 1000, "M": 10, "X0": [-1, 1, 1, 0], "seed": 7},
      "evaluation": {"t_end": 50.0, "step": 0.001, "x0": [0, 1.5], "r0": [0, 1.5]}
    })");
}

}  // namespace deltapi::testing
