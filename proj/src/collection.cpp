#include "deltapi/collection.hpp"

#include "deltapi/errors.hpp"
#include "deltapi/random.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

namespace deltapi {

void BehaviorSignalSpec::validate() const {
    if (!(amplitude >= 0.0) || !(noise_amplitude >= 0.0)) {
        throw ContractViolation("behavior signal amplitudes must be non-negative");
    }
    if (n_sinusoids < 0) throw ContractViolation("n_sinusoids must be non-negative");
    if (!(freq_low < freq_high)) throw ContractViolation("behavior signal frequency range is empty");
    if (!(noise_hold > 0.0)) throw ContractViolation("noise_hold must be positive");
}

BehaviorSignalSpec default_control_signal(std::uint64_t seed) {
    BehaviorSignalSpec s;
    s.amplitude = 2.0;
    s.noise_amplitude = 0.5;
    s.seed = seed;
    return s;
}

BehaviorSignalSpec default_disturbance_signal(std::uint64_t seed) {
    BehaviorSignalSpec s;
    s.amplitude = 1.0;
    s.noise_amplitude = 0.25;
    s.seed = seed;
    return s;
}

BehaviorSignal::BehaviorSignal(const BehaviorSignalSpec& spec)
    : spec_(spec), noise_seed_(derive_seed(spec.seed, stream::kNoiseOffset)) {
    spec_.validate();
    UniformSource draw(spec.seed);
    frequencies_.reserve(static_cast<std::size_t>(spec.n_sinusoids));
    phases_.reserve(static_cast<std::size_t>(spec.n_sinusoids));
    for (int i = 0; i < spec.n_sinusoids; ++i) {
        frequencies_.push_back(draw.next(spec.freq_low, spec.freq_high));
        phases_.push_back(draw.next(0.0, 2.0 * std::numbers::pi));
    }
}

double BehaviorSignal::knot(std::int64_t k) const {
    return 2.0 * unit_double(splitmix64(noise_seed_ ^ splitmix64(static_cast<std::uint64_t>(k)))) - 1.0;
}

double BehaviorSignal::operator()(double t) const {
    double value = 0.0;
    if (spec_.amplitude != 0.0 && !frequencies_.empty()) {
        double sum = 0.0;
        for (std::size_t i = 0; i < frequencies_.size(); ++i) sum += std::sin(frequencies_[i] * t + phases_[i]);
        value += spec_.amplitude * sum / static_cast<double>(frequencies_.size());
    }
    if (spec_.noise_amplitude != 0.0) {
        const double u = t / spec_.noise_hold;
        const double base = std::floor(u);
        const double s = u - base;
        const auto k = static_cast<std::int64_t>(base);
        value += spec_.noise_amplitude * ((1.0 - s) * knot(k) + s * knot(k + 1));
    }
    return value;
}

double behavior_signal(double t, const BehaviorSignalSpec& spec) {
    return BehaviorSignal(spec)(t);
}

namespace {

// (1 - e^{-x}(1 + x)) / x^2, with a series near zero where the closed form cancels.
double hat_moment(double x) {
    if (std::abs(x) < 0.1) {
        double term = 0.5;  // n = 2
        double sum = 0.0;
        for (int n = 2; n < 20; ++n) {
            sum += term;
            term *= -x * static_cast<double>(n) / (static_cast<double>(n - 1) * static_cast<double>(n + 1));
        }
        return sum;
    }
    return (1.0 - std::exp(-x) * (1.0 + x)) / (x * x);
}

}  // namespace

std::vector<double> discounted_trapezoid_weights(std::size_t points, double alpha, double h) {
    if (points < 2) throw ContractViolation("quadrature needs at least two grid points");
    if (!(h > 0.0)) throw ContractViolation("quadrature step must be positive");
    // On one step [0, h]: int e^{-alpha s} s/h ds and int e^{-alpha s} (1 - s/h) ds.
    const double x = alpha * h;
    const double right = h * hat_moment(x);
    const double left = (x == 0.0 ? h : -std::expm1(-x) / alpha) - right;
    std::vector<double> w(points, 0.0);
    for (std::size_t k = 0; k + 1 < points; ++k) {
        const double decay = std::exp(-alpha * static_cast<double>(k) * h);
        w[k] += decay * left;
        w[k + 1] += decay * right;
    }
    return w;
}

double discounted_quadrature(std::span<const double> values, double alpha, double h) {
    const auto w = discounted_trapezoid_weights(values.size(), alpha, h);
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) acc += w[k] * values[k];
    return acc;
}

Matrix tracking_weight(const Matrix& Q) {
    if (Q.rows() != Q.cols()) throw ContractViolation("Q must be square");
    const auto n = Q.rows();
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    out.topLeftCorner(n, n) = Q;
    return out;
}

WindowStatistics compute_window_statistics(const BasisSet& basis, std::span<const TrajectorySample> samples,
                                           double alpha, const Matrix& Q_T) {
    if (samples.size() < 2) throw ContractViolation("a window needs at least two samples");
    const double h = samples[1].t - samples[0].t;
    const auto w = discounted_trapezoid_weights(samples.size(), alpha, h);
    const int m = static_cast<int>(samples.front().control.size());
    const int q = static_cast<int>(samples.front().disturbance.size());

    WindowStatistics s;
    s.start_time = samples.front().t;
    s.duration = samples.back().t - samples.front().t;
    s.rho_start = eval_basis(basis.critic, samples.front().state);
    s.rho_end = eval_basis(basis.critic, samples.back().state);
    s.I_phi_u = Matrix::Zero(basis.actor_u_size(), m);
    s.I_phi_phi = Matrix::Zero(basis.actor_u_size(), basis.actor_u_size());
    s.I_vphi_d = Matrix::Zero(basis.actor_d_size(), q);
    s.I_vphi_vphi = Matrix::Zero(basis.actor_d_size(), basis.actor_d_size());

    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& smp = samples[k];
        const Vector phi = eval_basis(basis.actor_u, smp.state);
        const Vector vphi = eval_basis(basis.actor_d, smp.state);
        s.I_Q += w[k] * smp.state.dot(Q_T * smp.state);
        s.I_phi_u.noalias() += w[k] * phi * smp.control.transpose();
        s.I_phi_phi.noalias() += w[k] * phi * phi.transpose();
        s.I_vphi_d.noalias() += w[k] * vphi * smp.disturbance.transpose();
        s.I_vphi_vphi.noalias() += w[k] * vphi * vphi.transpose();
    }
    return s;
}

void check_rank_condition(int windows, const BasisSet& basis, int control_dim, int disturbance_dim) {
    const int unknowns =
        basis.critic_size() + control_dim * basis.actor_u_size() + disturbance_dim * basis.actor_d_size();
    if (windows <= unknowns) {
        throw RankConditionViolation("need more than " + std::to_string(unknowns) + " windows (L1 + m*L2 + q*L3 = " +
                                     std::to_string(basis.critic_size()) + " + " + std::to_string(control_dim) +
                                     "*" + std::to_string(basis.actor_u_size()) + " + " +
                                     std::to_string(disturbance_dim) + "*" + std::to_string(basis.actor_d_size()) +
                                     "), got " + std::to_string(windows));
    }
}

CollectionResult collect_dataset(const SystemModel& model, const BasisSet& basis, const CollectionConfig& cfg) {
    model.validate();
    const int n_aug = model.augmented_dim();
    if (basis.critic.n_vars() != n_aug || basis.actor_u.n_vars() != n_aug || basis.actor_d.n_vars() != n_aug) {
        throw ContractViolation("basis variable count does not match the augmented state");
    }
    if (cfg.substeps < 2) throw ContractViolation("need at least two substeps per window");
    if (!(cfg.sample_period > 0.0)) throw ContractViolation("sample period must be positive");
    if (!(cfg.alpha >= 0.0)) throw ContractViolation("discount must be non-negative");
    if (cfg.Q.rows() != model.state_dim || cfg.Q.cols() != model.state_dim) {
        throw ContractViolation("Q must be state_dim x state_dim");
    }
    if (cfg.initial_state.size() != n_aug) throw ContractViolation("initial state has wrong dimension");
    if (static_cast<int>(cfg.control_signals.size()) != model.control_dim ||
        static_cast<int>(cfg.disturbance_signals.size()) != model.disturbance_dim) {
        throw ContractViolation("one behavior signal per input channel is required");
    }
    if (cfg.restarts < 1 || cfg.windows % cfg.restarts != 0) {
        throw ContractViolation("restarts must divide the window count");
    }
    check_rank_condition(cfg.windows, basis, model.control_dim, model.disturbance_dim);

    std::vector<BehaviorSignal> u_sig;
    std::vector<BehaviorSignal> d_sig;
    for (const auto& s : cfg.control_signals) u_sig.emplace_back(s);
    for (const auto& s : cfg.disturbance_signals) d_sig.emplace_back(s);
    const Signal control = [&](double t) {
        Vector u(static_cast<Eigen::Index>(u_sig.size()));
        for (std::size_t j = 0; j < u_sig.size(); ++j) u(static_cast<Eigen::Index>(j)) = u_sig[j](t);
        return u;
    };
    const Signal disturbance = [&](double t) {
        Vector d(static_cast<Eigen::Index>(d_sig.size()));
        for (std::size_t k = 0; k < d_sig.size(); ++k) d(static_cast<Eigen::Index>(k)) = d_sig[k](t);
        return d;
    };

    const Matrix Q_T = tracking_weight(cfg.Q);
    const int per_episode = cfg.windows / cfg.restarts;
    const double h = cfg.sample_period / cfg.substeps;
    UniformSource restart_draw(derive_seed(cfg.seed, stream::kRestartStates));

    CollectionResult result;
    auto& ds = result.dataset;
    ds.fingerprint = {cfg.sample_period, cfg.alpha, cfg.substeps, Q_T, cfg.seed, cfg.restarts, basis.ordering_hash()};
    ds.augmented_dim = n_aug;
    ds.control_dim = model.control_dim;
    ds.disturbance_dim = model.disturbance_dim;
    ds.basis = basis;
    ds.windows.reserve(static_cast<std::size_t>(cfg.windows));

    for (int episode = 0; episode < cfg.restarts; ++episode) {
        Vector x0 = cfg.initial_state;
        if (episode > 0) {
            for (int i = 0; i < n_aug; ++i) x0(i) = restart_draw.next(-cfg.restart_half_width, cfg.restart_half_width);
        }
        // Episodes continue along the time axis so each sees fresh excitation.
        const double t0 = episode * per_episode * cfg.sample_period;
        SimulationGrid grid{t0, t0 + per_episode * cfg.sample_period, h};
        Trajectory traj = simulate_trajectory(model, x0, control, disturbance, grid);
        if (static_cast<int>(traj.size()) != per_episode * cfg.substeps + 1) {
            throw ContractViolation("fine grid does not align with the sampling windows");
        }
        for (int i = 0; i < per_episode; ++i) {
            std::span<const TrajectorySample> slice(traj.data() + static_cast<std::ptrdiff_t>(i) * cfg.substeps,
                                                    static_cast<std::size_t>(cfg.substeps) + 1);
            WindowStatistics stats = compute_window_statistics(basis, slice, cfg.alpha, Q_T);
            if (cfg.keep_raw) stats.samples.assign(slice.begin(), slice.end());
            ds.windows.push_back(std::move(stats));
        }
        result.trace.insert(result.trace.end(), std::make_move_iterator(traj.begin()),
                            std::make_move_iterator(traj.end()));
    }
    return result;
}

namespace {

constexpr char kMagic[8] = {'D', 'P', 'I', 'D', 'S', 'E', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "dataset archive assumes a little-endian host");

void write_doubles(std::ostream& out, const double* data, Eigen::Index count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, Eigen::Index count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw DataError("dataset archive is truncated");
}

nlohmann::json table_json(const MonomialTable& t) {
    return {{"n_vars", t.n_vars()}, {"exponents", t.exponents()}};
}

MonomialTable table_from_json(const nlohmann::json& j) {
    return MonomialTable(j.at("n_vars").get<int>(), j.at("exponents").get<std::vector<Exponents>>());
}

}  // namespace

void save_dataset(const std::string& path, const WindowDataset& ds) {
    nlohmann::json header;
    const auto& fp = ds.fingerprint;
    std::vector<std::vector<double>> qt(static_cast<std::size_t>(fp.Q_T.rows()));
    for (Eigen::Index i = 0; i < fp.Q_T.rows(); ++i) {
        for (Eigen::Index j = 0; j < fp.Q_T.cols(); ++j) qt[static_cast<std::size_t>(i)].push_back(fp.Q_T(i, j));
    }
    header["fingerprint"] = {{"T", fp.sample_period}, {"alpha", fp.alpha},       {"M", fp.substeps},
                             {"Q_T", qt},             {"seed", fp.seed},         {"restarts", fp.restarts},
                             {"basis_hash", fp.basis_hash}};
    header["dims"] = {{"augmented", ds.augmented_dim}, {"control", ds.control_dim}, {"disturbance", ds.disturbance_dim}};
    header["basis"] = {{"ordering", "degree ascending, then descending lexicographic exponents"},
                       {"critic", table_json(ds.basis.critic)},
                       {"actor_u", table_json(ds.basis.actor_u)},
                       {"actor_d", table_json(ds.basis.actor_d)}};
    header["windows"] = ds.windows.size();
    header["config"] = ds.config_echo.empty() ? nlohmann::json() : nlohmann::json::parse(ds.config_echo);
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& w : ds.windows) {
        write_doubles(out, &w.start_time, 1);
        write_doubles(out, &w.duration, 1);
        write_doubles(out, w.rho_start.data(), w.rho_start.size());
        write_doubles(out, w.rho_end.data(), w.rho_end.size());
        write_doubles(out, &w.I_Q, 1);
        write_doubles(out, w.I_phi_u.data(), w.I_phi_u.size());
        write_doubles(out, w.I_phi_phi.data(), w.I_phi_phi.size());
        write_doubles(out, w.I_vphi_d.data(), w.I_vphi_d.size());
        write_doubles(out, w.I_vphi_vphi.data(), w.I_vphi_vphi.size());
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

WindowDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
        throw DataError("'" + path + "' is not a dataset archive");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1u << 30)) throw DataError("corrupt dataset header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("dataset header is truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt dataset header: ") + e.what());
    }

    WindowDataset ds;
    try {
        const auto& fp = header.at("fingerprint");
        ds.fingerprint.sample_period = fp.at("T").get<double>();
        ds.fingerprint.alpha = fp.at("alpha").get<double>();
        ds.fingerprint.substeps = fp.at("M").get<int>();
        ds.fingerprint.seed = fp.at("seed").get<std::uint64_t>();
        ds.fingerprint.restarts = fp.at("restarts").get<int>();
        ds.fingerprint.basis_hash = fp.at("basis_hash").get<std::string>();
        const auto qt = fp.at("Q_T").get<std::vector<std::vector<double>>>();
        ds.fingerprint.Q_T = Matrix::Zero(static_cast<Eigen::Index>(qt.size()), static_cast<Eigen::Index>(qt.size()));
        for (std::size_t i = 0; i < qt.size(); ++i) {
            for (std::size_t j = 0; j < qt[i].size(); ++j) {
                ds.fingerprint.Q_T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = qt[i][j];
            }
        }
        ds.augmented_dim = header.at("dims").at("augmented").get<int>();
        ds.control_dim = header.at("dims").at("control").get<int>();
        ds.disturbance_dim = header.at("dims").at("disturbance").get<int>();
        ds.basis = {table_from_json(header.at("basis").at("critic")), table_from_json(header.at("basis").at("actor_u")),
                    table_from_json(header.at("basis").at("actor_d"))};
        if (!header.at("config").is_null()) ds.config_echo = header.at("config").dump();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dataset header is missing fields: ") + e.what());
    }
    if (ds.basis.ordering_hash() != ds.fingerprint.basis_hash) {
        throw DataError("dataset basis tables do not match their recorded hash");
    }

    const auto count = header.at("windows").get<std::size_t>();
    const Eigen::Index L1 = ds.basis.critic_size(), L2 = ds.basis.actor_u_size(), L3 = ds.basis.actor_d_size();
    ds.windows.resize(count);
    for (auto& w : ds.windows) {
        read_doubles(in, &w.start_time, 1);
        read_doubles(in, &w.duration, 1);
        w.rho_start.resize(L1);
        w.rho_end.resize(L1);
        w.I_phi_u.resize(L2, ds.control_dim);
        w.I_phi_phi.resize(L2, L2);
        w.I_vphi_d.resize(L3, ds.disturbance_dim);
        w.I_vphi_vphi.resize(L3, L3);
        read_doubles(in, w.rho_start.data(), L1);
        read_doubles(in, w.rho_end.data(), L1);
        read_doubles(in, &w.I_Q, 1);
        read_doubles(in, w.I_phi_u.data(), w.I_phi_u.size());
        read_doubles(in, w.I_phi_phi.data(), w.I_phi_phi.size());
        read_doubles(in, w.I_vphi_d.data(), w.I_vphi_d.size());
        read_doubles(in, w.I_vphi_vphi.data(), w.I_vphi_vphi.size());
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("dataset archive has trailing bytes");
    return ds;
}

}  // namespace deltapi
