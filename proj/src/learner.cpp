#include "deltapi/learner.hpp"

#include "deltapi/errors.hpp"
#include "deltapi/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deltapi {

WeightSet WeightSet::zeros(const BasisSet& basis, int control_dim, int disturbance_dim) {
    return {Vector::Zero(basis.critic_size()), Matrix::Zero(basis.actor_u_size(), control_dim),
            Matrix::Zero(basis.actor_d_size(), disturbance_dim)};
}

Vector WeightSet::stacked() const {
    Vector w(critic.size() + actor_u.size() + actor_d.size());
    // Column-major storage already orders actor columns one after another.
    w << critic, actor_u.reshaped(), actor_d.reshaped();
    return w;
}

WeightSet WeightSet::unstack(const Vector& w, const BasisSet& basis, int control_dim, int disturbance_dim) {
    const Eigen::Index L1 = basis.critic_size(), L2 = basis.actor_u_size(), L3 = basis.actor_d_size();
    if (w.size() != L1 + control_dim * L2 + disturbance_dim * L3) {
        throw ContractViolation("stacked weight vector has wrong length");
    }
    WeightSet out;
    out.critic = w.head(L1);
    out.actor_u = w.segment(L1, control_dim * L2).reshaped(L2, control_dim);
    out.actor_d = w.tail(disturbance_dim * L3).reshaped(L3, disturbance_dim);
    return out;
}

bool WeightSet::all_finite() const {
    return critic.allFinite() && actor_u.allFinite() && actor_d.allFinite();
}

void TrainConfig::validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) throw ContractViolation("delta must lie in (0, 1]");
    if (!(gamma > 0.0)) throw ContractViolation("gamma must be positive");
    if (!(alpha >= 0.0)) throw ContractViolation("alpha must be non-negative");
    if (R.size() == 0 || (R.array() <= 0.0).any()) throw ContractViolation("R must be a positive diagonal");
    if (Q.rows() == 0 || Q.rows() != Q.cols()) throw ContractViolation("Q must be square and non-empty");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
        throw ContractViolation("Q must be symmetric");
    }
    if (Eigen::LLT<Matrix>(Q).info() != Eigen::Success) throw ContractViolation("Q must be positive definite");
    if (!(stop_tol > 0.0)) throw ContractViolation("stop_tol must be positive");
    if (max_iters < 1) throw ContractViolation("max_iters must be at least 1");
    if (!(ridge >= 0.0)) throw ContractViolation("ridge must be non-negative");
}

namespace {

void check_window_shapes(const WindowStatistics& w, const WeightSet& prev, const TrainConfig& cfg) {
    if (w.rho_start.size() != prev.critic.size() || w.rho_end.size() != prev.critic.size() ||
        w.I_phi_phi.rows() != prev.actor_u.rows() || w.I_phi_u.cols() != prev.actor_u.cols() ||
        w.I_vphi_vphi.rows() != prev.actor_d.rows() || w.I_vphi_d.cols() != prev.actor_d.cols() ||
        cfg.R.size() != prev.actor_u.cols()) {
        throw ContractViolation("window statistics, weights and config disagree in dimension");
    }
}

}  // namespace

Vector assemble_regressor(const WindowStatistics& w, const WeightSet& prev, const TrainConfig& cfg) {
    check_window_shapes(w, prev, cfg);
    const Eigen::Index L1 = prev.critic.size(), L2 = prev.actor_u.rows(), L3 = prev.actor_d.rows();
    const Eigen::Index m = prev.actor_u.cols(), q = prev.actor_d.cols();
    const double g2 = cfg.gamma * cfg.gamma;

    Vector row(L1 + m * L2 + q * L3);
    row.head(L1) = std::exp(-cfg.alpha * w.duration) * w.rho_end - w.rho_start;
    for (Eigen::Index j = 0; j < m; ++j) {
        // int e phi (u_j - u_i,j) expands through the stored integrals.
        row.segment(L1 + j * L2, L2) = 2.0 * cfg.R(j) * (w.I_phi_u.col(j) - w.I_phi_phi * prev.actor_u.col(j));
    }
    for (Eigen::Index k = 0; k < q; ++k) {
        row.segment(L1 + m * L2 + k * L3, L3) =
            -2.0 * g2 * (w.I_vphi_d.col(k) - w.I_vphi_vphi * prev.actor_d.col(k));
    }
    return row;
}

double assemble_target(const WindowStatistics& w, const WeightSet& prev, const TrainConfig& cfg) {
    check_window_shapes(w, prev, cfg);
    const double g2 = cfg.gamma * cfg.gamma;
    const double damp = 1.0 - cfg.delta;

    double reward = w.I_Q;
    double control_cross = 0.0;
    for (Eigen::Index j = 0; j < prev.actor_u.cols(); ++j) {
        const auto a = prev.actor_u.col(j);
        const Vector pa = w.I_phi_phi * a;
        reward += cfg.R(j) * a.dot(pa);
        control_cross += cfg.R(j) * a.dot(w.I_phi_u.col(j) - pa);
    }
    double disturbance_cross = 0.0;
    for (Eigen::Index k = 0; k < prev.actor_d.cols(); ++k) {
        const auto b = prev.actor_d.col(k);
        const Vector vb = w.I_vphi_vphi * b;
        reward -= g2 * b.dot(vb);
        disturbance_cross += b.dot(w.I_vphi_d.col(k) - vb);
    }
    const double value_change = prev.critic.dot(std::exp(-cfg.alpha * w.duration) * w.rho_end - w.rho_start);
    return -cfg.delta * reward + damp * value_change + 2.0 * damp * control_cross - 2.0 * damp * g2 * disturbance_cross;
}

LeastSquaresResult solve_least_squares(const Matrix& A, const Vector& b, double ridge) {
    if (A.rows() != b.size()) throw ContractViolation("regressor and target row counts differ");
    if (!A.allFinite() || !b.allFinite()) throw DataError("non-finite regressor or target entries");
    if (A.rows() < A.cols() && ridge == 0.0) {
        throw SingularRegressor("fewer equations than unknowns", std::numeric_limits<double>::infinity());
    }

    // A P = Q R shares its singular values with R, which is only cols x cols.
    const Eigen::ColPivHouseholderQR<Matrix> qr(A);
    const Eigen::Index k = std::min(A.rows(), A.cols());
    const Matrix r_factor = qr.matrixR().topRows(k).triangularView<Eigen::Upper>();
    const Vector sv = Eigen::JacobiSVD<Matrix>(r_factor).singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = (sv.size() && A.rows() >= A.cols()) ? sv(sv.size() - 1) : 0.0;
    const double ratio = smax > 0.0 ? smin / smax : 0.0;
    const double cond = ratio > 0.0 ? 1.0 / (ratio * ratio) : std::numeric_limits<double>::infinity();

    LeastSquaresResult out;
    out.cond_estimate = cond;
    if (ridge > 0.0) {
        Matrix aug(A.rows() + A.cols(), A.cols());
        aug << A, std::sqrt(ridge) * Matrix::Identity(A.cols(), A.cols());
        Vector rhs = Vector::Zero(aug.rows());
        rhs.head(b.size()) = b;
        out.solution = aug.colPivHouseholderQr().solve(rhs);
    } else {
        if (ratio < kRankTolerance) {
            throw SingularRegressor("regressor is rank deficient (normal-matrix condition " + std::to_string(cond) +
                                        "); collect richer data or set a ridge term",
                                    cond);
        }
        out.solution = qr.solve(b);
    }
    if (!out.solution.allFinite()) throw DataError("least-squares solution is not finite");
    out.residual_norm = (A * out.solution - b).norm();
    return out;
}

WeightSet solve_weights(const WindowDataset& dataset, const WeightSet& prev, const TrainConfig& cfg,
                        IterationRecord* record) {
    const auto rows = static_cast<Eigen::Index>(dataset.windows.size());
    const Eigen::Index cols = dataset.unknowns();
    if (rows <= cols) {
        check_rank_condition(static_cast<int>(rows), dataset.basis, dataset.control_dim, dataset.disturbance_dim);
    }
    Matrix A(rows, cols);
    Vector b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& w = dataset.windows[static_cast<std::size_t>(i)];
        A.row(i) = assemble_regressor(w, prev, cfg).transpose();
        b(i) = assemble_target(w, prev, cfg);
    }
    const LeastSquaresResult ls = solve_least_squares(A, b, cfg.ridge);
    WeightSet next = WeightSet::unstack(ls.solution, dataset.basis, dataset.control_dim, dataset.disturbance_dim);
    if (record != nullptr) {
        record->delta_w_norm = (next.stacked() - prev.stacked()).norm();
        record->ls_residual = ls.residual_norm;
        record->cond_estimate = ls.cond_estimate;
    }
    return next;
}

void check_dataset_matches(const WindowDataset& dataset, const TrainConfig& cfg) {
    const auto& fp = dataset.fingerprint;
    if (fp.alpha != cfg.alpha) {
        throw FingerprintMismatch("dataset was collected with alpha = " + std::to_string(fp.alpha) +
                                  ", config has " + std::to_string(cfg.alpha));
    }
    const Matrix Q_T = tracking_weight(cfg.Q);
    if (fp.Q_T.rows() != Q_T.rows() || fp.Q_T != Q_T) {
        throw FingerprintMismatch("dataset Q_T differs from the configured Q");
    }
    if (fp.basis_hash != dataset.basis.ordering_hash()) {
        throw FingerprintMismatch("dataset basis hash is inconsistent");
    }
    if (cfg.R.size() != dataset.control_dim) throw FingerprintMismatch("R does not match the control dimension");
}

TrainResult offpolicy_train(const WindowDataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    check_dataset_matches(dataset, cfg);

    TrainResult result;
    WeightSet current = WeightSet::zeros(dataset.basis, dataset.control_dim, dataset.disturbance_dim);
    for (int i = 0; i < cfg.max_iters; ++i) {
        IterationRecord rec;
        rec.iteration = i + 1;
        WeightSet next = solve_weights(dataset, current, cfg, &rec);
        result.trace.push_back(rec);
        result.history.push_back(next);
        current = std::move(next);
        if (rec.delta_w_norm < cfg.stop_tol) {
            result.converged = true;
            break;
        }
    }
    result.weights = std::move(current);
    return result;
}

Vector critic_control(const SystemModel& model, const BasisSet& basis, const Vector& critic, const TrainConfig& cfg,
                      const Vector& x) {
    const Vector grad = eval_basis_jacobian(basis.critic, x).transpose() * critic;
    const Vector gv = augmented_input_matrix(model, x).transpose() * grad;
    return -0.5 * gv.cwiseQuotient(cfg.R);
}

Vector critic_disturbance(const SystemModel& model, const BasisSet& basis, const Vector& critic,
                          const TrainConfig& cfg, const Vector& x) {
    const Vector grad = eval_basis_jacobian(basis.critic, x).transpose() * critic;
    return augmented_disturbance_matrix(model, x).transpose() * grad / (2.0 * cfg.gamma * cfg.gamma);
}

namespace {

// Least-squares projection of gradient policies onto the actor bases over the visited states.
void project_actors(const SystemModel& model, const BasisSet& basis, const TrainConfig& cfg,
                    const std::vector<Vector>& states, WeightSet& weights) {
    const auto rows = static_cast<Eigen::Index>(states.size());
    Matrix phi(rows, basis.actor_u_size());
    Matrix vphi(rows, basis.actor_d_size());
    Matrix u(rows, model.control_dim);
    Matrix d(rows, model.disturbance_dim);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector& x = states[static_cast<std::size_t>(i)];
        phi.row(i) = eval_basis(basis.actor_u, x).transpose();
        vphi.row(i) = eval_basis(basis.actor_d, x).transpose();
        u.row(i) = critic_control(model, basis, weights.critic, cfg, x).transpose();
        d.row(i) = critic_disturbance(model, basis, weights.critic, cfg, x).transpose();
    }
    // Minimum-norm solution: visited states may not excite every actor feature.
    weights.actor_u = phi.completeOrthogonalDecomposition().solve(u);
    weights.actor_d = vphi.completeOrthogonalDecomposition().solve(d);
}

}  // namespace

TrainResult onpolicy_train(const SystemModel& model, const BasisSet& basis, const TrainConfig& cfg,
                           const EpisodeSpec& episodes) {
    cfg.validate();
    model.validate();
    const int n_aug = model.augmented_dim();
    if (basis.critic.n_vars() != n_aug) throw ContractViolation("critic basis does not match the augmented state");
    if (episodes.box_low.size() != n_aug || episodes.box_high.size() != n_aug) {
        throw ContractViolation("episode box has wrong dimension");
    }
    if (episodes.initial_states < 1 || episodes.windows_per_state < 1 || episodes.substeps < 2 ||
        !(episodes.sample_period > 0.0)) {
        throw ContractViolation("invalid episode settings");
    }
    const int total_windows = episodes.initial_states * episodes.windows_per_state;
    if (total_windows <= basis.critic_size()) {
        throw RankConditionViolation("on-policy iteration needs more than " + std::to_string(basis.critic_size()) +
                                     " windows, got " + std::to_string(total_windows));
    }

    UniformSource draw(derive_seed(episodes.seed, stream::kOnPolicyStates));
    std::vector<Vector> starts;
    for (int s = 0; s < episodes.initial_states; ++s) {
        Vector x0(n_aug);
        for (int i = 0; i < n_aug; ++i) x0(i) = draw.next(episodes.box_low(i), episodes.box_high(i));
        starts.push_back(x0);
    }

    const Matrix Q_T = tracking_weight(cfg.Q);
    const double g2 = cfg.gamma * cfg.gamma;
    const double h = episodes.sample_period / episodes.substeps;
    const double end_discount = std::exp(-cfg.alpha * episodes.sample_period);

    TrainResult result;
    Vector critic = Vector::Zero(basis.critic_size());
    std::vector<Vector> visited;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const InputLaw control = [&](double, const Vector& x) { return critic_control(model, basis, critic, cfg, x); };
        const InputLaw disturbance = [&](double, const Vector& x) {
            return critic_disturbance(model, basis, critic, cfg, x);
        };

        Matrix A(total_windows, basis.critic_size());
        Vector b(total_windows);
        visited.clear();
        Eigen::Index row = 0;
        for (const Vector& x0 : starts) {
            const SimulationGrid grid{0.0, episodes.windows_per_state * episodes.sample_period, h};
            Trajectory traj;
            try {
                traj = simulate_closed_loop(model, x0, control, disturbance, grid);
            } catch (const IntegrationFailure& e) {
                throw IterationAborted(std::string("simulation failed under iterate policy: ") + e.what(), it + 1);
            }
            for (const auto& smp : traj) {
                if (smp.state.cwiseAbs().maxCoeff() > episodes.divergence_bound) {
                    throw IterationAborted("state left the divergence bound at t = " + std::to_string(smp.t) +
                                               " under iterate " + std::to_string(it + 1),
                                           it + 1);
                }
            }
            for (int wdx = 0; wdx < episodes.windows_per_state; ++wdx) {
                const std::size_t first = static_cast<std::size_t>(wdx) * episodes.substeps;
                std::vector<double> integrand(static_cast<std::size_t>(episodes.substeps) + 1);
                for (std::size_t k = 0; k < integrand.size(); ++k) {
                    const auto& smp = traj[first + k];
                    integrand[k] = smp.state.dot(Q_T * smp.state) + smp.control.dot(cfg.R.cwiseProduct(smp.control)) -
                                   g2 * smp.disturbance.squaredNorm();
                    visited.push_back(smp.state);
                }
                const Vector rho0 = eval_basis(basis.critic, traj[first].state);
                const Vector rho1 = eval_basis(basis.critic, traj[first + episodes.substeps].state);
                const Vector diff = end_discount * rho1 - rho0;
                A.row(row) = diff.transpose();
                b(row) = -cfg.delta * discounted_quadrature(integrand, cfg.alpha, h) +
                         (1.0 - cfg.delta) * critic.dot(diff);
                ++row;
            }
        }
        const LeastSquaresResult ls = solve_least_squares(A, b, cfg.ridge);
        IterationRecord rec{it + 1, (ls.solution - critic).norm(), ls.residual_norm, ls.cond_estimate};
        critic = ls.solution;
        result.trace.push_back(rec);
        WeightSet snapshot = WeightSet::zeros(basis, model.control_dim, model.disturbance_dim);
        snapshot.critic = critic;
        result.history.push_back(snapshot);
        if (rec.delta_w_norm < cfg.stop_tol) {
            result.converged = true;
            break;
        }
    }
    result.weights = WeightSet::zeros(basis, model.control_dim, model.disturbance_dim);
    result.weights.critic = critic;
    project_actors(model, basis, cfg, visited, result.weights);
    return result;
}

Vector PolicyPair::control(const Vector& x) const {
    return weights_.actor_u.transpose() * eval_basis(basis_.actor_u, x);
}

Vector PolicyPair::disturbance(const Vector& x) const {
    return weights_.actor_d.transpose() * eval_basis(basis_.actor_d, x);
}

PolicyPair extract_policies(const WeightSet& weights, const BasisSet& basis) {
    if (weights.critic.size() != basis.critic_size() || weights.actor_u.rows() != basis.actor_u_size() ||
        weights.actor_d.rows() != basis.actor_d_size()) {
        throw ContractViolation("weights do not match the basis");
    }
    return PolicyPair(weights, basis);
}

double hji_residual(const SystemModel& model, const Vector& critic, const BasisSet& basis, const TrainConfig& cfg,
                    const Vector& x) {
    if (critic.size() != basis.critic_size()) throw ContractViolation("critic weights do not match the basis");
    const Matrix Q_T = tracking_weight(cfg.Q);
    const double value = critic.dot(eval_basis(basis.critic, x));
    const Vector grad = eval_basis_jacobian(basis.critic, x).transpose() * critic;
    const Vector gv = augmented_input_matrix(model, x).transpose() * grad;
    const Vector kv = augmented_disturbance_matrix(model, x).transpose() * grad;
    return x.dot(Q_T * x) - cfg.alpha * value + grad.dot(augmented_drift(model, x)) -
           0.25 * gv.dot(gv.cwiseQuotient(cfg.R)) + kv.squaredNorm() / (4.0 * cfg.gamma * cfg.gamma);
}

}  // namespace deltapi
