#include "deltapi/evaluation.hpp"

#include "deltapi/errors.hpp"

#include <cmath>

namespace deltapi {

double DecayingCosine::operator()(double t) const {
    return amplitude * std::exp(-decay * t) * std::cos(frequency * t);
}

std::vector<double> cumulative_discounted_trapezoid(const std::vector<double>& t, const std::vector<double>& values,
                                                    double alpha) {
    if (t.size() != values.size()) throw ContractViolation("time and value series differ in length");
    std::vector<double> out(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double a = std::exp(-alpha * t[k - 1]) * values[k - 1];
        const double b = std::exp(-alpha * t[k]) * values[k];
        out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (a + b);
    }
    return out;
}

namespace {

void fill_energies(EvaluationReport& report) {
    const auto& s = report.settings;
    std::vector<double> output(report.t.size());
    std::vector<double> dist(report.t.size());
    for (std::size_t k = 0; k < report.t.size(); ++k) {
        output[k] = report.e[k].dot(s.Q * report.e[k]) + report.u[k].dot(s.R.cwiseProduct(report.u[k]));
        dist[k] = report.d[k].squaredNorm();
    }
    report.cost_numerator = cumulative_discounted_trapezoid(report.t, output, s.alpha);
    report.disturbance_energy = cumulative_discounted_trapezoid(report.t, dist, s.alpha);
}

}  // namespace

EvaluationReport closed_loop_run(const SystemModel& model, const ControlPolicy& policy, const Signal& disturbance,
                                 const Vector& x0, const Vector& r0, const SimulationGrid& grid,
                                 const EvaluationSettings& settings) {
    model.validate();
    const int n = model.state_dim;
    if (x0.size() != n || r0.size() != n) throw ContractViolation("initial plant/reference state has wrong dimension");
    if (settings.Q.rows() != n || settings.Q.cols() != n || settings.R.size() != model.control_dim) {
        throw ContractViolation("evaluation weights do not match the model");
    }

    auto augmented = [n](const Vector& z) {
        Vector X(2 * n);
        X << z.head(n) - z.tail(n), z.tail(n);
        return X;
    };
    auto checked_control = [&](const Vector& X) {
        Vector u = policy(X);
        if (u.size() != model.control_dim) throw ContractViolation("policy returned wrong control dimension");
        return u;
    };
    // State z = [x; r]: the plant and the command generator, not the error coordinates.
    const Derivative field = [&](double t, const Vector& z) {
        const Vector x = z.head(n);
        const Vector r = z.tail(n);
        const Vector u = checked_control(augmented(z));
        const Vector d = disturbance(t);
        Vector dz(2 * n);
        dz << model.drift(x) + model.input_matrix(x) * u + model.disturbance_matrix(x) * d,
            model.reference_generator(r);
        return dz;
    };

    const std::size_t steps = grid.steps();
    EvaluationReport report;
    report.settings = settings;
    report.t.reserve(steps + 1);
    Vector z(2 * n);
    z << x0, r0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = grid.time_at(k);
        const Vector X = augmented(z);
        report.t.push_back(t);
        report.x.push_back(z.head(n));
        report.r.push_back(z.tail(n));
        report.e.push_back(X.head(n));
        report.u.push_back(checked_control(X));
        report.d.push_back(disturbance(t));
        if (k < steps) z = rk4_step(field, t, z, grid.step);
    }

    fill_energies(report);
    report.ratio = attenuation_ratio(report);
    for (std::size_t k = 0; k < report.t.size(); ++k) {
        if (report.t[k] >= settings.tail_start - 1e-9 * grid.step) {
            report.tail_max_error = std::max(report.tail_max_error, report.e[k].cwiseAbs().maxCoeff());
        }
    }
    return report;
}

std::vector<std::optional<double>> attenuation_ratio(const EvaluationReport& report) {
    EvaluationReport copy;
    const EvaluationReport* src = &report;
    if (report.cost_numerator.size() != report.t.size() || report.disturbance_energy.size() != report.t.size()) {
        copy = report;
        fill_energies(copy);
        src = &copy;
    }
    std::vector<std::optional<double>> out(src->t.size());
    for (std::size_t k = 0; k < src->t.size(); ++k) {
        if (src->disturbance_energy[k] > kMinDisturbanceEnergy) {
            out[k] = src->cost_numerator[k] / src->disturbance_energy[k];
        }
    }
    return out;
}

double performance_index(const EvaluationReport& report, const TrainConfig& cfg) {
    if (report.t.size() < 2) return 0.0;
    const double g2 = cfg.gamma * cfg.gamma;
    std::vector<double> integrand(report.t.size());
    for (std::size_t k = 0; k < report.t.size(); ++k) {
        integrand[k] = report.e[k].dot(cfg.Q * report.e[k]) + report.u[k].dot(cfg.R.cwiseProduct(report.u[k])) -
                       g2 * report.d[k].squaredNorm();
    }
    return cumulative_discounted_trapezoid(report.t, integrand, cfg.alpha).back();
}

}  // namespace deltapi
