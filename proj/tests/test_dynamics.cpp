#include "deltapi/dynamics.hpp"
#include "deltapi/errors.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace deltapi;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Vector one(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("augmented derivative of the benchmark") {
    const SystemModel model = benchmark_model();

    SUBCASE("origin is an equilibrium") {
        CHECK(augmented_derivative(model, Vector::Zero(4), one(0), one(0)).isZero(0.0));
    }
    SUBCASE("collection start state") {
        const Vector dx = augmented_derivative(model, vec({-1, 1, 1, 0}), one(0), one(0));
        CHECK(dx.isApprox(vec({1.0, 1.75, 0.0, -2.25}), 1e-15));
    }
    SUBCASE("control and disturbance both enter the second row") {
        const Vector dx = augmented_derivative(model, vec({0, 0, 1, 0}), one(1), one(1));
        CHECK(dx.isApprox(vec({0.0, 3.25, 0.0, -2.25}), 1e-15));
    }
    SUBCASE("dimension mismatches are contract violations") {
        CHECK_THROWS_AS(augmented_derivative(model, Vector::Zero(3), one(0), one(0)), ContractViolation);
        CHECK_THROWS_AS(augmented_derivative(model, Vector::Zero(4), Vector::Zero(2), one(0)), ContractViolation);
        CHECK_THROWS_AS(augmented_derivative(model, Vector::Zero(4), one(0), Vector::Zero(0)), ContractViolation);
    }
}

TEST_CASE("reference rows never see the inputs") {
    const SystemModel model = benchmark_model();
    UniformSource draw(11);
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(4);
        for (int i = 0; i < 4; ++i) x(i) = draw.next(-3, 3);
        const Vector a = augmented_derivative(model, x, one(0), one(0));
        const Vector b = augmented_derivative(model, x, one(draw.next(-5, 5)), one(draw.next(-5, 5)));
        CHECK(a.tail(2) == b.tail(2));
    }
}

TEST_CASE("augmented state ordering") {
    const AugmentedState s = AugmentedState::from_plant(vec({0.5, 2.0}), vec({1.0, 1.5}));
    CHECK(s.stacked() == vec({-0.5, 0.5, 1.0, 1.5}));
    const AugmentedState back = AugmentedState::from_stacked(s.stacked(), 2);
    CHECK(back.tracking_error == s.tracking_error);
    CHECK(back.reference == s.reference);
    CHECK_THROWS_AS(AugmentedState::from_stacked(Vector::Zero(3), 2), ContractViolation);
}

TEST_CASE("model validation") {
    CHECK_NOTHROW(benchmark_model().validate());
    CHECK_NOTHROW(scalar_lq_model().validate());
    SystemModel bad = benchmark_model();
    bad.drift = [](const Vector& x) { return Vector(x.array() + 1.0); };
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    CHECK_THROWS_AS(model_preset("pendulum"), ContractViolation);
    CHECK(benchmark_model().finite_at(vec({1, 2, 3, 4})));
}

TEST_CASE("simulation grid") {
    CHECK(SimulationGrid{0.0, 1.0, 0.001}.steps() == 1000);
    CHECK(SimulationGrid{0.0, 50.0, 0.001}.steps() == 50000);
    CHECK_THROWS_AS(SimulationGrid({0.0, 1.0, 0.3}).steps(), ContractViolation);
    CHECK_THROWS_AS(SimulationGrid({0.0, 1.0, 0.0}).validate(), ContractViolation);
    CHECK_THROWS_AS(SimulationGrid({0.0, 1.0, -0.1}).validate(), ContractViolation);
    CHECK_THROWS_AS(SimulationGrid({1.0, 1.0, 0.1}).validate(), ContractViolation);
}

TEST_CASE("rk4 step") {
    SUBCASE("zero field leaves the state unchanged") {
        const Derivative zero = [](double, const Vector& x) { return Vector::Zero(x.size()).eval(); };
        const Vector x = vec({1.5, -2.0, 3.0});
        CHECK(rk4_step(zero, 0.0, x, 0.1) == x);
    }
    SUBCASE("exponential growth") {
        const Derivative grow = [](double, const Vector& x) { return x; };
        CHECK(rk4_step(grow, 0.0, one(1.0), 0.1)(0) == doctest::Approx(std::exp(0.1)).epsilon(1e-7));
    }
    SUBCASE("non-finite derivative reports the time") {
        const Derivative blow = [](double t, const Vector& x) {
            return t > 0.25 ? Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN()).eval() : x;
        };
        try {
            rk4_step(blow, 0.2, one(1.0), 0.1);
            FAIL("expected IntegrationFailure");
        } catch (const IntegrationFailure& e) {
            // The failing stage lies inside the step [0.2, 0.3].
            CHECK(e.time() >= 0.2);
            CHECK(e.time() <= 0.3 + 1e-12);
        }
    }
}

TEST_CASE("reference generator matches its closed form") {
    const SystemModel model = benchmark_model();
    const Signal zero = [](double) { return one(0); };
    const Trajectory traj = simulate_trajectory(model, vec({0, 0, 1, 0}), zero, zero, {0.0, 1.0, 0.001});
    REQUIRE(traj.size() == 1001);
    const Vector r_end = traj.back().state.tail(2);
    CHECK(std::abs(r_end(0) - std::cos(1.5)) < 1e-6);
    CHECK(std::abs(r_end(1) + 1.5 * std::sin(1.5)) < 1e-6);
    CHECK(r_end(0) == doctest::Approx(0.0707372).epsilon(1e-5));
    CHECK(r_end(1) == doctest::Approx(-1.4962424).epsilon(1e-6));

    double worst = 0.0;
    for (const auto& s : traj) {
        worst = std::max(worst, std::abs(s.state(2) - std::cos(1.5 * s.t)));
        worst = std::max(worst, std::abs(s.state(3) + 1.5 * std::sin(1.5 * s.t)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("rk4 is fourth order on the reference generator") {
    const SystemModel model = benchmark_model();
    const Signal zero = [](double) { return one(0); };
    auto max_error = [&](double h) {
        const Trajectory traj = simulate_trajectory(model, vec({0, 0, 1, 0}), zero, zero, {0.0, 10.0, h});
        double worst = 0.0;
        for (const auto& s : traj) {
            worst = std::max(worst, std::abs(s.state(2) - std::cos(1.5 * s.t)));
            worst = std::max(worst, std::abs(s.state(3) + 1.5 * std::sin(1.5 * s.t)));
        }
        return worst;
    };
    for (double h : {0.1, 0.05, 0.02}) {
        const double ratio = max_error(h) / max_error(h / 2);
        CAPTURE(h);
        CHECK(ratio >= 14.0);
    }
}

TEST_CASE("simulation") {
    const SystemModel model = benchmark_model();
    const Signal zero = [](double) { return one(0); };

    SUBCASE("zero inputs from the origin stay at zero") {
        for (const auto& s : simulate_trajectory(model, Vector::Zero(4), zero, zero, {0.0, 2.0, 0.01})) {
            CHECK(s.state.isZero(0.0));
        }
    }
    SUBCASE("reference evolution ignores tracking error and inputs") {
        const Signal wiggle = [](double t) { return one(std::sin(3 * t)); };
        const Trajectory a = simulate_trajectory(model, vec({0, 0, 1, 0.5}), zero, zero, {0.0, 5.0, 0.01});
        const Trajectory b = simulate_trajectory(model, vec({0.7, -0.3, 1, 0.5}), wiggle, wiggle, {0.0, 5.0, 0.01});
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].state.tail(2) == b[k].state.tail(2));
    }
    SUBCASE("seeded behavior signals replay bit for bit") {
        const BehaviorSignal u(default_control_signal(3));
        const BehaviorSignal d(default_disturbance_signal(4));
        const Signal us = [&](double t) { return one(u(t)); };
        const Signal ds = [&](double t) { return one(d(t)); };
        const Trajectory a = simulate_trajectory(model, vec({-1, 1, 1, 0}), us, ds, {0.0, 5.0, 0.01});
        const Trajectory b = simulate_trajectory(model, vec({-1, 1, 1, 0}), us, ds, {0.0, 5.0, 0.01});
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].state == b[k].state);
            CHECK(a[k].control == b[k].control);
        }
    }
    SUBCASE("recorded inputs are the grid-point values") {
        const Signal ramp = [](double t) { return one(t); };
        const Trajectory traj = simulate_trajectory(model, Vector::Zero(4), ramp, zero, {0.0, 1.0, 0.1});
        for (const auto& s : traj) CHECK(s.control(0) == s.t);
    }
    SUBCASE("closed-loop laws see the state") {
        const InputLaw damp = [](double, const Vector& x) { return one(-3.0 * x(0)); };
        const InputLaw none = [](double, const Vector&) { return one(0); };
        const Trajectory traj = simulate_closed_loop(scalar_lq_model(), vec({1, 0}), damp, none, {0.0, 1.0, 0.01});
        CHECK(traj.back().state(0) == doctest::Approx(std::exp(-4.0)).epsilon(1e-6));
        CHECK(traj.back().state(1) == 0.0);
    }
    SUBCASE("divergence surfaces as an integration failure") {
        const Signal huge = [](double) { return one(1e200); };
        CHECK_THROWS_AS(simulate_trajectory(model, vec({1, 1, 0, 0}), huge, zero, {0.0, 1.0, 0.01}),
                        IntegrationFailure);
    }
}
