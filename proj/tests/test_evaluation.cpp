#include "deltapi/evaluation.hpp"
#include "deltapi/errors.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace deltapi;
using namespace deltapi::testing;

namespace {

EvaluationSettings benchmark_settings() { return {0.1, 10.0 * Matrix::Identity(2, 2), Vector::Ones(1), 20.0}; }

Vector one(double v) { return Vector::Constant(1, v); }

/// Report on a uniform grid with constant series, energies left for attenuation_ratio to fill.
EvaluationReport constant_report(double e_value, double u_value, double d_value, double t_end, double h) {
    EvaluationReport r;
    r.settings = benchmark_settings();
    const auto steps = static_cast<std::size_t>(std::llround(t_end / h));
    for (std::size_t k = 0; k <= steps; ++k) {
        r.t.push_back(static_cast<double>(k) * h);
        r.x.push_back(Vector::Zero(2));
        r.r.push_back(Vector::Zero(2));
        r.e.push_back(Vector::Constant(2, e_value));
        r.u.push_back(one(u_value));
        r.d.push_back(one(d_value));
    }
    return r;
}

const ControlPolicy zero_policy = [](const Vector&) { return one(0.0); };

}  // namespace

TEST_CASE("decaying cosine disturbance") {
    const DecayingCosine d;
    CHECK(d(0.0) == 1.55);
    CHECK(d(10.0) == doctest::Approx(1.55 * std::exp(-0.8) * std::cos(3.0)));
    CHECK(std::abs(d(45.0)) <= 1.55 * 0.028);
}

TEST_CASE("cumulative discounted trapezoid") {
    std::vector<double> t, ones;
    for (int k = 0; k <= 50000; ++k) {
        t.push_back(0.001 * k);
        ones.push_back(1.0);
    }
    const auto out = cumulative_discounted_trapezoid(t, ones, 0.1);
    CHECK(out[0] == 0.0);
    CHECK(std::abs(out.back() / ((1.0 - std::exp(-5.0)) / 0.1) - 1.0) <= 1e-6);

    std::vector<double> wave;
    for (double tk : t) wave.push_back(std::cos(0.3 * tk));
    const auto w = cumulative_discounted_trapezoid(t, wave, 0.08);
    const double a = 0.08, om = 0.3, T = 50.0;
    const double exact = (a + std::exp(-a * T) * (om * std::sin(om * T) - a * std::cos(om * T))) / (a * a + om * om);
    CHECK(std::abs(w.back() / exact - 1.0) <= 1e-6);

    CHECK_THROWS_AS(cumulative_discounted_trapezoid(t, std::vector<double>(3, 1.0), 0.1), ContractViolation);
}

TEST_CASE("open-loop reference follows its closed form") {
    const Signal none = [](double) { return one(0.0); };
    const EvaluationReport rep = closed_loop_run(benchmark_model(), zero_policy, none, Eigen::Vector2d(0.0, 1.5),
                                                 Eigen::Vector2d(0.0, 1.5), {0.0, 10.0, 0.001}, benchmark_settings());
    REQUIRE(rep.t.size() == 10001);
    double worst = 0.0;
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        worst = std::max(worst, std::abs(rep.r[k](0) - std::sin(1.5 * rep.t[k])));
        worst = std::max(worst, std::abs(rep.r[k](1) - 1.5 * std::cos(1.5 * rep.t[k])));
    }
    CHECK(worst <= 1e-6);
    for (const auto& r : rep.ratio) CHECK_FALSE(r.has_value());
    CHECK_FALSE(rep.final_ratio().has_value());
}

TEST_CASE("benchmark scenario starts on the reference") {
    const DecayingCosine shape;
    const Signal d = [&](double t) { return one(shape(t)); };
    const EvaluationReport rep = closed_loop_run(benchmark_model(), zero_policy, d, Eigen::Vector2d(0.0, 1.5),
                                                 Eigen::Vector2d(0.0, 1.5), {0.0, 1.0, 0.001}, benchmark_settings());
    CHECK(rep.e.front().isZero(0.0));
    CHECK(rep.d.front()(0) == 1.55);
    CHECK_FALSE(rep.ratio.front().has_value());
    CHECK(rep.ratio.back().has_value());
}

TEST_CASE("closed loop feeds the augmented state to the policy") {
    std::vector<Vector> seen;
    const ControlPolicy spy = [&](const Vector& X) {
        seen.push_back(X);
        return one(0.0);
    };
    const Signal none = [](double) { return one(0.0); };
    closed_loop_run(benchmark_model(), spy, none, Eigen::Vector2d(0.5, 1.0), Eigen::Vector2d(0.0, 1.5),
                    {0.0, 0.01, 0.01}, benchmark_settings());
    REQUIRE(!seen.empty());
    CHECK(seen.front().isApprox(Eigen::Vector4d(0.5, -0.5, 0.0, 1.5)));
}

TEST_CASE("closed loop preconditions") {
    const Signal none = [](double) { return one(0.0); };
    CHECK_THROWS_AS(closed_loop_run(benchmark_model(), zero_policy, none, Vector::Zero(3), Vector::Zero(2),
                                    {0.0, 1.0, 0.01}, benchmark_settings()),
                    ContractViolation);
    const ControlPolicy wide = [](const Vector&) { return Vector::Zero(2).eval(); };
    CHECK_THROWS_AS(closed_loop_run(benchmark_model(), wide, none, Vector::Zero(2), Vector::Zero(2),
                                    {0.0, 1.0, 0.01}, benchmark_settings()),
                    ContractViolation);
    const ControlPolicy wild = [](const Vector& X) { return one(1e300 * (1.0 + X(1))); };
    CHECK_THROWS_AS(closed_loop_run(benchmark_model(), wild, none, Vector::Zero(2), Vector::Zero(2),
                                    {0.0, 1.0, 0.01}, benchmark_settings()),
                    IntegrationFailure);
}

TEST_CASE("attenuation ratio") {
    SUBCASE("no output energy gives a zero ratio") {
        const auto ratio = attenuation_ratio(constant_report(0.0, 0.0, 0.7, 1.0, 0.01));
        CHECK_FALSE(ratio.front().has_value());
        for (std::size_t k = 1; k < ratio.size(); ++k) CHECK(*ratio[k] == 0.0);
    }
    SUBCASE("no disturbance leaves the ratio undefined") {
        for (const auto& r : attenuation_ratio(constant_report(0.3, 0.2, 0.0, 1.0, 0.01))) CHECK_FALSE(r.has_value());
    }
    SUBCASE("constant series") {
        // (2 * 10 * 0.3^2 + 0.2^2) / 0.7^2 at every instant.
        const auto ratio = attenuation_ratio(constant_report(0.3, 0.2, 0.7, 1.0, 0.01));
        CHECK(*ratio.back() == doctest::Approx((20.0 * 0.09 + 0.04) / 0.49).epsilon(1e-12));
    }
    SUBCASE("scaling the disturbance scales the denominator quadratically") {
        EvaluationReport base = constant_report(0.3, 0.2, 0.7, 1.0, 0.01);
        for (std::size_t k = 0; k < base.d.size(); ++k) base.d[k](0) = std::sin(0.05 * static_cast<double>(k));
        EvaluationReport scaled = base;
        for (auto& d : scaled.d) d *= 3.0;
        const auto a = attenuation_ratio(base);
        const auto b = attenuation_ratio(scaled);
        for (std::size_t k = 0; k < a.size(); ++k) {
            REQUIRE(a[k].has_value() == b[k].has_value());
            if (a[k]) CHECK(*a[k] == doctest::Approx(9.0 * *b[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("performance index") {
    TrainConfig cfg = benchmark_train_config();
    SUBCASE("all-zero series") {
        CHECK(performance_index(constant_report(0.0, 0.0, 0.0, 5.0, 0.001), cfg) == 0.0);
    }
    SUBCASE("constant integrand") {
        // e'Qe + u'Ru - gamma^2 d'd = 20 * 0.04 + 0.25 - 25 * 0.01 = 0.8.
        const double c = 0.8;
        const double J = performance_index(constant_report(0.2, 0.5, 0.1, 50.0, 0.001), cfg);
        CHECK(std::abs(J / (c * (1.0 - std::exp(-5.0)) / 0.1) - 1.0) <= 1e-6);
    }
    SUBCASE("pure disturbance is negative") {
        const DecayingCosine shape;
        EvaluationReport r = constant_report(0.0, 0.0, 0.0, 50.0, 0.001);
        for (std::size_t k = 0; k < r.t.size(); ++k) r.d[k](0) = shape(r.t[k]);
        CHECK(performance_index(r, cfg) < 0.0);
    }
}

TEST_CASE("tail error uses the configured window") {
    const Signal none = [](double) { return one(0.0); };
    EvaluationSettings s = benchmark_settings();
    s.tail_start = 0.5;
    const ControlPolicy push = [](const Vector&) { return one(1.0); };
    const EvaluationReport rep =
        closed_loop_run(benchmark_model(), push, none, Vector::Zero(2), Vector::Zero(2), {0.0, 1.0, 0.001}, s);
    double expected = 0.0;
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        if (rep.t[k] >= 0.5) expected = std::max(expected, rep.e[k].cwiseAbs().maxCoeff());
    }
    CHECK(rep.tail_max_error == expected);
    CHECK(rep.tail_max_error > 0.0);
}
