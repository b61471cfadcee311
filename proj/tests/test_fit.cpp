#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "kerrmag/constants.hpp"
#include "kerrmag/errors.hpp"
#include "kerrmag/fit.hpp"
#include "kerrmag/io.hpp"

using namespace kerrmag;
using Catch::Approx;

namespace {

DataSet synthetic(double detuning, double gamma, double c, int n = 25, double noise = 0.0, unsigned seed = 1) {
    SweepPlan plan;
    plan.variable = SweepVariable::Power;
    plan.start = 0.0;
    plan.stop = dbm_to_mw(25.0);
    plan.steps = n;
    plan.fixed = detuning;
    plan.linewidth = gamma;
    plan.coupling = c;
    const auto r = run_sweep(plan);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    DataSet d;
    d.fixed = detuning;
    for (const Trace* t : {&r.forward, &r.backward}) {
        for (const auto& p : t->points) {
            d.records.push_back({p.param, p.shift * (1.0 + noise * nd(rng)), t->direction});
        }
    }
    return d;
}

}  // namespace

TEST_CASE("csv loader accepts both shift headers and direction spellings", "[fit]") {
    std::istringstream in("param,shift_MHz,direction\n1,0.5,fwd\n2,0.7,Forward\n3,0.9,BWD\n4,1.1,backward\n");
    const auto d = load_csv(in);
    REQUIRE(d.records.size() == 4);
    CHECK(d.records[1].direction == Direction::Forward);
    CHECK(d.records[2].direction == Direction::Backward);
    CHECK(d.records[3].shift == 1.1);

    std::istringstream in2("direction,extra,delta_LP_MHz,param\nfwd,x,2.5,7\n");
    const auto d2 = load_csv(in2);
    REQUIRE(d2.records.size() == 1);
    CHECK(d2.records[0].x == 7.0);
    CHECK(d2.records[0].shift == 2.5);
}

TEST_CASE("csv loader reports the offending line", "[fit]") {
    std::istringstream bad("param,shift_MHz,direction\n1,0.5,fwd\n2,0.7,sideways\n");
    try {
        (void)load_csv(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("sideways") != std::string::npos);
    }
    std::istringstream missing("param,direction\n1,fwd\n");
    CHECK_THROWS_AS(load_csv(missing), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(load_csv(empty), ParseError);
    std::istringstream nodata("param,shift_MHz,direction\n");
    CHECK_THROWS_AS(load_csv(nodata), ParseError);
    std::istringstream notnum("param,shift_MHz,direction\n1,abc,fwd\n");
    CHECK_THROWS_AS(load_csv(notnum), ParseError);
}

TEST_CASE("noiseless power sweep recovers c", "[fit]") {
    for (auto [d, c] : {std::pair{-14.1, 3.15}, std::pair{17.2, -4.0}}) {
        const auto data = synthetic(d, 10.65, c);
        FitOptions opt;
        opt.gamma = 10.65;
        opt.c0 = std::copysign(1.0, c);
        const auto r = fit_c(data, opt);
        CHECK(r.converged);
        CHECK(r.c_hat == Approx(c).epsilon(1e-3));
        CHECK(r.rms_residual < 1e-6);
        CHECK_FALSE(r.gamma_hat.has_value());
    }
}

TEST_CASE("free linewidth is recovered too", "[fit]") {
    const auto data = synthetic(-14.1, 10.65, 3.15, 40);
    FitOptions opt;
    opt.gamma = 9.0;
    opt.free_gamma = true;
    opt.c0 = 2.0;
    const auto r = fit_c(data, opt);
    REQUIRE(r.gamma_hat.has_value());
    CHECK(*r.gamma_hat == Approx(10.65).epsilon(1e-3));
    CHECK(r.c_hat == Approx(3.15).epsilon(1e-3));
}

TEST_CASE("direction-blind residuals miss the hysteresis", "[fit]") {
    const auto data = synthetic(-14.1, 10.65, 3.15, 41);
    CHECK(rms_residual(data, 3.15, 10.65) < 1e-9);
    CHECK(rms_residual(data, 3.15, 10.65, ResidualMode::DirectionBlind) > 1.0);
}

TEST_CASE("noisy recovery", "[fit]") {
    int good = 0;
    for (unsigned s = 0; s < 10; ++s) {
        const auto data = synthetic(-14.1, 10.65, 3.15, 25, 0.02, s + 100);
        FitOptions opt;
        opt.gamma = 10.65;
        const auto r = fit_c(data, opt);
        good += std::abs(r.c_hat / 3.15 - 1.0) < 0.05;
    }
    CHECK(good >= 9);
}

TEST_CASE("shift ratio fit through the origin", "[fit]") {
    const auto lp = synthetic(-14.1, 10.65, 3.15);
    DataSet up = lp;
    for (auto& r : up.records) {
        r.shift *= 0.065;
    }
    CHECK(fit_xi(lp, up) == Approx(0.065).epsilon(1e-12));
    DataSet shifted = up;
    shifted.records[0].x += 1.0;
    CHECK_THROWS_AS(fit_xi(lp, shifted), UsageError);
    DataSet zero = lp;
    for (auto& r : zero.records) {
        r.shift = 0.0;
    }
    CHECK_THROWS_AS(fit_xi(zero, up), DomainError);
}

TEST_CASE("dataset validation", "[fit]") {
    DataSet d;
    d.records = {{1.0, 0.0, Direction::Forward}, {2.0, 0.0, Direction::Forward}};
    CHECK_THROWS_AS(d.validate(), UsageError);
    CHECK(d.single_direction());
}

TEST_CASE("all-zero data fits c = 0", "[fit]") {
    DataSet d;
    for (int k = 0; k <= 10; ++k) {
        d.records.push_back({10.0 * k, 0.0, Direction::Forward});
    }
    FitOptions opt;
    opt.gamma = 10.65;
    const auto r = fit_c(d, opt);
    CHECK(r.c_hat == 0.0);
    CHECK(r.rms_residual == 0.0);
}

TEST_CASE("residuals depend on c and power only through their product", "[fit]") {
    const auto data = synthetic(-14.1, 10.65, 3.15, 30, 0.02, 8);
    DataSet scaled = data;
    for (auto& r : scaled.records) {
        r.x *= 4.0;
    }
    for (double c : {2.0, 3.15, 4.0}) {
        CHECK(rms_residual(scaled, c / 4.0, 10.65) == Approx(rms_residual(data, c, 10.65)).epsilon(1e-9));
    }
}

TEST_CASE("matched residuals beat blind residuals on hysteretic data", "[fit]") {
    const auto data = synthetic(-14.1, 10.65, 3.15, 41);
    FitOptions matched;
    matched.gamma = 10.65;
    FitOptions blind = matched;
    blind.mode = ResidualMode::DirectionBlind;
    CHECK(fit_c(data, matched).rms_residual < fit_c(data, blind).rms_residual);
}

TEST_CASE("rms has a single minimum over a decade around truth", "[fit]") {
    const auto data = synthetic(-14.1, 10.65, 3.15, 25);
    std::vector<double> rms;
    for (int k = -50; k <= 50; ++k) {
        rms.push_back(rms_residual(data, 3.15 * std::pow(10.0, k / 100.0), 10.65));
    }
    int minima = 0;
    for (std::size_t i = 1; i + 1 < rms.size(); ++i) {
        minima += rms[i] < rms[i - 1] && rms[i] < rms[i + 1];
    }
    CHECK(minima == 1);
}

TEST_CASE("shift ratio edge cases", "[fit]") {
    const auto lp = synthetic(-31.8, 16.8, 25.2);
    DataSet up = lp;
    for (auto& r : up.records) {
        r.shift = 0.0;
    }
    CHECK(fit_xi(lp, up) == 0.0);

    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    up = lp;
    for (auto& r : up.records) {
        r.shift = 0.062 * r.shift * (1.0 + 0.03 * nd(rng));
    }
    CHECK(fit_xi(lp, up) == Approx(0.062).margin(0.003));
}

TEST_CASE("three-row file loads in order", "[fit]") {
    std::istringstream in("param,shift_MHz,direction\n3,0.1,bwd\n1,0.2,fwd\n2,0.3,fwd\n");
    const auto d = load_csv(in);
    REQUIRE(d.records.size() == 3);
    CHECK(d.records[0] == DataRecord{3.0, 0.1, Direction::Backward});
    CHECK(d.records[1] == DataRecord{1.0, 0.2, Direction::Forward});
    CHECK(d.records[2] == DataRecord{2.0, 0.3, Direction::Forward});
}

TEST_CASE("exported traces load back unchanged", "[fit]") {
    SweepPlan plan{SweepVariable::Power, 0.0, 316.2, 31, -14.1, 10.65, 3.15};
    const auto r = run_sweep(plan);
    std::istringstream fwd(io::trace_csv(r.forward));
    const auto d = load_csv(fwd);
    REQUIRE(d.records.size() == r.forward.points.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(d.records[i].x == io::rounded(r.forward.points[i].param));
        CHECK(d.records[i].shift == io::rounded(r.forward.points[i].shift));
        CHECK(d.records[i].direction == Direction::Forward);
    }
}
