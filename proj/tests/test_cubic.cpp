#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kerrmag/constants.hpp"
#include "kerrmag/cubic.hpp"
#include "kerrmag/errors.hpp"
#include "oracles.hpp"

using namespace kerrmag;
using Catch::Approx;

TEST_CASE("zero detuning has a single stable root", "[cubic]") {
    for (double cp : {-500.0, -1.0, 0.3, 1e4}) {
        const CubicProblem p{0.0, 10.65, cp, 1.0};
        const auto s = solve_shift(p);
        REQUIRE(s.count() == 1);
        CHECK(s.roots[0].stability == Stability::Stable);
        CHECK(std::abs(p.residual(s.roots[0].shift)) <= p.residual_tolerance());
    }
}

TEST_CASE("undriven cubic sits at zero", "[cubic]") {
    const auto s = solve_shift({-20.0, 10.65, 3.15, 0.0});
    REQUIRE(s.roots.size() == 1);
    CHECK(s.roots[0].shift == 0.0);
    CHECK(s.roots[0].stability == Stability::Stable);
}

TEST_CASE("roots match the companion matrix", "[cubic]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-40.0, 40.0);
    std::uniform_real_distribution<double> g(0.5, 20.0);
    std::uniform_real_distribution<double> lc(-2.0, 4.0);
    int three = 0;
    for (int i = 0; i < 2000; ++i) {
        const double sign = (i % 2) ? 1.0 : -1.0;
        const CubicProblem p{d(rng), g(rng), sign * std::pow(10.0, lc(rng)), 1.0};
        const auto s = solve_shift(p);
        const auto ref = oracle::companion_roots(p.detuning, p.linewidth, p.drive());
        if (s.fold_boundary) {
            continue;
        }
        REQUIRE(s.roots.size() == ref.size());
        three += s.count() == 3;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            CHECK(s.roots[k].shift == Approx(ref[k]).margin(1e-6 * (1.0 + std::abs(ref[k]))));
            CHECK(std::abs(p.residual(s.roots[k].shift)) <= p.residual_tolerance());
        }
    }
    CHECK(three > 100);
}

TEST_CASE("three-root pattern is stable-unstable-stable", "[cubic]") {
    const CubicProblem p{-14.1, 10.65, 3.15, 150.0};
    const auto s = solve_shift(p);
    REQUIRE(s.count() == 3);
    CHECK(s.roots[0].stability == Stability::Stable);
    CHECK(s.roots[1].stability == Stability::Unstable);
    CHECK(s.roots[2].stability == Stability::Stable);
    CHECK(s.stable_shifts().size() == 2);
    for (const auto& r : s.roots) {
        CHECK(p.slope(r.shift) * (r.stability == Stability::Stable ? 1.0 : -1.0) > 0.0);
    }
}

TEST_CASE("parity: detuning and coupling flip mirror the roots", "[cubic]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-30.0, 30.0);
    std::uniform_real_distribution<double> c(-10.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        const CubicProblem p{d(rng), 8.0, c(rng), 200.0};
        const CubicProblem q{-p.detuning, p.linewidth, -p.coupling, p.power};
        const auto a = solve_shift(p);
        const auto b = solve_shift(q);
        REQUIRE(a.roots.size() == b.roots.size());
        const std::size_t n = a.roots.size();
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(a.roots[k].shift == Approx(-b.roots[n - 1 - k].shift).margin(1e-12));
            CHECK(a.roots[k].stability == b.roots[n - 1 - k].stability);
        }
    }
}

TEST_CASE("classify_stability refuses non-roots", "[cubic]") {
    const CubicProblem p{-14.1, 10.65, 3.15, 150.0};
    CHECK_THROWS_AS(classify_stability(p, 1.2345), UsageError);
    const auto s = solve_shift(p);
    CHECK(classify_stability(p, s.roots[1].shift).stability == Stability::Unstable);
}

TEST_CASE("problem validation", "[cubic]") {
    CHECK_THROWS_AS(solve_shift({0.0, 0.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(solve_shift({0.0, 1.0, 1.0, -1.0}), DomainError);
    CHECK_THROWS_AS(solve_shift({std::nan(""), 1.0, 1.0, 1.0}), DomainError);
}

TEST_CASE("fold shifts zero the slope", "[cubic]") {
    const auto f = fold_shifts(-14.1, 10.65);
    REQUIRE(f.size() == 2);
    const CubicProblem p{-14.1, 10.65, 1.0, 1.0};
    for (double s : f) {
        CHECK(p.slope(s) == Approx(0.0).margin(1e-10));
    }
    CHECK(fold_shifts(-9.0, 10.65).empty());
}

TEST_CASE("bistability threshold", "[cubic]") {
    CHECK(bistability_threshold(10.65) == Approx(9.2232).margin(1e-4));
    CHECK(fold_points(-9.22, 10.65, 3.15) == std::nullopt);
    CHECK(fold_points(-9.23, 10.65, 3.15).has_value());
    CHECK(fold_points(14.1, 10.65, 3.15) == std::nullopt);
    CHECK(fold_points(14.1, 10.65, -3.15).has_value());
    CHECK_THROWS_AS(fold_points(-14.1, 10.65, 0.0), DomainError);
}

TEST_CASE("fold window matches brute-force root counts", "[cubic]") {
    for (double d : {-14.1, -12.1, -10.1, -31.8}) {
        const auto w = fold_points(d, 10.65, 3.15);
        REQUIRE(w.has_value());
        CHECK(w->P_lower < w->P_upper);
        const double span = w->P_upper - w->P_lower;
        for (double frac : {0.05, 0.5, 0.95}) {
            const double p = w->P_lower + frac * span;
            CHECK(oracle::sign_changes(d, 10.65, 3.15 * p) == 3);
            CHECK(solve_shift({d, 10.65, 3.15, p}).count() == 3);
        }
        for (double p : {0.95 * w->P_lower, 1.05 * w->P_upper}) {
            CHECK(oracle::sign_changes(d, 10.65, 3.15 * p) == 1);
            CHECK(solve_shift({d, 10.65, 3.15, p}).count() == 1);
        }
    }
}

TEST_CASE("low-drive window for the first sweep parameters", "[cubic]") {
    const auto w = fold_points(-14.1, 10.65, 3.15);
    REQUIRE(w.has_value());
    CHECK(w->P_lower == Approx(122.0).margin(1.0));
    CHECK(w->P_upper == Approx(179.0).margin(1.0));
}

TEST_CASE("exact fold power collapses into a double root", "[cubic]") {
    const auto w = fold_points(-14.1, 10.65, 3.15);
    REQUIRE(w.has_value());
    const auto s = solve_shift({-14.1, 10.65, 3.15, w->P_lower});
    CHECK(s.fold_boundary);
    CHECK(s.count() == 3);
    bool found = false;
    for (const auto& r : s.roots) {
        if (r.multiplicity == 2) {
            found = true;
            CHECK(r.shift == Approx(w->shift_at_folds.first).margin(1e-6));
        }
    }
    CHECK(found);
}

TEST_CASE("cusp gives a triple root", "[cubic]") {
    const double g = 10.65;
    const double d = -bistability_threshold(g);
    const double h = 0.25 * g * g;
    // At the cusp the triple root is -2d/3 and cP = G(-2d/3).
    const double x = -2.0 * d / 3.0;
    const double cp = ((x + d) * (x + d) + h) * x;
    const auto s = solve_shift({d, g, 1.0, cp});
    REQUIRE_FALSE(s.roots.empty());
    CHECK(s.fold_boundary);
    CHECK(s.roots.size() == 1);
    CHECK(s.roots[0].multiplicity == 3);
    CHECK(s.roots[0].shift == Approx(x).margin(1e-4));
}

TEST_CASE("detuning window brackets the three-root region", "[cubic]") {
    const double g = 10.65;
    for (double c : {3.15, -4.0}) {
        const double power = dbm_to_mw(25.0);
        const auto w = detuning_window(power, g, c);
        REQUIRE(w.has_value());
        CHECK(w->first < w->second);
        CHECK(w->first * c < 0.0);
        CHECK(w->second * c < 0.0);
        const double span = w->second - w->first;
        for (double frac : {0.02, 0.5, 0.98}) {
            const double d = w->first + frac * span;
            CHECK(oracle::sign_changes(d, g, c * power) == 3);
        }
        CHECK(oracle::sign_changes(w->first - 0.02 * span, g, c * power) == 1);
        CHECK(oracle::sign_changes(w->second + 0.02 * span, g, c * power) == 1);
    }
    CHECK_THROWS_AS(detuning_window(10.0, g, 0.0), DomainError);
    CHECK_THROWS_AS(detuning_window(0.0, g, 1.0), UsageError);
}

TEST_CASE("fold roots are boundary-unstable", "[cubic]") {
    const auto w = fold_points(-14.1, 10.65, 3.15);
    REQUIRE(w.has_value());
    for (double p : {w->P_lower, w->P_upper}) {
        const auto s = solve_shift({-14.1, 10.65, 3.15, p});
        REQUIRE(s.fold_boundary);
        for (const auto& r : s.roots) {
            if (r.multiplicity == 2) {
                CHECK(r.stability == Stability::Unstable);
            } else {
                CHECK(r.stability == Stability::Stable);
            }
        }
    }
}

TEST_CASE("shifts follow the sign of the drive", "[cubic]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-40.0, 40.0);
    std::uniform_real_distribution<double> c(-10.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const CubicProblem p{d(rng), 10.65, c(rng), 300.0};
        for (const auto& r : solve_shift(p).roots) {
            CHECK(r.shift * p.drive() > 0.0);
        }
    }
}

TEST_CASE("window exists iff detuning passes the threshold", "[cubic]") {
    const double thr = bistability_threshold(10.65);
    for (double c : {3.15, -4.0}) {
        for (int k = -300; k <= 300; ++k) {
            const double d = 0.1 * k;
            const double signed_d = c > 0.0 ? d : -d;
            if (std::abs(std::abs(d) - thr) < 1e-6) {
                continue;
            }
            CHECK(fold_points(d, 10.65, c).has_value() == (signed_d < -thr));
        }
    }
}

TEST_CASE("fold window holds three roots at 1e4 power samples", "[cubic]") {
    const auto w = fold_points(-14.1, 10.65, 3.15);
    REQUIRE(w.has_value());
    int mismatches = 0;
    for (int k = 0; k < 10000; ++k) {
        const double p = 316.2 * k / 9999.0;
        if (std::abs(p - w->P_lower) < 1e-9 || std::abs(p - w->P_upper) < 1e-9) {
            continue;
        }
        const int expect = w->contains(p) ? 3 : 1;
        mismatches += solve_shift({-14.1, 10.65, 3.15, p}).count() != expect;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("detuning window vanishes below the cusp power", "[cubic]") {
    const double g = 10.65;
    const double c = 2.0;
    // Cusp: triple root where both folds meet.
    const double d = -bistability_threshold(g);
    const double x = -2.0 * d / 3.0;
    const double p_cusp = ((x + d) * (x + d) + 0.25 * g * g) * x / c;
    CHECK_FALSE(detuning_window(0.98 * p_cusp, g, c).has_value());
    CHECK(detuning_window(1.02 * p_cusp, g, c).has_value());
}

TEST_CASE("high-power detuning window lies past the threshold", "[cubic]") {
    const double power = dbm_to_mw(25.0);
    const auto w = detuning_window(power, 10.65, 1.85);
    REQUIRE(w.has_value());
    CHECK(w->second < -bistability_threshold(10.65));
    CHECK(w->first < w->second);
    for (double edge : {w->first, w->second}) {
        const CubicProblem p{edge, 10.65, 1.85, power};
        double merged = 1e300;
        for (double s : fold_shifts(edge, 10.65)) {
            merged = std::min(merged, std::abs(p.residual(s)));
        }
        // At the edge one fold shift is also a root, so F and F' vanish together.
        CHECK(merged <= 1e-6 * std::max(1.0, std::abs(p.drive())));
    }
}
