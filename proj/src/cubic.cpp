#include "kerrmag/cubic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "kerrmag/errors.hpp"

namespace kerrmag {

namespace {

constexpr double kMergeDistance = 1e-7;  // MHz
constexpr double kEps = std::numeric_limits<double>::epsilon();

double half_width_sq(double linewidth) { return 0.25 * linewidth * linewidth; }

// The non-driven part [(s + d)^2 + h] s.
double undriven(double shift, double detuning, double h) {
    const double u = shift + detuning;
    return (u * u + h) * shift;
}

double curvature(const CubicProblem& p, double shift) { return 6.0 * shift + 4.0 * p.detuning; }

// Every real root satisfies |shift| <= max(2|detuning|, cbrt(4|cP|)).
double root_bound(const CubicProblem& p) {
    const double b = std::max(2.0 * std::abs(p.detuning), std::cbrt(4.0 * std::abs(p.drive())));
    return b * (1.0 + 1e-12) + std::numeric_limits<double>::min();
}

// Closed-form real roots of the monic cubic via its depressed form.
std::vector<double> closed_form_roots(const CubicProblem& p) {
    const double h = half_width_sq(p.linewidth);
    const double d = p.detuning;
    const double shift_back = -2.0 * d / 3.0;
    const double pp = h - d * d / 3.0;
    const double qq = -2.0 * d * d * d / 27.0 - 2.0 * d * h / 3.0 - p.drive();
    const double disc = 0.25 * qq * qq + pp * pp * pp / 27.0;
    if (disc > 0.0) {
        const double a = -std::copysign(std::cbrt(0.5 * std::abs(qq) + std::sqrt(disc)), qq);
        const double b = (a != 0.0) ? -pp / (3.0 * a) : 0.0;
        return {a + b + shift_back};
    }
    if (pp == 0.0) {
        return {shift_back};
    }
    const double m = 2.0 * std::sqrt(-pp / 3.0);
    const double arg = std::clamp(3.0 * qq / (pp * m), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    std::vector<double> out;
    for (int k = 0; k < 3; ++k) {
        out.push_back(m * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) + shift_back);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Safeguarded Newton on a bracket where F changes sign.
double polish_in_bracket(const CubicProblem& p, double lo, double hi, double seed) {
    double f_lo = p.residual(lo);
    const double target = 1e-3 * p.residual_tolerance();
    double x = (seed > lo && seed < hi) ? seed : 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double fx = p.residual(x);
        if (std::abs(fx) <= target || fx == 0.0) {
            return x;
        }
        if ((fx < 0.0) == (f_lo < 0.0)) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        if (hi - lo <= 4.0 * kEps * std::max(std::abs(lo), std::abs(hi))) {
            break;
        }
        const double fp = p.slope(x);
        double next = (fp != 0.0) ? x - fx / fp : lo - 1.0;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    // Bracket exhausted: return whichever end point has the smaller residual.
    const double candidates[] = {x, lo, hi};
    return *std::min_element(std::begin(candidates), std::end(candidates), [&](double a, double b) {
        return std::abs(p.residual(a)) < std::abs(p.residual(b));
    });
}

double seed_in(const std::vector<double>& seeds, double lo, double hi) {
    for (double s : seeds) {
        if (s > lo && s < hi) {
            return s;
        }
    }
    return 0.5 * (lo + hi);
}

// True when F has a root of multiplicity >= 2 at the critical point `s`:
// either F(s) vanishes to rounding, or the two roots it would split into are
// closer than kMergeDistance.
bool is_double_root(const CubicProblem& p, double s) {
    const double fs = p.residual(s);
    const double scale = std::abs(undriven(s, p.detuning, half_width_sq(p.linewidth))) + std::abs(p.drive());
    if (std::abs(fs) <= 64.0 * kEps * scale) {
        return true;
    }
    const double f2 = std::abs(curvature(p, s));
    if (f2 == 0.0) {
        return false;
    }
    return 2.0 * std::sqrt(2.0 * std::abs(fs) / f2) <= kMergeDistance;
}

}  // namespace

void CubicProblem::validate() const {
    if (!std::isfinite(detuning) || !std::isfinite(coupling) || !std::isfinite(power) ||
        !std::isfinite(linewidth)) {
        throw DomainError("cubic problem fields must be finite");
    }
    if (!(linewidth > 0.0)) {
        throw DomainError("linewidth gamma_LP must be > 0");
    }
    if (power < 0.0) {
        throw DomainError("drive power must be >= 0");
    }
}

double CubicProblem::residual(double shift) const {
    return undriven(shift, detuning, half_width_sq(linewidth)) - drive();
}

double CubicProblem::slope(double shift) const {
    return 3.0 * shift * shift + 4.0 * detuning * shift + detuning * detuning + half_width_sq(linewidth);
}

double CubicProblem::residual_tolerance() const { return 1e-9 * std::max(1.0, std::abs(drive())); }

int SteadyStateSet::count() const {
    int n = 0;
    for (const auto& r : roots) {
        n += r.multiplicity;
    }
    return n;
}

std::vector<double> SteadyStateSet::stable_shifts() const {
    std::vector<double> out;
    for (const auto& r : roots) {
        if (r.stability == Stability::Stable) {
            out.push_back(r.shift);
        }
    }
    return out;
}

std::vector<double> fold_shifts(double detuning, double linewidth) {
    const double h = half_width_sq(linewidth);
    const double disc = detuning * detuning - 3.0 * h;
    if (!(disc > 0.0) || detuning == 0.0) {
        return {};
    }
    // Roots of 3 s^2 + 4 d s + (d^2 + h), written to avoid cancellation.
    const double big = (-2.0 * detuning - std::copysign(std::sqrt(disc), detuning)) / 3.0;
    const double small = (detuning * detuning + h) / (3.0 * big);
    return {std::min(big, small), std::max(big, small)};
}

StabilityClass classify_stability(const CubicProblem& problem, double root) {
    if (!(std::abs(problem.residual(root)) <= problem.residual_tolerance())) {
        throw UsageError("value is not a root of the steady-state cubic");
    }
    const double slope = problem.slope(root);
    const double d = problem.detuning;
    const double scale = 3.0 * root * root + 4.0 * std::abs(d * root) + d * d + half_width_sq(problem.linewidth);
    if (std::abs(slope) <= 1e-12 * scale) {
        return {Stability::Unstable, true};
    }
    return {slope > 0.0 ? Stability::Stable : Stability::Unstable, false};
}

SteadyStateSet solve_shift(const CubicProblem& problem) {
    problem.validate();
    SteadyStateSet out;
    if (problem.drive() == 0.0) {
        out.roots.push_back({0.0, Stability::Stable, 1});
        return out;
    }

    const double bound = root_bound(problem);
    const auto seeds = closed_form_roots(problem);
    auto simple_root = [&](double lo, double hi) {
        const double x = polish_in_bracket(problem, lo, hi, seed_in(seeds, lo, hi));
        SteadyState s{x, classify_stability(problem, x).stability, 1};
        return s;
    };
    auto fold_root = [&](double s, int multiplicity) {
        out.fold_boundary = true;
        return SteadyState{s, Stability::Unstable, multiplicity};
    };

    const auto folds = fold_shifts(problem.detuning, problem.linewidth);
    if (folds.empty()) {
        // Monotone cubic. A vanishing-discriminant inflection can still be a triple root.
        const double inflection = -2.0 * problem.detuning / 3.0;
        if (std::abs(problem.slope(inflection)) <= 1e-12 * (problem.detuning * problem.detuning + 1.0) &&
            is_double_root(problem, inflection)) {
            out.roots.push_back(fold_root(inflection, 3));
        } else {
            out.roots.push_back(simple_root(-bound, bound));
        }
        return out;
    }

    const double s1 = folds[0];  // local maximum of F
    const double s2 = folds[1];  // local minimum of F
    if (s2 - s1 <= kMergeDistance && is_double_root(problem, 0.5 * (s1 + s2))) {
        out.roots.push_back(fold_root(0.5 * (s1 + s2), 3));
        return out;
    }
    const bool double_low = is_double_root(problem, s1);
    const bool double_high = is_double_root(problem, s2);
    const double f1 = problem.residual(s1);
    const double f2 = problem.residual(s2);

    if (double_low) {
        out.roots.push_back(fold_root(s1, 2));
        out.roots.push_back(simple_root(s2, bound));
    } else if (double_high) {
        out.roots.push_back(simple_root(-bound, s1));
        out.roots.push_back(fold_root(s2, 2));
    } else if (f1 > 0.0 && f2 < 0.0) {
        out.roots.push_back(simple_root(-bound, s1));
        out.roots.push_back(simple_root(s1, s2));
        out.roots.push_back(simple_root(s2, bound));
    } else if (f2 > 0.0) {
        out.roots.push_back(simple_root(-bound, s1));
    } else {
        out.roots.push_back(simple_root(s2, bound));
    }
    return out;
}

double bistability_threshold(double linewidth) { return std::sqrt(3.0) * 0.5 * linewidth; }

std::optional<BistabilityWindow> fold_points(double detuning, double linewidth, double coupling) {
    if (coupling == 0.0) {
        throw DomainError("fold_points requires c != 0");
    }
    if (!(linewidth > 0.0)) {
        throw DomainError("linewidth gamma_LP must be > 0");
    }
    if (!(detuning * coupling < 0.0)) {
        return std::nullopt;
    }
    const auto folds = fold_shifts(detuning, linewidth);
    if (folds.empty()) {
        return std::nullopt;
    }
    const double h = half_width_sq(linewidth);
    const double p_a = undriven(folds[0], detuning, h) / coupling;
    const double p_b = undriven(folds[1], detuning, h) / coupling;
    BistabilityWindow w;
    if (p_a < p_b) {
        w.P_lower = p_a;
        w.P_upper = p_b;
        w.shift_at_folds = {folds[0], folds[1]};
    } else {
        w.P_lower = p_b;
        w.P_upper = p_a;
        w.shift_at_folds = {folds[1], folds[0]};
    }
    if (!(w.P_lower > 0.0) || !(w.P_upper > w.P_lower)) {
        return std::nullopt;
    }
    return w;
}

std::optional<std::pair<double, double>> detuning_window(double power, double linewidth, double coupling) {
    if (coupling == 0.0) {
        throw DomainError("detuning_window requires c != 0");
    }
    if (!(power > 0.0) || !(linewidth > 0.0)) {
        throw UsageError("detuning_window requires power > 0 and linewidth > 0");
    }
    if (coupling < 0.0) {
        // F is odd under (shift, detuning, c) -> -(shift, detuning, c).
        const auto mirrored = detuning_window(power, linewidth, -coupling);
        if (!mirrored) {
            return std::nullopt;
        }
        return std::make_pair(-mirrored->second, -mirrored->first);
    }

    // c > 0: bistability only for detuning < -threshold. Both fold powers grow
    // monotonically with |detuning| and meet at the cusp.
    const double threshold = bistability_threshold(linewidth);
    const double h = half_width_sq(linewidth);
    const double cusp_power = 8.0 * h * threshold / (9.0 * coupling);
    if (!(power > cusp_power)) {
        return std::nullopt;
    }
    auto fold_power = [&](double detuning, bool lower) {
        const auto w = fold_points(detuning, linewidth, coupling);
        if (!w) {
            return cusp_power;
        }
        return lower ? w->P_lower : w->P_upper;
    };

    double far = -2.0 * threshold;
    for (int k = 0; k < 200 && fold_power(far, true) <= power; ++k) {
        far *= 2.0;
    }
    if (fold_power(far, true) <= power) {
        throw NumericalError("detuning_window: failed to bracket the lower fold");
    }
    // Returns the detuning in [far, -threshold] at which the chosen fold power equals `power`.
    auto bisect = [&](bool lower) {
        double outer = far;         // fold power > power
        double inner = -threshold;  // fold power <= power (cusp)
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (outer + inner);
            if (mid == outer || mid == inner) {
                break;
            }
            if (fold_power(mid, lower) > power) {
                outer = mid;
            } else {
                inner = mid;
            }
        }
        return 0.5 * (outer + inner);
    };
    const double low_edge = bisect(true);    // upper-branch fold merges here
    const double high_edge = bisect(false);  // lower-branch fold merges here
    if (!(low_edge < high_edge)) {
        return std::nullopt;
    }
    return std::make_pair(low_edge, high_edge);
}

}  // namespace kerrmag
