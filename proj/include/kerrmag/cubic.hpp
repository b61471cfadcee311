#pragma once

// Steady states of the lower-branch polariton under a single drive:
//
//     F(shift) = [(shift + detuning)^2 + (linewidth / 2)^2] * shift - coupling * power = 0
//
// detuning = omega_LP - omega_d (MHz), linewidth = gamma_LP (MHz),
// coupling = c (MHz^3/mW, signed), power = P_d (mW).

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace kerrmag {

struct CubicProblem {
    double detuning = 0.0;
    double linewidth = 1.0;
    double coupling = 0.0;
    double power = 0.0;

    /// Throws DomainError unless linewidth > 0, power >= 0 and all fields finite.
    void validate() const;

    [[nodiscard]] double drive() const { return coupling * power; }

    /// F(shift).
    [[nodiscard]] double residual(double shift) const;
    /// dF/dshift.
    [[nodiscard]] double slope(double shift) const;
    /// Tolerance on |F| that every reported root satisfies.
    [[nodiscard]] double residual_tolerance() const;
};

enum class Stability { Stable, Unstable };

struct StabilityClass {
    Stability stability = Stability::Stable;
    bool fold_boundary = false;  // dF/dshift vanishes at the root
};

struct SteadyState {
    double shift = 0.0;  // MHz
    Stability stability = Stability::Stable;
    int multiplicity = 1;  // 2 for a collapsed fold root, 3 at the cusp
};

struct SteadyStateSet {
    std::vector<SteadyState> roots;  // ascending in shift
    bool fold_boundary = false;      // a double/triple root was collapsed

    /// Number of real roots counting multiplicity: 1 or 3.
    [[nodiscard]] int count() const;
    [[nodiscard]] std::vector<double> stable_shifts() const;
};

/// All real roots, ascending, each polished to residual_tolerance() and classified.
/// Roots closer than 1e-7 MHz are merged into one fold-boundary entry.
[[nodiscard]] SteadyStateSet solve_shift(const CubicProblem& problem);

/// Slope test: Stable iff dF/dshift > 0. A vanishing slope is reported as
/// Unstable with fold_boundary set. Throws UsageError if `root` does not
/// satisfy the cubic to residual_tolerance().
[[nodiscard]] StabilityClass classify_stability(const CubicProblem& problem, double root);

/// Real zeros of dF/dshift (the fold shifts), ascending. Empty when F is monotone.
[[nodiscard]] std::vector<double> fold_shifts(double detuning, double linewidth);

struct BistabilityWindow {
    double P_lower = 0.0;  // mW
    double P_upper = 0.0;  // mW
    /// Shift of the merging roots at P_lower and at P_upper, MHz.
    std::pair<double, double> shift_at_folds{0.0, 0.0};

    [[nodiscard]] bool contains(double power) const { return power > P_lower && power < P_upper; }
};

/// Power interval with three steady states at fixed detuning.
/// Exists iff detuning * sign(c) < 0 and detuning^2 > 3 (linewidth/2)^2.
/// Throws DomainError for c == 0.
[[nodiscard]] std::optional<BistabilityWindow> fold_points(double detuning, double linewidth, double coupling);

/// |detuning| below which no fold exists: sqrt(3) * linewidth / 2.
[[nodiscard]] double bistability_threshold(double linewidth);

/// Detuning interval with three steady states at fixed power.
/// Throws DomainError for c == 0 and UsageError for non-positive power or linewidth.
[[nodiscard]] std::optional<std::pair<double, double>> detuning_window(double power, double linewidth,
                                                                       double coupling);

}  // namespace kerrmag
