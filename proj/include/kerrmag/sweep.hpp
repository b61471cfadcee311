#pragma once

// Quasi-static forward/backward scans of drive power or detuning with
// branch continuation, as in an adiabatic experimental sweep.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kerrmag/cubic.hpp"

namespace kerrmag {

enum class SweepVariable { Power, Detuning };
enum class Direction { Forward, Backward };

[[nodiscard]] std::string_view to_string(SweepVariable v);
[[nodiscard]] std::string_view to_string(Direction d);

struct SweepPlan {
    SweepVariable variable = SweepVariable::Power;
    double start = 0.0;  // mW or MHz
    double stop = 0.0;
    int steps = 2;
    double fixed = 0.0;  // detuning (MHz) for power sweeps, power (mW) for detuning sweeps
    double linewidth = 1.0;
    double coupling = 0.0;

    /// Throws UsageError on steps < 2 or start == stop, DomainError on bad physics.
    void validate() const;
    /// Evenly spaced scan values from start to stop, inclusive.
    [[nodiscard]] std::vector<double> grid() const;
    /// The cubic at one scan value.
    [[nodiscard]] CubicProblem problem_at(double param) const;
};

struct TracePoint {
    double param = 0.0;
    double shift = 0.0;          // MHz
    std::size_t root_index = 0;  // index into solve_shift(problem_at(param)).roots
    bool switched = false;       // first point after a jump
};

struct SwitchEvent {
    double param = 0.0;  // midpoint of the step where the occupied branch vanished
    double shift_before = 0.0;
    double shift_after = 0.0;
};

struct Trace {
    Direction direction = Direction::Forward;
    std::vector<TracePoint> points;  // in scan order
    std::vector<SwitchEvent> switches;
    bool degenerate = false;  // c == 0: flat zero trace
};

struct SweepResult {
    Trace forward;
    Trace backward;
};

/// Forward scan start -> stop, then backward scan stop -> start continuing from
/// the forward end state.
[[nodiscard]] SweepResult run_sweep(const SweepPlan& plan);

/// Same continuation on an explicit scan grid (forward order). Plan start/stop/steps are ignored.
[[nodiscard]] SweepResult run_sweep(const SweepPlan& plan, std::span<const double> forward_grid);

enum class Orientation { CW, CCW, None };

[[nodiscard]] std::string_view to_string(Orientation o);

struct HysteresisLoop {
    double area = 0.0;
    Orientation orientation = Orientation::None;
    std::optional<double> switch_up;    // forward-scan switch
    std::optional<double> switch_down;  // backward-scan switch
};

/// Area below which a loop is considered closed (natural units).
inline constexpr double kLoopAreaTolerance = 1e-6;

/// Shoelace area of the closed curve traced by the forward scan followed by the
/// backward scan, with the parameter to the right and the shift upwards.
/// Throws UsageError when the traces do not cover the same grid.
[[nodiscard]] HysteresisLoop loop_metrics(const Trace& forward, const Trace& backward);

/// Pointwise xi * shift with switch events carried over.
[[nodiscard]] Trace upper_branch_shift(const Trace& lp_trace, double xi);

/// d(shift)/d(param) along a stable branch by implicit differentiation.
[[nodiscard]] double branch_slope(const SweepPlan& plan, double param, double shift);

}  // namespace kerrmag
