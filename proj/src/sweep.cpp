#include "kerrmag/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kerrmag/errors.hpp"

namespace kerrmag {

namespace {

// Which side of the unstable band (where dF/dshift < 0) a root sits on.
// A stable root can only leave its side through a fold, so a change of side
// between consecutive scan points is a switch.
enum class Side { Unbanded, Below, Above };

Side side_of(const CubicProblem& problem, double shift) {
    const auto folds = fold_shifts(problem.detuning, problem.linewidth);
    if (folds.empty()) {
        return Side::Unbanded;
    }
    return shift < 0.5 * (folds[0] + folds[1]) ? Side::Below : Side::Above;
}

struct State {
    double shift = 0.0;
    Side side = Side::Unbanded;
};

struct Choice {
    std::size_t index = 0;
    double shift = 0.0;
    Side side = Side::Unbanded;
};

std::vector<std::size_t> stable_indices(const SteadyStateSet& set) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < set.roots.size(); ++k) {
        if (set.roots[k].stability == Stability::Stable) {
            idx.push_back(k);
        }
    }
    if (idx.empty()) {
        // Only reachable exactly at the cusp, where the triple root is marginal.
        for (std::size_t k = 0; k < set.roots.size(); ++k) {
            idx.push_back(k);
        }
    }
    return idx;
}

Choice nearest(const CubicProblem& problem, const SteadyStateSet& set, const std::vector<std::size_t>& candidates,
               double target) {
    std::size_t best = candidates.front();
    for (std::size_t k : candidates) {
        if (std::abs(set.roots[k].shift - target) < std::abs(set.roots[best].shift - target)) {
            best = k;
        }
    }
    return {best, set.roots[best].shift, side_of(problem, set.roots[best].shift)};
}

Choice initial_choice(const CubicProblem& problem) {
    const auto set = solve_shift(problem);
    const auto candidates = stable_indices(set);
    // Low-|shift| branch: the one connected to zero shift at zero drive.
    return nearest(problem, set, candidates, 0.0);
}

Choice continue_from(const CubicProblem& problem, const State& prev) {
    const auto set = solve_shift(problem);
    const auto candidates = stable_indices(set);
    if (prev.side != Side::Unbanded) {
        for (std::size_t k : candidates) {
            const Side s = side_of(problem, set.roots[k].shift);
            if (s == prev.side) {
                return {k, set.roots[k].shift, s};
            }
        }
    }
    return nearest(problem, set, candidates, prev.shift);
}

Trace continue_along(const SweepPlan& plan, std::span<const double> grid, Direction direction,
                     const std::optional<State>& entry) {
    Trace trace;
    trace.direction = direction;
    trace.degenerate = plan.coupling == 0.0;
    trace.points.reserve(grid.size());

    State state = entry.value_or(State{});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const CubicProblem problem = plan.problem_at(grid[i]);
        Choice choice;
        if (i == 0 && !entry) {
            choice = initial_choice(problem);
        } else {
            choice = continue_from(problem, state);
        }
        TracePoint point{grid[i], choice.shift, choice.index, false};
        if (i > 0 && state.side != Side::Unbanded && choice.side != Side::Unbanded && choice.side != state.side) {
            point.switched = true;
            trace.switches.push_back({0.5 * (grid[i - 1] + grid[i]), state.shift, choice.shift});
        }
        trace.points.push_back(point);
        state = {choice.shift, choice.side};
    }
    return trace;
}

}  // namespace

std::string_view to_string(SweepVariable v) { return v == SweepVariable::Power ? "power" : "detuning"; }

std::string_view to_string(Direction d) { return d == Direction::Forward ? "fwd" : "bwd"; }

std::string_view to_string(Orientation o) {
    switch (o) {
        case Orientation::CW:
            return "CW";
        case Orientation::CCW:
            return "CCW";
        case Orientation::None:
            break;
    }
    return "None";
}

void SweepPlan::validate() const {
    if (steps < 2) {
        throw UsageError("sweep needs at least 2 steps");
    }
    if (!std::isfinite(start) || !std::isfinite(stop) || start == stop) {
        throw UsageError("sweep start and stop must be finite and distinct");
    }
    if (!std::isfinite(fixed) || !std::isfinite(coupling)) {
        throw DomainError("sweep fixed value and coupling must be finite");
    }
    if (!(linewidth > 0.0)) {
        throw DomainError("linewidth gamma_LP must be > 0");
    }
    if (variable == SweepVariable::Power && std::min(start, stop) < 0.0) {
        throw DomainError("power sweep range must be >= 0 mW");
    }
    if (variable == SweepVariable::Detuning && fixed < 0.0) {
        throw DomainError("held power must be >= 0 mW");
    }
}

std::vector<double> SweepPlan::grid() const {
    std::vector<double> g(static_cast<std::size_t>(steps));
    const double step = (stop - start) / (steps - 1);
    for (int k = 0; k < steps; ++k) {
        g[static_cast<std::size_t>(k)] = start + step * k;
    }
    g.back() = stop;
    return g;
}

CubicProblem SweepPlan::problem_at(double param) const {
    if (variable == SweepVariable::Power) {
        return {fixed, linewidth, coupling, param};
    }
    return {param, linewidth, coupling, fixed};
}

SweepResult run_sweep(const SweepPlan& plan) {
    plan.validate();
    const auto grid = plan.grid();
    return run_sweep(plan, grid);
}

SweepResult run_sweep(const SweepPlan& plan, std::span<const double> forward_grid) {
    if (forward_grid.empty()) {
        throw UsageError("sweep grid is empty");
    }
    SweepResult result;
    result.forward = continue_along(plan, forward_grid, Direction::Forward, std::nullopt);

    std::vector<double> reversed(forward_grid.rbegin(), forward_grid.rend());
    const auto& last = result.forward.points.back();
    const State entry{last.shift, side_of(plan.problem_at(last.param), last.shift)};
    result.backward = continue_along(plan, reversed, Direction::Backward, entry);
    return result;
}

HysteresisLoop loop_metrics(const Trace& forward, const Trace& backward) {
    const auto n = forward.points.size();
    if (n == 0 || backward.points.size() != n) {
        throw UsageError("loop_metrics: traces must be non-empty and the same length");
    }
    double scale = 0.0;
    for (const auto& p : forward.points) {
        scale = std::max(scale, std::abs(p.param));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double a = forward.points[k].param;
        const double b = backward.points[n - 1 - k].param;
        if (std::abs(a - b) > 1e-9 * std::max(1.0, scale)) {
            throw UsageError("loop_metrics: forward and backward traces use different grids");
        }
    }

    // Closed polygon: forward scan, then backward scan, back to the start.
    std::vector<std::pair<double, double>> vertices;
    vertices.reserve(2 * n);
    for (const auto& p : forward.points) {
        vertices.emplace_back(p.param, p.shift);
    }
    for (const auto& p : backward.points) {
        vertices.emplace_back(p.param, p.shift);
    }
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& [x, y] : vertices) {
        cx += x;
        cy += y;
    }
    cx /= static_cast<double>(vertices.size());
    cy /= static_cast<double>(vertices.size());
    double twice_area = 0.0;
    for (std::size_t k = 0; k < vertices.size(); ++k) {
        const auto& [x0, y0] = vertices[k];
        const auto& [x1, y1] = vertices[(k + 1) % vertices.size()];
        twice_area += (x0 - cx) * (y1 - cy) - (x1 - cx) * (y0 - cy);
    }
    const double signed_area = 0.5 * twice_area;

    HysteresisLoop loop;
    loop.area = std::abs(signed_area);
    if (loop.area < kLoopAreaTolerance) {
        loop.area = 0.0;
        loop.orientation = Orientation::None;
    } else {
        loop.orientation = signed_area > 0.0 ? Orientation::CCW : Orientation::CW;
    }
    if (!forward.switches.empty()) {
        loop.switch_up = forward.switches.front().param;
    }
    if (!backward.switches.empty()) {
        loop.switch_down = backward.switches.front().param;
    }
    return loop;
}

Trace upper_branch_shift(const Trace& lp_trace, double xi) {
    if (!std::isfinite(xi)) {
        throw UsageError("shift ratio must be finite");
    }
    Trace up = lp_trace;
    for (auto& p : up.points) {
        p.shift *= xi;
    }
    for (auto& s : up.switches) {
        s.shift_before *= xi;
        s.shift_after *= xi;
    }
    return up;
}

double branch_slope(const SweepPlan& plan, double param, double shift) {
    const CubicProblem problem = plan.problem_at(param);
    const double fp = problem.slope(shift);
    if (fp == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    if (plan.variable == SweepVariable::Power) {
        return plan.coupling / fp;
    }
    return -2.0 * (shift + problem.detuning) * shift / fp;
}

}  // namespace kerrmag
