#pragma once

// Semiclassical two-mode dynamics in the frame rotating at the drive frequency.
//
//   da/dt = -[i(w_c - w_d) + kappa/2] a - i g_m b
//   db/dt = -[i(w_m - w_d + 2K|b|^2) + gamma_m/2] b - i g_m a - i Omega_d
//
// Parameters use the MHz ordinary-frequency convention (K in MHz per
// excitation). Time is in microseconds; rates are multiplied by 2pi internally.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kerrmag/cubic.hpp"
#include "kerrmag/errors.hpp"
#include "kerrmag/model.hpp"

namespace kerrmag {

using complex = std::complex<double>;

struct ModeAmplitudes {
    complex a{0.0, 0.0};  // cavity
    complex b{0.0, 0.0};  // magnon

    [[nodiscard]] double cavity_number() const { return std::norm(a); }
    [[nodiscard]] double magnon_number() const { return std::norm(b); }
    [[nodiscard]] bool finite() const;

    ModeAmplitudes& operator+=(const ModeAmplitudes& o) {
        a += o.a;
        b += o.b;
        return *this;
    }
    friend ModeAmplitudes operator+(ModeAmplitudes l, const ModeAmplitudes& r) { return l += r; }
    friend ModeAmplitudes operator*(double s, const ModeAmplitudes& m) { return {s * m.a, s * m.b}; }
};

struct SystemParams {
    CavityParams cavity;
    MagnonParams magnon;
};

struct DriveTerm {
    double frequency = 0.0;  // omega_d, MHz
    double strength = 0.0;   // Omega_d, MHz

    /// Omega_d = sqrt(eta * P). eta in MHz^2/mW.
    static DriveTerm from_power(double frequency, double power_mw, double eta);
    void validate() const;
};

struct SimConfig {
    double t_end = 10.0;  // us
    double dt = 1e-4;     // initial step, us
    double rel_tol = 1e-8;
    double abs_tol = 1e-8;
    ModeAmplitudes initial;
    double sample_interval = 0.0;  // us between stored samples; 0 stores every accepted step

    void validate() const;
};

/// Time derivative of the amplitudes, per microsecond.
[[nodiscard]] ModeAmplitudes derivatives(const ModeAmplitudes& state, const SystemParams& sys,
                                         const DriveTerm& drive, double kerr);

/// Real 4x4 Jacobian of the flow in (Re a, Im a, Re b, Im b), per microsecond.
[[nodiscard]] Eigen::Matrix4d jacobian(const ModeAmplitudes& state, const SystemParams& sys,
                                       const DriveTerm& drive, double kerr);

/// Stable iff every Jacobian eigenvalue has a negative real part.
[[nodiscard]] Stability jacobian_stability(const ModeAmplitudes& state, const SystemParams& sys,
                                           const DriveTerm& drive, double kerr);

struct TrajectorySample {
    double t = 0.0;  // us
    ModeAmplitudes state;
};

struct IntegrationResult {
    std::vector<TrajectorySample> trajectory;
    ModeAmplitudes final_state;
    bool settled = false;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

/// Step-size collapse during integration; carries the last accepted state.
class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, double t, ModeAmplitudes last)
        : NumericalError(what), t_(t), last_(last) {}
    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] const ModeAmplitudes& last_state() const noexcept { return last_; }

private:
    double t_;
    ModeAmplitudes last_;
};

/// Dormand-Prince 5(4) with PI step control. `settled` is true when both
/// |da/dt| and |db/dt| stay below abs_tol over the final 10% of the run.
[[nodiscard]] IntegrationResult integrate(const SimConfig& config, const SystemParams& sys, const DriveTerm& drive,
                                          double kerr);

struct FullSteadyState {
    ModeAmplitudes amplitudes;
    Stability stability = Stability::Stable;
};

/// All fixed points of the two-mode flow, ordered by magnon number, each
/// classified from the Jacobian. Requires kappa > 0 and gamma_m > 0.
[[nodiscard]] std::vector<FullSteadyState> full_steady_state(const SystemParams& sys, const DriveTerm& drive,
                                                             double kerr);

/// Lower-branch cubic matched to the two-mode model at a given drive.
///
/// detuning = omega_LP - omega_d and linewidth = gamma_LP come from
/// diagonalize(). The drive term c*P is fixed once per parameter set from a
/// weak-drive linear-response probe of the full model and then scaled with
/// Omega_d^2, so `power` is Omega_d^2 (MHz^2) and `coupling` is in MHz.
struct LowerBranchReduction {
    CubicProblem problem;
    double f_m_LP = 0.0;
    double kerr = 0.0;

    /// Full-model magnon number -> lower-branch shift, f_m_LP * 2K |b|^2.
    [[nodiscard]] double shift_of(const ModeAmplitudes& m) const { return f_m_LP * 2.0 * kerr * m.magnon_number(); }
};

[[nodiscard]] LowerBranchReduction reduce_to_lower_branch(const SystemParams& sys, const DriveTerm& drive,
                                                          double kerr);

}  // namespace kerrmag
