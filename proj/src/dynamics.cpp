#include "kerrmag/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "kerrmag/constants.hpp"

namespace kerrmag {

namespace {

using constants::two_pi;
constexpr complex I{0.0, 1.0};

// Real 2x2 block of z -> alpha z + beta conj(z) acting on (Re z, Im z).
void put_block(Eigen::Matrix4d& j, int row, int col, complex alpha, complex beta) {
    j(row, col) = alpha.real() + beta.real();
    j(row, col + 1) = -alpha.imag() + beta.imag();
    j(row + 1, col) = alpha.imag() + beta.imag();
    j(row + 1, col + 1) = alpha.real() - beta.real();
}

double max_abs(const ModeAmplitudes& m) {
    return std::max({std::abs(m.a.real()), std::abs(m.a.imag()), std::abs(m.b.real()), std::abs(m.b.imag())});
}

std::array<double, 4> components(const ModeAmplitudes& m) {
    return {m.a.real(), m.a.imag(), m.b.real(), m.b.imag()};
}

// Dormand-Prince 5(4) tableau.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

// Real roots x >= 0 of a3 x^3 + a2 x^2 + a1 x + a0 with a3 > 0 and a0 < 0,
// found by bisection between critical points.
std::vector<double> nonnegative_cubic_roots(double a3, double a2, double a1, double a0) {
    auto p = [&](double x) { return ((a3 * x + a2) * x + a1) * x + a0; };
    std::vector<double> knots{0.0};
    const double disc = a2 * a2 - 3.0 * a3 * a1;
    if (disc > 0.0) {
        const double r = std::sqrt(disc);
        for (double xc : {(-a2 - r) / (3.0 * a3), (-a2 + r) / (3.0 * a3)}) {
            if (xc > 0.0) {
                knots.push_back(xc);
            }
        }
    }
    double top = std::max(1.0, knots.back());
    while (p(top) <= 0.0) {
        top *= 2.0;
    }
    knots.push_back(top);

    std::vector<double> roots;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        double lo = knots[k];
        double hi = knots[k + 1];
        double f_lo = p(lo);
        const double f_hi = p(hi);
        if (k > 0) {
            // Tangency at a critical point counts as a (double) root.
            const double scale = std::abs(a3 * lo * lo * lo) + std::abs(a2 * lo * lo) + std::abs(a1 * lo) +
                                 std::abs(a0);
            if (std::abs(f_lo) <= 1e-13 * scale) {
                roots.push_back(lo);
                continue;
            }
        }
        if ((f_lo < 0.0) == (f_hi < 0.0)) {
            continue;
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) {
                break;
            }
            const double f_mid = p(mid);
            if ((f_mid < 0.0) == (f_lo < 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        roots.push_back(0.5 * (lo + hi));
    }
    return roots;
}

}  // namespace

bool ModeAmplitudes::finite() const {
    return std::isfinite(a.real()) && std::isfinite(a.imag()) && std::isfinite(b.real()) &&
           std::isfinite(b.imag());
}

DriveTerm DriveTerm::from_power(double frequency, double power_mw, double eta) {
    if (!(eta > 0.0)) {
        throw DomainError("drive conversion efficiency eta must be > 0");
    }
    if (!(power_mw >= 0.0)) {
        throw DomainError("drive power must be >= 0");
    }
    return {frequency, std::sqrt(eta * power_mw)};
}

void DriveTerm::validate() const {
    if (!std::isfinite(frequency) || !std::isfinite(strength) || strength < 0.0) {
        throw DomainError("drive frequency must be finite and strength >= 0");
    }
}

void SimConfig::validate() const {
    if (!(t_end > 0.0)) {
        throw UsageError("t_end must be > 0");
    }
    if (!(dt > 0.0)) {
        throw UsageError("dt must be > 0");
    }
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2) || !(abs_tol > 0.0 && abs_tol <= 1e-2)) {
        throw UsageError("tolerances must lie in (0, 1e-2]");
    }
    if (!initial.finite()) {
        throw UsageError("initial amplitudes must be finite");
    }
    if (sample_interval < 0.0) {
        throw UsageError("sample_interval must be >= 0");
    }
}

ModeAmplitudes derivatives(const ModeAmplitudes& s, const SystemParams& sys, const DriveTerm& drive, double kerr) {
    const double det_c = sys.cavity.omega_c - drive.frequency;
    const double det_m = sys.magnon.omega_m - drive.frequency + 2.0 * kerr * s.magnon_number();
    const double g = sys.magnon.g_m;
    ModeAmplitudes d;
    d.a = -(I * det_c + 0.5 * sys.cavity.kappa()) * s.a - I * g * s.b;
    d.b = -(I * det_m + 0.5 * sys.magnon.gamma_m) * s.b - I * g * s.a - I * drive.strength;
    return two_pi * d;
}

Eigen::Matrix4d jacobian(const ModeAmplitudes& s, const SystemParams& sys, const DriveTerm& drive, double kerr) {
    const double det_c = sys.cavity.omega_c - drive.frequency;
    const double det_m = sys.magnon.omega_m - drive.frequency;
    const complex g = -I * sys.magnon.g_m;
    Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
    put_block(j, 0, 0, -(I * det_c + 0.5 * sys.cavity.kappa()), 0.0);
    put_block(j, 0, 2, g, 0.0);
    put_block(j, 2, 0, g, 0.0);
    // Kerr term -2iK |b|^2 b = -2iK b^2 conj(b).
    const complex d_b = -(I * det_m + 0.5 * sys.magnon.gamma_m) - 4.0 * I * kerr * s.magnon_number();
    const complex d_bconj = -2.0 * I * kerr * s.b * s.b;
    put_block(j, 2, 2, d_b, d_bconj);
    return two_pi * j;
}

Stability jacobian_stability(const ModeAmplitudes& state, const SystemParams& sys, const DriveTerm& drive,
                             double kerr) {
    const Eigen::Matrix4d j = jacobian(state, sys, drive, kerr);
    const Eigen::EigenSolver<Eigen::Matrix4d> es(j, false);
    const double growth = es.eigenvalues().real().maxCoeff();
    return growth < -1e-12 * j.norm() ? Stability::Stable : Stability::Unstable;
}

IntegrationResult integrate(const SimConfig& config, const SystemParams& sys, const DriveTerm& drive, double kerr) {
    config.validate();
    drive.validate();
    auto f = [&](const ModeAmplitudes& y) { return derivatives(y, sys, drive, kerr); };

    IntegrationResult out;
    double t = 0.0;
    ModeAmplitudes y = config.initial;
    ModeAmplitudes k1 = f(y);
    double h = std::min(config.dt, config.t_end);
    double err_old = 1e-4;
    const double settle_from = 0.9 * config.t_end;
    double tail_rate = 0.0;
    bool tail_seen = false;
    double next_sample = config.sample_interval;
    out.trajectory.push_back({t, y});

    auto note_tail = [&](double time, const ModeAmplitudes& rate) {
        if (time >= settle_from) {
            tail_seen = true;
            tail_rate = std::max({tail_rate, std::abs(rate.a), std::abs(rate.b)});
        }
    };
    note_tail(t, k1);

    const double h_min = 1e-14 * std::max(1.0, config.t_end);
    while (t < config.t_end) {
        // Keep h|lambda| well inside the stability region; otherwise the
        // controller parks h at the edge and the state jitters at tolerance level.
        const double h_cap = 1.0 / std::max(jacobian(y, sys, drive, kerr).lpNorm<Eigen::Infinity>(), 1e-300);
        h = std::min(h, h_cap);
        if (t + h > config.t_end) {
            h = config.t_end - t;
        }
        using namespace dp;
        const ModeAmplitudes k2 = f(y + (h * a21) * k1);
        const ModeAmplitudes k3 = f(y + h * (a31 * k1 + a32 * k2));
        const ModeAmplitudes k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const ModeAmplitudes k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const ModeAmplitudes k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const ModeAmplitudes y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const ModeAmplitudes k7 = f(y_new);
        const ModeAmplitudes err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const auto ec = components(err_vec);
        const auto y0 = components(y);
        const auto y1 = components(y_new);
        double sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const double sc = config.abs_tol + config.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            sum += (ec[i] / sc) * (ec[i] / sc);
        }
        const double err = std::sqrt(sum / 4.0);

        if (!y_new.finite() || !std::isfinite(err)) {
            h *= 0.1;
            ++out.rejected_steps;
        } else if (err <= 1.0) {
            t += h;
            y = y_new;
            k1 = k7;
            ++out.accepted_steps;
            note_tail(t, k1);
            if (config.sample_interval == 0.0 || t >= next_sample || t >= config.t_end) {
                out.trajectory.push_back({t, y});
                while (config.sample_interval > 0.0 && next_sample <= t) {
                    next_sample += config.sample_interval;
                }
            }
            // PI controller (Hairer & Wanner, DOPRI5 defaults).
            const double fac = std::pow(err, 0.14) / std::pow(err_old, 0.08) / 0.9;
            h /= std::clamp(fac, 0.1, 5.0);
            err_old = std::max(err, 1e-4);
        } else {
            h /= std::min(5.0, std::pow(err, 0.2) / 0.9);
            ++out.rejected_steps;
        }
        if (h < h_min && t < config.t_end) {
            throw IntegrationError("integration step underflow at t = " + std::to_string(t) + " us", t, y);
        }
    }
    out.final_state = y;
    out.settled = tail_seen && tail_rate < config.abs_tol && max_abs(y) < std::numeric_limits<double>::max();
    return out;
}

std::vector<FullSteadyState> full_steady_state(const SystemParams& sys, const DriveTerm& drive, double kerr) {
    drive.validate();
    if (!(sys.cavity.kappa() > 0.0) || !(sys.magnon.gamma_m > 0.0)) {
        throw DomainError("full_steady_state requires kappa > 0 and gamma_m > 0");
    }
    const double det_c = sys.cavity.omega_c - drive.frequency;
    const double det_m = sys.magnon.omega_m - drive.frequency;
    const double g = sys.magnon.g_m;
    const complex cavity_den = I * det_c + 0.5 * sys.cavity.kappa();
    const complex back_action = g * g / cavity_den;
    // Effective magnon detuning and half-width including cavity back-action.
    const double eff_det = det_m + back_action.imag();
    const double eff_half = 0.5 * sys.magnon.gamma_m + back_action.real();
    const double omega_sq = drive.strength * drive.strength;

    std::vector<double> numbers;
    if (omega_sq == 0.0) {
        numbers.push_back(0.0);
    } else if (kerr == 0.0) {
        numbers.push_back(omega_sq / (eff_det * eff_det + eff_half * eff_half));
    } else {
        // x [(eff_det + 2K x)^2 + eff_half^2] = Omega^2
        numbers = nonnegative_cubic_roots(4.0 * kerr * kerr, 4.0 * kerr * eff_det,
                                          eff_det * eff_det + eff_half * eff_half, -omega_sq);
    }

    std::vector<FullSteadyState> out;
    for (double x : numbers) {
        ModeAmplitudes m;
        m.b = -I * drive.strength / (I * (eff_det + 2.0 * kerr * x) + eff_half);
        m.a = -I * g * m.b / cavity_den;
        out.push_back({m, jacobian_stability(m, sys, drive, kerr)});
    }
    std::sort(out.begin(), out.end(), [](const FullSteadyState& l, const FullSteadyState& r) {
        return l.amplitudes.magnon_number() < r.amplitudes.magnon_number();
    });
    return out;
}

LowerBranchReduction reduce_to_lower_branch(const SystemParams& sys, const DriveTerm& drive, double kerr) {
    const HybridizedBranches br = diagonalize(sys.cavity, sys.magnon);
    const double detuning = br.omega_LP - drive.frequency;

    // Linear response per unit Omega_d^2; Kerr-independent.
    const auto probe = full_steady_state(sys, DriveTerm{drive.frequency, 1.0}, 0.0);
    const double number_per_drive = probe.front().amplitudes.magnon_number();
    const double weak_shift = br.f_m_LP * 2.0 * kerr * number_per_drive;
    const double coupling =
        weak_shift * (detuning * detuning + 0.25 * br.gamma_LP * br.gamma_LP);

    LowerBranchReduction r;
    r.problem = CubicProblem{detuning, br.gamma_LP, coupling, drive.strength * drive.strength};
    r.f_m_LP = br.f_m_LP;
    r.kerr = kerr;
    return r;
}

}  // namespace kerrmag
