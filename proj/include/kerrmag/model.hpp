#pragma once

// Linear-regime physics of the cavity magnon-polariton system.
//
// Unit convention: every frequency and linewidth is an ordinary frequency in
// MHz (the "x/2pi" numbers quoted for experiments). Only the dynamics module
// converts to angular units, and only internally.

#include <cstddef>
#include <span>
#include <vector>

#include "kerrmag/constants.hpp"

namespace kerrmag {

struct CavityParams {
    double omega_c = 0.0;    // MHz
    double kappa_1 = 0.0;    // port 1 decay, MHz
    double kappa_2 = 0.0;    // port 2 decay, MHz
    double kappa_3 = 0.0;    // drive port decay, MHz
    double kappa_int = 0.0;  // intrinsic loss, MHz

    /// Total linewidth. Derived, never stored.
    [[nodiscard]] double kappa() const { return kappa_1 + kappa_2 + kappa_3 + kappa_int; }

    /// Throws DomainError if any rate is negative or a field is non-finite.
    void validate() const;
};

struct MagnonParams {
    double omega_m = 0.0;  // Kittel mode frequency, MHz
    double gamma_m = 0.0;  // linewidth, MHz
    double g_m = 0.0;      // magnon-photon coupling, MHz

    void validate() const;
};

/// g_m exceeds both the cavity and the magnon linewidth.
[[nodiscard]] bool strong_coupling(const CavityParams& cavity, const MagnonParams& magnon);

enum class CrystalAxis { Axis100, Axis110 };

struct MaterialSpec {
    double mu_0 = constants::vacuum_permeability;  // H/m
    double anisotropy = 0.0;                       // K_an, J/m^3
    double g_factor = 2.0;
    double magnetization = 0.0;  // saturation magnetization M, A/m
    double volume = 0.0;         // sphere volume V_m, m^3
    CrystalAxis axis = CrystalAxis::Axis100;

    /// g * mu_B / hbar.
    [[nodiscard]] double gyromagnetic_ratio() const;
};

/// Kerr coefficient of the Kittel mode.
///
/// [100] along the bias field: mu0 K_an gamma^2 / (M^2 V_m).
/// [110] along the bias field: the same expression scaled by -13/16.
/// The expression is evaluated literally from the SI inputs.
/// Throws DomainError for non-positive M or V_m.
[[nodiscard]] double kerr_coefficient(const MaterialSpec& spec);

struct HybridizedBranches {
    double omega_LP = 0.0;  // MHz
    double omega_UP = 0.0;  // MHz
    double f_m_LP = 0.0;    // magnon fraction of the lower branch
    double f_m_UP = 0.0;    // magnon fraction of the upper branch
    double gamma_LP = 0.0;  // MHz
    double gamma_UP = 0.0;  // MHz

    [[nodiscard]] double splitting() const { return omega_UP - omega_LP; }
};

/// Eigenmodes of the Hermitian coupling matrix [[omega_c, g_m], [g_m, omega_m]].
/// Branch linewidths interpolate by magnon fraction: f*gamma_m + (1-f)*kappa.
/// Labels follow frequency ordering. Throws DomainError unless g_m > 0.
[[nodiscard]] HybridizedBranches diagonalize(const CavityParams& cavity, const MagnonParams& magnon);

/// Ratio of upper- to lower-branch Kerr shifts, f_m_UP / f_m_LP.
/// Throws DomainError when the lower branch carries no magnon weight.
[[nodiscard]] double shift_ratio(const HybridizedBranches& branches);

struct CoilCalibration {
    double slope = 1.0;   // MHz per ampere, > 0
    double offset = 0.0;  // MHz

    void validate() const;
};

[[nodiscard]] double coil_to_magnon(double current_amp, const CoilCalibration& cal);
[[nodiscard]] double magnon_to_coil(double omega_m, const CoilCalibration& cal);

/// |S21| of the two-port cavity with the magnon hybridized in, at probe frequency omega.
[[nodiscard]] double transmission(const CavityParams& cavity, const MagnonParams& magnon, double omega);

/// Row-major |S21| table: one row per omega_m, one column per probe frequency.
struct TransmissionMap {
    std::vector<double> omega_m;
    std::vector<double> probe;
    std::vector<double> magnitude;

    [[nodiscard]] std::size_t rows() const { return omega_m.size(); }
    [[nodiscard]] std::size_t cols() const { return probe.size(); }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return magnitude[row * cols() + col]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(magnitude).subspan(r * cols(), cols());
    }
};

/// `magnon.omega_m` is ignored; each row uses the corresponding sweep value.
/// Throws UsageError for empty or unsorted grids.
[[nodiscard]] TransmissionMap transmission_map(const CavityParams& cavity, const MagnonParams& magnon,
                                               std::span<const double> magnon_sweep,
                                               std::span<const double> probe_grid);

/// Indices of strict interior local maxima of a sampled curve.
[[nodiscard]] std::vector<std::size_t> local_maxima(std::span<const double> values);

/// Probe frequencies of the two strongest peaks in one row, ascending.
/// Returns an empty vector when fewer than two peaks are present.
[[nodiscard]] std::vector<double> polariton_peaks(const TransmissionMap& map, std::size_t row);

}  // namespace kerrmag
