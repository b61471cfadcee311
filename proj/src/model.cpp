#include "kerrmag/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "kerrmag/errors.hpp"

namespace kerrmag {

namespace {

void require_rate(double value, const char* name) {
    if (!std::isfinite(value) || value < 0.0) {
        throw DomainError(std::string(name) + " must be finite and >= 0");
    }
}

void require_sorted_nonempty(std::span<const double> grid, const char* name) {
    if (grid.empty()) {
        throw UsageError(std::string(name) + " grid is empty");
    }
    if (!std::is_sorted(grid.begin(), grid.end())) {
        throw UsageError(std::string(name) + " grid is not sorted");
    }
}

}  // namespace

void CavityParams::validate() const {
    if (!std::isfinite(omega_c)) {
        throw DomainError("omega_c must be finite");
    }
    require_rate(kappa_1, "kappa_1");
    require_rate(kappa_2, "kappa_2");
    require_rate(kappa_3, "kappa_3");
    require_rate(kappa_int, "kappa_int");
}

void MagnonParams::validate() const {
    if (!std::isfinite(omega_m)) {
        throw DomainError("omega_m must be finite");
    }
    require_rate(gamma_m, "gamma_m");
    require_rate(g_m, "g_m");
}

bool strong_coupling(const CavityParams& cavity, const MagnonParams& magnon) {
    return magnon.g_m > cavity.kappa() && magnon.g_m > magnon.gamma_m;
}

double MaterialSpec::gyromagnetic_ratio() const {
    return g_factor * constants::bohr_magneton / constants::hbar;
}

double kerr_coefficient(const MaterialSpec& spec) {
    if (!(spec.volume > 0.0)) {
        throw DomainError("sphere volume V_m must be > 0");
    }
    if (!(spec.magnetization > 0.0)) {
        throw DomainError("saturation magnetization M must be > 0");
    }
    const double gamma = spec.gyromagnetic_ratio();
    const double base = spec.mu_0 * spec.anisotropy * gamma * gamma /
                        (spec.magnetization * spec.magnetization * spec.volume);
    switch (spec.axis) {
        case CrystalAxis::Axis100:
            return base;
        case CrystalAxis::Axis110:
            return -13.0 * base / 16.0;
    }
    return base;
}

HybridizedBranches diagonalize(const CavityParams& cavity, const MagnonParams& magnon) {
    cavity.validate();
    magnon.validate();
    if (!(magnon.g_m > 0.0)) {
        throw DomainError("diagonalize requires g_m > 0");
    }
    const double detuning = cavity.omega_c - magnon.omega_m;
    const double mean = 0.5 * (cavity.omega_c + magnon.omega_m);
    const double half_gap = std::hypot(0.5 * detuning, magnon.g_m);
    // detuning / (2 half_gap) is the cosine of the mixing angle.
    const double cos_mix = detuning / (2.0 * half_gap);

    HybridizedBranches out;
    out.omega_LP = mean - half_gap;
    out.omega_UP = mean + half_gap;
    out.f_m_LP = 0.5 * (1.0 + cos_mix);
    out.f_m_UP = 0.5 * (1.0 - cos_mix);
    const double kappa = cavity.kappa();
    out.gamma_LP = out.f_m_LP * magnon.gamma_m + (1.0 - out.f_m_LP) * kappa;
    out.gamma_UP = out.f_m_UP * magnon.gamma_m + (1.0 - out.f_m_UP) * kappa;
    return out;
}

double shift_ratio(const HybridizedBranches& branches) {
    if (!(branches.f_m_LP > 0.0)) {
        throw DomainError("lower branch has no magnon weight; shift ratio undefined");
    }
    return branches.f_m_UP / branches.f_m_LP;
}

void CoilCalibration::validate() const {
    if (!(slope > 0.0) || !std::isfinite(slope) || !std::isfinite(offset)) {
        throw DomainError("coil calibration slope must be finite and > 0");
    }
}

double coil_to_magnon(double current_amp, const CoilCalibration& cal) {
    cal.validate();
    return cal.slope * current_amp + cal.offset;
}

double magnon_to_coil(double omega_m, const CoilCalibration& cal) {
    cal.validate();
    return (omega_m - cal.offset) / cal.slope;
}

double transmission(const CavityParams& cavity, const MagnonParams& magnon, double omega) {
    using cd = std::complex<double>;
    const cd i(0.0, 1.0);
    const cd magnon_response = i * (magnon.omega_m - omega) + 0.5 * magnon.gamma_m;
    cd denom = i * (cavity.omega_c - omega) + 0.5 * cavity.kappa();
    if (magnon.g_m != 0.0) {
        denom += magnon.g_m * magnon.g_m / magnon_response;
    }
    return std::sqrt(cavity.kappa_1 * cavity.kappa_2) / std::abs(denom);
}

TransmissionMap transmission_map(const CavityParams& cavity, const MagnonParams& magnon,
                                 std::span<const double> magnon_sweep,
                                 std::span<const double> probe_grid) {
    require_sorted_nonempty(magnon_sweep, "magnon sweep");
    require_sorted_nonempty(probe_grid, "probe");
    cavity.validate();
    magnon.validate();

    TransmissionMap map;
    map.omega_m.assign(magnon_sweep.begin(), magnon_sweep.end());
    map.probe.assign(probe_grid.begin(), probe_grid.end());
    map.magnitude.resize(map.rows() * map.cols());
    MagnonParams tuned = magnon;
    for (std::size_t r = 0; r < map.rows(); ++r) {
        tuned.omega_m = map.omega_m[r];
        for (std::size_t c = 0; c < map.cols(); ++c) {
            map.magnitude[r * map.cols() + c] = transmission(cavity, tuned, map.probe[c]);
        }
    }
    return map;
}

std::vector<std::size_t> local_maxima(std::span<const double> values) {
    std::vector<std::size_t> peaks;
    for (std::size_t k = 1; k + 1 < values.size(); ++k) {
        if (values[k] > values[k - 1] && values[k] > values[k + 1]) {
            peaks.push_back(k);
        }
    }
    return peaks;
}

std::vector<double> polariton_peaks(const TransmissionMap& map, std::size_t row) {
    const auto values = map.row(row);
    auto peaks = local_maxima(values);
    if (peaks.size() < 2) {
        return {};
    }
    std::partial_sort(peaks.begin(), peaks.begin() + 2, peaks.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double lo = map.probe[peaks[0]];
    double hi = map.probe[peaks[1]];
    if (lo > hi) {
        std::swap(lo, hi);
    }
    return {lo, hi};
}

}  // namespace kerrmag
