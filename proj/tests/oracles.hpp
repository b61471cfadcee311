#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Sign changes of F(x) = [(x + d)^2 + (g/2)^2] x - cP over a uniform grid
// wide enough to hold every real root.
inline int sign_changes(double d, double g, double cp, int samples = 10000) {
    auto f = [&](double x) { return ((x + d) * (x + d) + 0.25 * g * g) * x - cp; };
    const double r = 1.5 * (std::abs(d) + std::cbrt(std::abs(cp)) + g) + 1.0;
    int count = 0;
    double prev = f(-r);
    for (int k = 1; k <= samples; ++k) {
        const double x = -r + 2.0 * r * k / samples;
        const double v = f(x);
        if ((prev < 0.0 && v >= 0.0) || (prev > 0.0 && v <= 0.0)) {
            ++count;
        }
        if (v != 0.0) {
            prev = v;
        }
    }
    return count;
}

// Real roots of the same cubic from the companion-matrix eigenvalues.
inline std::vector<double> companion_roots(double d, double g, double cp) {
    // x^3 + 2d x^2 + (d^2 + g^2/4) x - cP
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 0) = -2.0 * d;
    m(0, 1) = -(d * d + 0.25 * g * g);
    m(0, 2) = cp;
    m(1, 0) = 1.0;
    m(2, 1) = 1.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(m);
    std::vector<double> out;
    const double scale = std::max({1.0, std::abs(d), g});
    for (int i = 0; i < 3; ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) <= 1e-7 * scale) {
            out.push_back(ev.real());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Modes {
    double low = 0.0;
    double high = 0.0;
    double magnon_weight_low = 0.0;
};

// Symmetric 2x2 coupling matrix, eigenvectors from Eigen.
inline Modes hybrid_modes(double wc, double wm, double g) {
    Eigen::Matrix2d h;
    h << wc, g, g, wm;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
    Modes m;
    m.low = es.eigenvalues()(0);
    m.high = es.eigenvalues()(1);
    m.magnon_weight_low = es.eigenvectors()(1, 0) * es.eigenvectors()(1, 0);
    return m;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
