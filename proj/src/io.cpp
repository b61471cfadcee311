#include "kerrmag/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kerrmag/errors.hpp"

namespace kerrmag::io {

std::string format_number(double value) {
    if (value == 0.0) {
        return "0";  // folds -0 into 0
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

double rounded(double value) { return std::strtod(format_number(value).c_str(), nullptr); }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

std::string transmission_csv(const TransmissionMap& map) {
    std::ostringstream out;
    out << "omega_m_MHz";
    for (double p : map.probe) {
        out << ',' << format_number(p);
    }
    out << '\n';
    for (std::size_t r = 0; r < map.rows(); ++r) {
        out << format_number(map.omega_m[r]);
        for (double v : map.row(r)) {
            out << ',' << format_number(v);
        }
        out << '\n';
    }
    return out.str();
}

std::string trace_csv(const Trace& lp, const Trace* up) {
    if (up != nullptr && up->points.size() != lp.points.size()) {
        throw UsageError("upper-branch trace does not match the lower-branch trace");
    }
    std::ostringstream out;
    out << "param,delta_LP_MHz";
    if (up != nullptr) {
        out << ",delta_UP_MHz";
    }
    out << ",direction,switch\n";
    for (std::size_t k = 0; k < lp.points.size(); ++k) {
        const auto& p = lp.points[k];
        out << format_number(p.param) << ',' << format_number(p.shift);
        if (up != nullptr) {
            out << ',' << format_number(up->points[k].shift);
        }
        out << ',' << to_string(lp.direction) << ',' << (p.switched ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string trajectory_csv(const std::vector<TrajectorySample>& samples) {
    std::ostringstream out;
    out << "t_us,re_a,im_a,re_b,im_b,n_a,n_b\n";
    for (const auto& s : samples) {
        out << format_number(s.t) << ',' << format_number(s.state.a.real()) << ','
            << format_number(s.state.a.imag()) << ',' << format_number(s.state.b.real()) << ','
            << format_number(s.state.b.imag()) << ',' << format_number(s.state.cavity_number()) << ','
            << format_number(s.state.magnon_number()) << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const HysteresisLoop& loop) {
    nlohmann::json j;
    j["area"] = rounded(loop.area);
    j["orientation"] = std::string(to_string(loop.orientation));
    j["switch_up"] = loop.switch_up ? nlohmann::json(rounded(*loop.switch_up)) : nlohmann::json(nullptr);
    j["switch_down"] = loop.switch_down ? nlohmann::json(rounded(*loop.switch_down)) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const FitResult& fit) {
    nlohmann::json j;
    j["c_hat"] = rounded(fit.c_hat);
    j["gamma_hat"] = fit.gamma_hat ? nlohmann::json(rounded(*fit.gamma_hat)) : nlohmann::json(nullptr);
    j["gamma_used"] = rounded(fit.gamma_used);
    j["rms_residual"] = rounded(fit.rms_residual);
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

nlohmann::json to_json(const ModeAmplitudes& m) {
    return {{"re_a", rounded(m.a.real())}, {"im_a", rounded(m.a.imag())},   {"re_b", rounded(m.b.real())},
            {"im_b", rounded(m.b.imag())}, {"n_a", rounded(m.cavity_number())}, {"n_b", rounded(m.magnon_number())}};
}

}  // namespace kerrmag::io
