#pragma once

// Plot-ready CSV and JSON serialization. Floats are written with 9
// significant digits, '.' decimal point, comma separator, header row first.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrmag/dynamics.hpp"
#include "kerrmag/fit.hpp"
#include "kerrmag/model.hpp"
#include "kerrmag/sweep.hpp"

namespace kerrmag::io {

[[nodiscard]] std::string format_number(double value);

/// Value rounded to 9 significant digits, for JSON output.
[[nodiscard]] double rounded(double value);

/// Writes through a temporary file in the same directory and renames it into place.
/// Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Header `omega_m_MHz,<probe...>`, one row per magnon frequency.
[[nodiscard]] std::string transmission_csv(const TransmissionMap& map);

/// Columns param,delta_LP_MHz[,delta_UP_MHz],direction,switch.
[[nodiscard]] std::string trace_csv(const Trace& lp, const Trace* up = nullptr);

/// Columns t_us,re_a,im_a,re_b,im_b,n_a,n_b.
[[nodiscard]] std::string trajectory_csv(const std::vector<TrajectorySample>& samples);

[[nodiscard]] nlohmann::json to_json(const HysteresisLoop& loop);
[[nodiscard]] nlohmann::json to_json(const FitResult& fit);
[[nodiscard]] nlohmann::json to_json(const ModeAmplitudes& m);

}  // namespace kerrmag::io
