#pragma once

// Branch-aware least-squares estimation of the drive coupling c (and
// optionally gamma_LP) from directional sweep data.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <vector>

#include "kerrmag/sweep.hpp"

namespace kerrmag {

struct DataRecord {
    double x = 0.0;      // scan parameter (mW or MHz)
    double shift = 0.0;  // MHz
    Direction direction = Direction::Forward;

    friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

struct DataSet {
    std::vector<DataRecord> records;
    SweepVariable variable = SweepVariable::Power;
    double fixed = 0.0;  // held detuning (MHz) or power (mW)

    [[nodiscard]] bool single_direction() const;
    [[nodiscard]] std::vector<DataRecord> direction(Direction d) const;
    /// Throws UsageError on fewer than 4 records or non-finite values.
    void validate() const;
};

/// CSV with header columns `param`, `shift_MHz` (or `delta_LP_MHz`) and
/// `direction` (fwd/bwd/forward/backward). Extra columns are ignored.
/// Throws ParseError with the offending line number.
[[nodiscard]] DataSet load_csv(std::istream& in);
[[nodiscard]] DataSet load_csv(const std::filesystem::path& path);

enum class ResidualMode {
    DirectionMatched,  // forward records vs forward trace, backward vs backward
    DirectionBlind,    // every record vs the forward trace
};

struct FitOptions {
    double gamma = 1.0;   // gamma_LP, MHz: fixed value or initial guess
    bool free_gamma = false;
    double c0 = 1.0;      // initial guess for c, MHz^3/mW
    ResidualMode mode = ResidualMode::DirectionMatched;
    int max_iterations = 200;
};

struct FitResult {
    double c_hat = 0.0;
    std::optional<double> gamma_hat;  // present when gamma was freed
    double gamma_used = 0.0;
    double rms_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Model shift for every record, in record order.
[[nodiscard]] std::vector<double> model_shifts(const DataSet& data, double coupling, double gamma,
                                               ResidualMode mode = ResidualMode::DirectionMatched);

[[nodiscard]] double rms_residual(const DataSet& data, double coupling, double gamma,
                                  ResidualMode mode = ResidualMode::DirectionMatched);

/// Levenberg-Marquardt on c (and gamma if freed) after a coarse scan of c
/// over [c0/10, 10 c0] plus c = 0 (and of gamma over [gamma/3.2, 3.2 gamma] when freed).
/// Restarts with a rescaled guess when the model returns non-finite shifts;
/// throws NumericalError after 5 restarts.
[[nodiscard]] FitResult fit_c(const DataSet& data, const FitOptions& options);

/// Least-squares slope of upper- vs lower-branch shift through the origin.
/// Throws UsageError on mismatched grids and DomainError if every lower shift is zero.
[[nodiscard]] double fit_xi(const DataSet& lp_data, const DataSet& up_data);

}  // namespace kerrmag
