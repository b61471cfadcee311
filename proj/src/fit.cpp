#include "kerrmag/fit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "kerrmag/errors.hpp"

namespace kerrmag {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(comma + 1);
    }
    return out;
}

double parse_number(const std::string& field, std::size_t line, const char* column) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    if (!field.empty() && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError(line, std::string("column '") + column + "': '" + field + "' is not a number");
    }
    if (!std::isfinite(value)) {
        throw ParseError(line, std::string("column '") + column + "': non-finite value");
    }
    return value;
}

Direction parse_direction(std::string token, std::size_t line) {
    std::transform(token.begin(), token.end(), token.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (token == "fwd" || token == "forward") {
        return Direction::Forward;
    }
    if (token == "bwd" || token == "backward") {
        return Direction::Backward;
    }
    throw ParseError(line, "unknown direction token '" + token + "'");
}

struct Selection {
    std::vector<std::size_t> index;  // position in data.records
    std::vector<double> x;
};

Selection select(const DataSet& data, Direction d) {
    Selection s;
    for (std::size_t k = 0; k < data.records.size(); ++k) {
        if (data.records[k].direction == d) {
            s.index.push_back(k);
            s.x.push_back(data.records[k].x);
        }
    }
    return s;
}

// Shifts along `xs` (in scan order) for one scan direction.
std::vector<double> trace_shifts(const SweepPlan& plan, const std::vector<double>& xs, Direction d) {
    std::vector<double> out;
    out.reserve(xs.size());
    if (d == Direction::Forward) {
        for (const auto& p : run_sweep(plan, xs).forward.points) {
            out.push_back(p.shift);
        }
    } else {
        // The backward scan retraces a forward scan over the same values.
        const std::vector<double> fwd(xs.rbegin(), xs.rend());
        for (const auto& p : run_sweep(plan, fwd).backward.points) {
            out.push_back(p.shift);
        }
    }
    return out;
}

struct Objective {
    const DataSet& data;
    ResidualMode mode;

    // Residual vector; empty when the model is not finite at these parameters.
    std::vector<double> operator()(double coupling, double gamma) const {
        std::vector<double> model;
        try {
            model = model_shifts(data, coupling, gamma, mode);
        } catch (const DomainError&) {
            return {};
        }
        std::vector<double> r(model.size());
        for (std::size_t k = 0; k < model.size(); ++k) {
            r[k] = model[k] - data.records[k].shift;
            if (!std::isfinite(r[k])) {
                return {};
            }
        }
        return r;
    }
};

double cost_of(const std::vector<double>& r) {
    if (r.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    double s = 0.0;
    for (double v : r) {
        s += v * v;
    }
    return s;
}

}  // namespace

bool DataSet::single_direction() const {
    if (records.empty()) {
        return true;
    }
    return std::all_of(records.begin(), records.end(),
                       [&](const DataRecord& r) { return r.direction == records.front().direction; });
}

std::vector<DataRecord> DataSet::direction(Direction d) const {
    std::vector<DataRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const DataRecord& r) { return r.direction == d; });
    return out;
}

void DataSet::validate() const {
    if (records.size() < 4) {
        throw UsageError("data set needs at least 4 records");
    }
    for (const auto& r : records) {
        if (!std::isfinite(r.x) || !std::isfinite(r.shift)) {
            throw UsageError("data set contains non-finite values");
        }
    }
    if (!std::isfinite(fixed)) {
        throw UsageError("data set held parameter must be finite");
    }
}

DataSet load_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_row(line);
            break;
        }
    }
    if (header.empty()) {
        throw ParseError(0, "empty file");
    }
    auto column = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
        for (const char* name : names) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it != header.end()) {
                return static_cast<std::size_t>(it - header.begin());
            }
        }
        return std::nullopt;
    };
    const auto col_x = column({"param"});
    const auto col_shift = column({"shift_MHz", "delta_LP_MHz"});
    const auto col_dir = column({"direction"});
    if (!col_x) {
        throw ParseError(line_no, "missing column 'param'");
    }
    if (!col_shift) {
        throw ParseError(line_no, "missing column 'shift_MHz'");
    }
    if (!col_dir) {
        throw ParseError(line_no, "missing column 'direction'");
    }
    const std::size_t needed = std::max({*col_x, *col_shift, *col_dir}) + 1;

    DataSet data;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_row(line);
        if (fields.size() < needed) {
            throw ParseError(line_no, "expected at least " + std::to_string(needed) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        DataRecord rec;
        rec.x = parse_number(fields[*col_x], line_no, "param");
        rec.shift = parse_number(fields[*col_shift], line_no, "shift_MHz");
        rec.direction = parse_direction(fields[*col_dir], line_no);
        data.records.push_back(rec);
    }
    if (data.records.empty()) {
        throw ParseError(line_no, "no data rows");
    }
    return data;
}

DataSet load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::ios_base::failure("cannot open " + path.string());
    }
    return load_csv(in);
}

std::vector<double> model_shifts(const DataSet& data, double coupling, double gamma, ResidualMode mode) {
    if (!std::isfinite(coupling) || !(gamma > 0.0) || !std::isfinite(gamma)) {
        throw DomainError("model parameters must be finite with gamma > 0");
    }
    SweepPlan plan;
    plan.variable = data.variable;
    plan.fixed = data.fixed;
    plan.linewidth = gamma;
    plan.coupling = coupling;

    std::vector<double> out(data.records.size(), 0.0);
    for (Direction d : {Direction::Forward, Direction::Backward}) {
        const Selection sel = select(data, d);
        if (sel.x.empty()) {
            continue;
        }
        std::vector<double> shifts;
        if (mode == ResidualMode::DirectionBlind && d == Direction::Backward) {
            // Compare against a forward scan over the same values.
            std::vector<double> ascending(sel.x.rbegin(), sel.x.rend());
            shifts = trace_shifts(plan, ascending, Direction::Forward);
            std::reverse(shifts.begin(), shifts.end());
        } else {
            shifts = trace_shifts(plan, sel.x, d);
        }
        for (std::size_t k = 0; k < sel.index.size(); ++k) {
            out[sel.index[k]] = shifts[k];
        }
    }
    return out;
}

double rms_residual(const DataSet& data, double coupling, double gamma, ResidualMode mode) {
    const auto model = model_shifts(data, coupling, gamma, mode);
    double s = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k) {
        const double r = model[k] - data.records[k].shift;
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(model.size()));
}

FitResult fit_c(const DataSet& data, const FitOptions& options) {
    data.validate();
    if (!(options.gamma > 0.0) || !std::isfinite(options.gamma)) {
        throw UsageError("gamma_LP must be finite and > 0");
    }
    const Objective objective{data, options.mode};
    const double n = static_cast<double>(data.records.size());

    double guess = (options.c0 != 0.0 && std::isfinite(options.c0)) ? options.c0 : 1.0;
    constexpr int kMaxRestarts = 5;
    for (int attempt = 0; attempt <= kMaxRestarts; ++attempt, guess *= 1e-3) {
        if (cost_of(objective(guess, options.gamma)) == std::numeric_limits<double>::infinity()) {
            continue;
        }

        // Coarse scan over a decade either side of |c0|, both signs, and zero.
        // A free linewidth is scanned over a factor of ~3 either side of the guess.
        std::vector<double> gammas{options.gamma};
        if (options.free_gamma) {
            gammas.clear();
            for (int j = -10; j <= 10; ++j) {
                gammas.push_back(options.gamma * std::pow(10.0, j / 20.0));
            }
        }
        double best_c = 0.0;
        double best_gamma = options.gamma;
        double best_cost = cost_of(objective(0.0, options.gamma));
        const double magnitude = std::abs(guess);
        for (double gamma : gammas) {
            for (int sign : {1, -1}) {
                for (int k = -40; k <= 40; ++k) {
                    const double c = sign * magnitude * std::pow(10.0, k / 40.0);
                    const double cost = cost_of(objective(c, gamma));
                    if (cost < best_cost) {
                        best_cost = cost;
                        best_c = c;
                        best_gamma = gamma;
                    }
                }
            }
        }

        const int dim = options.free_gamma ? 2 : 1;
        Eigen::VectorXd theta(dim);
        theta(0) = best_c;
        if (options.free_gamma) {
            theta(1) = best_gamma;
        }
        auto residuals = [&](const Eigen::VectorXd& th) {
            return objective(th(0), options.free_gamma ? th(1) : options.gamma);
        };
        std::vector<double> r = residuals(theta);
        double cost = cost_of(r);

        FitResult result;
        double lambda = 1e-3;
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            result.iterations = iter + 1;
            const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
            Eigen::MatrixXd jac(static_cast<Eigen::Index>(r.size()), dim);
            bool jac_ok = true;
            for (int p = 0; p < dim; ++p) {
                const double h = 1e-6 * std::max(std::abs(theta(p)), p == 0 ? 1e-3 * magnitude : 1e-3);
                Eigen::VectorXd up = theta;
                Eigen::VectorXd dn = theta;
                up(p) += h;
                dn(p) -= h;
                const auto r_up = residuals(up);
                const auto r_dn = residuals(dn);
                if (r_up.empty() || r_dn.empty()) {
                    jac_ok = false;
                    break;
                }
                for (std::size_t k = 0; k < r.size(); ++k) {
                    jac(static_cast<Eigen::Index>(k), p) = (r_up[k] - r_dn[k]) / (2.0 * h);
                }
            }
            if (!jac_ok) {
                break;
            }
            const Eigen::MatrixXd normal = jac.transpose() * jac;
            const Eigen::VectorXd grad = jac.transpose() * rv;
            if (grad.norm() < 1e-10) {
                result.converged = true;
                break;
            }
            bool improved = false;
            bool tiny_step = false;
            while (lambda < 1e16) {
                Eigen::MatrixXd damped = normal;
                for (int p = 0; p < dim; ++p) {
                    damped(p, p) += lambda * std::max(normal(p, p), 1e-12);
                }
                const Eigen::VectorXd step = damped.ldlt().solve(-grad);
                const double rel = step.norm() / std::max(theta.norm(), 1e-12);
                const Eigen::VectorXd trial = theta + step;
                const auto r_trial = residuals(trial);
                const double trial_cost = cost_of(r_trial);
                if (trial_cost < cost) {
                    theta = trial;
                    r = r_trial;
                    cost = trial_cost;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    improved = true;
                    tiny_step = rel < 1e-8;
                    break;
                }
                if (rel < 1e-8) {
                    tiny_step = true;
                    break;
                }
                lambda *= 4.0;
            }
            if (tiny_step) {
                result.converged = true;
                break;
            }
            if (!improved) {
                break;
            }
        }

        result.c_hat = theta(0);
        result.gamma_used = options.free_gamma ? theta(1) : options.gamma;
        if (options.free_gamma) {
            result.gamma_hat = theta(1);
        }
        result.rms_residual = std::sqrt(cost / n);
        return result;
    }
    throw NumericalError("fit_c: model response not finite after " + std::to_string(kMaxRestarts) +
                         " rescaled restarts");
}

double fit_xi(const DataSet& lp_data, const DataSet& up_data) {
    if (lp_data.records.size() != up_data.records.size() || lp_data.records.empty()) {
        throw UsageError("fit_xi: data sets must be non-empty and the same length");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < lp_data.records.size(); ++k) {
        const auto& lp = lp_data.records[k];
        const auto& up = up_data.records[k];
        if (lp.direction != up.direction ||
            std::abs(lp.x - up.x) > 1e-9 * std::max({1.0, std::abs(lp.x), std::abs(up.x)})) {
            throw UsageError("fit_xi: data sets do not share grid and direction labels (record " +
                             std::to_string(k) + ")");
        }
        num += lp.shift * up.shift;
        den += lp.shift * lp.shift;
    }
    if (den == 0.0) {
        throw DomainError("fit_xi: every lower-branch shift is zero");
    }
    return num / den;
}

}  // namespace kerrmag
