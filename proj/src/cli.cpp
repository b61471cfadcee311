#include "kerrmag/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "kerrmag/constants.hpp"
#include "kerrmag/cubic.hpp"
#include "kerrmag/dynamics.hpp"
#include "kerrmag/errors.hpp"
#include "kerrmag/fit.hpp"
#include "kerrmag/io.hpp"
#include "kerrmag/model.hpp"
#include "kerrmag/sweep.hpp"

namespace kerrmag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kTaskBlocks = {"spectrum", "sweep", "simulate", "fit"};

// Allowed keys per block. Nested objects are listed as their own blocks.
const std::map<std::string, std::set<std::string>> kSchema = {
    {"", {"cavity", "magnon", "material", "coil", "spectrum", "sweep", "simulate", "fit", "output"}},
    {"cavity", {"omega_c", "kappa_1", "kappa_2", "kappa_3", "kappa_int"}},
    {"magnon", {"omega_m", "gamma_m", "g_m"}},
    {"material", {"mu_0", "K_an", "g_factor", "M", "V_m", "axis"}},
    {"coil", {"slope", "offset"}},
    {"spectrum", {"current", "omega_m", "probe"}},
    {"spectrum.current", {"start", "stop", "steps"}},
    {"spectrum.omega_m", {"start", "stop", "steps"}},
    {"spectrum.probe", {"start", "stop", "steps"}},
    {"sweep", {"variable", "start", "stop", "steps", "fixed", "gamma_LP", "c", "xi"}},
    {"simulate", {"drive", "kerr_MHz", "t_end", "dt", "rel_tol", "abs_tol", "initial", "sample_interval"}},
    {"simulate.drive", {"frequency", "strength", "power", "eta"}},
    {"simulate.initial", {"re_a", "im_a", "re_b", "im_b"}},
    {"fit", {"variable", "fixed", "gamma_LP", "c0", "free_gamma", "mode", "data", "upper_data"}},
    {"output", {"dir"}},
};

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

bool is_power_annotation(const json& v) { return v.is_object() && v.contains("value") && v.contains("unit"); }

void check_keys(const json& node, const std::string& path) {
    const auto it = kSchema.find(path);
    if (it == kSchema.end()) {
        return;
    }
    if (!node.is_object()) {
        throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    }
    for (const auto& [key, value] : node.items()) {
        if (!it->second.count(key)) {
            throw ConfigError("unknown config key '" + join_path(path, key) + "'");
        }
        if (value.is_object() && !is_power_annotation(value)) {
            check_keys(value, join_path(path, key));
        }
    }
}

// Converts {"value": x, "unit": "dBm"|"mW"} to mW.
double power_mw(const json& v, const std::string& where) {
    if (v.is_number()) {
        return v.get<double>();
    }
    if (is_power_annotation(v)) {
        for (const auto& [key, _] : v.items()) {
            if (key != "value" && key != "unit") {
                throw ConfigError("unknown config key '" + where + "." + key + "'");
            }
        }
        const std::string unit = v.at("unit").get<std::string>();
        const double value = v.at("value").get<double>();
        if (unit == "dBm") {
            return dbm_to_mw(value);
        }
        if (unit == "mW") {
            return value;
        }
        throw ConfigError("'" + where + "': unknown power unit '" + unit + "' (use mW or dBm)");
    }
    throw ConfigError("'" + where + "' must be a number or {\"value\", \"unit\"}");
}

void normalize_power(json& block, const std::string& key, const std::string& where) {
    if (block.contains(key)) {
        block[key] = power_mw(block[key], where + "." + key);
    }
}

double number(const json& block, const std::string& key, const std::string& where) {
    if (!block.contains(key)) {
        throw ConfigError("missing '" + where + "." + key + "'");
    }
    if (!block.at(key).is_number()) {
        throw ConfigError("'" + where + "." + key + "' must be a number");
    }
    return block.at(key).get<double>();
}

double number_or(const json& block, const std::string& key, double fallback, const std::string& where) {
    return block.contains(key) ? number(block, key, where) : fallback;
}

const json& require_block(const json& cfg, const std::string& name) {
    if (!cfg.contains(name)) {
        throw ConfigError("missing '" + name + "' block");
    }
    return cfg.at(name);
}

void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must look like key.path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &cfg;
    std::string_view rest(path);
    while (true) {
        const auto dot = rest.find('.');
        const std::string key(rest.substr(0, dot));
        if (dot == std::string_view::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        rest.remove_prefix(dot + 1);
    }
}

CavityParams cavity_from(const json& cfg) {
    const json& b = require_block(cfg, "cavity");
    CavityParams c;
    c.omega_c = number(b, "omega_c", "cavity");
    c.kappa_1 = number_or(b, "kappa_1", 0.0, "cavity");
    c.kappa_2 = number_or(b, "kappa_2", 0.0, "cavity");
    c.kappa_3 = number_or(b, "kappa_3", 0.0, "cavity");
    c.kappa_int = number_or(b, "kappa_int", 0.0, "cavity");
    return c;
}

MagnonParams magnon_from(const json& cfg) {
    const json& b = require_block(cfg, "magnon");
    MagnonParams m;
    m.omega_m = number_or(b, "omega_m", 0.0, "magnon");
    m.gamma_m = number(b, "gamma_m", "magnon");
    m.g_m = number(b, "g_m", "magnon");
    return m;
}

CrystalAxis parse_axis(const std::string& text) {
    if (text == "100" || text == "[100]") {
        return CrystalAxis::Axis100;
    }
    if (text == "110" || text == "[110]") {
        return CrystalAxis::Axis110;
    }
    throw ConfigError("axis must be 100 or 110, got '" + text + "'");
}

std::string axis_name(CrystalAxis a) { return a == CrystalAxis::Axis100 ? "100" : "110"; }

MaterialSpec material_from(const json& cfg) {
    const json& b = require_block(cfg, "material");
    MaterialSpec m;
    m.mu_0 = number_or(b, "mu_0", constants::vacuum_permeability, "material");
    m.anisotropy = number(b, "K_an", "material");
    m.g_factor = number_or(b, "g_factor", 2.0, "material");
    m.magnetization = number(b, "M", "material");
    m.volume = number(b, "V_m", "material");
    if (b.contains("axis")) {
        const auto& a = b.at("axis");
        m.axis = parse_axis(a.is_string() ? a.get<std::string>() : a.dump());
    }
    return m;
}

std::vector<double> linear_grid(const json& b, const std::string& where) {
    const double start = number(b, "start", where);
    const double stop = number(b, "stop", where);
    const double steps_d = number(b, "steps", where);
    if (steps_d < 1 || steps_d != std::floor(steps_d)) {
        throw ConfigError("'" + where + ".steps' must be a positive integer");
    }
    const auto steps = static_cast<std::size_t>(steps_d);
    if (steps > 1 && !(stop > start)) {
        throw ConfigError("'" + where + "' needs stop > start");
    }
    std::vector<double> g(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        g[k] = steps == 1 ? start : start + (stop - start) * static_cast<double>(k) / static_cast<double>(steps - 1);
    }
    return g;
}

SweepVariable parse_variable(const json& b, const std::string& where) {
    const std::string v = b.value("variable", std::string("power"));
    if (v == "power") {
        return SweepVariable::Power;
    }
    if (v == "detuning") {
        return SweepVariable::Detuning;
    }
    throw ConfigError("'" + where + ".variable' must be power or detuning");
}

fs::path output_dir(const json& cfg) {
    fs::path dir = ".";
    if (cfg.contains("output")) {
        dir = cfg.at("output").value("dir", std::string("."));
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
    return dir;
}

// ---- commands -------------------------------------------------------------

int cmd_kerr(const json& cfg, const std::string& axis_flag, bool as_json, std::ostream& out) {
    MaterialSpec spec = material_from(cfg);
    if (!axis_flag.empty()) {
        spec.axis = parse_axis(axis_flag);
    }
    MaterialSpec s100 = spec;
    s100.axis = CrystalAxis::Axis100;
    MaterialSpec s110 = spec;
    s110.axis = CrystalAxis::Axis110;
    const double k = kerr_coefficient(spec);
    const double k100 = kerr_coefficient(s100);
    const double ratio = k100 != 0.0 ? kerr_coefficient(s110) / k100 : std::numeric_limits<double>::quiet_NaN();
    if (as_json) {
        json j;
        j["axis"] = axis_name(spec.axis);
        j["K"] = io::rounded(k);
        j["ratio_110_100"] = std::isfinite(ratio) ? json(io::rounded(ratio)) : json(nullptr);
        out << j.dump() << '\n';
    } else {
        out << "axis [" << axis_name(spec.axis) << "]  K = " << io::format_number(k) << '\n';
        out << "K[110]/K[100] = " << (std::isfinite(ratio) ? io::format_number(ratio) : "undefined") << '\n';
    }
    return kExitOk;
}

int cmd_spectrum(const json& cfg, std::ostream& out) {
    const CavityParams cavity = cavity_from(cfg);
    const MagnonParams magnon = magnon_from(cfg);
    const json& block = cfg.at("spectrum");
    const bool by_current = block.contains("current");
    if (by_current == block.contains("omega_m")) {
        throw ConfigError("'spectrum' needs exactly one of 'current' or 'omega_m'");
    }
    std::optional<CoilCalibration> coil;
    std::vector<double> sweep;
    if (by_current) {
        const json& c = require_block(cfg, "coil");
        coil = CoilCalibration{number(c, "slope", "coil"), number_or(c, "offset", 0.0, "coil")};
        coil->validate();
        for (double amp : linear_grid(block.at("current"), "spectrum.current")) {
            sweep.push_back(coil_to_magnon(amp, *coil));
        }
    } else {
        sweep = linear_grid(block.at("omega_m"), "spectrum.omega_m");
    }
    if (!block.contains("probe")) {
        throw ConfigError("missing 'spectrum.probe'");
    }
    const auto probe = linear_grid(block.at("probe"), "spectrum.probe");
    const fs::path dir = output_dir(cfg);

    const TransmissionMap map = transmission_map(cavity, magnon, sweep, probe);
    io::write_atomic(dir / "spectrum.csv", io::transmission_csv(map));

    std::optional<std::size_t> best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < map.rows(); ++r) {
        const auto peaks = polariton_peaks(map, r);
        if (peaks.size() == 2 && peaks[1] - peaks[0] < best_gap) {
            best_gap = peaks[1] - peaks[0];
            best = r;
        }
    }
    out << "wrote " << (dir / "spectrum.csv").string() << " (" << map.rows() << " x " << map.cols() << ")\n";
    if (!best) {
        out << "min_gap_MHz=none\n";
        return kExitOk;
    }
    out << "min_gap_MHz=" << io::format_number(best_gap) << " omega_m_MHz=" << io::format_number(map.omega_m[*best]);
    if (coil) {
        out << " current_A=" << io::format_number(magnon_to_coil(map.omega_m[*best], *coil));
    }
    out << '\n';
    return kExitOk;
}

int cmd_sweep(const json& cfg, std::ostream& out, std::ostream& err) {
    const json& b = cfg.at("sweep");
    SweepPlan plan;
    plan.variable = parse_variable(b, "sweep");
    plan.start = number(b, "start", "sweep");
    plan.stop = number(b, "stop", "sweep");
    const double steps = number(b, "steps", "sweep");
    if (steps != std::floor(steps) || steps > 1e8) {
        throw ConfigError("'sweep.steps' must be an integer");
    }
    plan.steps = static_cast<int>(steps);
    plan.fixed = number(b, "fixed", "sweep");
    plan.linewidth = number(b, "gamma_LP", "sweep");
    plan.coupling = number(b, "c", "sweep");
    const fs::path dir = output_dir(cfg);

    const SweepResult result = run_sweep(plan);
    if (result.forward.degenerate) {
        err << "warning: c = 0, traces are identically zero\n";
    }
    std::optional<double> xi;
    if (b.contains("xi")) {
        xi = number(b, "xi", "sweep");
    }
    const Trace fwd_up = xi ? upper_branch_shift(result.forward, *xi) : Trace{};
    const Trace bwd_up = xi ? upper_branch_shift(result.backward, *xi) : Trace{};
    io::write_atomic(dir / "sweep_forward.csv", io::trace_csv(result.forward, xi ? &fwd_up : nullptr));
    io::write_atomic(dir / "sweep_backward.csv", io::trace_csv(result.backward, xi ? &bwd_up : nullptr));

    const HysteresisLoop loop = loop_metrics(result.forward, result.backward);
    json metrics = io::to_json(loop);
    metrics["variable"] = std::string(to_string(plan.variable));
    metrics["degenerate"] = result.forward.degenerate;
    io::write_atomic(dir / "loop.json", metrics.dump(2) + "\n");
    out << "orientation=" << to_string(loop.orientation) << " area=" << io::format_number(loop.area) << '\n';
    return kExitOk;
}

int cmd_simulate(const json& cfg, std::ostream& out) {
    SystemParams sys{cavity_from(cfg), magnon_from(cfg)};
    const json& b = cfg.at("simulate");
    const json& d = require_block(b, "drive");
    DriveTerm drive;
    drive.frequency = number(d, "frequency", "simulate.drive");
    if (d.contains("strength") == d.contains("power")) {
        throw ConfigError("'simulate.drive' needs exactly one of 'strength' or 'power'");
    }
    if (d.contains("strength")) {
        drive.strength = number(d, "strength", "simulate.drive");
    } else {
        drive = DriveTerm::from_power(drive.frequency, number(d, "power", "simulate.drive"),
                                      number(d, "eta", "simulate.drive"));
    }
    const double kerr = number(b, "kerr_MHz", "simulate");
    SimConfig sim;
    sim.t_end = number_or(b, "t_end", sim.t_end, "simulate");
    sim.dt = number_or(b, "dt", sim.dt, "simulate");
    sim.rel_tol = number_or(b, "rel_tol", sim.rel_tol, "simulate");
    sim.abs_tol = number_or(b, "abs_tol", sim.abs_tol, "simulate");
    sim.sample_interval = number_or(b, "sample_interval", 0.0, "simulate");
    if (b.contains("initial")) {
        const json& i = b.at("initial");
        sim.initial.a = {number_or(i, "re_a", 0.0, "simulate.initial"), number_or(i, "im_a", 0.0, "simulate.initial")};
        sim.initial.b = {number_or(i, "re_b", 0.0, "simulate.initial"), number_or(i, "im_b", 0.0, "simulate.initial")};
    }
    const fs::path dir = output_dir(cfg);

    const IntegrationResult run = integrate(sim, sys, drive, kerr);
    io::write_atomic(dir / "trajectory.csv", io::trajectory_csv(run.trajectory));

    json j;
    j["settled"] = run.settled;
    j["accepted_steps"] = run.accepted_steps;
    j["rejected_steps"] = run.rejected_steps;
    j["final"] = io::to_json(run.final_state);
    json states = json::array();
    for (const auto& s : full_steady_state(sys, drive, kerr)) {
        json e = io::to_json(s.amplitudes);
        e["stability"] = s.stability == Stability::Stable ? "stable" : "unstable";
        states.push_back(e);
    }
    j["steady_states"] = states;
    io::write_atomic(dir / "steady.json", j.dump(2) + "\n");
    out << "settled=" << (run.settled ? "true" : "false") << " n_b=" << io::format_number(run.final_state.magnon_number())
        << '\n';
    return kExitOk;
}

DataSet load_data(const std::string& path, SweepVariable variable, double fixed) {
    if (!fs::exists(path)) {
        throw IoError("data file not found: " + path);
    }
    DataSet data = load_csv(fs::path(path));
    data.variable = variable;
    data.fixed = fixed;
    return data;
}

int cmd_fit(const json& cfg, std::ostream& out) {
    const json& b = cfg.at("fit");
    if (!b.contains("data")) {
        throw ConfigError("missing 'fit.data' (or --data)");
    }
    const SweepVariable variable = parse_variable(b, "fit");
    const double fixed = number(b, "fixed", "fit");
    const DataSet data = load_data(b.at("data").get<std::string>(), variable, fixed);

    FitOptions opt;
    opt.gamma = number(b, "gamma_LP", "fit");
    opt.c0 = number_or(b, "c0", 1.0, "fit");
    opt.free_gamma = b.value("free_gamma", false);
    const std::string mode = b.value("mode", std::string("matched"));
    if (mode == "matched") {
        opt.mode = ResidualMode::DirectionMatched;
    } else if (mode == "blind") {
        opt.mode = ResidualMode::DirectionBlind;
    } else {
        throw ConfigError("'fit.mode' must be matched or blind");
    }
    const fs::path dir = output_dir(cfg);

    const FitResult result = fit_c(data, opt);
    json j = io::to_json(result);
    if (b.contains("upper_data")) {
        const DataSet up = load_data(b.at("upper_data").get<std::string>(), variable, fixed);
        j["xi_hat"] = io::rounded(fit_xi(data, up));
    }
    io::write_atomic(dir / "fit.json", j.dump(2) + "\n");
    out << "c_hat=" << io::format_number(result.c_hat) << " rms=" << io::format_number(result.rms_residual)
        << " converged=" << (result.converged ? "true" : "false") << '\n';
    return kExitOk;
}

json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config " + path);
    }
    json cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded()) {
        throw ConfigError("config " + path + " is not valid JSON");
    }
    return cfg;
}

}  // namespace

json resolve_config(const json& raw, const std::string& command, const std::vector<std::string>& overrides) {
    json cfg = raw.is_null() ? json::object() : raw;
    for (const auto& o : overrides) {
        apply_override(cfg, o);
    }
    check_keys(cfg, "");

    for (const auto& task : kTaskBlocks) {
        if (cfg.contains(task) && task != command) {
            throw ConfigError("config contains task block '" + task + "' but the command is '" + command + "'");
        }
    }
    if (std::find(kTaskBlocks.begin(), kTaskBlocks.end(), command) != kTaskBlocks.end() && !cfg.contains(command)) {
        throw ConfigError("missing '" + command + "' block");
    }

    if (cfg.contains("sweep")) {
        json& s = cfg["sweep"];
        if (parse_variable(s, "sweep") == SweepVariable::Power) {
            normalize_power(s, "start", "sweep");
            normalize_power(s, "stop", "sweep");
        } else {
            normalize_power(s, "fixed", "sweep");
        }
        s["variable"] = std::string(to_string(parse_variable(s, "sweep")));
    }
    if (cfg.contains("fit")) {
        json& f = cfg["fit"];
        if (parse_variable(f, "fit") == SweepVariable::Detuning) {
            normalize_power(f, "fixed", "fit");
        }
        f["variable"] = std::string(to_string(parse_variable(f, "fit")));
    }
    if (cfg.contains("simulate") && cfg["simulate"].contains("drive")) {
        normalize_power(cfg["simulate"]["drive"], "power", "simulate.drive");
    }
    if (cfg.contains("fit")) {
        for (const char* key : {"data", "upper_data"}) {
            if (cfg["fit"].contains(key) && !cfg["fit"][key].is_string()) {
                throw ConfigError(std::string("'fit.") + key + "' must be a path string");
            }
        }
    }
    return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Driven-Kerr cavity magnon-polariton toolkit", "kerrmag"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool dry_run = false;
    std::string out_dir;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("-c,--config", config_path, "JSON run configuration");
        if (config_required) {
            opt->required();
        }
        sub->add_option("--set", overrides, "Override a config value: key.path=value");
        sub->add_flag("--dry-run", dry_run, "Print the resolved configuration and exit");
        sub->add_option("-o,--out", out_dir, "Output directory");
    };

    std::string axis;
    bool as_json = false;
    auto* kerr = app.add_subcommand("kerr", "Kerr coefficient from material constants");
    add_common(kerr, true);
    kerr->add_option("--axis", axis, "Crystal axis along the bias field (100 or 110)");
    kerr->add_flag("--json", as_json, "Machine-readable output");

    auto* spectrum = app.add_subcommand("spectrum", "Anticrossing transmission map");
    add_common(spectrum, true);
    auto* sweep = app.add_subcommand("sweep", "Forward/backward hysteresis sweep");
    add_common(sweep, true);
    auto* simulate = app.add_subcommand("simulate", "Integrate the two-mode equations of motion");
    add_common(simulate, true);
    std::string data_path;
    std::string upper_path;
    auto* fit = app.add_subcommand("fit", "Fit c (and optionally gamma_LP, xi) to sweep data");
    add_common(fit, true);
    fit->add_option("--data", data_path, "Lower-branch data CSV");
    fit->add_option("--upper-data", upper_path, "Upper-branch data CSV for the shift ratio");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        if (!data_path.empty()) {
            overrides.push_back("fit.data=" + json(data_path).dump());
        }
        if (!upper_path.empty()) {
            overrides.push_back("fit.upper_data=" + json(upper_path).dump());
        }
        if (!out_dir.empty()) {
            overrides.push_back("output.dir=" + json(out_dir).dump());
        }
        const json cfg = resolve_config(read_config(config_path), command, overrides);
        if (dry_run) {
            out << cfg.dump(2) << '\n';
            return kExitOk;
        }
        if (command == "kerr") {
            return cmd_kerr(cfg, axis, as_json, out);
        }
        if (command == "spectrum") {
            return cmd_spectrum(cfg, out);
        }
        if (command == "sweep") {
            return cmd_sweep(cfg, out, err);
        }
        if (command == "simulate") {
            return cmd_simulate(cfg, out);
        }
        return cmd_fit(cfg, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ParseError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::ios_base::failure& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DomainError& e) {
        err << "invalid parameters: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        err << "invalid parameters: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace kerrmag::cli
