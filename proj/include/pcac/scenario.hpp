#pragma once

#include <pcac/common.hpp>
#include <pcac/controller.hpp>
#include <pcac/plant.hpp>
#include <pcac/simulation.hpp>
#include <pcac/trajectory.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace pcac {

/**
 * Scenario files are JSON documents (comments allowed):
 *
 *   name, sample_time, steps                 required
 *   description, substeps (10), seed (0)     optional
 *   plant  { type: "lti" | "threedof", outputs: [names], inputs: [names],
 *            input_trim: [..],
 *            lti:      A, B, C (row lists), x0
 *            threedof: parameters {..}, initial {airspeed, altitude,
 *                      flight_path_angle, pitch_angle (deg), pitch_rate (deg/s)} }
 *   loops  [ { name, outputs, inputs, tracked, order, horizon,
 *              q_bar, p_bar, r, u_max, u_min, du_max, du_min, psi0,
 *              theta0 (0.01), forgetting {eta, short_window, long_window,
 *              significance, max_beta (1.1), psi_trace_ratio (1)}, dither {amplitude, steps},
 *              commands { <tracked name>: [[t, value], ...] } } ]
 *
 * Weight and limit entries accept a scalar (replicated per channel) or a
 * per-channel list; u_min / du_min default to -u_max / -du_max.
 */
class ScenarioError : public ConfigError {
public:
    explicit ScenarioError(std::vector<std::string> errors)
        : ConfigError(join(errors)), errors_(std::move(errors))
    {
    }

    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errs)
    {
        std::string out = "invalid scenario:";
        for (const auto& e : errs) {
            out += "\n  " + e;
        }
        return out;
    }

    std::vector<std::string> errors_;
};

struct LtiPlantSpec {
    std::vector<std::vector<double>> A;
    std::vector<std::vector<double>> B;
    std::vector<std::vector<double>> C;
    std::vector<double> x0;
    bool operator==(const LtiPlantSpec&) const = default;
};

struct ThreeDofPlantSpec {
    ThreeDofParameters parameters;
    double airspeed = 85.0;
    double altitude = 2000.0;
    double flight_path_angle = 0.0; // deg
    double pitch_angle = 0.0;       // deg
    double pitch_rate = 0.0;        // deg/s
    bool operator==(const ThreeDofPlantSpec&) const = default;
};

struct PlantSpec {
    std::string type;
    std::vector<std::string> outputs;
    std::vector<std::string> inputs;
    std::vector<double> input_trim;
    LtiPlantSpec lti;
    ThreeDofPlantSpec threedof;
    bool operator==(const PlantSpec&) const = default;
};

struct LoopSpec {
    std::string name;
    std::vector<std::string> outputs;
    std::vector<std::string> inputs;
    std::vector<std::string> tracked;
    int order = 1;
    int horizon = 1;
    std::vector<double> q_bar;
    std::vector<double> p_bar;
    std::vector<double> r;
    std::vector<double> u_min;
    std::vector<double> u_max;
    std::vector<double> du_min;
    std::vector<double> du_max;
    double theta0 = 0.01;
    double psi0 = 1.0;
    ForgettingConfig forgetting;
    double dither_amplitude = 0.0;
    int dither_steps = 0;
    std::vector<CommandTrajectory> commands; // aligned with `tracked`
    bool operator==(const LoopSpec&) const = default;
};

struct Scenario {
    std::string name;
    std::string description;
    double sample_time = 0.05;
    std::int64_t steps = 1;
    int substeps = 10;
    std::uint64_t seed = 0;
    PlantSpec plant;
    std::vector<LoopSpec> loops;
    bool operator==(const Scenario&) const = default;
};

namespace detail {

using nlohmann::json;

class ScenarioReader {
public:
    std::vector<std::string> errors;

    void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
    {
        if (!obj.is_object()) {
            return;
        }
        for (const auto& [key, _] : obj.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                errors.push_back(path + key + ": unknown key");
            }
        }
    }

    bool has(const json& obj, const char* key) const { return obj.is_object() && obj.contains(key); }

    void missing(const std::string& path, const char* key)
    {
        errors.push_back(path + key + ": missing required key");
    }

    template <typename T>
    std::optional<T> get(const json& obj, const std::string& path, const char* key, bool required)
    {
        if (!has(obj, key)) {
            if (required) {
                missing(path, key);
            }
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if constexpr (std::is_same_v<T, std::string>) {
            if (v.is_string()) {
                return v.get<std::string>();
            }
            errors.push_back(path + key + ": expected a string");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (v.is_boolean()) {
                return v.get<bool>();
            }
            errors.push_back(path + key + ": expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (v.is_number_integer()) {
                return v.get<T>();
            }
            errors.push_back(path + key + ": expected an integer");
        } else {
            if (v.is_number()) {
                return v.get<double>();
            }
            errors.push_back(path + key + ": expected a number");
        }
        return std::nullopt;
    }

    std::vector<std::string> names(const json& obj, const std::string& path, const char* key, bool required)
    {
        std::vector<std::string> out;
        if (!has(obj, key)) {
            if (required) {
                missing(path, key);
            }
            return out;
        }
        const json& v = obj.at(key);
        if (!v.is_array()) {
            errors.push_back(path + key + ": expected a list of names");
            return out;
        }
        for (const auto& e : v) {
            if (!e.is_string()) {
                errors.push_back(path + key + ": expected a list of names");
                return {};
            }
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    std::vector<double> numbers(const json& v, const std::string& where)
    {
        std::vector<double> out;
        if (!v.is_array()) {
            errors.push_back(where + ": expected a list of numbers");
            return out;
        }
        for (const auto& e : v) {
            if (!e.is_number()) {
                errors.push_back(where + ": expected a list of numbers");
                return {};
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::vector<double>> rows(const json& obj, const std::string& path, const char* key, bool required)
    {
        std::vector<std::vector<double>> out;
        if (!has(obj, key)) {
            if (required) {
                missing(path, key);
            }
            return out;
        }
        const json& v = obj.at(key);
        if (!v.is_array()) {
            errors.push_back(path + key + ": expected a list of rows");
            return out;
        }
        for (const auto& row : v) {
            out.push_back(numbers(row, path + key));
        }
        return out;
    }

    // Scalar or per-channel list, replicated to `channels`.
    std::vector<double> channels(const json& obj, const std::string& path, const char* key, std::size_t count,
                                 bool required)
    {
        if (!has(obj, key)) {
            if (required) {
                missing(path, key);
            }
            return {};
        }
        const json& v = obj.at(key);
        if (v.is_number()) {
            return std::vector<double>(count, v.get<double>());
        }
        auto out = numbers(v, path + key);
        if (!out.empty() && out.size() != count) {
            errors.push_back(path + key + ": expected " + std::to_string(count) + " entries, got " +
                             std::to_string(out.size()));
        }
        return out;
    }
};

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows)
{
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r > 0 ? static_cast<Eigen::Index>(rows.front().size()) : 0;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
            throw DimensionError("matrix rows have unequal lengths");
        }
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

inline Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline int index_of(const std::vector<std::string>& names, const std::string& name)
{
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

#define PCAC_THREEDOF_FIELDS(X)                                                                                  \
    X(mass) X(wing_area) X(chord) X(air_density) X(gravity) X(pitch_inertia) X(cl0) X(cl_alpha) X(cl_elevator) \
        X(cd0) X(induced_drag) X(cm0) X(cm_alpha) X(cm_pitch_rate) X(cm_elevator) X(max_thrust)

inline void read_plant(ScenarioReader& rd, const json& j, PlantSpec& plant)
{
    const std::string path = "plant.";
    if (!j.is_object()) {
        rd.errors.push_back("plant: expected an object");
        return;
    }
    rd.unknown_keys(j, path, {"type", "outputs", "inputs", "input_trim", "lti", "threedof"});
    plant.type = rd.get<std::string>(j, path, "type", true).value_or("");
    plant.outputs = rd.names(j, path, "outputs", true);
    plant.inputs = rd.names(j, path, "inputs", true);
    if (rd.has(j, "input_trim")) {
        plant.input_trim = rd.channels(j, path, "input_trim", plant.inputs.size(), false);
    } else {
        plant.input_trim.assign(plant.inputs.size(), 0.0);
    }

    if (plant.type == "lti") {
        if (!rd.has(j, "lti")) {
            rd.missing(path, "lti");
            return;
        }
        const json& l = j.at("lti");
        const std::string lp = path + "lti.";
        rd.unknown_keys(l, lp, {"A", "B", "C", "x0"});
        plant.lti.A = rd.rows(l, lp, "A", true);
        plant.lti.B = rd.rows(l, lp, "B", true);
        plant.lti.C = rd.rows(l, lp, "C", true);
        if (rd.has(l, "x0")) {
            plant.lti.x0 = rd.numbers(l.at("x0"), lp + "x0");
        } else {
            plant.lti.x0.assign(plant.lti.A.size(), 0.0);
        }
    } else if (plant.type == "threedof") {
        if (!rd.has(j, "threedof")) {
            return; // all defaults
        }
        const json& t = j.at("threedof");
        const std::string tp = path + "threedof.";
        rd.unknown_keys(t, tp, {"parameters", "initial"});
        if (rd.has(t, "parameters")) {
            const json& p = t.at("parameters");
            const std::string pp = tp + "parameters.";
#define PCAC_KEY(f) #f,
            rd.unknown_keys(p, pp, {PCAC_THREEDOF_FIELDS(PCAC_KEY)});
#undef PCAC_KEY
#define PCAC_READ(f)                                                                                             \
    if (auto v = rd.get<double>(p, pp, #f, false)) {                                                            \
        plant.threedof.parameters.f = *v;                                                                       \
    }
            PCAC_THREEDOF_FIELDS(PCAC_READ)
#undef PCAC_READ
        }
        if (rd.has(t, "initial")) {
            const json& i = t.at("initial");
            const std::string ip = tp + "initial.";
            rd.unknown_keys(i, ip, {"airspeed", "altitude", "flight_path_angle", "pitch_angle", "pitch_rate"});
            auto& s = plant.threedof;
            s.airspeed = rd.get<double>(i, ip, "airspeed", false).value_or(s.airspeed);
            s.altitude = rd.get<double>(i, ip, "altitude", false).value_or(s.altitude);
            s.flight_path_angle = rd.get<double>(i, ip, "flight_path_angle", false).value_or(s.flight_path_angle);
            s.pitch_angle = rd.get<double>(i, ip, "pitch_angle", false).value_or(s.pitch_angle);
            s.pitch_rate = rd.get<double>(i, ip, "pitch_rate", false).value_or(s.pitch_rate);
        }
    } else if (!plant.type.empty()) {
        rd.errors.push_back("plant.type: expected \"lti\" or \"threedof\", got \"" + plant.type + "\"");
    }
}

inline void read_loop(ScenarioReader& rd, const json& j, const std::string& path, LoopSpec& loop)
{
    if (!j.is_object()) {
        rd.errors.push_back(path + ": expected an object");
        return;
    }
    const std::string p = path + ".";
    rd.unknown_keys(j, p,
                    {"name", "outputs", "inputs", "tracked", "order", "horizon", "q_bar", "p_bar", "r", "u_min",
                     "u_max", "du_min", "du_max", "theta0", "psi0", "forgetting", "dither", "commands"});
    loop.name = rd.get<std::string>(j, p, "name", true).value_or("");
    loop.outputs = rd.names(j, p, "outputs", true);
    loop.inputs = rd.names(j, p, "inputs", true);
    loop.tracked = rd.names(j, p, "tracked", true);
    loop.order = rd.get<int>(j, p, "order", true).value_or(1);
    loop.horizon = rd.get<int>(j, p, "horizon", true).value_or(1);
    const auto pt = loop.tracked.size();
    const auto m = loop.inputs.size();
    loop.q_bar = rd.channels(j, p, "q_bar", pt, loop.horizon > 1);
    if (loop.q_bar.empty()) {
        loop.q_bar.assign(pt, 1.0);
    }
    loop.p_bar = rd.channels(j, p, "p_bar", pt, true);
    loop.r = rd.channels(j, p, "r", m, true);
    loop.u_max = rd.channels(j, p, "u_max", m, true);
    loop.du_max = rd.channels(j, p, "du_max", m, true);
    loop.u_min = rd.has(j, "u_min") ? rd.channels(j, p, "u_min", m, false) : std::vector<double>{};
    if (loop.u_min.empty()) {
        for (double v : loop.u_max) {
            loop.u_min.push_back(-v);
        }
    }
    loop.du_min = rd.has(j, "du_min") ? rd.channels(j, p, "du_min", m, false) : std::vector<double>{};
    if (loop.du_min.empty()) {
        for (double v : loop.du_max) {
            loop.du_min.push_back(-v);
        }
    }
    loop.theta0 = rd.get<double>(j, p, "theta0", false).value_or(0.01);
    loop.psi0 = rd.get<double>(j, p, "psi0", true).value_or(1.0);

    if (rd.has(j, "forgetting")) {
        const json& f = j.at("forgetting");
        const std::string fp = p + "forgetting.";
        rd.unknown_keys(f, fp, {"eta", "short_window", "long_window", "significance", "max_beta",
                                       "psi_trace_ratio"});
        loop.forgetting.enabled = true;
        loop.forgetting.eta = rd.get<double>(f, fp, "eta", true).value_or(0.0);
        loop.forgetting.short_window = rd.get<int>(f, fp, "short_window", true).value_or(0);
        loop.forgetting.long_window = rd.get<int>(f, fp, "long_window", true).value_or(0);
        loop.forgetting.significance = rd.get<double>(f, fp, "significance", true).value_or(0.0);
        loop.forgetting.max_beta = rd.get<double>(f, fp, "max_beta", false).value_or(loop.forgetting.max_beta);
        loop.forgetting.psi_trace_ratio =
            rd.get<double>(f, fp, "psi_trace_ratio", false).value_or(loop.forgetting.psi_trace_ratio);
    }
    if (rd.has(j, "dither")) {
        const json& d = j.at("dither");
        const std::string dp = p + "dither.";
        rd.unknown_keys(d, dp, {"amplitude", "steps"});
        loop.dither_amplitude = rd.get<double>(d, dp, "amplitude", true).value_or(0.0);
        loop.dither_steps = rd.get<int>(d, dp, "steps", true).value_or(0);
    }

    if (!rd.has(j, "commands")) {
        rd.missing(p, "commands");
        return;
    }
    const json& c = j.at("commands");
    if (!c.is_object()) {
        rd.errors.push_back(p + "commands: expected an object keyed by tracked output");
        return;
    }
    for (const auto& [key, _] : c.items()) {
        if (std::find(loop.tracked.begin(), loop.tracked.end(), key) == loop.tracked.end()) {
            rd.errors.push_back(p + "commands." + key + ": not a tracked output of this loop");
        }
    }
    for (const auto& name : loop.tracked) {
        CommandTrajectory traj;
        if (!c.contains(name)) {
            rd.errors.push_back(p + "commands." + name + ": missing command trajectory");
        } else {
            const json& knots = c.at(name);
            bool ok = knots.is_array() && !knots.empty();
            if (ok) {
                for (const auto& k : knots) {
                    if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
                        ok = false;
                        break;
                    }
                    traj.knots.emplace_back(k[0].get<double>(), k[1].get<double>());
                }
            }
            if (!ok) {
                rd.errors.push_back(p + "commands." + name + ": expected a nonempty list of [time, value] knots");
            }
        }
        loop.commands.push_back(std::move(traj));
    }
}

inline std::vector<std::string> semantic_errors(const Scenario& s);

} // namespace detail

inline AnyPlant build_plant(const PlantSpec& spec)
{
    if (spec.type == "lti") {
        LtiPlant p{detail::to_matrix(spec.lti.A), detail::to_matrix(spec.lti.B), detail::to_matrix(spec.lti.C),
                   detail::to_vector(spec.lti.x0)};
        p.validate();
        return p;
    }
    if (spec.type == "threedof") {
        constexpr double deg = std::numbers::pi / 180.0;
        const auto& t = spec.threedof;
        ThreeDofLongitudinalPlant p;
        p.params = t.parameters;
        p.x0 << t.airspeed, t.flight_path_angle * deg, t.altitude, t.pitch_angle * deg, t.pitch_rate * deg;
        p.validate();
        return p;
    }
    throw ConfigError("unknown plant type '" + spec.type + "'");
}

inline PlantIo build_plant_io(const PlantSpec& spec)
{
    return {spec.outputs, spec.inputs, detail::to_vector(spec.input_trim)};
}

inline std::uint64_t loop_seed(std::uint64_t seed, std::size_t loop_index)
{
    return seed ^ (0x9E3779B97F4A7C15ULL * (loop_index + 1));
}

inline PcacConfig build_loop_config(const Scenario& s, std::size_t loop_index)
{
    const LoopSpec& l = s.loops.at(loop_index);
    PcacConfig cfg;
    cfg.dims = ArxDims{l.order, static_cast<int>(l.inputs.size()), static_cast<int>(l.outputs.size())};
    cfg.horizon = l.horizon;
    for (const auto& name : l.outputs) {
        const int idx = detail::index_of(s.plant.outputs, name);
        if (idx < 0) {
            throw ConfigError("loop '" + l.name + "': unknown plant output '" + name + "'");
        }
        cfg.output_map.push_back(idx);
    }
    for (const auto& name : l.inputs) {
        const int idx = detail::index_of(s.plant.inputs, name);
        if (idx < 0) {
            throw ConfigError("loop '" + l.name + "': unknown plant input '" + name + "'");
        }
        cfg.input_map.push_back(idx);
    }
    Matrix ct = Matrix::Zero(static_cast<Eigen::Index>(l.tracked.size()), static_cast<Eigen::Index>(l.outputs.size()));
    for (std::size_t i = 0; i < l.tracked.size(); ++i) {
        const int idx = detail::index_of(l.outputs, l.tracked[i]);
        if (idx < 0) {
            throw ConfigError("loop '" + l.name + "': tracked output '" + l.tracked[i] + "' is not a loop output");
        }
        ct(static_cast<Eigen::Index>(i), idx) = 1.0;
    }
    cfg.weights = MpcWeights::diagonal(l.horizon, detail::to_vector(l.q_bar), detail::to_vector(l.p_bar),
                                       detail::to_vector(l.r), ct);
    cfg.limits = SaturationLimits{detail::to_vector(l.u_min), detail::to_vector(l.u_max), detail::to_vector(l.du_min),
                                  detail::to_vector(l.du_max)};
    cfg.theta0_scale = l.theta0;
    cfg.psi0_scale = l.psi0;
    cfg.forgetting = l.forgetting;
    cfg.dither = DitherConfig{l.dither_amplitude, l.dither_steps, loop_seed(s.seed, loop_index)};
    cfg.validate();
    return cfg;
}

inline std::vector<LoopBinding> build_loops(const Scenario& s)
{
    std::vector<LoopBinding> out;
    for (std::size_t i = 0; i < s.loops.size(); ++i) {
        out.push_back(LoopBinding{s.loops[i].name, PcacController(build_loop_config(s, i)), s.loops[i].commands});
    }
    return out;
}

namespace detail {

inline std::vector<std::string> semantic_errors(const Scenario& s)
{
    std::vector<std::string> errs;
    if (s.name.empty()) {
        errs.push_back("name: must be nonempty");
    }
    if (!(s.sample_time > 0.0)) {
        errs.push_back("sample_time: must be positive");
    }
    if (s.steps < 1) {
        errs.push_back("steps: must be >= 1");
    }
    if (s.substeps < 1) {
        errs.push_back("substeps: must be >= 1");
    }
    if (s.loops.empty()) {
        errs.push_back("loops: at least one loop is required");
    }
    std::optional<AnyPlant> plant;
    try {
        plant = build_plant(s.plant);
    } catch (const std::exception& e) {
        errs.push_back(std::string("plant: ") + e.what());
    }
    if (plant) {
        if (static_cast<Eigen::Index>(s.plant.outputs.size()) != plant_outputs(*plant)) {
            errs.push_back("plant.outputs: expected " + std::to_string(plant_outputs(*plant)) + " names");
        }
        if (static_cast<Eigen::Index>(s.plant.inputs.size()) != plant_inputs(*plant)) {
            errs.push_back("plant.inputs: expected " + std::to_string(plant_inputs(*plant)) + " names");
        }
    }
    if (s.plant.input_trim.size() != s.plant.inputs.size()) {
        errs.push_back("plant.input_trim: expected one entry per plant input");
    }

    static const std::regex loop_name("[A-Za-z0-9]+");
    std::set<std::string> names;
    std::set<std::string> driven;
    for (std::size_t i = 0; i < s.loops.size(); ++i) {
        const auto& l = s.loops[i];
        const std::string p = "loops[" + std::to_string(i) + "]";
        if (!std::regex_match(l.name, loop_name)) {
            errs.push_back(p + ".name: must be alphanumeric");
        }
        if (!names.insert(l.name).second) {
            errs.push_back(p + ".name: duplicate loop name '" + l.name + "'");
        }
        for (const auto& in : l.inputs) {
            if (!driven.insert(in).second) {
                errs.push_back(p + ".inputs: plant input '" + in + "' already driven by another loop");
            }
        }
        if (l.tracked.empty()) {
            errs.push_back(p + ".tracked: at least one tracked output is required");
        }
        for (std::size_t c = 0; c < l.commands.size() && c < l.tracked.size(); ++c) {
            try {
                l.commands[c].validate();
            } catch (const std::exception& e) {
                errs.push_back(p + ".commands." + l.tracked[c] + ": " + e.what());
            }
        }
        try {
            (void)build_loop_config(s, i);
        } catch (const std::exception& e) {
            errs.push_back(p + ": " + e.what());
        }
    }
    return errs;
}

} // namespace detail

/// Parse and validate a scenario document; throws ScenarioError listing every problem found.
inline Scenario parse_scenario(const std::string& text)
{
    using nlohmann::json;
    json doc;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
        doc = json::object();
    } else {
        try {
            doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
        } catch (const json::parse_error& e) {
            throw ScenarioError({std::string("syntax: ") + e.what()});
        }
    }
    if (!doc.is_object()) {
        throw ScenarioError({"document: expected a JSON object at top level"});
    }

    detail::ScenarioReader rd;
    Scenario s;
    rd.unknown_keys(doc, "", {"name", "description", "sample_time", "steps", "substeps", "seed", "plant", "loops"});
    s.name = rd.get<std::string>(doc, "", "name", true).value_or("");
    s.description = rd.get<std::string>(doc, "", "description", false).value_or("");
    s.sample_time = rd.get<double>(doc, "", "sample_time", true).value_or(0.0);
    s.steps = rd.get<std::int64_t>(doc, "", "steps", true).value_or(0);
    s.substeps = rd.get<int>(doc, "", "substeps", false).value_or(10);
    s.seed = rd.get<std::uint64_t>(doc, "", "seed", false).value_or(0);
    if (rd.has(doc, "plant")) {
        detail::read_plant(rd, doc.at("plant"), s.plant);
    } else {
        rd.missing("", "plant");
    }
    if (rd.has(doc, "loops")) {
        const json& loops = doc.at("loops");
        if (!loops.is_array()) {
            rd.errors.push_back("loops: expected a list");
        } else {
            for (std::size_t i = 0; i < loops.size(); ++i) {
                LoopSpec l;
                detail::read_loop(rd, loops[i], "loops[" + std::to_string(i) + "]", l);
                s.loops.push_back(std::move(l));
            }
        }
    } else {
        rd.missing("", "loops");
    }
    if (!rd.errors.empty()) {
        throw ScenarioError(rd.errors);
    }
    if (auto errs = detail::semantic_errors(s); !errs.empty()) {
        throw ScenarioError(std::move(errs));
    }
    return s;
}

/// Canonical text form; parse_scenario(print_scenario(s)) == s.
inline std::string print_scenario(const Scenario& s)
{
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["name"] = s.name;
    if (!s.description.empty()) {
        doc["description"] = s.description;
    }
    doc["sample_time"] = s.sample_time;
    doc["steps"] = s.steps;
    doc["substeps"] = s.substeps;
    doc["seed"] = s.seed;

    ordered_json plant;
    plant["type"] = s.plant.type;
    plant["outputs"] = s.plant.outputs;
    plant["inputs"] = s.plant.inputs;
    plant["input_trim"] = s.plant.input_trim;
    if (s.plant.type == "lti") {
        ordered_json l;
        l["A"] = s.plant.lti.A;
        l["B"] = s.plant.lti.B;
        l["C"] = s.plant.lti.C;
        l["x0"] = s.plant.lti.x0;
        plant["lti"] = l;
    } else if (s.plant.type == "threedof") {
        ordered_json params;
#define PCAC_WRITE(f) params[#f] = s.plant.threedof.parameters.f;
        PCAC_THREEDOF_FIELDS(PCAC_WRITE)
#undef PCAC_WRITE
        ordered_json init;
        init["airspeed"] = s.plant.threedof.airspeed;
        init["altitude"] = s.plant.threedof.altitude;
        init["flight_path_angle"] = s.plant.threedof.flight_path_angle;
        init["pitch_angle"] = s.plant.threedof.pitch_angle;
        init["pitch_rate"] = s.plant.threedof.pitch_rate;
        plant["threedof"] = {{"parameters", params}, {"initial", init}};
    }
    doc["plant"] = plant;

    ordered_json loops = ordered_json::array();
    for (const auto& l : s.loops) {
        ordered_json j;
        j["name"] = l.name;
        j["outputs"] = l.outputs;
        j["inputs"] = l.inputs;
        j["tracked"] = l.tracked;
        j["order"] = l.order;
        j["horizon"] = l.horizon;
        j["q_bar"] = l.q_bar;
        j["p_bar"] = l.p_bar;
        j["r"] = l.r;
        j["u_min"] = l.u_min;
        j["u_max"] = l.u_max;
        j["du_min"] = l.du_min;
        j["du_max"] = l.du_max;
        j["theta0"] = l.theta0;
        j["psi0"] = l.psi0;
        if (l.forgetting.enabled) {
            j["forgetting"] = {{"eta", l.forgetting.eta},
                               {"short_window", l.forgetting.short_window},
                               {"long_window", l.forgetting.long_window},
                               {"significance", l.forgetting.significance},
                               {"max_beta", l.forgetting.max_beta},
                               {"psi_trace_ratio", l.forgetting.psi_trace_ratio}};
        }
        if (l.dither_amplitude != 0.0 || l.dither_steps != 0) {
            j["dither"] = {{"amplitude", l.dither_amplitude}, {"steps", l.dither_steps}};
        }
        ordered_json cmds = ordered_json::object();
        for (std::size_t i = 0; i < l.tracked.size() && i < l.commands.size(); ++i) {
            ordered_json knots = ordered_json::array();
            for (const auto& [t, v] : l.commands[i].knots) {
                knots.push_back({t, v});
            }
            cmds[l.tracked[i]] = knots;
        }
        j["commands"] = cmds;
        loops.push_back(j);
    }
    doc["loops"] = loops;
    return doc.dump(2) + "\n";
}

/// Build the plant and loops described by `s` and run them.
inline SimulationTrace run_scenario(const Scenario& s)
{
    const AnyPlant plant = build_plant(s.plant);
    auto loops = build_loops(s);
    RunSettings settings{s.sample_time, s.steps, s.substeps};
    SimulationTrace trace = run_closed_loop(plant, build_plant_io(s.plant), loops, settings);
    trace.config_echo = print_scenario(s);
    return trace;
}

} // namespace pcac
