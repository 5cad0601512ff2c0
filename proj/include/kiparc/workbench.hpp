#pragma once

// =============================================================================
// Workbench: JSON scenario configuration, named scenario runs, CSV/JSON
// artifact export with digests, and dataset import for the fitters.
//
// Boundary units are Hz, A and dB; conversion to the internal rad/s happens
// here and nowhere deeper. A config is fully validated -- unknown keys
// rejected, every domain invariant checked -- before any numeric code runs.
// A run writes its manifest last, so a manifest's existence marks a
// completed run; on failure all partial outputs are removed.
// =============================================================================

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kiparc/csv.hpp"
#include "kiparc/errors.hpp"
#include "kiparc/estimation.hpp"
#include "kiparc/frames.hpp"
#include "kiparc/model.hpp"
#include "kiparc/resonance.hpp"
#include "kiparc/scattering.hpp"
#include "kiparc/sha256.hpp"
#include "kiparc/units.hpp"

namespace kiparc {

using Json = nlohmann::ordered_json;

enum class Scenario { resonances, tuning, gain_map, fringe, quadratures, noise, fit };

[[nodiscard]] inline std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::resonances: return "resonances";
        case Scenario::tuning: return "tuning";
        case Scenario::gain_map: return "gain-map";
        case Scenario::fringe: return "fringe";
        case Scenario::quadratures: return "quadratures";
        case Scenario::noise: return "noise";
        case Scenario::fit: return "fit";
    }
    return "?";
}

[[nodiscard]] inline Scenario scenario_from_name(const std::string& name) {
    for (Scenario s : {Scenario::resonances, Scenario::tuning, Scenario::gain_map,
                       Scenario::fringe, Scenario::quadratures, Scenario::noise,
                       Scenario::fit}) {
        if (scenario_name(s) == name) return s;
    }
    throw ConfigError("unknown scenario '" + name + "'");
}

// -----------------------------------------------------------------------------
// Strict JSON access helpers; every failure names the offending key path.
// -----------------------------------------------------------------------------

namespace jsoncfg {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config: " + (path.empty() ? std::string("<root>") : path) + ": " + msg);
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline const Json& object_at(const Json& parent, const std::string& path) {
    if (!parent.is_object()) fail(path, "expected an object");
    return parent;
}

inline void check_keys(const Json& obj, const std::string& path,
                       const std::set<std::string>& required,
                       const std::set<std::string>& optional) {
    object_at(obj, path);
    for (const auto& item : obj.items()) {
        if (!required.contains(item.key()) && !optional.contains(item.key()))
            fail(join(path, item.key()), "unknown key");
    }
    for (const auto& key : required) {
        if (!obj.contains(key)) fail(join(path, key), "missing required key");
    }
}

inline double number(const Json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

inline double number_at(const Json& obj, const std::string& path, const std::string& key) {
    return number(obj.at(key), join(path, key));
}

inline double number_or(const Json& obj, const std::string& path, const std::string& key,
                        double fallback) {
    return obj.contains(key) ? number_at(obj, path, key) : fallback;
}

inline std::int64_t integer_at(const Json& obj, const std::string& path,
                               const std::string& key) {
    const Json& v = obj.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
    return v.get<std::int64_t>();
}

inline std::string string_at(const Json& obj, const std::string& path,
                             const std::string& key) {
    const Json& v = obj.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
}

inline bool boolean_or(const Json& obj, const std::string& path, const std::string& key,
                       bool fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_boolean()) fail(join(path, key), "expected a boolean");
    return v.get<bool>();
}

inline std::vector<double> number_list(const Json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

/// A sweep axis: either an explicit array or {min, max, count}.
inline std::vector<double> grid(const Json& v, const std::string& path) {
    if (v.is_array()) return number_list(v, path);
    check_keys(v, path, {"min", "max", "count"}, {});
    const double lo = number_at(v, path, "min");
    const double hi = number_at(v, path, "max");
    const std::int64_t count = integer_at(v, path, "count");
    if (count < 1) fail(join(path, "count"), "must be >= 1");
    if (count > 100'000'000) fail(join(path, "count"), "unreasonably large");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] =
            count == 1 ? lo
                       : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

/// Runs `build` and rebrands any DomainError as a ConfigError at `path`, so
/// domain invariants surface as config validation failures.
template <typename Fn>
auto domain(const std::string& path, Fn&& build) {
    try {
        return build();
    } catch (const DomainError& e) {
        fail(path, e.what());
    }
}

} // namespace jsoncfg

// -----------------------------------------------------------------------------
// Config blocks
// -----------------------------------------------------------------------------

namespace detail {

inline RingGeometry parse_ring(const Json& j, const std::string& path) {
    jsoncfg::check_keys(j, path,
                        {"length_m", "inductance_h_per_m", "cap_a_f_per_m", "cap_b_f_per_m"},
                        {});
    return jsoncfg::domain(path, [&] {
        return RingGeometry(jsoncfg::number_at(j, path, "length_m"),
                            jsoncfg::number_at(j, path, "inductance_h_per_m"),
                            jsoncfg::number_at(j, path, "cap_a_f_per_m"),
                            jsoncfg::number_at(j, path, "cap_b_f_per_m"));
    });
}

inline DeviceModes parse_modes(const Json& j, const std::string& path) {
    jsoncfg::check_keys(j, path, {"f_a_hz", "f_b_hz", "kappa_a_hz", "kappa_b_hz", "xi_hz"},
                        {"xi_phase_rad"});
    return jsoncfg::domain(path, [&] {
        const double xi_mag = hz_to_rad(jsoncfg::number_at(j, path, "xi_hz"));
        const double xi_phase = jsoncfg::number_or(j, path, "xi_phase_rad", 0.0);
        const ScatteringParams params(hz_to_rad(jsoncfg::number_at(j, path, "kappa_a_hz")),
                                      hz_to_rad(jsoncfg::number_at(j, path, "kappa_b_hz")),
                                      std::polar(xi_mag, xi_phase));
        return DeviceModes(hz_to_rad(jsoncfg::number_at(j, path, "f_a_hz")),
                           hz_to_rad(jsoncfg::number_at(j, path, "f_b_hz")), params);
    });
}

inline TuningModel parse_tuning(const Json& j, const std::string& path) {
    jsoncfg::check_keys(j, path, {"f0_a_hz", "f0_b_hz", "i_star_a_amps", "i_star_b_amps"},
                        {"alpha_a", "alpha_b"});
    return jsoncfg::domain(path, [&] {
        return TuningModel(jsoncfg::number_at(j, path, "f0_a_hz"),
                           jsoncfg::number_at(j, path, "f0_b_hz"),
                           jsoncfg::number_at(j, path, "i_star_a_amps"),
                           jsoncfg::number_at(j, path, "i_star_b_amps"),
                           jsoncfg::number_or(j, path, "alpha_a", 0.0),
                           jsoncfg::number_or(j, path, "alpha_b", 0.0));
    });
}

} // namespace detail

/// Fit job description: dataset location plus per-kind initial guesses.
struct FitJob {
    std::filesystem::path dataset_path;
    DatasetKind kind{DatasetKind::gain_map};
    Channel channel{Channel::signal};
    std::optional<DeviceModes> modes_init;   // gain_map / gain_slice / fringe
    std::optional<TuningModel> tuning_init;  // tuning
    double power_ratio_guess{1.0};           // fringe
    double x_hz{0.0};                        // fringe operating point
    double y_hz{0.0};
    FitOptions options;
};

/// Fully validated scenario description; only valid configs construct.
struct ScenarioConfig {
    Scenario scenario{Scenario::resonances};
    std::uint64_t seed{0};
    std::filesystem::path output_dir;
    bool force{false};
    Json echo;

    std::optional<RingGeometry> ring;
    std::optional<DeviceModes> modes;
    std::optional<TuningModel> tuning;

    std::optional<Band> band;
    int samples_per_section{0};  // 0: no profile export
    std::vector<double> currents_amps;
    std::vector<double> x_grid_hz;
    std::vector<double> y_grid_hz;
    std::vector<double> phases_rad;
    Complex drive_alpha{0.0, 0.0};
    double drive_beta_mag{1.0};
    double x_offset_hz{0.0};
    double y_offset_hz{0.0};
    int quadrature_count{360};
    double quadrature_amplitude{1.0};
    double noise_n_ratio{0.0};
    std::vector<double> noise_gains_db;
    std::optional<FitJob> fit;
};

namespace detail {

inline DatasetKind dataset_kind_from_name(const std::string& name, const std::string& path) {
    if (name == "gain_map") return DatasetKind::gain_map;
    if (name == "gain_slice") return DatasetKind::gain_slice;
    if (name == "tuning") return DatasetKind::tuning;
    if (name == "fringe") return DatasetKind::fringe;
    if (name == "noise") return DatasetKind::noise;
    jsoncfg::fail(path, "unknown dataset kind '" + name + "'");
}

inline FitJob parse_fit_job(const Json& j, const std::string& path,
                            const std::filesystem::path& config_dir) {
    jsoncfg::check_keys(j, path, {"dataset", "kind", "init"},
                        {"channel", "options"});
    FitJob job;
    std::filesystem::path dataset = jsoncfg::string_at(j, path, "dataset");
    job.dataset_path = dataset.is_absolute() ? dataset : config_dir / dataset;
    job.kind = dataset_kind_from_name(jsoncfg::string_at(j, path, "kind"), path + ".kind");
    if (j.contains("channel")) {
        const std::string c = jsoncfg::string_at(j, path, "channel");
        if (c == "signal") job.channel = Channel::signal;
        else if (c == "idler") job.channel = Channel::idler;
        else jsoncfg::fail(path + ".channel", "expected 'signal' or 'idler'");
    }

    const std::string init_path = path + ".init";
    const Json& init = j.at("init");
    switch (job.kind) {
        case DatasetKind::gain_map:
        case DatasetKind::gain_slice:
            jsoncfg::check_keys(init, init_path, {"modes"}, {});
            job.modes_init = parse_modes(init.at("modes"), init_path + ".modes");
            break;
        case DatasetKind::tuning:
            jsoncfg::check_keys(init, init_path, {"tuning"}, {});
            job.tuning_init = parse_tuning(init.at("tuning"), init_path + ".tuning");
            break;
        case DatasetKind::fringe:
            jsoncfg::check_keys(init, init_path, {"modes", "power_ratio"}, {"x_hz", "y_hz"});
            job.modes_init = parse_modes(init.at("modes"), init_path + ".modes");
            job.power_ratio_guess = jsoncfg::number_at(init, init_path, "power_ratio");
            if (!(job.power_ratio_guess > 0.0))
                jsoncfg::fail(init_path + ".power_ratio", "must be > 0");
            job.x_hz = jsoncfg::number_or(init, init_path, "x_hz", 0.0);
            job.y_hz = jsoncfg::number_or(init, init_path, "y_hz", 0.0);
            break;
        case DatasetKind::noise:
            jsoncfg::check_keys(init, init_path, {}, {});
            break;
    }

    if (j.contains("options")) {
        const std::string opt_path = path + ".options";
        const Json& opt = j.at("options");
        jsoncfg::check_keys(opt, opt_path, {},
                            {"max_iterations", "residual_space", "fit_axis_offsets",
                             "fit_alpha"});
        if (opt.contains("max_iterations")) {
            const auto n = jsoncfg::integer_at(opt, opt_path, "max_iterations");
            if (n < 1) jsoncfg::fail(opt_path + ".max_iterations", "must be >= 1");
            job.options.max_iterations = static_cast<int>(n);
        }
        if (opt.contains("residual_space")) {
            const std::string s = jsoncfg::string_at(opt, opt_path, "residual_space");
            if (s == "db") job.options.residual_space = ResidualSpace::decibel;
            else if (s == "linear") job.options.residual_space = ResidualSpace::linear;
            else jsoncfg::fail(opt_path + ".residual_space", "expected 'db' or 'linear'");
        } else if (job.kind == DatasetKind::noise) {
            job.options.residual_space = ResidualSpace::linear;
        }
        job.options.fit_axis_offsets =
            jsoncfg::boolean_or(opt, opt_path, "fit_axis_offsets", false);
        job.options.fit_alpha = jsoncfg::boolean_or(opt, opt_path, "fit_alpha", false);
    } else if (job.kind == DatasetKind::noise) {
        job.options.residual_space = ResidualSpace::linear;
    }
    return job;
}

} // namespace detail

/// Parse and validate one scenario document. `config_dir` anchors relative
/// dataset paths. Unknown keys anywhere are rejected; required blocks per
/// scenario are enforced; all domain invariants are checked here.
[[nodiscard]] inline ScenarioConfig parse_scenario_config(
    const Json& doc, Scenario scenario, const std::filesystem::path& config_dir = ".") {
    ScenarioConfig cfg;
    cfg.scenario = scenario;
    cfg.echo = doc;

    std::set<std::string> required, optional{"scenario", "seed", "output_dir"};
    switch (scenario) {
        case Scenario::resonances:
            required = {"device"};
            optional.insert("sweep");
            break;
        case Scenario::tuning:
        case Scenario::gain_map:
        case Scenario::quadratures:
            required = {"device", "sweep"};
            break;
        case Scenario::fringe:
            required = {"device", "drive", "sweep"};
            break;
        case Scenario::noise:
            required = {"noise", "sweep"};
            break;
        case Scenario::fit:
            required = {"fit"};
            break;
    }
    jsoncfg::check_keys(doc, "", required, optional);

    if (doc.contains("scenario")) {
        const std::string declared = jsoncfg::string_at(doc, "", "scenario");
        if (declared != scenario_name(scenario))
            jsoncfg::fail("scenario", "declares '" + declared + "' but '" +
                                          scenario_name(scenario) + "' was requested");
    }
    if (doc.contains("seed")) {
        const auto seed = jsoncfg::integer_at(doc, "", "seed");
        if (seed < 0) jsoncfg::fail("seed", "must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    if (doc.contains("output_dir")) cfg.output_dir = jsoncfg::string_at(doc, "", "output_dir");

    const auto parse_device = [&](const char* block) {
        const Json& device = doc.at("device");
        jsoncfg::check_keys(device, "device", {block}, {});
        return &device.at(block);
    };

    switch (scenario) {
        case Scenario::resonances: {
            cfg.ring = detail::parse_ring(*parse_device("ring"), "device.ring");
            if (doc.contains("sweep")) {
                const Json& sweep = doc.at("sweep");
                jsoncfg::check_keys(sweep, "sweep", {}, {"band_hz", "samples_per_section"});
                if (sweep.contains("band_hz")) {
                    const auto band = jsoncfg::number_list(sweep.at("band_hz"), "sweep.band_hz");
                    if (band.size() != 2 || !(band[0] > 0.0) || !(band[1] > band[0]))
                        jsoncfg::fail("sweep.band_hz", "expected [f_min, f_max] with 0 < f_min < f_max");
                    cfg.band = Band{band[0], band[1]};
                }
                if (sweep.contains("samples_per_section")) {
                    const auto n = jsoncfg::integer_at(sweep, "sweep", "samples_per_section");
                    if (n < 3 || n > 1'000'000)
                        jsoncfg::fail("sweep.samples_per_section", "must be in [3, 1000000]");
                    cfg.samples_per_section = static_cast<int>(n);
                }
            }
            break;
        }
        case Scenario::tuning: {
            cfg.tuning = detail::parse_tuning(*parse_device("tuning"), "device.tuning");
            const Json& sweep = doc.at("sweep");
            jsoncfg::check_keys(sweep, "sweep", {"currents_amps"}, {});
            cfg.currents_amps = jsoncfg::grid(sweep.at("currents_amps"), "sweep.currents_amps");
            if (cfg.currents_amps.empty())
                jsoncfg::fail("sweep.currents_amps", "must be nonempty");
            for (std::size_t i = 0; i < cfg.currents_amps.size(); ++i) {
                if (!(cfg.currents_amps[i] >= 0.0) ||
                    (i > 0 && !(cfg.currents_amps[i] > cfg.currents_amps[i - 1])))
                    jsoncfg::fail("sweep.currents_amps",
                                  "currents must be nonnegative and strictly ascending");
            }
            break;
        }
        case Scenario::gain_map: {
            cfg.modes = detail::parse_modes(*parse_device("modes"), "device.modes");
            const Json& sweep = doc.at("sweep");
            jsoncfg::check_keys(sweep, "sweep", {"x_hz", "y_hz"}, {});
            cfg.x_grid_hz = jsoncfg::grid(sweep.at("x_hz"), "sweep.x_hz");
            cfg.y_grid_hz = jsoncfg::grid(sweep.at("y_hz"), "sweep.y_hz");
            break;
        }
        case Scenario::fringe: {
            cfg.modes = detail::parse_modes(*parse_device("modes"), "device.modes");
            const Json& drive = doc.at("drive");
            jsoncfg::check_keys(drive, "drive", {"alpha", "beta_mag"}, {});
            const auto alpha = jsoncfg::number_list(drive.at("alpha"), "drive.alpha");
            if (alpha.size() != 2) jsoncfg::fail("drive.alpha", "expected [re, im]");
            cfg.drive_alpha = Complex{alpha[0], alpha[1]};
            cfg.drive_beta_mag = jsoncfg::number_at(drive, "drive", "beta_mag");
            if (!(cfg.drive_beta_mag > 0.0)) jsoncfg::fail("drive.beta_mag", "must be > 0");
            const Json& sweep = doc.at("sweep");
            jsoncfg::check_keys(sweep, "sweep", {"phases_rad"}, {"x_hz", "y_hz"});
            cfg.phases_rad = jsoncfg::grid(sweep.at("phases_rad"), "sweep.phases_rad");
            cfg.x_offset_hz = jsoncfg::number_or(sweep, "sweep", "x_hz", 0.0);
            cfg.y_offset_hz = jsoncfg::number_or(sweep, "sweep", "y_hz", 0.0);
            break;
        }
        case Scenario::quadratures: {
            cfg.modes = detail::parse_modes(*parse_device("modes"), "device.modes");
            const Json& sweep = doc.at("sweep");
            jsoncfg::check_keys(sweep, "sweep", {}, {"count", "amplitude", "x_hz", "y_hz"});
            if (sweep.contains("count")) {
                const auto n = jsoncfg::integer_at(sweep, "sweep", "count");
                if (n < 4 || n > 10'000'000) jsoncfg::fail("sweep.count", "must be in [4, 1e7]");
                cfg.quadrature_count = static_cast<int>(n);
            }
            cfg.quadrature_amplitude = jsoncfg::number_or(sweep, "sweep", "amplitude", 1.0);
            if (!(cfg.quadrature_amplitude > 0.0))
                jsoncfg::fail("sweep.amplitude", "must be > 0");
            cfg.x_offset_hz = jsoncfg::number_or(sweep, "sweep", "x_hz", 0.0);
            cfg.y_offset_hz = jsoncfg::number_or(sweep, "sweep", "y_hz", 0.0);
            break;
        }
        case Scenario::noise: {
            const Json& noise = doc.at("noise");
            jsoncfg::check_keys(noise, "noise", {"n_ratio"}, {});
            cfg.noise_n_ratio = jsoncfg::number_at(noise, "noise", "n_ratio");
            if (!(cfg.noise_n_ratio >= 0.0)) jsoncfg::fail("noise.n_ratio", "must be >= 0");
            const Json& sweep = doc.at("sweep");
            jsoncfg::check_keys(sweep, "sweep", {"gains_db"}, {});
            cfg.noise_gains_db = jsoncfg::grid(sweep.at("gains_db"), "sweep.gains_db");
            for (double g : cfg.noise_gains_db) {
                if (g < 0.0) jsoncfg::fail("sweep.gains_db", "gains below 0 dB are invalid");
            }
            break;
        }
        case Scenario::fit:
            cfg.fit = detail::parse_fit_job(doc.at("fit"), "fit", config_dir);
            break;
    }
    return cfg;
}

/// Read a config file, parse its JSON, and validate for `scenario`.
[[nodiscard]] inline ScenarioConfig load_scenario_config(const std::filesystem::path& path,
                                                         Scenario scenario) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_scenario_config(doc, scenario, path.parent_path());
}

// -----------------------------------------------------------------------------
// Dataset import
// -----------------------------------------------------------------------------

namespace detail {

inline int required_column(const ParsedCsv& csv, const std::string& name,
                           const std::string& origin) {
    const int idx = csv.column_index(name);
    if (idx < 0)
        throw ConfigError(origin + ": schema mismatch, missing column '" + name + "'");
    return idx;
}

} // namespace detail

/// Load a CSV dataset of the given kind. Fringe files may carry one or both
/// gain columns; every present channel is loaded. `channel` selects the value
/// column for gain maps.
[[nodiscard]] inline Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind,
                                          Channel channel = Channel::signal) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string origin = path.string();
    const ParsedCsv csv = parse_csv(text, origin);

    Dataset data;
    data.kind = kind;
    data.channel = channel;
    const int weight_col = csv.column_index("weight");
    const bool weighted = weight_col >= 0;

    auto push_weight = [&](const std::vector<double>& row, std::size_t line) {
        if (!weighted) return;
        const double w = row[static_cast<std::size_t>(weight_col)];
        if (!(w > 0.0) || !std::isfinite(w))
            throw ConfigError(origin + ": line " + std::to_string(line) +
                              ": weights must be positive");
        data.weights.push_back(w);
    };

    switch (kind) {
        case DatasetKind::gain_map:
        case DatasetKind::gain_slice: {
            const int cx = detail::required_column(csv, "x", origin);
            const int cy = detail::required_column(csv, "y", origin);
            const int cv = detail::required_column(
                csv, channel == Channel::signal ? "Gs_dB" : "Gi_dB", origin);
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                const auto& row = csv.rows[i];
                data.coord1.push_back(row[static_cast<std::size_t>(cx)]);
                data.coord2.push_back(row[static_cast<std::size_t>(cy)]);
                data.values.push_back(row[static_cast<std::size_t>(cv)]);
                push_weight(row, csv.row_lines[i]);
            }
            break;
        }
        case DatasetKind::tuning: {
            const int ci = detail::required_column(csv, "I_A", origin);
            const int ca = detail::required_column(csv, "f_a_Hz", origin);
            const int cb = detail::required_column(csv, "f_b_Hz", origin);
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                const auto& row = csv.rows[i];
                for (int mode = 0; mode < 2; ++mode) {
                    data.coord1.push_back(row[static_cast<std::size_t>(ci)]);
                    data.coord2.push_back(mode);
                    data.values.push_back(
                        row[static_cast<std::size_t>(mode == 0 ? ca : cb)]);
                    push_weight(row, csv.row_lines[i]);
                }
            }
            break;
        }
        case DatasetKind::fringe: {
            const int cp = detail::required_column(csv, "phase_rad", origin);
            const int cs = csv.column_index("Gs_dB");
            const int ci = csv.column_index("Gi_dB");
            if (cs < 0 && ci < 0)
                throw ConfigError(origin +
                                  ": schema mismatch, missing column 'Gs_dB' or 'Gi_dB'");
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                const auto& row = csv.rows[i];
                for (const auto& [col, chan] : {std::pair{cs, 0}, std::pair{ci, 1}}) {
                    if (col < 0) continue;
                    data.coord1.push_back(row[static_cast<std::size_t>(cp)]);
                    data.coord2.push_back(chan);
                    data.values.push_back(row[static_cast<std::size_t>(col)]);
                    push_weight(row, csv.row_lines[i]);
                }
            }
            break;
        }
        case DatasetKind::noise: {
            const int cg = detail::required_column(csv, "G_linear", origin);
            const int cn = detail::required_column(csv, "NF_linear", origin);
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                const auto& row = csv.rows[i];
                data.coord1.push_back(row[static_cast<std::size_t>(cg)]);
                data.coord2.push_back(0.0);
                data.values.push_back(row[static_cast<std::size_t>(cn)]);
                push_weight(row, csv.row_lines[i]);
            }
            break;
        }
    }

    try {
        data.validate();
    } catch (const DomainError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return data;
}

// -----------------------------------------------------------------------------
// Scenario execution
// -----------------------------------------------------------------------------

/// Completed-run record. The manifest file is written only after every other
/// output landed, and lists each file with its content digest.
struct RunManifest {
    std::filesystem::path path;
    Json document;
    std::vector<std::filesystem::path> outputs;
};

namespace detail {

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

inline void add_common_meta(CsvTable& t, const ScenarioConfig& cfg,
                            const std::string& params) {
    t.add_meta("tool", std::string("kiparc ") + KIPARC_VERSION);
    t.add_meta("scenario", scenario_name(cfg.scenario));
    t.add_meta("seed", std::to_string(cfg.seed));
    t.add_meta("units", "frequencies Hz, currents A, gains dB, phases rad");
    if (!params.empty()) t.add_meta("params", params);
}

inline std::string modes_params_string(const DeviceModes& m) {
    return "f_a_hz=" + format_number(rad_to_hz(m.omega_a)) +
           " f_b_hz=" + format_number(rad_to_hz(m.omega_b)) +
           " kappa_a_hz=" + format_number(rad_to_hz(m.params.kappa_a)) +
           " kappa_b_hz=" + format_number(rad_to_hz(m.params.kappa_b)) +
           " xi_hz=" + format_number(rad_to_hz(std::abs(m.params.xi)));
}

inline FramePoint operating_point(const ScenarioConfig& cfg) {
    return map_axes_to_frame(*cfg.modes, hz_to_rad(cfg.x_offset_hz),
                             hz_to_rad(cfg.y_offset_hz));
}

// --- per-scenario output builders; each returns {filename -> contents} ------

using OutputSet = std::vector<std::pair<std::string, std::string>>;

inline OutputSet build_resonances(const ScenarioConfig& cfg) {
    const RingGeometry& geom = *cfg.ring;
    const Band band = cfg.band ? *cfg.band : fundamental_band(geom);
    const ModePair modes = solve_mode_frequencies(geom, band);

    OutputSet files;
    CsvTable table;
    add_common_meta(table, cfg,
                    "length_m=" + format_number(geom.total_length()) +
                        " inductance_h_per_m=" + format_number(geom.inductance_per_length()) +
                        " z_a_ohm=" + format_number(geom.impedance(Mode::a)) +
                        " z_b_ohm=" + format_number(geom.impedance(Mode::b)));
    table.add_meta("band_hz", "[" + format_number(band.f_min) + ", " +
                                  format_number(band.f_max) + "]");
    table.add_meta("residual_a", format_number(characteristic_residual(modes.f_a, geom, Mode::a)));
    table.add_meta("residual_b", format_number(characteristic_residual(modes.f_b, geom, Mode::b)));
    table.columns = {"f_a_Hz", "f_b_Hz"};
    table.add_row({modes.f_a, modes.f_b});
    files.emplace_back("resonances.csv", table.serialize());

    if (cfg.samples_per_section > 0) {
        for (Mode m : {Mode::a, Mode::b}) {
            const ModeProfile profile =
                mode_profile(geom, modes, m, cfg.samples_per_section);
            CsvTable pt;
            add_common_meta(pt, cfg, std::string("mode=") + (m == Mode::a ? "a" : "b") +
                                         " f_hz=" + format_number(modes.frequency(m)));
            pt.columns = {"position_m", "voltage", "current"};
            for (std::size_t i = 0; i < profile.positions.size(); ++i)
                pt.add_row({profile.positions[i], profile.voltage[i], profile.current[i]});
            files.emplace_back(m == Mode::a ? "profile_a.csv" : "profile_b.csv",
                               pt.serialize());
        }
    }
    return files;
}

inline OutputSet build_tuning(const ScenarioConfig& cfg) {
    const auto curve = tuning_curve(*cfg.tuning, cfg.currents_amps);
    CsvTable table;
    add_common_meta(table, cfg,
                    "f0_a_hz=" + format_number(cfg.tuning->f0_a) +
                        " f0_b_hz=" + format_number(cfg.tuning->f0_b) +
                        " i_star_a_amps=" + format_number(cfg.tuning->i_star_a) +
                        " i_star_b_amps=" + format_number(cfg.tuning->i_star_b) +
                        " alpha_a=" + format_number(cfg.tuning->alpha_a) +
                        " alpha_b=" + format_number(cfg.tuning->alpha_b));
    table.columns = {"I_A", "f_a_Hz", "f_b_Hz"};
    for (std::size_t i = 0; i < curve.size(); ++i)
        table.add_row({cfg.currents_amps[i], curve[i].f_a, curve[i].f_b});
    return {{"tuning.csv", table.serialize()}};
}

inline OutputSet build_gain_map(const ScenarioConfig& cfg) {
    std::vector<double> x_rad(cfg.x_grid_hz.size()), y_rad(cfg.y_grid_hz.size());
    for (std::size_t i = 0; i < x_rad.size(); ++i) x_rad[i] = hz_to_rad(cfg.x_grid_hz[i]);
    for (std::size_t i = 0; i < y_rad.size(); ++i) y_rad[i] = hz_to_rad(cfg.y_grid_hz[i]);
    const GainMap map = gain_map(*cfg.modes, x_rad, y_rad);

    OutputSet files;
    for (const bool idler : {false, true}) {
        CsvTable table;
        add_common_meta(table, cfg, modes_params_string(*cfg.modes));
        table.add_meta("axis_x", "omega_s_minus_omega_b_Hz");
        table.add_meta("axis_y", "omega_i_minus_omega_a_Hz");
        table.columns = {"x", "y", idler ? "Gi_dB" : "Gs_dB"};
        for (std::size_t ix = 0; ix < map.x.size(); ++ix) {
            for (std::size_t iy = 0; iy < map.y.size(); ++iy) {
                const std::size_t cell = map.index(ix, iy);
                const double value =
                    map.masked[cell]
                        ? std::numeric_limits<double>::quiet_NaN()
                        : (idler ? map.g_i_db[cell] : map.g_s_db[cell]);
                table.add_row({cfg.x_grid_hz[ix], cfg.y_grid_hz[iy], value});
            }
        }
        files.emplace_back(idler ? "gain_map_idler.csv" : "gain_map_signal.csv",
                           table.serialize());
    }
    return files;
}

inline OutputSet build_fringe(const ScenarioConfig& cfg) {
    const FramePoint fp = operating_point(cfg);
    const FringeResult fringe = interference_fringe(fp.params, fp.delta, cfg.drive_alpha,
                                                    cfg.drive_beta_mag, cfg.phases_rad);
    CsvTable table;
    add_common_meta(table, cfg,
                    modes_params_string(*cfg.modes) +
                        " alpha=" + format_number(cfg.drive_alpha.real()) + "+" +
                        format_number(cfg.drive_alpha.imag()) +
                        "i beta_mag=" + format_number(cfg.drive_beta_mag) +
                        " x_hz=" + format_number(cfg.x_offset_hz) +
                        " y_hz=" + format_number(cfg.y_offset_hz));
    table.columns = {"phase_rad", "Gs_dB", "Gi_dB"};
    for (std::size_t i = 0; i < fringe.phases.size(); ++i)
        table.add_row({fringe.phases[i], fringe.g_s_db[i], fringe.g_i_db[i]});
    return {{"fringe.csv", table.serialize()}};
}

inline OutputSet build_quadratures(const ScenarioConfig& cfg) {
    const FramePoint fp = operating_point(cfg);
    std::vector<double> phases(static_cast<std::size_t>(cfg.quadrature_count));
    for (std::size_t i = 0; i < phases.size(); ++i) {
        phases[i] = -std::numbers::pi +
                    two_pi * static_cast<double>(i) / static_cast<double>(phases.size());
    }
    const QuadratureSweep aligned = align_quadratures(
        phase_sweep(fp.params, fp.delta, phases, cfg.quadrature_amplitude));
    CsvTable table;
    add_common_meta(table, cfg,
                    modes_params_string(*cfg.modes) +
                        " amplitude=" + format_number(cfg.quadrature_amplitude));
    table.add_meta("convention", "outputs rotated so (I,Q)=(-1,0) at phi_s=-pi");
    table.columns = {"phi_s_rad", "Is", "Qs", "Ii", "Qi"};
    for (std::size_t i = 0; i < aligned.phases.size(); ++i) {
        const QuadratureSample& q = aligned.samples[i];
        table.add_row({aligned.phases[i], q.i_s, q.q_s, q.i_i, q.q_i});
    }
    return {{"quadratures.csv", table.serialize()}};
}

inline OutputSet build_noise(const ScenarioConfig& cfg) {
    CsvTable table;
    add_common_meta(table, cfg, "n_ratio=" + format_number(cfg.noise_n_ratio));
    table.columns = {"G_linear", "NF_linear"};
    for (double g_db : cfg.noise_gains_db) {
        const double g = db_to_power(g_db);
        table.add_row({g, noise_figure(g, cfg.noise_n_ratio)});
    }
    return {{"noise.csv", table.serialize()}};
}

inline OutputSet build_fit(const ScenarioConfig& cfg) {
    const FitJob& job = *cfg.fit;
    const Dataset data = load_dataset(job.dataset_path, job.kind, job.channel);

    FitResult fit;
    Json params = Json::object();
    Json errors = Json::object();
    switch (job.kind) {
        case DatasetKind::gain_map:
        case DatasetKind::gain_slice: {
            fit = fit_gain_map(data, *job.modes_init, job.modes_init->params, job.options);
            for (const char* name : {"kappa_a", "kappa_b", "xi_mag"}) {
                params[std::string(name) + "_hz"] = rad_to_hz(fit.parameter(name));
                errors[std::string(name) + "_hz"] = rad_to_hz(fit.standard_error(name));
            }
            if (job.options.fit_axis_offsets) {
                for (const char* name : {"x_offset", "y_offset"}) {
                    params[std::string(name) + "_hz"] = rad_to_hz(fit.parameter(name));
                    errors[std::string(name) + "_hz"] = rad_to_hz(fit.standard_error(name));
                }
            }
            break;
        }
        case DatasetKind::tuning: {
            fit = fit_tuning_curve(data, *job.tuning_init, job.options);
            for (const auto& [name, value] : fit.parameters) {
                params[name] = value;
                errors[name] = fit.standard_error(name);
            }
            break;
        }
        case DatasetKind::fringe: {
            const FramePoint fp = map_axes_to_frame(*job.modes_init, hz_to_rad(job.x_hz),
                                                    hz_to_rad(job.y_hz));
            fit = fit_fringe(data, fp.params, fp.delta, job.power_ratio_guess, job.options);
            for (const char* name : {"kappa_a", "kappa_b", "xi_mag"}) {
                params[std::string(name) + "_hz"] = rad_to_hz(fit.parameter(name));
                errors[std::string(name) + "_hz"] = rad_to_hz(fit.standard_error(name));
            }
            for (const auto& [name, value] : fit.parameters) {
                if (name == "kappa_a" || name == "kappa_b" || name == "xi_mag") continue;
                params[name] = value;
                errors[name] = fit.standard_error(name);
            }
            break;
        }
        case DatasetKind::noise: {
            fit = fit_noise(data, job.options);
            params["n_ratio"] = fit.parameter("n_ratio");
            errors["n_ratio"] = fit.standard_error("n_ratio");
            break;
        }
    }

    Json out;
    out["dataset"] = job.dataset_path.string();
    out["kind"] = [&] {
        switch (job.kind) {
            case DatasetKind::gain_map: return "gain_map";
            case DatasetKind::gain_slice: return "gain_slice";
            case DatasetKind::tuning: return "tuning";
            case DatasetKind::fringe: return "fringe";
            case DatasetKind::noise: return "noise";
        }
        return "?";
    }();
    out["points"] = data.size();
    out["seed"] = cfg.seed;
    out["parameters"] = params;
    out["standard_errors"] = errors;
    out["residual_norm"] = fit.residual_norm;
    out["iterations"] = fit.iterations;
    out["converged"] = fit.converged;
    return {{"fit_result.json", out.dump(2) + "\n"}};
}

} // namespace detail

/// Write a set of fully rendered artifacts into cfg.output_dir and seal them
/// with manifest.json. Existing files are refused unless cfg.force; any
/// failure removes files written during this call before rethrowing.
inline RunManifest export_artifacts(const ScenarioConfig& cfg,
                                    const std::vector<std::pair<std::string, std::string>>&
                                        files) {
    if (cfg.output_dir.empty())
        throw ConfigError("config: output_dir missing (set it in the config or pass --out)");
    if (files.empty()) throw DomainError("nothing to export");

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output dir " + cfg.output_dir.string());

    const std::filesystem::path manifest_path = cfg.output_dir / "manifest.json";
    if (!cfg.force) {
        for (const auto& [name, contents] : files) {
            (void)contents;
            if (std::filesystem::exists(cfg.output_dir / name))
                throw IoError("refusing to overwrite " + (cfg.output_dir / name).string() +
                              " (pass --force to allow)");
        }
        if (std::filesystem::exists(manifest_path))
            throw IoError("refusing to overwrite " + manifest_path.string() +
                          " (pass --force to allow)");
    }

    RunManifest manifest;
    manifest.path = manifest_path;
    Json outputs = Json::array();
    std::vector<std::filesystem::path> written;
    try {
        for (const auto& [name, contents] : files) {
            const std::filesystem::path target = cfg.output_dir / name;
            detail::write_file(target, contents);
            written.push_back(target);
            outputs.push_back({{"file", name}, {"sha256", Sha256::digest(contents)}});
            manifest.outputs.push_back(target);
        }
        Json doc;
        doc["tool"] = "kiparc";
        doc["version"] = KIPARC_VERSION;
        doc["timestamp"] = detail::iso_timestamp();
        doc["scenario"] = scenario_name(cfg.scenario);
        doc["seed"] = cfg.seed;
        doc["config"] = cfg.echo;
        doc["outputs"] = outputs;
        detail::write_file(manifest_path, doc.dump(2) + "\n");
        manifest.document = std::move(doc);
    } catch (...) {
        for (const auto& path : written) {
            std::error_code ignore;
            std::filesystem::remove(path, ignore);
        }
        throw;
    }
    return manifest;
}

/// Execute a scenario: compute every output in memory, then export.
inline RunManifest run_scenario(const ScenarioConfig& cfg) {
    detail::OutputSet files;
    switch (cfg.scenario) {
        case Scenario::resonances: files = detail::build_resonances(cfg); break;
        case Scenario::tuning: files = detail::build_tuning(cfg); break;
        case Scenario::gain_map: files = detail::build_gain_map(cfg); break;
        case Scenario::fringe: files = detail::build_fringe(cfg); break;
        case Scenario::quadratures: files = detail::build_quadratures(cfg); break;
        case Scenario::noise: files = detail::build_noise(cfg); break;
        case Scenario::fit: files = detail::build_fit(cfg); break;
    }
    return export_artifacts(cfg, files);
}

} // namespace kiparc
