// kiparc: numerical workbench for a two-mode kinetic-inductance parametric
// converter. Each subcommand runs one named scenario from a JSON config and
// writes CSV/JSON artifacts plus a manifest with content digests.
//
// Exit codes: 0 success, 2 config error, 3 numeric error, 4 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kiparc/workbench.hpp"

namespace {

struct ScenarioSpec {
    kiparc::Scenario scenario;
    const char* description;
};

constexpr ScenarioSpec kScenarios[] = {
    {kiparc::Scenario::resonances,
     "Solve the ring's two fundamental resonances (optionally with standing-wave profiles)"},
    {kiparc::Scenario::tuning,
     "Resonance frequencies versus DC bias current from the nonlinear-inductance model"},
    {kiparc::Scenario::gain_map,
     "Signal and idler gain maps over (signal, idler) detuning axes"},
    {kiparc::Scenario::fringe,
     "Two-tone interference fringes: gains versus swept signal phase"},
    {kiparc::Scenario::quadratures,
     "Aligned output quadratures for a swept input signal phase"},
    {kiparc::Scenario::noise,
     "Noise figure versus gain for a given device-to-system noise ratio"},
    {kiparc::Scenario::fit,
     "Least-squares parameter estimation from a CSV dataset"},
};

int run(kiparc::Scenario scenario, const std::string& config_path,
        const std::optional<std::string>& out_dir,
        const std::optional<std::uint64_t>& seed, bool force) {
    kiparc::ScenarioConfig cfg = kiparc::load_scenario_config(config_path, scenario);
    if (out_dir) cfg.output_dir = *out_dir;
    if (seed) cfg.seed = *seed;
    cfg.force = force;

    const kiparc::RunManifest manifest = kiparc::run_scenario(cfg);
    std::cout << "wrote " << manifest.outputs.size() << " output file(s); manifest at "
              << manifest.path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kiparc " KIPARC_VERSION
                 " - kinetic-inductance parametric converter workbench"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::optional<std::string> out;
        std::optional<std::uint64_t> seed;
        bool force = false;
    };

    std::vector<std::pair<kiparc::Scenario, std::shared_ptr<SubArgs>>> subs;
    for (const ScenarioSpec& spec : kScenarios) {
        auto args = std::make_shared<SubArgs>();
        CLI::App* sub = app.add_subcommand(kiparc::scenario_name(spec.scenario),
                                           spec.description);
        sub->add_option("--config", args->config, "JSON scenario config")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", args->out, "output directory (overrides config)");
        sub->add_option("--seed", args->seed, "seed recorded in outputs (overrides config)");
        sub->add_flag("--force", args->force, "allow overwriting existing outputs");
        subs.emplace_back(spec.scenario, std::move(args));
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [scenario, args] : subs) {
            if (app.get_subcommand(kiparc::scenario_name(scenario))->parsed())
                return run(scenario, args->config, args->out, args->seed, args->force);
        }
        std::cerr << "error: no scenario selected\n";
        return 2;
    } catch (const kiparc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const kiparc::DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const kiparc::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const kiparc::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
