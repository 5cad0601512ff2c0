#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "kiparc/workbench.hpp"
#include "support.hpp"

using namespace kiparc;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("kiparc_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json device_modes_json() {
    return Json{{"f_a_hz", 5.5e9},
                {"f_b_hz", 6.3e9},
                {"kappa_a_hz", 4.597e6},
                {"kappa_b_hz", 3.210e6},
                {"xi_hz", 7.408e6}};
}

} // namespace

TEST_CASE("number formatting", "[csv]") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(1.5) == "1.5");
    CHECK(format_number(2.2e-3) == "0.0022");
    CHECK(format_number(23.0660763304544) == "23.0660763305");
    CHECK(format_number(5.5e9) == "5500000000");
    CHECK(format_number(-300.0) == "-300");
}

TEST_CASE("sha256 known vectors", "[sha256]") {
    CHECK(Sha256::digest("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::digest("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::digest(std::string(1000, 'x')) != Sha256::digest(std::string(999, 'x')));
}

TEST_CASE("csv parse errors carry line numbers", "[csv]") {
    CHECK_THROWS_WITH(parse_csv("a,b\n1,2\n3,oops\n", "test.csv"),
                      Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THROWS_WITH(parse_csv("a,b\n1\n", "test.csv"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    const ParsedCsv ok = parse_csv("# key: value\na,b\n1,2\n", "test.csv");
    CHECK(ok.meta.at("key") == "value");
    CHECK(ok.columns == std::vector<std::string>{"a", "b"});
    CHECK(ok.rows.size() == 1);
}

TEST_CASE("config validation", "[config]") {
    SECTION("unknown keys are rejected with their path") {
        Json doc{{"device", {{"ring", {{"length_m", 2.2e-3},
                                       {"inductance_h_per_m", 1e-4},
                                       {"cap_a_f_per_m", 1e-10},
                                       {"cap_b_f_per_m", 1e-10},
                                       {"typo_key", 1.0}}}}}};
        CHECK_THROWS_WITH(parse_scenario_config(doc, Scenario::resonances),
                          Catch::Matchers::ContainsSubstring("device.ring.typo_key"));
    }

    SECTION("missing required block") {
        CHECK_THROWS_WITH(parse_scenario_config(Json::object(), Scenario::resonances),
                          Catch::Matchers::ContainsSubstring("device"));
    }

    SECTION("scenario mismatch") {
        Json doc{{"scenario", "noise"},
                 {"device", {{"ring", {{"length_m", 2.2e-3},
                                       {"inductance_h_per_m", 1e-4},
                                       {"cap_a_f_per_m", 1e-10},
                                       {"cap_b_f_per_m", 1e-10}}}}}};
        CHECK_THROWS_AS(parse_scenario_config(doc, Scenario::resonances), ConfigError);
    }

    SECTION("domain invariants are checked at load") {
        Json doc{{"device", {{"ring", {{"length_m", -1.0},
                                       {"inductance_h_per_m", 1e-4},
                                       {"cap_a_f_per_m", 1e-10},
                                       {"cap_b_f_per_m", 1e-10}}}}}};
        CHECK_THROWS_AS(parse_scenario_config(doc, Scenario::resonances), ConfigError);
    }

    SECTION("blocks not required by the scenario are rejected") {
        Json doc{{"noise", {{"n_ratio", 0.167}}},
                 {"sweep", {{"gains_db", Json::array({0.0, 10.0, 20.0})}}},
                 {"device", {{"modes", device_modes_json()}}}};
        CHECK_THROWS_WITH(parse_scenario_config(doc, Scenario::noise),
                          Catch::Matchers::ContainsSubstring("device"));
    }

    SECTION("currents must ascend") {
        Json doc{{"device", {{"tuning", {{"f0_a_hz", 5.5e9},
                                         {"f0_b_hz", 6.3e9},
                                         {"i_star_a_amps", 779e-6},
                                         {"i_star_b_amps", 1033e-6}}}}},
                 {"sweep", {{"currents_amps", Json::array({0.0, 2e-4, 1e-4})}}}};
        CHECK_THROWS_AS(parse_scenario_config(doc, Scenario::tuning), ConfigError);
    }
}

TEST_CASE("dataset loading", "[dataset]") {
    TempDir tmp;

    SECTION("two-row tuning file expands to two points per mode") {
        const fs::path p = tmp.path / "tuning.csv";
        write_text(p, "# seed: 0\nI_A,f_a_Hz,f_b_Hz\n0,5.5e9,6.3e9\n1e-4,5.49e9,6.29e9\n");
        const Dataset data = load_dataset(p, DatasetKind::tuning);
        CHECK(data.size() == 4);
        CHECK(data.coord2 == std::vector<double>{0.0, 1.0, 0.0, 1.0});
        CHECK(data.values[0] == 5.5e9);
        CHECK(data.values[1] == 6.3e9);
    }

    SECTION("negative weight is a schema error") {
        const fs::path p = tmp.path / "noise.csv";
        write_text(p, "G_linear,NF_linear,weight\n1,1,1\n10,0.25,-2\n");
        CHECK_THROWS_WITH(load_dataset(p, DatasetKind::noise),
                          Catch::Matchers::ContainsSubstring("positive"));
    }

    SECTION("missing column is named") {
        const fs::path p = tmp.path / "map.csv";
        write_text(p, "x,y,wrong\n0,0,1\n");
        CHECK_THROWS_WITH(load_dataset(p, DatasetKind::gain_map, Channel::signal),
                          Catch::Matchers::ContainsSubstring("Gs_dB"));
    }

    SECTION("missing file is an i/o error") {
        CHECK_THROWS_AS(load_dataset(tmp.path / "absent.csv", DatasetKind::noise), IoError);
    }

    SECTION("fringe file loads every channel present") {
        const fs::path p = tmp.path / "fringe.csv";
        write_text(p, "phase_rad,Gs_dB,Gi_dB\n-3.14,1,2\n0,3,4\n");
        const Dataset data = load_dataset(p, DatasetKind::fringe);
        CHECK(data.size() == 4);
        CHECK(data.values == std::vector<double>{1.0, 2.0, 3.0, 4.0});
    }
}

TEST_CASE("scenario runs", "[workbench]") {
    SECTION("resonances scenario writes the solved pair") {
        TempDir tmp;
        Json doc{{"seed", 3},
                 {"output_dir", (tmp.path / "out").string()},
                 {"device", {{"ring", {{"length_m", 2.2e-3},
                                       {"inductance_h_per_m", 1e-4},
                                       {"cap_a_f_per_m", 1e-4 / (940.0 * 940.0)},
                                       {"cap_b_f_per_m", 1e-4 / (1320.0 * 1320.0)}}}}},
                 {"sweep", {{"samples_per_section", 9}}}};
        const RunManifest manifest =
            run_scenario(parse_scenario_config(doc, Scenario::resonances));
        CHECK(fs::exists(manifest.path));
        CHECK(manifest.outputs.size() == 3);

        const ParsedCsv csv =
            parse_csv(read_text(tmp.path / "out/resonances.csv"), "resonances.csv");
        CHECK(csv.rows.at(0).at(0) == Approx(4.4694179192e9).epsilon(1e-9));
        CHECK(csv.rows.at(0).at(1) == Approx(5.5051429961e9).epsilon(1e-9));
        CHECK(csv.meta.at("seed") == "3");

        // manifest digests match the files on disk
        for (const auto& entry : manifest.document.at("outputs")) {
            const std::string contents =
                read_text(tmp.path / "out" / entry.at("file").get<std::string>());
            CHECK(Sha256::digest(contents) == entry.at("sha256").get<std::string>());
        }
    }

    SECTION("noise scenario approaches the asymptote") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"noise", {{"n_ratio", 0.167}}},
                 {"sweep", {{"gains_db", {{"min", 0.0}, {"max", 40.0}, {"count", 41}}}}}};
        run_scenario(parse_scenario_config(doc, Scenario::noise));
        const ParsedCsv csv = parse_csv(read_text(tmp.path / "out/noise.csv"), "noise.csv");
        CHECK(csv.rows.front().at(1) == 1.0);  // 0 dB gain -> NF 1 exactly
        const double nf_db = power_db(csv.rows.back().at(1));
        CHECK(nf_db == Approx(-7.7).margin(0.15));  // 40 dB gain, nearly saturated
    }

    SECTION("gain-map center cell and determinism") {
        TempDir tmp;
        Json doc{{"seed", 11},
                 {"output_dir", (tmp.path / "a").string()},
                 {"device", {{"modes", device_modes_json()}}},
                 {"sweep", {{"x_hz", {{"min", -15e6}, {"max", 15e6}, {"count", 201}}},
                            {"y_hz", {{"min", -15e6}, {"max", 15e6}, {"count", 201}}}}}};
        ScenarioConfig cfg = parse_scenario_config(doc, Scenario::gain_map);
        const RunManifest first = run_scenario(cfg);
        cfg.output_dir = tmp.path / "b";
        const RunManifest second = run_scenario(cfg);

        for (const char* name : {"gain_map_signal.csv", "gain_map_idler.csv"}) {
            CHECK(read_text(tmp.path / "a" / name) == read_text(tmp.path / "b" / name));
        }
        const ParsedCsv csv =
            parse_csv(read_text(tmp.path / "a/gain_map_signal.csv"), "map.csv");
        CHECK(csv.meta.at("axis_x") == "omega_s_minus_omega_b_Hz");
        CHECK(csv.meta.at("axis_y") == "omega_i_minus_omega_a_Hz");
        // the idler map carries identical axes metadata
        const ParsedCsv idler =
            parse_csv(read_text(tmp.path / "a/gain_map_idler.csv"), "map.csv");
        CHECK(idler.meta.at("axis_x") == csv.meta.at("axis_x"));
        CHECK(idler.meta.at("axis_y") == csv.meta.at("axis_y"));
        CHECK(idler.meta.at("params") == csv.meta.at("params"));
        bool found_center = false;
        for (const auto& row : csv.rows) {
            if (row[0] == 0.0 && row[1] == 0.0) {
                CHECK(row[2] == Approx(23.0660763305).margin(1e-6));
                found_center = true;
            }
        }
        CHECK(found_center);
    }

    SECTION("overwrite refusal and --force semantics") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"noise", {{"n_ratio", 0.1}}},
                 {"sweep", {{"gains_db", Json::array({0.0, 10.0, 20.0})}}}};
        ScenarioConfig cfg = parse_scenario_config(doc, Scenario::noise);
        run_scenario(cfg);
        CHECK_THROWS_AS(run_scenario(cfg), IoError);
        cfg.force = true;
        CHECK_NOTHROW(run_scenario(cfg));
    }

    SECTION("failed runs leave no outputs behind") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"fit", {{"dataset", (tmp.path / "missing.csv").string()},
                          {"kind", "noise"},
                          {"init", Json::object()}}}};
        const ScenarioConfig cfg = parse_scenario_config(doc, Scenario::fit);
        CHECK_THROWS_AS(run_scenario(cfg), IoError);
        CHECK(!fs::exists(tmp.path / "out/manifest.json"));
    }

    SECTION("exported map re-imported for a fit recovers the generator") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"device", {{"modes", device_modes_json()}}},
                 {"sweep", {{"x_hz", {{"min", -15e6}, {"max", 15e6}, {"count", 31}}},
                            {"y_hz", {{"min", -15e6}, {"max", 15e6}, {"count", 31}}}}}};
        run_scenario(parse_scenario_config(doc, Scenario::gain_map));

        Json fit_doc{
            {"output_dir", (tmp.path / "fit").string()},
            {"fit",
             {{"dataset", (tmp.path / "out/gain_map_signal.csv").string()},
              {"kind", "gain_map"},
              {"channel", "signal"},
              {"init",
               {{"modes", Json{{"f_a_hz", 5.5e9},
                               {"f_b_hz", 6.3e9},
                               {"kappa_a_hz", 5.3e6},
                               {"kappa_b_hz", 2.8e6},
                               {"xi_hz", 6.5e6}}}}}}}};
        const RunManifest manifest =
            run_scenario(parse_scenario_config(fit_doc, Scenario::fit));
        const Json result = Json::parse(read_text(tmp.path / "fit/fit_result.json"));
        CHECK(result.at("converged").get<bool>());
        CHECK(result.at("parameters").at("kappa_a_hz").get<double>() ==
              Approx(4.597e6).epsilon(1e-6));
        CHECK(result.at("parameters").at("kappa_b_hz").get<double>() ==
              Approx(3.210e6).epsilon(1e-6));
        CHECK(result.at("parameters").at("xi_mag_hz").get<double>() ==
              Approx(7.408e6).epsilon(1e-6));
        CHECK(manifest.document.at("outputs").size() == 1);
    }

    SECTION("tuning and noise fit jobs run from JSON configs") {
        TempDir tmp;
        Json tuning_doc{
            {"output_dir", (tmp.path / "curve").string()},
            {"device", {{"tuning", {{"f0_a_hz", 5.5e9},
                                    {"f0_b_hz", 6.3e9},
                                    {"i_star_a_amps", 779e-6},
                                    {"i_star_b_amps", 1033e-6}}}}},
            {"sweep", {{"currents_amps", {{"min", 0.0}, {"max", 1.2e-3}, {"count", 40}}}}}};
        run_scenario(parse_scenario_config(tuning_doc, Scenario::tuning));

        Json fit_doc{{"output_dir", (tmp.path / "fit").string()},
                     {"fit", {{"dataset", (tmp.path / "curve/tuning.csv").string()},
                              {"kind", "tuning"},
                              {"init", {{"tuning", {{"f0_a_hz", 5.0e9},
                                                    {"f0_b_hz", 6.9e9},
                                                    {"i_star_a_amps", 900e-6},
                                                    {"i_star_b_amps", 900e-6}}}}}}}};
        run_scenario(parse_scenario_config(fit_doc, Scenario::fit));
        const Json result = Json::parse(read_text(tmp.path / "fit/fit_result.json"));
        CHECK(result.at("parameters").at("i_star_a").get<double>() ==
              Approx(779e-6).epsilon(1e-6));
        CHECK(result.at("parameters").at("i_star_b").get<double>() ==
              Approx(1033e-6).epsilon(1e-6));

        Json noise_doc{{"output_dir", (tmp.path / "nf").string()},
                       {"noise", {{"n_ratio", 0.167}}},
                       {"sweep", {{"gains_db", {{"min", 0.0}, {"max", 40.0}, {"count", 25}}}}}};
        run_scenario(parse_scenario_config(noise_doc, Scenario::noise));
        Json noise_fit{{"output_dir", (tmp.path / "nfit").string()},
                       {"fit", {{"dataset", (tmp.path / "nf/noise.csv").string()},
                                {"kind", "noise"},
                                {"init", Json::object()}}}};
        run_scenario(parse_scenario_config(noise_fit, Scenario::fit));
        const Json nresult = Json::parse(read_text(tmp.path / "nfit/fit_result.json"));
        CHECK(nresult.at("parameters").at("n_ratio").get<double>() ==
              Approx(0.167).epsilon(1e-6));
    }

    SECTION("fringe fit job runs from a JSON config") {
        TempDir tmp;
        Json fringe_doc{
            {"output_dir", (tmp.path / "fr").string()},
            {"device", {{"modes", Json{{"f_a_hz", 5.5e9},
                                       {"f_b_hz", 6.3e9},
                                       {"kappa_a_hz", 4.55e6},
                                       {"kappa_b_hz", 3.57e6},
                                       {"xi_hz", 7.0e6},
                                       {"xi_phase_rad", 0.45}}}}},
            {"drive", {{"alpha", Json::array({0.9337, -0.6388})}, {"beta_mag", 1.0}}},
            {"sweep", {{"phases_rad",
                        {{"min", -std::numbers::pi},
                         {"max", std::numbers::pi * (1.0 - 2.0 / 360.0)},
                         {"count", 359}}},
                       {"x_hz", 3e6},
                       {"y_hz", 6e6}}}};
        run_scenario(parse_scenario_config(fringe_doc, Scenario::fringe));

        Json fit_doc{
            {"output_dir", (tmp.path / "fit").string()},
            {"fit",
             {{"dataset", (tmp.path / "fr/fringe.csv").string()},
              {"kind", "fringe"},
              {"init", {{"modes", Json{{"f_a_hz", 5.5e9},
                                       {"f_b_hz", 6.3e9},
                                       {"kappa_a_hz", 5.0e6},
                                       {"kappa_b_hz", 3.2e6},
                                       {"xi_hz", 6.4e6}}},
                        {"power_ratio", 1.5},
                        {"x_hz", 3e6},
                        {"y_hz", 6e6}}}}}};
        run_scenario(parse_scenario_config(fit_doc, Scenario::fit));
        const Json result = Json::parse(read_text(tmp.path / "fit/fit_result.json"));
        CHECK(result.at("converged").get<bool>());
        CHECK(result.at("parameters").at("kappa_a_hz").get<double>() ==
              Approx(4.55e6).epsilon(1e-4));
        CHECK(result.at("parameters").at("kappa_b_hz").get<double>() ==
              Approx(3.57e6).epsilon(1e-4));
        CHECK(result.at("parameters").at("xi_mag_hz").get<double>() ==
              Approx(7.0e6).epsilon(1e-4));
        // generated drive has |alpha|^2 = 1.28
        CHECK(result.at("parameters").at("power_ratio").get<double>() ==
              Approx(1.28).epsilon(1e-3));
    }

    SECTION("quadrature scenario writes the aligned unit circles") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"device", {{"modes", device_modes_json()}}},
                 {"sweep", {{"count", 36}}}};
        run_scenario(parse_scenario_config(doc, Scenario::quadratures));
        const ParsedCsv csv =
            parse_csv(read_text(tmp.path / "out/quadratures.csv"), "quadratures.csv");
        REQUIRE(csv.rows.size() == 36);
        CHECK(csv.columns ==
              std::vector<std::string>{"phi_s_rad", "Is", "Qs", "Ii", "Qi"});
        // first row is phi = -pi aligned to (-1, 0) on both channels
        CHECK(csv.rows[0][1] == Approx(-1.0).margin(1e-9));
        CHECK(csv.rows[0][2] == Approx(0.0).margin(1e-9));
        CHECK(csv.rows[0][3] == Approx(-1.0).margin(1e-9));
        CHECK(csv.rows[0][4] == Approx(0.0).margin(1e-9));
    }

    SECTION("fringe scenario matches the library fringe") {
        TempDir tmp;
        Json doc{{"output_dir", (tmp.path / "out").string()},
                 {"device", {{"modes", device_modes_json()}}},
                 {"drive", {{"alpha", Json::array({0.5, 0.0})}, {"beta_mag", 1.0}}},
                 {"sweep", {{"phases_rad", {{"min", -3.141592653589793},
                                            {"max", 3.141592653589793},
                                            {"count", 25}}}}}};
        run_scenario(parse_scenario_config(doc, Scenario::fringe));
        const ParsedCsv csv = parse_csv(read_text(tmp.path / "out/fringe.csv"), "fringe.csv");
        CHECK(csv.columns == std::vector<std::string>{"phase_rad", "Gs_dB", "Gi_dB"});
        CHECK(csv.rows.size() == 25);
    }
}
