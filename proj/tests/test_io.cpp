#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "nsmpi/nsmpi.hpp"

using namespace nsmpi;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("MDP JSON round trip preserves every double bit for bit", "[io]") {
    GarnetSpec spec;
    spec.num_states = 9;
    spec.num_actions = 3;
    spec.branching = 4;
    spec.reward_sparsity = 0.2;
    spec.discount = 0.97;
    spec.seed = 4242;
    FiniteMdp mdp = garnet_mdp(spec);

    nlohmann::json j = mdp_to_json(mdp);
    FiniteMdp back = mdp_from_json(j);
    REQUIRE(back.num_states() == 9);
    REQUIRE(back.num_actions() == 3);
    REQUIRE(back.discount() == mdp.discount());
    for (int s = 0; s < 9; ++s)
        for (int a = 0; a < 3; ++a) {
            REQUIRE(back.reward(s, a) == mdp.reward(s, a));
            const auto& orig = mdp.transitions(s, a);
            const auto& copy = back.transitions(s, a);
            REQUIRE(copy.size() == orig.size());
            for (std::size_t i = 0; i < orig.size(); ++i) {
                REQUIRE(copy[i].next_state == orig[i].next_state);
                REQUIRE(copy[i].probability == orig[i].probability);
            }
        }
    REQUIRE(mdp_to_json(back).dump() == j.dump());

    const auto path = temp_file("nsmpi_roundtrip.json");
    save_mdp(mdp, path.string());
    FiniteMdp loaded = load_mdp(path.string());
    REQUIRE(mdp_to_json(loaded).dump() == j.dump());
    std::filesystem::remove(path);
}

TEST_CASE("malformed MDP input is rejected with invalid_argument", "[io]") {
    REQUIRE_THROWS_AS(mdp_from_json(nlohmann::json::object()), std::invalid_argument);
    REQUIRE_THROWS_AS(mdp_from_json(nlohmann::json::array()), std::invalid_argument);

    nlohmann::json j = mdp_to_json(garnet_mdp(GarnetSpec{}));
    nlohmann::json bad = j;
    bad.erase("discount");
    REQUIRE_THROWS_AS(mdp_from_json(bad), std::invalid_argument);

    bad = j;
    bad["transitions"][0][0][0] = {0};
    REQUIRE_THROWS_AS(mdp_from_json(bad), std::invalid_argument);

    bad = j;
    bad["transitions"][0][0][0][1] = 5.0;
    REQUIRE_THROWS_AS(mdp_from_json(bad), std::invalid_argument);

    const auto path = temp_file("nsmpi_malformed.json");
    std::ofstream(path) << "{ not json";
    REQUIRE_THROWS_AS(load_mdp(path.string()), std::invalid_argument);
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(load_mdp(path.string()), std::invalid_argument);
}

TEST_CASE("run traces serialize the configuration and records", "[io]") {
    FiniteMdp mdp = garnet_mdp(GarnetSpec{8, 2, 3, 0.0, 0.9, 11});
    ValueFunction v_star = reference_pi(mdp, StationaryPolicy(8, 0)).value;

    NsmpiConfig config;
    config.m = MParameter::infinite();
    config.ell = 2;
    config.iterations = 4;
    config.v0.assign(8, 0.0);
    config.with_diagnostics = true;
    std::vector<IterationRecord> records = nsmpi_run(mdp, config, &v_star);

    nlohmann::json j = trace_to_json(config, records);
    REQUIRE(j["config"]["m"] == "inf");
    REQUIRE(j["config"]["ell"] == 2);
    REQUIRE(j["records"].size() == 4);
    REQUIRE(j["records"][0]["k"] == 1);
    REQUIRE(j["records"][0]["value"].size() == 8);
    REQUIRE(j["records"][3].contains("loss_sup"));
    REQUIRE(j["records"][3].contains("diagnostics"));
    REQUIRE(j["records"][3]["diagnostics"]["loss_vec"].size() == 8);

    config.m = MParameter::finite(3);
    config.with_diagnostics = false;
    records = nsmpi_run(mdp, config);
    j = trace_to_json(config, records);
    REQUIRE(j["config"]["m"] == 3);
    REQUIRE_FALSE(j["records"][0].contains("loss_sup"));
    REQUIRE_FALSE(j["records"][0].contains("diagnostics"));
}

TEST_CASE("doubles print with 17 significant digits and round-trip", "[io]") {
    REQUIRE(csv_double(0.1) == "0.10000000000000001");
    REQUIRE(csv_double(1.0) == "1");
    REQUIRE(csv_double(-0.342) == "-0.34200000000000003");

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ValueFunction vals = testutil::random_value(4, seed, -1e6, 1e6);
        vals.push_back(vals[0] * 1e-300);
        for (double x : vals) REQUIRE(std::strtod(csv_double(x).c_str(), nullptr) == x);
    }
}

TEST_CASE("csv fields are quoted per RFC 4180", "[io]") {
    REQUIRE(csv_field("plain") == "plain");
    REQUIRE(csv_field("with,comma") == "\"with,comma\"");
    REQUIRE(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    REQUIRE(csv_field("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("verification and bound-check tables render one row per iteration", "[io]") {
    TightInstanceSpec spec;
    spec.ell = 2;
    spec.m = 1;
    spec.max_iterations = 4;
    VerificationReport report = verify_tight_trajectory(spec);

    std::ostringstream out;
    write_verification_csv(out, report);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    REQUIRE(line == "k,max_value_dev,policy_match,loss,bound,ratio\r");
    int rows = 0;
    while (std::getline(lines, line))
        if (!line.empty()) {
            ++rows;
            REQUIRE(line.find(",1,") != std::string::npos);
        }
    REQUIRE(rows == 4);

    FiniteMdp mdp = build_tight_mdp(spec);
    ValueFunction v_star(mdp.num_states(), 0.0);
    StationaryPolicy retreat(mdp.num_states(), 1);
    retreat[0] = 0;
    NsmpiConfig config;
    config.m = MParameter::finite(spec.m);
    config.ell = spec.ell;
    config.iterations = spec.max_iterations;
    config.v0.assign(mdp.num_states(), 0.0);
    config.initial_policies.assign(1, retreat);
    config.error_model = tight_error_model(spec);
    BoundInputs inputs;
    inputs.gamma = spec.gamma;
    inputs.ell = spec.ell;
    inputs.epsilon = spec.epsilon;
    std::vector<BoundCheckRow> rows2 =
        check_bound_satisfaction(nsmpi_run(mdp, config, &v_star), inputs);

    std::ostringstream out2;
    write_bound_check_csv(out2, rows2);
    std::istringstream lines2(out2.str());
    std::getline(lines2, line);
    REQUIRE(line == "k,loss,bound,slack,ratio\r");
    rows = 0;
    while (std::getline(lines2, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 4);
}
