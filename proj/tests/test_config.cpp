#include "fixtures.hpp"

#include "wcdiff/config.hpp"
#include "wcdiff/presets.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

using namespace wcdiff;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wcdiff_config_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ErrorCode code_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // sentinel: nothing thrown
}

std::string message_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kTwoAgentQuadratic = R"({
  "combination_matrix": [[1.0, 0.03], [0.0, 0.97]],
  "models": [{"kind": "quadratic", "count": 2, "w_o": [1.0, -1.0], "r_u": [2.0, 0.5], "sigma_v2": 0.1}],
  "step_sizes": {"mu_max": 0.01, "tau": [1.0, 0.5]},
  "run": {"iterations": 100, "monte_carlo_runs": 3, "seed": 9}
})";

}  // namespace

TEST_CASE("a full configuration parses into runtime objects", "[config]") {
  const auto cfg = parse_config_text(kTwoAgentQuadratic);
  REQUIRE(cfg.agents() == 2);
  REQUIRE(cfg.models.size() == 2);
  CHECK(cfg.models[1].kind == "quadratic");
  CHECK(cfg.models[1].r_u(0, 0) == 2.0);
  CHECK(cfg.models[1].r_u(1, 1) == 0.5);
  CHECK(cfg.models[1].r_u(0, 1) == 0.0);
  REQUIRE(cfg.steps);
  CHECK(cfg.steps->mus()[1] == Catch::Approx(0.005));
  REQUIRE(cfg.run);
  CHECK(cfg.run->iterations == 100);
  CHECK(cfg.run->monte_carlo_runs == 3);
  CHECK(cfg.run->burn_in_fraction == 0.5);
  CHECK(cfg.seed == std::optional<std::uint64_t>(9));

  const auto a = combination(cfg);
  CHECK(a.size() == 2);
  const auto models = build_models(cfg);
  REQUIRE(models.size() == 2);
  CHECK(models[0]->dimension() == 2);
  CHECK(models[0]->hessian(Vector::Zero(2))(0, 0) == Catch::Approx(4.0));
}

TEST_CASE("comments are allowed in configuration files", "[config]") {
  const auto cfg = parse_config_text(R"({
    // the network
    "combination_matrix": [[1.0]],  /* one agent */
    "models": [{"kind": "quadratic", "w_o": 0.5, "sigma_u2": 1.0, "sigma_v2": 0.0}]
  })");
  CHECK(cfg.agents() == 1);
  CHECK(cfg.models[0].w_o(0) == 0.5);
}

TEST_CASE("syntax errors report line and column", "[config]") {
  const std::string msg = message_of("{\n  \"combination_matrix\": [[1.0]],\n  \"models\": [,]\n}");
  CHECK_THAT(msg, ContainsSubstring("config:3:"));
  CHECK_THAT(msg, ContainsSubstring("syntax error"));
  CHECK(code_of("{\n  \"combination_matrix\": [[1.0]],\n  \"models\": [,]\n}") == ErrorCode::Config);
}

TEST_CASE("semantic errors name the offending field", "[config]") {
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]], "modles": []})"),
             ContainsSubstring("modles: unknown field"));
  CHECK_THAT(message_of(R"({"models": []})"), ContainsSubstring("combination_matrix: missing"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0, 0.0]]})"), ContainsSubstring("must be square"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0, 0.0], [1.0]]})"),
             ContainsSubstring("combination_matrix[1]: has 1 entries, expected 2"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0, "x"], [0.0, 1.0]]})"),
             ContainsSubstring("combination_matrix[0][1]: expected a number"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]],
      "models": [{"kind": "quadratic", "w_o": 1.0, "sigma_u2": -1.0, "sigma_v2": 0.1}]})"),
             ContainsSubstring("models[0].sigma_u2: must be > 0"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]],
      "models": [{"kind": "quadratic", "w_o": 1.0, "sigma_u2": 1.0, "r_u": 1.0, "sigma_v2": 0.1}]})"),
             ContainsSubstring("exactly one of sigma_u2 or r_u"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]], "models": [{"kind": "cubic"}]})"),
             ContainsSubstring("models[0].kind: unknown model kind 'cubic'"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]],
      "models": [{"kind": "logistic", "rho": 0.1, "population": 10,
                  "clusters": [{"label": 2, "center": [0, 0]}]}]})"),
             ContainsSubstring("models[0].clusters[0].label: must be +1 or -1"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[0.5, 0.5], [0.5, 0.5]],
      "step_sizes": {"mu_max": 0.1, "tau": [1.0, 1.5]}})"),
             ContainsSubstring("step_sizes.tau[1]: must lie in (0, 1]"));
}

TEST_CASE("model counts expand and must cover every agent", "[config]") {
  const auto cfg = presets::load("preset-fig3-regression");
  REQUIRE(cfg.models.size() == 8);
  CHECK(cfg.models[2].w_o(0) == 1.0);
  CHECK(cfg.models[3].w_o(0) == 1.5);
  CHECK(cfg.models[4].w_o(0) == 1.5);
  CHECK(cfg.models[5].w_o(0) == 1.25);

  CHECK_THAT(message_of(R"({"combination_matrix": [[0.5, 0.5], [0.5, 0.5]],
      "models": [{"kind": "quadratic", "count": 3, "w_o": 1.0, "sigma_u2": 1.0, "sigma_v2": 0.1}]})"),
             ContainsSubstring("models: describe 3 agents but the matrix has 2"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[0.5, 0.5], [0.5, 0.5]],
      "models": [{"kind": "quadratic", "w_o": 1.0, "sigma_u2": 1.0, "sigma_v2": 0.1},
                 {"kind": "quadratic", "w_o": [1.0, 2.0], "sigma_u2": 1.0, "sigma_v2": 0.1}]})"),
             ContainsSubstring("agent 2 has parameter dimension 2"));
}

TEST_CASE("zero iterations and zero runs are rejected", "[config]") {
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]], "run": {"iterations": 0}})"),
             ContainsSubstring("run.iterations: must be >= 1"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]], "run": {"monte_carlo_runs": 0}})"),
             ContainsSubstring("run.monte_carlo_runs: must be >= 1"));
  CHECK_THAT(message_of(R"({"combination_matrix": [[1.0]], "run": {"burn_in_fraction": 1.0}})"),
             ContainsSubstring("run.burn_in_fraction"));
}

TEST_CASE("a seed is required before anything random happens", "[config]") {
  const auto cfg = parse_config_text(R"({"combination_matrix": [[1.0]]})");
  CHECK_FALSE(cfg.seed);
  try {
    require_seed(cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK_THAT(std::string(e.what()), ContainsSubstring("run.seed"));
  }
  CHECK_THROWS_AS(require_steps(cfg), Error);
  CHECK_THROWS_AS(require_run(cfg), Error);
  CHECK_THROWS_AS(build_models(cfg), Error);
}

TEST_CASE("the matrix can live in a separate text file", "[config]") {
  const auto dir = scratch_dir("matrix");
  write(dir / "a.txt",
        "# three sub-networks\n"
        "0.2 0.2 0.8 0 0 0 0 0\n"
        "0.5,0.4,0.1,0,0,0.2,0,0.4\n"
        "0.3;0.4;0.1;0;0;0.1;0;0\n"
        "0\t0\t0\t0.4\t0.3\t0.3\t0\t0\n"
        "\n"
        "0 0 0 0.6 0.7 0 0 0   # trailing comment\n"
        "0 0 0 0 0 0.2 0.3 0.2\n"
        "0 0 0 0 0 0.1 0.5 0.3\n"
        "0 0 0 0 0 0.1 0.2 0.1\n");
  write(dir / "cfg.json", R"({"combination_matrix": {"file": "a.txt"}})");
  const auto cfg = load_config(dir / "cfg.json");
  CHECK((cfg.matrix - fixtures::three_subnetworks()).cwiseAbs().maxCoeff() == 0.0);

  write(dir / "bad.txt", "1 0\n0 x\n");
  write(dir / "bad.json", R"({"combination_matrix": {"file": "bad.txt"}})");
  try {
    load_config(dir / "bad.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK_THAT(std::string(e.what()), ContainsSubstring("bad.txt line 2"));
  }
  write(dir / "missing.json", R"({"combination_matrix": {"file": "nope.txt"}})");
  CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
  CHECK_THROWS_AS(load_config(dir / "no-such-config.json"), Error);
}

TEST_CASE("an invalid combination matrix surfaces as a graph error", "[config]") {
  const auto cfg = parse_config_text(R"({"combination_matrix": [[0.5, 0.5], [0.4, 0.5]]})");
  try {
    combination(cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ColumnSumViolation);
  }
}

TEST_CASE("logistic populations depend on data_seed, not the run seed", "[config]") {
  auto cfg = presets::load("preset-two-agent-logistic");
  const Vector w = Vector::Constant(3, 0.2);
  const double before = build_models(cfg)[1]->loss(w);
  cfg.seed = 12345;
  CHECK(build_models(cfg)[1]->loss(w) == before);
  cfg.models[1].data_seed = 2;
  CHECK(build_models(cfg)[1]->loss(w) != before);
}

TEST_CASE("every preset parses and matches its shipped file", "[config][presets]") {
  const std::filesystem::path dir = WCDIFF_PRESET_DIR;
  for (const auto& [name, doc] : presets::all()) {
    INFO(name);
    const auto cfg = presets::load(name);
    CHECK(cfg.seed);
    CHECK(cfg.steps);
    CHECK(cfg.run);
    CHECK(static_cast<Index>(cfg.models.size()) == cfg.agents());
    CHECK_NOTHROW(combination(cfg));
    const auto file = dir / (name + ".json");
    REQUIRE(std::filesystem::exists(file));
    CHECK(load_config(file).document == cfg.document);
  }
  CHECK(presets::find("preset-does-not-exist") == nullptr);
  CHECK_THROWS_AS(presets::load("preset-does-not-exist"), Error);
}
