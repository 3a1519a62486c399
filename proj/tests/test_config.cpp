#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "cosim/config.hpp"

using namespace cosim;
using namespace cosim::config;

namespace {

std::vector<std::string> errors_of(const std::string& yaml) {
  try {
    parse_config(yaml, "test.yaml", scenario_dir());
  } catch (const ConfigErrors& e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errors, std::initializer_list<std::string> words) {
  for (const auto& e : errors) {
    bool all = true;
    for (const auto& w : words) all = all && e.find(w) != std::string::npos;
    if (all) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("every shipped scenario loads") {
  for (const std::string id : {"reference", "1", "2", "3", "4", "5", "6"}) {
    CHECK_NOTHROW(load_config(resolve_scenario(id)));
  }
  const auto ref = load_config(resolve_scenario("reference"));
  CHECK(ref.name == "reference");
  CHECK(ref.rtus.size() == 3);
  CHECK(ref.attacker.attacker.ports.size() == 1024);
}

TEST_CASE("a link to an unknown host names both") {
  const auto errs = errors_of(R"(
extends: base.yaml
name: bad
ict:
  nodes:
    - {id: sw, kind: switch}
    - {id: mtu, kind: host, address: 10.0.0.1}
  links:
    - {id: ln_x, a: mtu, b: nowhere}
    - {id: ln_y, a: mtu, b: sw}
)");
  CHECK(mentions(errs, {"ln_x", "nowhere"}));
}

TEST_CASE("loss probability 1.5 is a range error") {
  const auto errs = errors_of(R"(
extends: base.yaml
ict:
  links:
    - {id: ln_mtu, a: mtu, b: sw_scada, loss_probability: 1.5}
)");
  CHECK(mentions(errs, {"loss_probability"}));
}

TEST_CASE("all problems are reported together, with locations") {
  const auto errs = errors_of(R"(
extends: base.yaml
seed: -3
durations: {warmup_steps: 10, attack_window: 0, bogus: 1}
attacker:
  ports: "70000"
)");
  CHECK(errs.size() >= 3);
  CHECK(mentions(errs, {"bogus"}));
  CHECK(mentions(errs, {"line"}));
  CHECK(mentions(errs, {"test.yaml"}));
}

TEST_CASE("a missing file is reported") {
  CHECK_THROWS_AS(load_config("/nonexistent/scenario.yaml"), ConfigError);
}

TEST_CASE("extends merges maps and replaces lists") {
  const auto cfg = parse_config(R"(
extends: scenario1.yaml
name: merged
durations: {warmup_steps: 5}
attacker:
  address_range: [10.0.1.12]
  ports: "22"
)", "merged.yaml", scenario_dir());
  CHECK(cfg.durations.warmup_steps == 5);
  CHECK(cfg.durations.attack_window == load_config(scenario_dir() / "scenario1.yaml").durations.attack_window);
  CHECK(cfg.attacker.attacker.address_range == std::vector<std::string>{"10.0.1.12"});
  CHECK(cfg.attacker.attacker.ports == std::vector<std::uint16_t>{22});
}

TEST_CASE("extends cycles are detected") {
  const auto dir = std::filesystem::temp_directory_path() / "cosim_cfg_cycle";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "a.yaml") << "extends: b.yaml\n";
    std::ofstream(dir / "b.yaml") << "extends: a.yaml\n";
  }
  CHECK_THROWS_AS(load_config(dir / "a.yaml"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("address and port ranges expand") {
  CHECK(expand_address_range("10.0.1.11-13") ==
        std::vector<std::string>{"10.0.1.11", "10.0.1.12", "10.0.1.13"});
  CHECK(expand_address_range("10.0.1.5") == std::vector<std::string>{"10.0.1.5"});
  CHECK(expand_port_range("1-1024").size() == 1024);
  CHECK(expand_port_range("80") == std::vector<std::uint16_t>{80});
  CHECK(expand_port_range("0-3").empty());
  CHECK(expand_port_range("5-2").empty());
}

TEST_CASE("ids seeds derive from the scenario seed unless given") {
  auto cfg = load_config(resolve_scenario("1"));
  const auto a = cfg.ids_params();
  cfg.seed += 1;
  CHECK(cfg.ids_params().rf.seed != a.rf.seed);
  cfg.ids.seed = 5;
  const auto fixed = cfg.ids_params();
  cfg.seed += 1;
  CHECK(cfg.ids_params().rf.seed == fixed.rf.seed);
}

}
