#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cosim/attacker.hpp"
#include "cosim/capture.hpp"
#include "cosim/ids.hpp"
#include "cosim/network.hpp"
#include "cosim/powergrid.hpp"
#include "cosim/vulnhost.hpp"

namespace cosim::config {

/// Every problem found while loading a scenario, each with its location.
class ConfigErrors : public ConfigError {
 public:
  explicit ConfigErrors(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct Durations {
  std::uint64_t warmup_steps = 60;
  std::uint64_t attack_window = 600;
  std::uint64_t post_steps = 60;
  /// The attack starts warmup_steps + j steps in, j drawn from [0, jitter].
  std::uint64_t attack_jitter_steps = 0;
};

struct GridSection {
  grid::GridModel model;
  std::uint64_t day_length_steps = 3600;
  double noise_amplitude = 0.08;
};

struct MtuSection {
  std::string node;
  std::uint32_t stale_after_cycles = 3;
};

struct RtuSection {
  std::string node;
  grid::RtuBinding binding;  // binding.rtu_id is the RTU id
};

struct HostSection {
  std::string node;
  vuln::HostConfig host;  // host.id equals node
};

struct AttackerSection {
  std::string node;
  attack::AttackerConfig attacker;  // address and start_at are filled in at run time
  std::uint64_t start_offset_ms = 0;
};

struct CaptureSection {
  std::optional<double> balance_target_pct;
  double balance_tolerance_pp = 3.0;
  capture::LabelingOptions labeling;
};

struct IdsSection {
  std::vector<ids::Algorithm> algorithms{ids::Algorithm::RandomForest, ids::Algorithm::Knn, ids::Algorithm::Lof,
                                         ids::Algorithm::IsolationForest};
  ids::IdsParams params;
  std::optional<std::uint64_t> seed;  // defaults to one derived from the scenario seed
};

struct ScenarioConfig {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string name = "custom";
  std::uint64_t seed = 1;
  Durations durations;
  GridSection grid;
  net::IctTopology ict;
  MtuSection mtu;
  std::vector<RtuSection> rtus;
  std::vector<HostSection> hosts;
  AttackerSection attacker;
  CaptureSection capture;
  IdsSection ids;

  const net::NodeSpec& node(std::string_view id) const;
  const std::string& address_of(std::string_view node_id) const;
  /// IDS hyperparameters with the forest seeds resolved.
  ids::IdsParams ids_params() const;
};

/// Parses and validates a scenario file (following `extends:` chains).
/// Throws ConfigErrors listing every problem found.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& yaml_text, const std::string& origin = "<string>",
                            const std::filesystem::path& base_dir = {});

/// Cross-reference and range checks on an assembled config.
std::vector<std::string> validation_errors(const ScenarioConfig& config);
void validate(const ScenarioConfig& config);

/// Shipped fixture directory.
std::filesystem::path scenario_dir();
/// "1".."6" and "reference" name shipped fixtures; anything else is a path.
std::filesystem::path resolve_scenario(std::string_view id_or_path);

/// Expands "a.b.c.x-y" into consecutive addresses; plain addresses pass through.
std::vector<std::string> expand_address_range(std::string_view spec);
/// Parses "1-1024" / "22" into an ascending port list.
std::vector<std::uint16_t> expand_port_range(std::string_view spec);

}  // namespace cosim::config
