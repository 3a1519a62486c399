#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cosim/engine.hpp"

namespace cosim {

/// Invalid scenario or grid description, detected before any simulation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace grid {

struct Bus {
  std::string id;
  double nominal_kv = 0.4;
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double rating_kva = 0.0;
};

/// Secondary substation transformer. Series impedance is referred to the LV
/// side; the HV bus is the slack bus.
struct Transformer {
  std::string id;
  std::string hv_bus;
  std::string lv_bus;
  double rating_kva = 0.0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

struct Load {
  std::string id;
  std::string bus;
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

/// Constant-power injection; modeled as a negative load.
struct Der {
  std::string id;
  std::string bus;
  double p_kw = 0.0;
};

struct GridModel {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  Transformer transformer;
  std::vector<Load> loads;
  std::vector<Der> ders;

  /// Throws ConfigError listing every violated invariant: radial and
  /// connected, non-negative impedances, positive ratings, resolvable ids.
  void validate() const;
  std::optional<std::size_t> bus_index(std::string_view id) const;
};

struct BusState {
  std::string id;
  double vm_pu = 1.0;
  double va_rad = 0.0;
};

struct BranchFlow {
  std::string id;
  double p_kw = 0.0;  // sending end
  double q_kvar = 0.0;
  double loading_percent = 0.0;
};

struct PowerFlowSolution {
  std::vector<BusState> buses;
  std::vector<BranchFlow> lines;
  BranchFlow transformer;  // measured at the HV terminal
  bool converged = false;
  int iterations = 0;

  const BusState* find_bus(std::string_view id) const;
  const BranchFlow* find_line(std::string_view id) const;
};

constexpr int kMaxSweepIterations = 50;
constexpr double kSweepTolerancePu = 1e-8;

/// Backward/forward sweep over a radial feeder. Per-unit base: transformer
/// rating as S_base, each bus' nominal voltage as V_base.
class RadialFeeder {
 public:
  explicit RadialFeeder(GridModel grid);

  /// load_scaling holds one factor per load (empty means all 1.0);
  /// der_scaling likewise per DER.
  PowerFlowSolution solve(std::span<const double> load_scaling,
                          std::span<const double> der_scaling = {}) const;

  const GridModel& model() const { return grid_; }
  double s_base_kva() const { return grid_.transformer.rating_kva; }

 private:
  struct Branch {
    std::size_t from = 0;
    std::size_t to = 0;
    std::complex<double> z_pu;
    double rating_kva = 0.0;
    std::ptrdiff_t line = -1;  // -1 for the transformer
  };

  GridModel grid_;
  std::size_t slack_ = 0;
  std::vector<Branch> branches_;  // ordered root-first (BFS)
};

PowerFlowSolution solve_power_flow(const GridModel& grid, std::span<const double> load_scaling,
                                   std::span<const double> der_scaling = {});

/// Time-varying per-load scaling: a smooth daily shape plus seeded noise,
/// random-access in (seed, step) and clamped to [kMinScale, kMaxScale].
struct LoadProfile {
  static constexpr double kMinScale = 0.2;
  static constexpr double kMaxScale = 1.5;

  std::uint64_t seed = 0;
  std::uint64_t day_length_steps = 3600;
  double noise_amplitude = 0.08;
  std::size_t load_count = 0;

  std::vector<double> sample(std::uint64_t step) const;
};

std::vector<double> sample_load_profile(const LoadProfile& profile, std::uint64_t step);

enum class Quantity { LoadingPercent, PKw, QKvar, VPu };

std::string_view to_string(Quantity q);
std::optional<Quantity> parse_quantity(std::string_view s);

struct PointBinding {
  std::string point_id;
  std::string element;  // transformer, line or bus id
  Quantity quantity = Quantity::PKw;
};

struct RtuBinding {
  std::string rtu_id;
  std::vector<PointBinding> points;
};

struct Measurement {
  std::string source_device;
  std::string point_id;
  Quantity quantity = Quantity::PKw;
  double value = 0.0;
  SimTime at;
};

/// Throws ConfigError if a point references an unknown element or asks for a
/// quantity the element does not provide.
void validate_binding(const GridModel& grid, const RtuBinding& binding);

/// One measurement per bound point, copied from a converged solution.
std::vector<Measurement> measurements_for(const RtuBinding& binding,
                                          const PowerFlowSolution& solution, SimTime at);

}  // namespace grid
}  // namespace cosim
