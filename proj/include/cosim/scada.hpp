#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosim/engine.hpp"
#include "cosim/network.hpp"
#include "cosim/powergrid.hpp"

namespace cosim::scada {

using grid::Quantity;

enum class FrameKind { MeasurementReport, Command, Ack };

struct TelemetryPoint {
  std::string point_id;
  Quantity quantity = Quantity::PKw;
  double value = 0.0;
};

/// Simplified IEC-104-like application frame.
struct TelemetryFrame {
  FrameKind kind = FrameKind::MeasurementReport;
  std::string station;
  std::vector<TelemetryPoint> points;
  std::uint64_t sequence_no = 0;
  bool stale = false;  // RTU is repeating its last converged values
};

constexpr std::uint32_t kFrameHeaderBytes = 25;
constexpr std::uint32_t kBytesPerPoint = 12;

inline std::uint32_t frame_length(const TelemetryFrame& f) {
  return kFrameHeaderBytes + kBytesPerPoint * static_cast<std::uint32_t>(f.points.size());
}

struct AffineTransform {
  double scale = 1.0;
  double offset = 0.0;
  double apply(double v) const { return scale * v + offset; }
  bool is_identity() const { return scale == 1.0 && offset == 0.0; }
};

enum class EffectKind { Dos, Manipulate };

std::string_view to_string(EffectKind k);

struct CompromiseEffect {
  EffectKind kind = EffectKind::Dos;
  std::map<Quantity, AffineTransform> transform;  // manipulate only
  SimTime active_from;

  /// Throws std::invalid_argument when the effect violates its invariants.
  void validate() const;
};

struct CompromiseRecord {
  std::string station;
  EffectKind kind = EffectKind::Dos;
  SimTime active_from;
  bool accepted = false;
};

/// Ground truth for one emitted report.
struct ReportRecord {
  std::uint64_t sequence_no = 0;
  std::uint64_t packet_id = 0;
  SimTime at;
  bool manipulated = false;
  std::vector<TelemetryPoint> true_points;
};

class Rtu {
 public:
  Rtu(std::string id, std::string address, std::string mtu_address, grid::RtuBinding binding);

  /// Caches the bound measurements of a converged solution; a non-converged
  /// solution keeps the previous values and marks them stale.
  void update_measurements(const grid::PowerFlowSolution& solution, SimTime at);

  /// Builds this cycle's measurement report, or nothing when the service is
  /// stopped or no measurement has been cached yet.
  std::optional<net::Packet> report_cycle(SimTime at);
  /// Records the network id assigned to the most recent report.
  void note_sent(std::uint64_t packet_id);

  /// Requires root on the RTU host; otherwise rejected and logged.
  bool apply_compromise(const CompromiseEffect& effect, bool caller_is_root);

  bool service_running(SimTime at) const;
  std::optional<CompromiseEffect> active_manipulation(SimTime at) const;

  const std::string& id() const { return id_; }
  const std::string& address() const { return address_; }
  const grid::RtuBinding& binding() const { return binding_; }
  const std::vector<ReportRecord>& reports() const { return reports_; }
  const std::vector<CompromiseRecord>& compromise_log() const { return compromise_log_; }
  const std::vector<grid::Measurement>& last_measurements() const { return last_; }
  void handle_ack(const TelemetryFrame& ack) { last_acked_ = ack.sequence_no; }
  std::uint64_t last_acked() const { return last_acked_; }

 private:
  std::string id_;
  std::string address_;
  std::string mtu_address_;
  grid::RtuBinding binding_;
  std::vector<grid::Measurement> last_;
  bool stale_ = false;
  std::uint64_t next_seq_ = 1;
  std::uint64_t last_acked_ = 0;
  std::vector<CompromiseEffect> effects_;
  std::vector<CompromiseRecord> compromise_log_;
  std::vector<ReportRecord> reports_;
};

struct PointEntry {
  std::string station;
  std::string point_id;
  Quantity quantity = Quantity::PKw;
  double value = 0.0;
  SimTime updated;
  std::uint64_t sequence_no = 0;
  bool stale = false;
};

struct MeasurementRow {
  std::uint64_t step = 0;
  std::string station;
  std::string point_id;
  Quantity quantity = Quantity::PKw;
  double value = 0.0;
  bool stale = false;
  std::uint64_t sequence_no = 0;
};

enum class IngestResult { Accepted, OutOfOrder, Malformed, Ignored };

class Mtu {
 public:
  Mtu(std::string id, std::string address, std::uint32_t stale_after_cycles = 3);

  IngestResult ingest(const TelemetryFrame& frame, SimTime at);
  /// Network-facing ingest: returns the ack to send back, if any.
  std::optional<net::Packet> on_packet(const net::Packet& packet, SimTime at);

  /// Marks every station silent for >= stale_after_cycles steps as stale.
  void check_staleness(SimTime at);

  const PointEntry* entry(const std::string& station, const std::string& point_id) const;
  const std::map<std::pair<std::string, std::string>, PointEntry>& table() const { return table_; }
  std::uint64_t out_of_order_count() const { return out_of_order_; }
  std::uint64_t malformed_count() const { return malformed_; }
  const std::vector<MeasurementRow>& rows() const { return rows_; }
  const std::string& address() const { return address_; }

  static constexpr std::string_view kCsvHeader = "step,station,point,quantity,value,stale";
  std::string measurement_csv() const;

 private:
  std::string id_;
  std::string address_;
  std::uint32_t stale_after_;
  std::map<std::pair<std::string, std::string>, PointEntry> table_;
  std::map<std::string, std::uint64_t> last_seq_;
  std::map<std::string, std::uint64_t> last_step_;
  std::uint64_t out_of_order_ = 0;
  std::uint64_t malformed_ = 0;
  std::vector<MeasurementRow> rows_;
};

/// Fixed-precision decimal used in every CSV artifact.
std::string format_value(double v);

}  // namespace cosim::scada
