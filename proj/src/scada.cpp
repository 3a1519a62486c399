#include "cosim/scada.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cosim::scada {

std::string_view to_string(EffectKind k) {
  return k == EffectKind::Dos ? "dos" : "manipulate";
}

void CompromiseEffect::validate() const {
  if (kind == EffectKind::Dos && !transform.empty()) {
    throw std::invalid_argument("dos effect must not carry a transform");
  }
  for (const auto& [q, t] : transform) {
    if (!std::isfinite(t.scale) || !std::isfinite(t.offset)) {
      throw std::invalid_argument("transform for " + std::string(grid::to_string(q)) + " is not finite");
    }
  }
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Rtu::Rtu(std::string id, std::string address, std::string mtu_address, grid::RtuBinding binding)
    : id_(std::move(id)),
      address_(std::move(address)),
      mtu_address_(std::move(mtu_address)),
      binding_(std::move(binding)) {}

void Rtu::update_measurements(const grid::PowerFlowSolution& solution, SimTime at) {
  if (!solution.converged) {
    stale_ = true;
    return;
  }
  last_ = grid::measurements_for(binding_, solution, at);
  stale_ = false;
}

bool Rtu::service_running(SimTime at) const {
  for (const auto& e : effects_) {
    if (e.kind == EffectKind::Dos && at >= e.active_from) return false;
  }
  return true;
}

std::optional<CompromiseEffect> Rtu::active_manipulation(SimTime at) const {
  std::optional<CompromiseEffect> latest;
  for (const auto& e : effects_) {
    if (e.kind == EffectKind::Manipulate && at >= e.active_from) latest = e;
  }
  return latest;
}

std::optional<net::Packet> Rtu::report_cycle(SimTime at) {
  if (!service_running(at) || last_.empty()) return std::nullopt;

  TelemetryFrame frame{FrameKind::MeasurementReport, id_, {}, next_seq_++, stale_};
  ReportRecord truth{frame.sequence_no, 0, at, false, {}};
  const auto manipulation = active_manipulation(at);
  truth.manipulated = manipulation.has_value();
  for (const auto& m : last_) {
    TelemetryPoint p{m.point_id, m.quantity, m.value};
    truth.true_points.push_back(p);
    if (manipulation) {
      const auto t = manipulation->transform.find(m.quantity);
      if (t != manipulation->transform.end()) p.value = t->second.apply(p.value);
    }
    frame.points.push_back(std::move(p));
  }
  reports_.push_back(std::move(truth));

  net::Packet pkt;
  pkt.src = address_;
  pkt.dst = mtu_address_;
  pkt.protocol = net::Protocol::Scada;
  pkt.length_bytes = frame_length(frame);
  pkt.origin_actor = id_;
  pkt.payload = std::move(frame);
  return pkt;
}

void Rtu::note_sent(std::uint64_t packet_id) {
  if (!reports_.empty()) reports_.back().packet_id = packet_id;
}

bool Rtu::apply_compromise(const CompromiseEffect& effect, bool caller_is_root) {
  effect.validate();
  compromise_log_.push_back(CompromiseRecord{id_, effect.kind, effect.active_from, caller_is_root});
  if (!caller_is_root) return false;
  effects_.push_back(effect);
  return true;
}

Mtu::Mtu(std::string id, std::string address, std::uint32_t stale_after_cycles)
    : id_(std::move(id)), address_(std::move(address)), stale_after_(stale_after_cycles) {}

IngestResult Mtu::ingest(const TelemetryFrame& frame, SimTime at) {
  if (frame.kind != FrameKind::MeasurementReport) return IngestResult::Ignored;
  if (frame.station.empty() || frame.points.empty()) {
    ++malformed_;
    return IngestResult::Malformed;
  }
  for (const auto& p : frame.points) {
    if (!std::isfinite(p.value) || p.point_id.empty()) {
      ++malformed_;
      return IngestResult::Malformed;
    }
  }
  const auto last = last_seq_.find(frame.station);
  if (last != last_seq_.end() && frame.sequence_no <= last->second) {
    ++out_of_order_;
    return IngestResult::OutOfOrder;
  }
  last_seq_[frame.station] = frame.sequence_no;
  last_step_[frame.station] = at.step;
  for (const auto& p : frame.points) {
    table_[{frame.station, p.point_id}] =
        PointEntry{frame.station, p.point_id, p.quantity, p.value, at, frame.sequence_no, frame.stale};
    rows_.push_back(
        MeasurementRow{at.step, frame.station, p.point_id, p.quantity, p.value, frame.stale, frame.sequence_no});
  }
  return IngestResult::Accepted;
}

std::optional<net::Packet> Mtu::on_packet(const net::Packet& packet, SimTime at) {
  const auto* frame = std::any_cast<TelemetryFrame>(&packet.payload);
  if (!frame) {
    ++malformed_;
    return std::nullopt;
  }
  if (ingest(*frame, at) != IngestResult::Accepted) return std::nullopt;
  net::Packet ack;
  ack.src = address_;
  ack.dst = packet.src;
  ack.protocol = net::Protocol::Scada;
  TelemetryFrame body{FrameKind::Ack, frame->station, {}, frame->sequence_no, false};
  ack.length_bytes = frame_length(body);
  ack.origin_actor = packet.origin_actor;
  ack.payload = std::move(body);
  return ack;
}

void Mtu::check_staleness(SimTime at) {
  for (auto& [key, entry] : table_) {
    const auto last = last_step_.find(key.first);
    if (last != last_step_.end() && at.step >= last->second + stale_after_) entry.stale = true;
  }
}

const PointEntry* Mtu::entry(const std::string& station, const std::string& point_id) const {
  const auto it = table_.find({station, point_id});
  return it == table_.end() ? nullptr : &it->second;
}

std::string Mtu::measurement_csv() const {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows_) {
    out += std::to_string(r.step) + ',' + r.station + ',' + r.point_id + ',' +
           std::string(grid::to_string(r.quantity)) + ',' + format_value(r.value) + ',' +
           (r.stale ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace cosim::scada
