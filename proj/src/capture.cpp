#include "cosim/capture.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace cosim::capture {

std::string_view to_string(Label l) { return l == Label::Attack ? "attack" : "normal"; }

void Collector::on_mirror(const net::Packet& packet) {
  CapturedPacket c;
  c.record.time_ms = packet.delivered_at.value_or(packet.sent_at).to_ms();
  c.record.src = packet.src;
  c.record.dst = packet.dst;
  c.record.protocol = packet.protocol;
  c.record.length_bytes = packet.length_bytes;
  c.packet_id = packet.id;
  c.origin_actor = packet.origin_actor;
  c.sent_at_ms = packet.sent_at.to_ms();
  if (const auto* frame = std::any_cast<scada::TelemetryFrame>(&packet.payload)) {
    c.measurement_report = frame->kind == scada::FrameKind::MeasurementReport;
    c.station = frame->station;
  }
  packets_.push_back(std::move(c));
}

std::vector<LabeledRecord> label(std::span<const CapturedPacket> packets,
                                 std::span<const attack::ActionRecord> action_log,
                                 std::span<const scada::CompromiseRecord> compromise_log,
                                 const LabelingOptions& options) {
  // Stage boundaries from the attacker's own log.
  std::vector<std::pair<std::uint64_t, attack::Stage>> stages;
  for (const auto& r : action_log) {
    if (r.stage == attack::Stage::Done || r.stage == attack::Stage::Failed) continue;
    if (stages.empty() || stages.back().second != r.stage) stages.emplace_back(r.time_ms, r.stage);
  }
  std::map<std::string, std::uint64_t> manipulated_from;
  for (const auto& c : compromise_log) {
    if (!c.accepted || c.kind != scada::EffectKind::Manipulate) continue;
    const auto ms = c.active_from.to_ms();
    const auto it = manipulated_from.find(c.station);
    if (it == manipulated_from.end() || ms < it->second) manipulated_from[c.station] = ms;
  }

  std::vector<LabeledRecord> out;
  out.reserve(packets.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const auto& p = packets[i];
    LabeledRecord r = p.record;
    r.label = Label::Normal;
    r.stage.reset();
    if (p.origin_actor == options.attacker_id) {
      auto it = std::upper_bound(stages.begin(), stages.end(), p.sent_at_ms,
                                 [](std::uint64_t t, const auto& s) { return t < s.first; });
      if (it == stages.begin()) {
        throw LabelingError("record " + std::to_string(i) + " (packet " + std::to_string(p.packet_id) +
                            ", sent at " + std::to_string(p.sent_at_ms) +
                            " ms) precedes the attacker action log");
      }
      r.label = Label::Attack;
      r.stage = std::prev(it)->second;
    } else if (options.label_manipulated_reports && p.measurement_report) {
      const auto it = manipulated_from.find(p.station);
      if (it != manipulated_from.end() && p.sent_at_ms >= it->second) {
        r.label = Label::Attack;
        r.stage = attack::Stage::S4Impact;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

Balance compute_balance(std::span<const LabeledRecord> records) {
  if (records.empty()) return {};
  const auto attacks = std::count_if(records.begin(), records.end(),
                                     [](const LabeledRecord& r) { return r.label == Label::Attack; });
  const double n = static_cast<double>(records.size());
  const double a = 100.0 * static_cast<double>(attacks) / n;
  return Balance{a, 100.0 - a};
}

Split warmup_split(std::span<const LabeledRecord> records) {
  const auto first = std::find_if(records.begin(), records.end(),
                                  [](const LabeledRecord& r) { return r.label == Label::Attack; });
  const auto cut = static_cast<std::size_t>(first - records.begin());
  Split s;
  s.train.push_back(IndexRange{0, cut});
  s.test.push_back(IndexRange{cut, records.size()});
  return s;
}

LabeledDataset make_dataset(std::string scenario_id, std::uint64_t seed, std::vector<LabeledRecord> records) {
  LabeledDataset d;
  d.scenario_id = std::move(scenario_id);
  d.seed = seed;
  d.records = std::move(records);
  d.split = warmup_split(d.records);
  d.balance = compute_balance(d.records);
  return d;
}

std::vector<LabeledRecord> slice(const LabeledDataset& d, std::span<const IndexRange> ranges) {
  std::vector<LabeledRecord> out;
  for (const auto& r : ranges) {
    for (std::size_t i = r.begin; i < r.end && i < d.records.size(); ++i) out.push_back(d.records[i]);
  }
  return out;
}

std::string to_csv(std::span<const LabeledRecord> records) {
  std::string out(kDatasetHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.time_ms);
    out += ',';
    out += r.src;
    out += ',';
    out += r.dst;
    out += ',';
    out += net::to_string(r.protocol);
    out += ',';
    out += std::to_string(r.length_bytes);
    out += ',';
    out += to_string(r.label);
    out += ',';
    if (r.stage) out += attack::to_string(*r.stage);
    out += '\n';
  }
  return out;
}

void export_csv(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset to " + path.string());
  out << to_csv(dataset.records);
}

namespace {

template <typename T>
bool parse_uint(std::string_view s, T& value) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

LabeledDataset parse_csv(const std::string& text, const DatasetMeta& meta) {
  std::vector<LabeledRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw DatasetFormatError("row " + std::to_string(line_no - 1) + " (line " + std::to_string(line_no) +
                             "): " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kDatasetHeader) {
        throw DatasetFormatError("line 1: expected header '" + std::string(kDatasetHeader) + "'");
      }
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 7) fail("expected 7 fields, found " + std::to_string(fields.size()));
    LabeledRecord r;
    if (!parse_uint(fields[0], r.time_ms)) fail("bad time_ms '" + std::string(fields[0]) + "'");
    r.src = fields[1];
    r.dst = fields[2];
    if (r.src.empty() || r.dst.empty()) fail("empty address");
    const auto proto = net::parse_protocol(fields[3]);
    if (!proto) fail("bad protocol '" + std::string(fields[3]) + "'");
    r.protocol = *proto;
    if (!parse_uint(fields[4], r.length_bytes)) fail("bad length '" + std::string(fields[4]) + "'");
    if (fields[5] == "attack") {
      r.label = Label::Attack;
    } else if (fields[5] == "normal") {
      r.label = Label::Normal;
    } else {
      fail("bad label '" + std::string(fields[5]) + "'");
    }
    if (!fields[6].empty()) {
      const auto st = attack::parse_stage(fields[6]);
      if (!st || *st == attack::Stage::Done || *st == attack::Stage::Failed) {
        fail("bad stage '" + std::string(fields[6]) + "'");
      }
      r.stage = st;
    }
    if (r.stage.has_value() != (r.label == Label::Attack)) fail("stage must be present exactly for attack rows");
    records.push_back(std::move(r));
  }
  if (line_no == 0) throw DatasetFormatError("empty file: missing header");
  return make_dataset(meta.scenario_id, meta.seed, std::move(records));
}

LabeledDataset import_csv(const std::filesystem::path& path, const DatasetMeta& meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), meta);
  } catch (const DatasetFormatError& e) {
    throw DatasetFormatError(path.string() + ": " + e.what());
  }
}

std::string_view to_string(Encoding e) { return e == Encoding::OneHot ? "one_hot" : "categorical"; }

std::optional<Encoding> parse_encoding(std::string_view s) {
  if (s == "categorical") return Encoding::Categorical;
  if (s == "one_hot") return Encoding::OneHot;
  return std::nullopt;
}

FeatureDictionary FeatureDictionary::build(std::span<const LabeledRecord> training, Encoding encoding) {
  FeatureDictionary d;
  d.encoding = encoding;
  std::set<std::string> src, dst, proto;
  for (const auto& r : training) {
    src.insert(r.src);
    dst.insert(r.dst);
    proto.insert(std::string(net::to_string(r.protocol)));
  }
  auto assign = [](const std::set<std::string>& values, std::map<std::string, int>& codes) {
    int next = 1;
    for (const auto& v : values) codes[v] = next++;
  };
  assign(src, d.src);
  assign(dst, d.dst);
  assign(proto, d.protocol);
  if (!training.empty()) {
    const auto [lo, hi] = std::minmax_element(
        training.begin(), training.end(),
        [](const LabeledRecord& a, const LabeledRecord& b) { return a.length_bytes < b.length_bytes; });
    d.length_min = lo->length_bytes;
    d.length_max = hi->length_bytes;
  }
  return d;
}

std::size_t FeatureDictionary::dimension() const {
  if (encoding == Encoding::Categorical) return 4;
  return (src.size() + 1) + (dst.size() + 1) + (protocol.size() + 1) + 1;
}

FeatureVector encode(const LabeledRecord& r, const FeatureDictionary& dict) {
  auto code = [](const std::map<std::string, int>& m, const std::string& key) {
    const auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
  };
  FeatureVector fv;
  fv.src_code = code(dict.src, r.src);
  fv.dst_code = code(dict.dst, r.dst);
  fv.protocol_code = code(dict.protocol, std::string(net::to_string(r.protocol)));
  const double span = dict.length_max - dict.length_min;
  fv.length = span > 0.0 ? (static_cast<double>(r.length_bytes) - dict.length_min) / span : 0.0;
  return fv;
}

std::vector<FeatureVector> extract_features(std::span<const LabeledRecord> records,
                                            const FeatureDictionary& dict) {
  std::vector<FeatureVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode(r, dict));
  return out;
}

std::vector<double> to_dense(const FeatureVector& fv, const FeatureDictionary& dict) {
  if (dict.encoding == Encoding::Categorical) {
    return {static_cast<double>(fv.src_code), static_cast<double>(fv.dst_code),
            static_cast<double>(fv.protocol_code), fv.length};
  }
  std::vector<double> row(dict.dimension(), 0.0);
  std::size_t offset = 0;
  row[offset + static_cast<std::size_t>(fv.src_code)] = 1.0;
  offset += dict.src.size() + 1;
  row[offset + static_cast<std::size_t>(fv.dst_code)] = 1.0;
  offset += dict.dst.size() + 1;
  row[offset + static_cast<std::size_t>(fv.protocol_code)] = 1.0;
  offset += dict.protocol.size() + 1;
  row[offset] = fv.length;
  return row;
}

}  // namespace cosim::capture
