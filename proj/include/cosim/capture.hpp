#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosim/attacker.hpp"
#include "cosim/network.hpp"
#include "cosim/scada.hpp"

namespace cosim::capture {

enum class Label { Normal, Attack };

std::string_view to_string(Label l);

/// Raised when a record cannot be attributed from the logs. Labels are never guessed.
class LabelingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabeledRecord {
  std::uint64_t time_ms = 0;
  std::string src;
  std::string dst;
  net::Protocol protocol = net::Protocol::Other;
  std::uint32_t length_bytes = 0;
  Label label = Label::Normal;
  std::optional<attack::Stage> stage;  // present iff label == Attack

  friend bool operator==(const LabeledRecord&, const LabeledRecord&) = default;
};

/// A mirrored packet with the provenance needed for labeling.
struct CapturedPacket {
  LabeledRecord record;  // label pending
  std::uint64_t packet_id = 0;
  std::string origin_actor;
  std::uint64_t sent_at_ms = 0;
  bool measurement_report = false;
  std::string station;  // reporting RTU, measurement reports only
};

/// SPAN sink: one CapturedPacket per mirror copy, in mirror order.
class Collector {
 public:
  void on_mirror(const net::Packet& packet);
  const std::vector<CapturedPacket>& packets() const { return packets_; }
  std::vector<CapturedPacket> collect() const { return packets_; }

 private:
  std::vector<CapturedPacket> packets_;
};

struct LabelingOptions {
  std::string attacker_id = "attacker";
  /// Label RTU reports emitted under an active manipulation as attack/S4.
  bool label_manipulated_reports = true;
};

std::vector<LabeledRecord> label(std::span<const CapturedPacket> packets,
                                 std::span<const attack::ActionRecord> action_log,
                                 std::span<const scada::CompromiseRecord> compromise_log,
                                 const LabelingOptions& options = {});

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Split {
  std::vector<IndexRange> train;
  std::vector<IndexRange> test;
  friend bool operator==(const Split&, const Split&) = default;
};

struct Balance {
  double attack_pct = 0.0;
  double normal_pct = 0.0;
  friend bool operator==(const Balance&, const Balance&) = default;
};

struct LabeledDataset {
  std::string scenario_id = "custom";
  std::uint64_t seed = 0;
  std::vector<LabeledRecord> records;
  Split split;
  Balance balance;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

Balance compute_balance(std::span<const LabeledRecord> records);
/// Train = attack-free prefix before the first attack record; test = the rest.
Split warmup_split(std::span<const LabeledRecord> records);
LabeledDataset make_dataset(std::string scenario_id, std::uint64_t seed, std::vector<LabeledRecord> records);
std::vector<LabeledRecord> slice(const LabeledDataset& d, std::span<const IndexRange> ranges);

inline constexpr std::string_view kDatasetHeader = "time_ms,src,dst,protocol,length,label,stage";

std::string to_csv(std::span<const LabeledRecord> records);
void export_csv(const LabeledDataset& dataset, const std::filesystem::path& path);

struct DatasetMeta {
  std::string scenario_id = "custom";
  std::uint64_t seed = 0;
};

/// Parses a dataset CSV; split and balance are rederived from the records.
/// Throws DatasetFormatError naming the offending row.
LabeledDataset parse_csv(const std::string& text, const DatasetMeta& meta = {});
LabeledDataset import_csv(const std::filesystem::path& path, const DatasetMeta& meta = {});

// Feature extraction over source, destination, protocol and length.

enum class Encoding { Categorical, OneHot };

std::string_view to_string(Encoding e);
std::optional<Encoding> parse_encoding(std::string_view s);

struct FeatureVector {
  int src_code = 0;
  int dst_code = 0;
  int protocol_code = 0;
  double length = 0.0;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Category codes (1-based, assigned in sorted order; 0 is reserved for
/// unseen values) and length min/max, frozen from training records.
struct FeatureDictionary {
  std::map<std::string, int> src;
  std::map<std::string, int> dst;
  std::map<std::string, int> protocol;
  double length_min = 0.0;
  double length_max = 0.0;
  Encoding encoding = Encoding::Categorical;

  static FeatureDictionary build(std::span<const LabeledRecord> training,
                                 Encoding encoding = Encoding::Categorical);
  std::size_t dimension() const;
  friend bool operator==(const FeatureDictionary&, const FeatureDictionary&) = default;
};

FeatureVector encode(const LabeledRecord& record, const FeatureDictionary& dict);
std::vector<FeatureVector> extract_features(std::span<const LabeledRecord> records,
                                            const FeatureDictionary& dict);
/// Numeric row fed to the detectors: four columns for categorical encoding,
/// one indicator per category (plus unseen) and length for one-hot.
std::vector<double> to_dense(const FeatureVector& fv, const FeatureDictionary& dict);

}  // namespace cosim::capture
