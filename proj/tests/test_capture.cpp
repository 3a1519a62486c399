#include "doctest.h"

#include <cmath>

#include "cosim/capture.hpp"
#include "cosim/config.hpp"
#include "cosim/scenario.hpp"

using namespace cosim;
using namespace cosim::capture;
using attack::Stage;

namespace {

CapturedPacket captured(std::uint64_t sent, std::string src, std::string dst, net::Protocol proto,
                        std::uint32_t len, std::string actor, bool report = false, std::string station = "") {
  CapturedPacket c;
  c.record = {sent + 3, std::move(src), std::move(dst), proto, len, Label::Normal, std::nullopt};
  c.sent_at_ms = sent;
  c.origin_actor = std::move(actor);
  c.measurement_report = report;
  c.station = std::move(station);
  return c;
}

std::vector<attack::ActionRecord> log_s1_to_s4() {
  return {{1000, Stage::S1Scan, "enter_stage", "*", "S1"},
          {2000, Stage::S2Rce, "enter_stage", "*", "S2"},
          {3000, Stage::S3Pe, "enter_stage", "*", "S3"},
          {4000, Stage::S4Impact, "enter_stage", "*", "S4"}};
}

LabeledRecord rec(std::string src, std::string dst, net::Protocol p, std::uint32_t len,
                  Label l = Label::Normal) {
  LabeledRecord r{0, std::move(src), std::move(dst), p, len, l, std::nullopt};
  if (l == Label::Attack) r.stage = Stage::S1Scan;
  return r;
}

}  // namespace

TEST_SUITE("capture") {

TEST_CASE("attacker packets take the stage active when they were sent") {
  const std::vector<CapturedPacket> pkts{
      captured(1500, "10.0.0.66", "10.0.1.11", net::Protocol::ScanProbe, 60, "attacker"),
      captured(2500, "10.0.1.11", "10.0.0.66", net::Protocol::Http, 500, "attacker"),
      captured(3500, "10.0.0.66", "10.0.1.11", net::Protocol::Http, 300, "attacker"),
      captured(500, "10.0.1.11", "10.0.0.1", net::Protocol::Scada, 61, "rtu1", true, "rtu1")};
  const auto r = label(pkts, log_s1_to_s4(), {});
  CHECK(r[0].label == Label::Attack);
  CHECK(r[0].stage == Stage::S1Scan);
  CHECK(r[1].stage == Stage::S2Rce);
  CHECK(r[2].stage == Stage::S3Pe);
  CHECK(r[3].label == Label::Normal);
  CHECK_FALSE(r[3].stage);
}

TEST_CASE("record fields are copied from the packet") {
  const std::vector<CapturedPacket> pkts{captured(10, "10.0.0.1", "10.0.1.12", net::Protocol::Scada, 25, "rtu2")};
  const auto r = label(pkts, {}, {});
  CHECK(r[0].src == "10.0.0.1");
  CHECK(r[0].dst == "10.0.1.12");
  CHECK(r[0].protocol == net::Protocol::Scada);
  CHECK(r[0].length_bytes == 25);
  CHECK(r[0].time_ms == 13);
}

TEST_CASE("manipulated reports are attack/S4 only after activation") {
  const std::vector<CapturedPacket> pkts{
      captured(4000, "10.0.1.11", "10.0.0.1", net::Protocol::Scada, 61, "rtu1", true, "rtu1"),
      captured(6000, "10.0.1.11", "10.0.0.1", net::Protocol::Scada, 61, "rtu1", true, "rtu1"),
      captured(6010, "10.0.0.1", "10.0.1.11", net::Protocol::Scada, 25, "rtu1"),
      captured(6000, "10.0.1.12", "10.0.0.1", net::Protocol::Scada, 61, "rtu2", true, "rtu2")};
  const std::vector<scada::CompromiseRecord> comp{
      {"rtu1", scada::EffectKind::Manipulate, SimTime::from_ms(5000), true},
      {"rtu2", scada::EffectKind::Manipulate, SimTime::from_ms(5000), false}};
  const auto r = label(pkts, log_s1_to_s4(), comp);
  CHECK(r[0].label == Label::Normal);
  CHECK(r[1].label == Label::Attack);
  CHECK(r[1].stage == Stage::S4Impact);
  CHECK(r[2].label == Label::Normal);  // the MTU's ack carries no manipulated values
  CHECK(r[3].label == Label::Normal);  // rejected effect

  LabelingOptions off;
  off.label_manipulated_reports = false;
  CHECK(label(pkts, log_s1_to_s4(), comp, off)[1].label == Label::Normal);
}

TEST_CASE("attacker packets before the action log cannot be attributed") {
  const std::vector<CapturedPacket> pkts{captured(10, "10.0.0.66", "10.0.1.11", net::Protocol::ScanProbe, 60,
                                                  "attacker")};
  CHECK_THROWS_AS(label(pkts, log_s1_to_s4(), {}), LabelingError);
}

TEST_CASE("balance and warm-up split") {
  std::vector<LabeledRecord> rs{rec("a", "b", net::Protocol::Scada, 61), rec("a", "b", net::Protocol::Scada, 61),
                                rec("x", "b", net::Protocol::ScanProbe, 60, Label::Attack),
                                rec("a", "b", net::Protocol::Scada, 61)};
  const auto d = make_dataset("t", 1, rs);
  CHECK(d.balance.attack_pct == 25.0);
  CHECK(d.balance.normal_pct == 75.0);
  CHECK(d.split.train == std::vector<IndexRange>{{0, 2}});
  CHECK(d.split.test == std::vector<IndexRange>{{2, 4}});
  CHECK(slice(d, d.split.test).size() == 2);
}

TEST_CASE("csv export then import gives the same dataset") {
  std::vector<LabeledRecord> rs{rec("10.0.1.11", "10.0.0.1", net::Protocol::Scada, 61),
                                rec("10.0.0.66", "10.0.1.11", net::Protocol::ScanProbe, 60, Label::Attack)};
  rs[1].stage = Stage::S4Impact;
  rs[1].time_ms = 12345;
  const auto d = make_dataset("rt", 0, rs);
  const auto back = parse_csv(to_csv(d.records), DatasetMeta{"rt", 0});
  CHECK(back == d);
}

TEST_CASE("empty dataset exports as the header alone") {
  CHECK(to_csv({}) == std::string(kDatasetHeader) + "\n");
  CHECK(parse_csv(std::string(kDatasetHeader) + "\n").records.empty());
}

TEST_CASE("bad rows are named") {
  const std::string text = std::string(kDatasetHeader) +
                           "\n1,a,b,SCADA,61,normal,\n2,a,b,SCADA,61,maybe,\n";
  try {
    parse_csv(text);
    FAIL("expected DatasetFormatError");
  } catch (const DatasetFormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("maybe") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("time,src\n"), DatasetFormatError);
  CHECK_THROWS_AS(parse_csv(std::string(kDatasetHeader) + "\n1,a,b,SCADA,61,attack,\n"), DatasetFormatError);
}

TEST_CASE("feature dictionary codes, unseen values and length scaling") {
  std::vector<LabeledRecord> train{rec("10.0.1.11", "10.0.0.1", net::Protocol::Scada, 61),
                                   rec("10.0.0.1", "10.0.1.11", net::Protocol::Scada, 25),
                                   rec("10.0.0.66", "10.0.1.11", net::Protocol::Http, 300)};
  const auto d = FeatureDictionary::build(train);
  CHECK(d.src.at("10.0.0.1") == 1);
  CHECK(d.src.at("10.0.0.66") == 2);
  CHECK(d.src.at("10.0.1.11") == 3);
  CHECK(d.length_min == 25.0);
  CHECK(d.length_max == 300.0);

  const auto known = encode(train[0], d);
  CHECK(known.src_code == 3);
  CHECK(known.dst_code == d.dst.at("10.0.0.1"));
  CHECK(known.protocol_code == d.protocol.at("SCADA"));

  const auto unseen = encode(rec("10.9.9.9", "10.0.0.1", net::Protocol::Telnet, 300), d);
  CHECK(unseen.src_code == 0);
  CHECK(unseen.protocol_code == 0);
  CHECK(unseen.length == 1.0);
  CHECK(encode(train[1], d).length == 0.0);
  CHECK(to_dense(unseen, d).size() == 4);
}

TEST_CASE("one-hot rows put a single 1 in each categorical block") {
  std::vector<LabeledRecord> train{rec("a", "b", net::Protocol::Scada, 61), rec("b", "a", net::Protocol::Http, 25)};
  const auto d = FeatureDictionary::build(train, Encoding::OneHot);
  const auto row = to_dense(encode(train[0], d), d);
  CHECK(row.size() == d.dimension());
  double ones = 0.0;
  for (std::size_t i = 0; i + 1 < row.size(); ++i) ones += row[i];
  CHECK(ones == 3.0);
}

TEST_CASE("mirrored records equal the SPAN switch's forwarded packets") {
  const auto run = sim::run_scenario(config::load_config(config::resolve_scenario("reference")));
  CHECK(run.captured.size() == run.network.span_forwarded);
  CHECK(run.dataset.records.size() == run.captured.size());
}

TEST_CASE("traffic that never crosses the mirrored switch is not captured") {
  auto cfg = config::load_config(config::resolve_scenario("reference"));
  cfg.ict.span = net::SpanSpec{"sw_st2", "ids"};
  cfg.ict.static_forwarding = true;
  const auto run = sim::run_scenario(cfg);
  for (const auto& r : run.dataset.records) {
    CHECK((r.src == "10.0.1.12" || r.dst == "10.0.1.12"));
  }
}

TEST_CASE("shipped scenarios hit their balance targets") {
  for (int id : {1, 4}) {
    auto cfg = config::load_config(config::resolve_scenario(std::to_string(id)));
    const auto run = sim::run_scenario(cfg);
    CHECK(run.calibrated());
    CHECK(std::abs(run.dataset.balance.attack_pct - *cfg.capture.balance_target_pct) <= 3.0);
  }
}

TEST_CASE("same scenario and seed give the same CSV bytes") {
  auto cfg = config::load_config(config::resolve_scenario("1"));
  CHECK(to_csv(sim::run_scenario(cfg).dataset.records) == to_csv(sim::run_scenario(cfg).dataset.records));
}

}
