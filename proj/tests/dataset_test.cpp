#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "solarchain/dataset.hpp"

using namespace solarchain;

namespace {

GenerationRecord sample_record() {
  GenerationRecord r;
  r.timestamp = Timestamp::parse("2026-05-01T11:00:00+08:00");
  r.hour = 11;
  r.node_id = "SHA-003";
  r.city = "Shanghai";
  r.latitude = 31.230416;
  r.longitude = 121.473701;
  r.irradiance_wm2 = 712.35;
  r.air_temp_c = 21.4;
  r.p_max_w = 6120.77;
  r.p_reported_w = 5990.12;
  return r;
}

std::string expect_parse_error(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_generation_csv(in);
  } catch (const ParseError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ParseError for:\n" << csv;
  return {};
}

const char* kGenHeader =
    "timestamp,hour,node_id,city,latitude,longitude,irradiance_Wm2,air_temp_C,P_max_W,"
    "P_reported_W,fdia_detected,verification_status\n";

}  // namespace

TEST(GenerationCsv, RoundTripIncludingNaNAndNegatives) {
  std::vector<GenerationRecord> recs{sample_record(), sample_record(), sample_record()};
  recs[1].p_reported_w = std::nan("");
  recs[1].fdia_detected = true;
  recs[1].verification_status = physics::VerificationStatus::rejected;
  recs[2].p_reported_w = -123.45;
  recs[2].fdia_detected = true;
  recs[2].verification_status = physics::VerificationStatus::rejected;

  std::ostringstream out;
  write_generation_csv(out, recs);
  EXPECT_NE(out.str().find(",NaN,True,rejected"), std::string::npos);
  std::istringstream in(out.str());
  const auto back = read_generation_csv(in);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].timestamp, recs[0].timestamp);
  EXPECT_EQ(back[0].timestamp.offset_minutes(), 480);
  EXPECT_EQ(back[0].node_id, "SHA-003");
  EXPECT_EQ(back[0].p_max_w, 6120.77);
  EXPECT_EQ(back[0].p_reported_w, 5990.12);
  EXPECT_EQ(back[0].latitude, 31.230416);
  EXPECT_TRUE(std::isnan(back[1].p_reported_w));
  EXPECT_TRUE(back[1].fdia_detected);
  EXPECT_FALSE(back[1].verified());
  EXPECT_EQ(back[2].p_reported_w, -123.45);

  // Writing the parsed records again gives the same bytes.
  std::ostringstream again;
  write_generation_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(GenerationCsv, MissingColumnIsSchemaMismatch) {
  std::istringstream in(
      "timestamp,hour,node_id,city,latitude,longitude,irradiance_Wm2,air_temp_C,P_max_W,"
      "fdia_detected,verification_status\n");
  try {
    read_generation_csv(in);
    FAIL();
  } catch (const SchemaMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("P_reported_W"), std::string::npos) << e.what();
  }
}

TEST(GenerationCsv, RaggedRowIsSchemaMismatch) {
  std::istringstream in(std::string(kGenHeader) + "2026-05-01T11:00:00+08:00,11,X\n");
  EXPECT_THROW(read_generation_csv(in), SchemaMismatch);
}

TEST(GenerationCsv, TimestampWithoutOffsetNamesLine) {
  const auto msg = expect_parse_error(
      std::string(kGenHeader) +
      "2026-05-01T11:00:00+08:00,11,A,Beijing,39.9,116.4,700,20,5000,4900,False,verified\n"
      "2026-05-01T12:00:00,12,A,Beijing,39.9,116.4,700,20,5000,4900,False,verified\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("timestamp"), std::string::npos) << msg;
}

TEST(GenerationCsv, BadFieldsAreParseErrors) {
  const std::string row = "2026-05-01T11:00:00+08:00,11,A,Beijing,39.9,116.4,700,20,";
  expect_parse_error(std::string(kGenHeader) + row + "abc,4900,False,verified\n");
  expect_parse_error(std::string(kGenHeader) + row + "5000,4900,Maybe,verified\n");
  expect_parse_error(std::string(kGenHeader) + row + "5000,4900,False,pending\n");
  expect_parse_error(std::string(kGenHeader) +
                     "2026-05-01T11:00:00+08:00,24,A,Beijing,39.9,116.4,700,20,5000,4900,False,"
                     "verified\n");
}

TEST(GenerationCsv, ToleratesBomAndCrlf) {
  std::istringstream in("\xEF\xBB\xBF" + std::string(kGenHeader).insert(strlen(kGenHeader) - 1, "\r") +
                        "2026-05-01T11:00:00+08:00,11,A,Beijing,39.9,116.4,700,20,5000,4900,"
                        "False,verified\r\n");
  const auto recs = read_generation_csv(in);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_TRUE(recs[0].verified());
  EXPECT_EQ(recs[0].p_reported_w, 4900.0);
}

TEST(NodesCsv, RoundTrip) {
  std::vector<physics::NodeSpec> nodes{
      {"CHE-010", "Chengdu", 30.572815, 104.066801, 43.39, 0.2055, -0.00379, {2021, 7, 3}},
      {"BEI-001", "Beijing", 39.904202, 116.407394, 18.43, 0.1768, -0.0046, {2020, 1, 9}}};
  std::ostringstream out;
  write_nodes_csv(out, nodes);
  std::istringstream in(out.str());
  const auto back = read_nodes_csv(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].node_id, nodes[i].node_id);
    EXPECT_EQ(back[i].panel_area_m2, nodes[i].panel_area_m2);
    EXPECT_EQ(back[i].efficiency, nodes[i].efficiency);
    EXPECT_EQ(back[i].temp_coefficient, nodes[i].temp_coefficient);
    EXPECT_EQ(back[i].install_date, nodes[i].install_date);
  }
}

TEST(NodesCsv, InvalidNodeIsRejected) {
  std::istringstream in(
      "node_id,city,latitude,longitude,panel_area_m2,efficiency,temp_coefficient,install_date\n"
      "X,Beijing,39.9,116.4,40,0.5,-0.004,2021-01-01\n");
  EXPECT_THROW(read_nodes_csv(in), ParseError);
}

TEST(TradesCsv, ExactUnitsAndTokens) {
  TradeRow t;
  t.trade_id = "TRD-0007";
  t.timestamp = Timestamp::parse("2026-05-01T09:20:00+08:00");
  t.hour = 9;
  t.factory_id = "FAC-SH-01";
  t.city = "Shanghai";
  t.energy_units = 1'234'500;  // 12.345 kWh
  t.tokens_burned = ledger::Ledger::cost_wei_for(t.energy_units);
  t.exergy_mj = 1.2133;
  std::ostringstream out;
  write_trades_csv(out, std::vector<TradeRow>{t});
  EXPECT_NE(out.str().find(",0.012345,12.3450,"), std::string::npos) << out.str();
  std::istringstream in(out.str());
  const auto back = read_trades_csv(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].energy_units, t.energy_units);
  EXPECT_EQ(back[0].tokens_burned, t.tokens_burned);
  EXPECT_NEAR(back[0].energy_mwh(), 0.012345, 1e-15);
}

TEST(MarketCsv, RoundTrip) {
  MarketHour h{Timestamp::parse("2026-05-01T12:00:00+08:00"), 12, 0.095123, 0.089342,
               0.055562, 2.0434, 3.2448};
  std::ostringstream out;
  write_market_csv(out, std::vector<MarketHour>{h});
  std::istringstream in(out.str());
  const auto back = read_market_csv(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].total_verified_mw, h.total_verified_mw);
  EXPECT_EQ(back[0].slippage_baseline_pct, h.slippage_baseline_pct);
}

TEST(Quantize, MatchesWriterRounding) {
  EXPECT_EQ(quantize(1.23456789, 4), 1.2346);
  EXPECT_EQ(quantize(-0.00001, 2), 0.0);
  EXPECT_FALSE(std::signbit(quantize(-0.00001, 2)));
}

TEST(LoadDataset, RequiredFilesAndLineNumbersInErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "solarchain_dataset_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  EXPECT_ANY_THROW(load_dataset(dir));

  Dataset d;
  d.nodes = {{"BEI-001", "Beijing", 39.9, 116.4, 40.0, 0.2, -0.004, {2022, 1, 1}}};
  d.records = {sample_record()};
  d.records[0].node_id = "BEI-001";
  write_dataset(dir, d);
  std::filesystem::remove(dir / kMarketFile);
  std::filesystem::remove(dir / kTradesFile);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.nodes.size(), 1u);
  EXPECT_EQ(back.records.size(), 1u);
  EXPECT_TRUE(back.market.empty());
  EXPECT_TRUE(back.trades.empty());

  std::ofstream(dir / kGenerationFile, std::ios::app)
      << "2026-05-01T12:00:00+08:00,12,BEI-001,Beijing,x,116.4,700,20,5000,4900,False,verified\n";
  try {
    load_dataset(dir);
    FAIL();
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(kGenerationFile), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("latitude"), std::string::npos) << msg;
  }
  std::filesystem::remove_all(dir);
}
