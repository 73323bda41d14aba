#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sgtraj/metrics.hpp"
#include "sgtraj/pipeline.hpp"
#include "sgtraj/synth.hpp"
#include "test_util.hpp"

using namespace sgtraj;

namespace {

constexpr double kFt = 0.3048;

Track make_track(VehicleId id, std::int64_t f0, std::int64_t f1, const std::function<int(std::int64_t)>& lane,
                 const std::function<double(std::int64_t)>& x, const std::function<double(std::int64_t)>& y) {
  Track t{id, {}};
  for (std::int64_t f = f0; f <= f1; ++f) t.points.push_back({f, lane(f), x(f), y(f)});
  return t;
}

// One lane change 3 -> 4 at 500 ft, 12 ft logistic swing centred on the
// change, 1200 ft of travel.
Track good_target(VehicleId id = 1) {
  auto y = [](std::int64_t f) { return 3.0 * static_cast<double>(f) * kFt; };
  const std::int64_t lc = 167;  // y(167) ≈ 501 ft
  auto x = [lc](std::int64_t f) { return (30.0 + 12.0 / (1.0 + std::exp(-0.1 * static_cast<double>(f - lc)))) * kFt; };
  auto lane = [lc](std::int64_t f) { return f < lc ? 3 : 4; };
  return make_track(id, 0, 400, lane, x, y);
}

std::string headerless_row(VehicleId id, std::int64_t frame, int lane, double x_ft, double y_ft) {
  std::ostringstream os;
  // Vehicle_ID Frame_ID Total_Frames Global_Time Local_X Local_Y Global_X Global_Y
  // v_Length v_Width v_Class v_Vel v_Acc Lane_ID Preceding Following Space Time
  os << id << ' ' << frame << " 500 1118846980200 " << x_ft << ' ' << y_ft
     << " 6042842.1 2133118.6 14.5 4.9 2 40.0 0.0 " << lane << " 0 0 0.0 0.0\n";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest

TEST(Ingest, ConvertsFeetToMeters) {
  std::istringstream in("Vehicle_ID,Frame_ID,Lane_ID,Local_X,Local_Y\n7,100,2,10,1000\n");
  auto r = ingest(in);
  ASSERT_EQ(r.tracks.size(), 1u);
  EXPECT_DOUBLE_EQ(r.tracks[0].points[0].x, 3.048);
  EXPECT_DOUBLE_EQ(r.tracks[0].points[0].y, 304.8);
  EXPECT_EQ(r.tracks[0].points[0].lane, 2);
}

TEST(Ingest, InterleavedVehiclesSplitIntoTracks) {
  std::istringstream in(
      "Frame_ID,Vehicle_ID,Local_Y,Local_X,Lane_ID\n"
      "1,5,10,1,1\n1,9,20,2,2\n2,5,11,1,1\n2,9,21,2,2\n3,9,22,2,2\n");
  auto r = ingest(in);
  ASSERT_EQ(r.tracks.size(), 2u);
  EXPECT_EQ(r.tracks[0].id, 5);
  EXPECT_EQ(r.tracks[0].points.size(), 2u);
  EXPECT_EQ(r.tracks[1].id, 9);
  EXPECT_EQ(r.tracks[1].points.size(), 3u);
  EXPECT_DOUBLE_EQ(r.tracks[1].points[2].y, 22 * kFt);
}

TEST(Ingest, HeaderlessWhitespaceLayout) {
  std::istringstream in(headerless_row(3, 10, 4, 20.0, 100.0) + headerless_row(3, 11, 4, 20.5, 104.0));
  auto r = ingest(in);
  ASSERT_EQ(r.tracks.size(), 1u);
  EXPECT_EQ(r.tracks[0].points[1].frame, 11);
  EXPECT_EQ(r.tracks[0].points[1].lane, 4);
  EXPECT_DOUBLE_EQ(r.tracks[0].points[1].x, 20.5 * kFt);
  EXPECT_DOUBLE_EQ(r.tracks[0].points[1].y, 104.0 * kFt);
}

TEST(Ingest, MissingColumnNamesIt) {
  std::istringstream in("Vehicle_ID,Frame_ID,Local_X,Local_Y\n1,1,1,1\n");
  try {
    ingest(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("Lane_ID"), std::string::npos);
  }
}

TEST(Ingest, BadNumberReportsLine) {
  std::istringstream in("Vehicle_ID,Frame_ID,Lane_ID,Local_X,Local_Y\n1,1,1,1,1\n1,2,1,oops,1\n");
  try {
    ingest(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Ingest, NonMonotoneFramesAreSortedWithWarning) {
  std::istringstream in("Vehicle_ID,Frame_ID,Lane_ID,Local_X,Local_Y\n1,3,1,0,3\n1,1,1,0,1\n1,2,1,0,2\n");
  auto r = ingest(in);
  ASSERT_EQ(r.tracks.size(), 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
  std::vector<std::int64_t> frames;
  for (const auto& p : r.tracks[0].points) frames.push_back(p.frame);
  EXPECT_EQ(frames, (std::vector<std::int64_t>{1, 2, 3}));
}

// ---------------------------------------------------------------------------
// target selection

TEST(LaneChanges, FlickerIsDebounced) {
  auto lane = [](std::int64_t f) { return (f >= 50 && f < 53) ? 3 : (f < 100 ? 2 : 3); };
  Track t = make_track(1, 0, 200, lane, [](auto) { return 0.0; }, [](auto f) { return double(f); });
  auto ch = detect_lane_changes(t);
  ASSERT_EQ(ch.size(), 1u);
  EXPECT_EQ(ch[0].frame, 100);
  EXPECT_EQ(ch[0].from, 2);
  EXPECT_EQ(ch[0].to, 3);
}

TEST(SelectTargets, RuleByRuleAcceptance) {
  Track t = good_target();
  TargetVerdict v = judge_target(t);
  EXPECT_TRUE(v.ramp_free);
  EXPECT_TRUE(v.single_change);
  EXPECT_TRUE(v.long_enough);
  EXPECT_TRUE(v.change_in_range);
  EXPECT_TRUE(v.lateral_obvious);
  EXPECT_EQ(select_targets({t}), (std::vector<VehicleId>{1}));
}

TEST(SelectTargets, NeverChangingLaneExcluded) {
  Track t = make_track(1, 0, 400, [](auto) { return 3; }, [](auto) { return 10.0; },
                       [](auto f) { return 3.0 * double(f) * kFt; });
  EXPECT_FALSE(judge_target(t).single_change);
  EXPECT_TRUE(select_targets({t}).empty());
}

TEST(SelectTargets, EachConditionCanReject) {
  {  // (a) visits a ramp lane
    Track t = good_target();
    t.points.back().lane = 7;
    EXPECT_FALSE(judge_target(t).ramp_free);
  }
  {  // (b) changes back later
    Track t = good_target();
    for (auto& p : t.points)
      if (p.frame >= 300) p.lane = 3;
    EXPECT_FALSE(judge_target(t).single_change);
  }
  {  // (c) short extent
    Track t = good_target();
    for (auto& p : t.points) p.y *= 0.5;
    EXPECT_FALSE(judge_target(t).long_enough);
  }
  {  // (d) change position beyond 1,900 ft
    Track t = good_target();
    for (auto& p : t.points) p.y += 1500.0 * kFt;
    EXPECT_FALSE(judge_target(t).change_in_range);
  }
  {  // (e) lateral swing of 6 ft only
    Track t = good_target();
    for (auto& p : t.points) p.x = 30.0 * kFt + (p.x - 30.0 * kFt) * 0.5;
    EXPECT_FALSE(judge_target(t).lateral_obvious);
  }
}

// ---------------------------------------------------------------------------
// extraction

TEST(Extract, WindowCoversTwoHundredSixtyFrames) {
  std::vector<Track> tracks{make_track(1, 0, 600, [](auto f) { return f < 300 ? 2 : 3; },
                                       [](auto f) { return f < 300 ? 5.0 : 9.0; }, [](auto f) { return double(f); })};
  TrackIndex idx(tracks);
  auto s = extract_samples(idx, 1, "seg");
  ASSERT_EQ(s.size(), 260u);
  EXPECT_EQ(s.front().meta.frame, 170);
  EXPECT_EQ(s.back().meta.frame, 429);
}

TEST(Extract, ShortHistoryFramesSkipped) {
  std::vector<Track> tracks{make_track(1, 160, 600, [](auto f) { return f < 300 ? 2 : 3; },
                                       [](auto) { return 5.0; }, [](auto f) { return double(f); })};
  TrackIndex idx(tracks);
  auto s = extract_samples(idx, 1, "seg");
  ASSERT_FALSE(s.empty());
  EXPECT_EQ(s.front().meta.frame, 190);  // first frame with 3 s of history
  EXPECT_EQ(s.size(), 240u);
}

TEST(Extract, TimestampsAndTranslation) {
  auto x = [](std::int64_t f) { return 1.0 + 0.01 * double(f); };
  auto y = [](std::int64_t f) { return 50.0 + double(f); };
  std::vector<Track> tracks{make_track(1, 0, 300, [](auto) { return 2; }, x, y),
                            make_track(2, 0, 300, [](auto) { return 2; }, x, [](auto f) { return 80.0 + double(f); })};
  TrackIndex idx(tracks);
  auto s = make_stp_sample(idx, 1, 100, "seg");
  ASSERT_TRUE(s);
  EXPECT_NO_THROW(s->validate());
  EXPECT_EQ(s->histories[0].back(), (Point{0.0, 0.0}));
  for (std::size_t k = 0; k < kHistoryLen; ++k)
    EXPECT_DOUBLE_EQ(s->histories[0][k].y, -2.0 * double(kHistoryLen - 1 - k));  // t-3.0 s .. t
  for (std::size_t k = 0; k < kFutureLen; ++k) EXPECT_DOUBLE_EQ(s->futures[0][k].y, 5.0 * double(k + 1));  // t+0.5 s ..
  // Undo the translation on the neighbor.
  ASSERT_EQ(s->histories.size(), 2u);
  for (std::size_t k = 0; k < kHistoryLen; ++k) {
    const std::int64_t f = 100 - 2 * static_cast<std::int64_t>(kHistoryLen - 1 - k);
    EXPECT_NEAR(s->histories[1][k].x + s->meta.origin_x, x(f), 1e-9);
    EXPECT_NEAR(s->histories[1][k].y + s->meta.origin_y, 80.0 + double(f), 1e-9);
  }
  EXPECT_EQ(s->edges, build_star_edges(1));
}

TEST(Extract, IncompleteNeighborSkipsFrameUnlessDropping) {
  std::vector<Track> tracks{
      make_track(1, 0, 300, [](auto) { return 2; }, [](auto) { return 5.0; }, [](auto f) { return double(f); }),
      make_track(2, 90, 300, [](auto) { return 2; }, [](auto) { return 5.0; }, [](auto f) { return 30.0 + f; })};
  TrackIndex idx(tracks);
  EXPECT_FALSE(make_stp_sample(idx, 1, 100, "seg"));
  ExtractOptions drop;
  drop.drop_incomplete_neighbors = true;
  auto s = make_stp_sample(idx, 1, 100, "seg", drop);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->num_vehicles(), 1u);
  EXPECT_TRUE(make_stp_sample(idx, 1, 120, "seg"));
}

TEST(Extract, ManeuverLabelFromLaneAtHorizon) {
  std::vector<Track> tracks{make_track(1, 0, 600, [](auto f) { return f < 300 ? 3 : 2; },
                                       [](auto) { return 5.0; }, [](auto f) { return double(f); })};
  TrackIndex idx(tracks);
  EXPECT_EQ(make_stp_sample(idx, 1, 200, "s")->meta.maneuver, Maneuver::kKeep);
  EXPECT_EQ(make_stp_sample(idx, 1, 260, "s")->meta.maneuver, Maneuver::kLeft);
}

// ---------------------------------------------------------------------------
// split and codec

TEST(Split, SizesDeterminismAndOrder) {
  auto data = synth_dataset(60, 5);
  auto a = split_samples(data, 11, 15), b = split_samples(data, 11, 15);
  EXPECT_EQ(a.validation.size(), 15u);
  EXPECT_EQ(a.train.size(), 45u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  std::vector<VehicleId> ids;
  for (const auto& s : a.train) ids.push_back(s.meta.target_id);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  std::set<VehicleId> all(ids.begin(), ids.end());
  for (const auto& s : a.validation) EXPECT_TRUE(all.insert(s.meta.target_id).second);
  EXPECT_EQ(all.size(), 60u);
  EXPECT_NE(split_samples(data, 12, 15).validation, a.validation);
}

TEST(Split, TooFewSamplesIsContractError) {
  auto data = synth_dataset(10, 5);
  EXPECT_THROW(split_samples(data, 1, 10), ContractError);
  EXPECT_THROW(split_samples(data, 1), ContractError);
}

TEST(Codec, RoundTripIsBitExact) {
  std::mt19937_64 rng(31);
  std::vector<Sample> samples;
  for (int i = 0; i < 100; ++i) {
    Sample s = i % 3 == 0 ? sgtraj::testing::random_mtp_sample(rng, 1 + rng() % 4, rng() % 4)
                          : sgtraj::testing::random_stp_sample(rng, rng() % 9);
    s.meta.target_id = static_cast<VehicleId>(rng());
    s.meta.frame = -static_cast<std::int64_t>(i);
    s.meta.origin_x = std::ldexp(1.0, -1070);  // subnormal survives
    s.meta.segment = "seg-" + std::to_string(i);
    s.meta.maneuver = static_cast<Maneuver>(i % 4);
    samples.push_back(s);
  }
  std::stringstream ss;
  write_dataset(ss, samples);
  EXPECT_EQ(read_dataset(ss), samples);
}

TEST(Codec, RejectsCorruptInput) {
  auto data = synth_dataset(3, 1);
  std::stringstream ss;
  write_dataset(ss, data);
  std::string bytes = ss.str();
  {
    std::istringstream bad("XXXX" + bytes.substr(4));
    EXPECT_THROW(read_dataset(bad), FormatError);
  }
  {
    std::istringstream cut(bytes.substr(0, bytes.size() - 9));
    EXPECT_THROW(read_dataset(cut), FormatError);
  }
}

// ---------------------------------------------------------------------------
// synthetic generator

TEST(Synth, ValidSamples) {
  auto data = synth_dataset(100, 42);
  ASSERT_EQ(data.size(), 100u);
  for (const auto& s : data) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_TRUE(s.is_stp());
    EXPECT_GE(s.num_vehicles(), 1u);
    EXPECT_LE(s.num_vehicles(), 9u);
  }
}

TEST(Synth, FuzzTenThousandSamplesKeepInvariants) {
  auto data = synth_dataset(10000, 8);
  for (const auto& s : data) ASSERT_NO_THROW(s.validate());
}

TEST(Synth, SameSeedSameData) { EXPECT_EQ(synth_dataset(30, 3), synth_dataset(30, 3)); }

TEST(Synth, BalancedClasses) {
  auto data = synth_dataset(900, 9);
  std::map<Maneuver, int> count;
  for (const auto& s : data) ++count[s.meta.maneuver];
  for (Maneuver m : {Maneuver::kKeep, Maneuver::kLeft, Maneuver::kRight})
    EXPECT_NEAR(count[m] / 900.0, 1.0 / 3.0, 0.05) << maneuver_name(m);
}

TEST(Synth, ManeuverLabelMatchesLateralMotion) {
  for (const auto& s : synth_dataset(300, 10)) {
    const double dx = s.futures[0].back().x;
    switch (s.meta.maneuver) {
      case Maneuver::kLeft: EXPECT_LT(dx, -2.5); break;
      case Maneuver::kRight: EXPECT_GT(dx, 2.5); break;
      default: EXPECT_LT(std::abs(dx), 0.5); break;
    }
  }
}

TEST(Synth, ManeuversDefeatExtrapolation) {
  auto data = synth_dataset(1500, 12);
  std::vector<Sample> keep, change;
  for (auto& s : data) (is_lane_change(s) ? change : keep).push_back(s);
  const auto k = evaluate_baseline(keep), c = evaluate_baseline(change);
  EXPECT_GT(c.rmse[4], k.rmse[4]);
  EXPECT_LT(k.rmse[0], 0.5);
}

TEST(Synth, MtpSamplesAreWellFormed) {
  for (const auto& s : synth_mtp_dataset(60, 13)) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_FALSE(s.is_stp());
    for (std::size_t k = 0; k < s.target_nodes.size(); ++k) EXPECT_EQ(s.target_nodes[k], k + 1);
    for (std::size_t i = 0; i < s.num_vehicles(); ++i) EXPECT_TRUE(s.edges.contains({i, i}));
  }
}
