#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sgtraj/graph.hpp"
#include "sgtraj/sample.hpp"

namespace sgtraj {

inline constexpr double kMetersPerFoot = 0.3048;

struct TrackPoint {
  std::int64_t frame = 0;
  int lane = 0;
  double x = 0.0;  // lateral, m
  double y = 0.0;  // longitudinal, m
};

struct Track {
  VehicleId id = 0;
  std::vector<TrackPoint> points;  // strictly increasing frames

  const TrackPoint* at(std::int64_t frame) const {
    auto it = std::lower_bound(points.begin(), points.end(), frame,
                               [](const TrackPoint& p, std::int64_t f) { return p.frame < f; });
    return it != points.end() && it->frame == frame ? &*it : nullptr;
  }

  // Frames first, first+stride, ..., first+(n-1)·stride are all present.
  bool has_frames(std::int64_t first, std::int64_t stride, std::size_t n) const {
    for (std::size_t k = 0; k < n; ++k)
      if (!at(first + static_cast<std::int64_t>(k) * stride)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Ingest

struct IngestResult {
  std::vector<Track> tracks;  // sorted by vehicle id
  std::vector<std::string> warnings;
  std::size_t rows = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  const bool csv = line.find(',') != std::string_view::npos;
  std::size_t i = 0;
  while (i <= line.size()) {
    if (csv) {
      std::size_t j = line.find(',', i);
      if (j == std::string_view::npos) j = line.size();
      auto f = line.substr(i, j - i);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t' || f.front() == '"')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r' || f.back() == '"'))
        f.remove_suffix(1);
      out.push_back(f);
      i = j + 1;
    } else {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

template <class T>
T parse_number(std::string_view s, std::size_t line_no, std::string_view col) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw FormatError("line " + std::to_string(line_no) + ": cannot parse " + std::string(col) + " value '" +
                      std::string(s) + "'");
  return v;
}

inline double parse_double(std::string_view s, std::size_t line_no, std::string_view col) {
  return parse_number<double>(s, line_no, col);
}

inline std::int64_t parse_int(std::string_view s, std::size_t line_no, std::string_view col) {
  // Some exports write integer columns as "123.0".
  if (s.find_first_of(".eE") != std::string_view::npos)
    return static_cast<std::int64_t>(std::llround(parse_double(s, line_no, col)));
  return parse_number<std::int64_t>(s, line_no, col);
}

}  // namespace detail

// Reads an NGSIM trajectory table (CSV or whitespace-delimited). A header
// row naming Vehicle_ID, Frame_ID, Lane_ID, Local_X and Local_Y is used when
// present; otherwise the original 18-column US-101 layout is assumed.
// Positions are converted from feet to meters.
inline IngestResult ingest(std::istream& in) {
  static constexpr std::string_view kCols[5] = {"Vehicle_ID", "Frame_ID", "Lane_ID", "Local_X", "Local_Y"};
  std::size_t col[5] = {0, 1, 13, 4, 5};  // headerless NGSIM layout
  std::size_t min_fields = 14;

  IngestResult res;
  std::unordered_map<VehicleId, std::vector<TrackPoint>> by_id;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_fields(line);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    if (first) {
      first = false;
      const char c0 = fields[0].empty() ? '\0' : fields[0][0];
      const bool header = !(std::isdigit(static_cast<unsigned char>(c0)) || c0 == '-' || c0 == '+' || c0 == '.');
      if (header) {
        min_fields = 0;
        for (int k = 0; k < 5; ++k) {
          auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](std::string_view f) { return detail::iequals(f, kCols[k]); });
          if (it == fields.end()) throw FormatError("missing column " + std::string(kCols[k]));
          col[k] = static_cast<std::size_t>(it - fields.begin());
          min_fields = std::max(min_fields, col[k] + 1);
        }
        continue;
      }
    }
    if (fields.size() < min_fields)
      throw FormatError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(min_fields) +
                        " fields, got " + std::to_string(fields.size()));
    const VehicleId id = detail::parse_int(fields[col[0]], line_no, kCols[0]);
    TrackPoint p;
    p.frame = detail::parse_int(fields[col[1]], line_no, kCols[1]);
    p.lane = static_cast<int>(detail::parse_int(fields[col[2]], line_no, kCols[2]));
    p.x = detail::parse_double(fields[col[3]], line_no, kCols[3]) * kMetersPerFoot;
    p.y = detail::parse_double(fields[col[4]], line_no, kCols[4]) * kMetersPerFoot;
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw FormatError("line " + std::to_string(line_no) + ": non-finite position");
    by_id[id].push_back(p);
    ++res.rows;
  }

  res.tracks.reserve(by_id.size());
  for (auto& [id, pts] : by_id) {
    auto by_frame = [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; };
    if (!std::is_sorted(pts.begin(), pts.end(), by_frame)) {
      res.warnings.push_back("vehicle " + std::to_string(id) + ": frames not monotone, sorted");
      std::stable_sort(pts.begin(), pts.end(), by_frame);
    }
    auto dup = std::unique(pts.begin(), pts.end(),
                           [](const TrackPoint& a, const TrackPoint& b) { return a.frame == b.frame; });
    if (dup != pts.end()) {
      res.warnings.push_back("vehicle " + std::to_string(id) + ": duplicate frames dropped");
      pts.erase(dup, pts.end());
    }
    res.tracks.push_back({id, std::move(pts)});
  }
  std::sort(res.tracks.begin(), res.tracks.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return res;
}

// ---------------------------------------------------------------------------
// Frame-indexed view over a segment's tracks.

class TrackIndex {
 public:
  explicit TrackIndex(const std::vector<Track>& tracks) : tracks_(&tracks) {
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      by_id_.emplace(tracks[i].id, i);
      for (std::size_t k = 0; k < tracks[i].points.size(); ++k)
        by_frame_[tracks[i].points[k].frame].push_back(i);
    }
  }

  const std::vector<Track>& tracks() const { return *tracks_; }

  const Track& track(VehicleId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw LookupError("no track for vehicle " + std::to_string(id));
    return (*tracks_)[it->second];
  }

  bool contains(VehicleId id) const { return by_id_.count(id) != 0; }

  Snapshot snapshot(std::int64_t frame) const {
    Snapshot s;
    auto it = by_frame_.find(frame);
    if (it == by_frame_.end()) return s;
    for (std::size_t ti : it->second) {
      const Track& t = (*tracks_)[ti];
      const TrackPoint* p = t.at(frame);
      s.push_back({t.id, p->lane, p->x, p->y});
    }
    return s;
  }

 private:
  const std::vector<Track>* tracks_;
  std::unordered_map<VehicleId, std::size_t> by_id_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_frame_;
};

// ---------------------------------------------------------------------------
// Target selection

struct LaneChange {
  std::size_t index = 0;  // into Track::points
  std::int64_t frame = 0;
  int from = 0;
  int to = 0;
};

// A change is the first frame whose lane differs from the current stable
// lane, counted only when the new lane persists for `hysteresis` frames.
inline std::vector<LaneChange> detect_lane_changes(const Track& t, std::size_t hysteresis = 10) {
  std::vector<LaneChange> out;
  if (t.points.empty()) return out;
  int stable = t.points[0].lane;
  const std::size_t n = t.points.size();
  for (std::size_t i = 1; i < n; ++i) {
    const int lane = t.points[i].lane;
    if (lane == stable) continue;
    if (i + hysteresis > n) break;
    bool persists = true;
    for (std::size_t k = i; k < i + hysteresis; ++k)
      if (t.points[k].lane != lane) {
        persists = false;
        break;
      }
    if (!persists) continue;
    out.push_back({i, t.points[i].frame, stable, lane});
    stable = lane;
  }
  return out;
}

struct TargetRules {
  double min_extent_m = 1000.0 * kMetersPerFoot;
  double change_y_min_m = 300.0 * kMetersPerFoot;
  double change_y_max_m = 1900.0 * kMetersPerFoot;
  double min_lateral_m = 10.0 * kMetersPerFoot;
  std::int64_t window_frames = 130;  // each side of the change frame
  std::size_t hysteresis = 10;
};

struct TargetVerdict {
  bool ramp_free = false;
  bool single_change = false;
  bool long_enough = false;
  bool change_in_range = false;
  bool lateral_obvious = false;
  std::optional<LaneChange> change;
  bool accepted() const { return ramp_free && single_change && long_enough && change_in_range && lateral_obvious; }
};

// Lateral displacement is measured against the position at the change
// frame: the largest excursion over the window before plus the largest over
// the window after.
inline TargetVerdict judge_target(const Track& t, const TargetRules& r = {}) {
  TargetVerdict v;
  if (t.points.empty()) return v;
  v.ramp_free = std::none_of(t.points.begin(), t.points.end(), [](const TrackPoint& p) { return p.lane == 7 || p.lane == 8; });
  auto changes = detect_lane_changes(t, r.hysteresis);
  v.single_change = changes.size() == 1;
  auto [ymin, ymax] = std::minmax_element(t.points.begin(), t.points.end(),
                                          [](const TrackPoint& a, const TrackPoint& b) { return a.y < b.y; });
  v.long_enough = ymax->y - ymin->y >= r.min_extent_m;
  if (!v.single_change) return v;
  const LaneChange lc = changes[0];
  v.change = lc;
  const TrackPoint& at = t.points[lc.index];
  v.change_in_range = at.y >= r.change_y_min_m && at.y <= r.change_y_max_m;
  double before = 0.0, after = 0.0;
  for (const auto& p : t.points) {
    if (p.frame >= lc.frame - r.window_frames && p.frame < lc.frame) before = std::max(before, std::abs(p.x - at.x));
    if (p.frame >= lc.frame && p.frame < lc.frame + r.window_frames) after = std::max(after, std::abs(p.x - at.x));
  }
  v.lateral_obvious = before + after > r.min_lateral_m;
  return v;
}

inline std::vector<VehicleId> select_targets(const std::vector<Track>& tracks, const TargetRules& r = {}) {
  std::vector<VehicleId> out;
  for (const auto& t : tracks)
    if (judge_target(t, r).accepted()) out.push_back(t.id);
  return out;
}

// ---------------------------------------------------------------------------
// Sample extraction

struct ExtractOptions {
  // Drop neighbors lacking a full history instead of skipping the frame.
  bool drop_incomplete_neighbors = false;
  std::int64_t window_frames = 130;
  TargetRules rules;
};

namespace detail {

inline History relative_history(const Track& t, std::int64_t frame, double ox, double oy) {
  History h;
  for (std::size_t k = 0; k < kHistoryLen; ++k) {
    const auto* p = t.at(frame - static_cast<std::int64_t>(kHistoryLen - 1 - k) * kHistoryStride);
    h[k] = {p->x - ox, p->y - oy};
  }
  return h;
}

inline Future relative_future(const Track& t, std::int64_t frame, double ox, double oy) {
  Future f;
  for (std::size_t k = 0; k < kFutureLen; ++k) {
    const auto* p = t.at(frame + static_cast<std::int64_t>(k + 1) * kFutureStride);
    f[k] = {p->x - ox, p->y - oy};
  }
  return f;
}

inline bool has_history(const Track& t, std::int64_t frame) {
  return t.has_frames(frame - static_cast<std::int64_t>(kHistoryLen - 1) * kHistoryStride, kHistoryStride, kHistoryLen);
}

inline bool has_future(const Track& t, std::int64_t frame) {
  return t.has_frames(frame + kFutureStride, kFutureStride, kFutureLen);
}

inline Maneuver maneuver_between(int lane_now, int lane_then) {
  if (lane_then < lane_now) return Maneuver::kLeft;
  if (lane_then > lane_now) return Maneuver::kRight;
  return Maneuver::kKeep;
}

}  // namespace detail

// Builds the STP record for `target_id` at frame t, or nothing when the
// target lacks 3 s of history / 5 s of future or (by default) any selected
// neighbor lacks 3 s of history.
inline std::optional<Sample> make_stp_sample(const TrackIndex& idx, VehicleId target_id, std::int64_t frame,
                                             const std::string& segment, const ExtractOptions& opt = {}) {
  const Track& tt = idx.track(target_id);
  const TrackPoint* now = tt.at(frame);
  if (!now || !detail::has_history(tt, frame) || !detail::has_future(tt, frame)) return std::nullopt;

  std::vector<const Track*> neigh;
  for (VehicleId nid : select_neighbors(idx.snapshot(frame), target_id).ids()) {
    const Track& nt = idx.track(nid);
    if (!detail::has_history(nt, frame)) {
      if (opt.drop_incomplete_neighbors) continue;
      return std::nullopt;
    }
    neigh.push_back(&nt);
  }

  Sample s;
  const double ox = now->x, oy = now->y;
  s.histories.push_back(detail::relative_history(tt, frame, ox, oy));
  for (const Track* nt : neigh) s.histories.push_back(detail::relative_history(*nt, frame, ox, oy));
  s.edges = build_star_edges(neigh.size());
  s.target_nodes = {0};
  s.futures = {detail::relative_future(tt, frame, ox, oy)};
  const TrackPoint* end = tt.at(frame + static_cast<std::int64_t>(kFutureLen) * kFutureStride);
  s.meta = {segment, target_id, frame, ox, oy, detail::maneuver_between(now->lane, end->lane)};
  return s;
}

// Candidate current frames span `window_frames` before to `window_frames`
// after the target's lane change.
inline std::vector<Sample> extract_samples(const TrackIndex& idx, VehicleId target_id, const std::string& segment,
                                           const ExtractOptions& opt = {}) {
  std::vector<Sample> out;
  const Track& t = idx.track(target_id);
  auto changes = detect_lane_changes(t, opt.rules.hysteresis);
  if (changes.empty()) return out;
  const std::int64_t lc = changes[0].frame;
  for (std::int64_t f = lc - opt.window_frames; f < lc + opt.window_frames; ++f)
    if (auto s = make_stp_sample(idx, target_id, f, segment, opt)) out.push_back(std::move(*s));
  return out;
}

// MTP record around `ego_id`: targets are the ego's neighbors with full
// history and future, others are the targets' neighbors with full history.
inline std::optional<Sample> make_mtp_sample(const TrackIndex& idx, VehicleId ego_id, std::int64_t frame,
                                             const std::string& segment) {
  const Track& et = idx.track(ego_id);
  const TrackPoint* now = et.at(frame);
  if (!now || !detail::has_history(et, frame)) return std::nullopt;
  const Snapshot snap = idx.snapshot(frame);

  std::vector<VehicleId> targets;
  for (VehicleId nid : select_neighbors(snap, ego_id).ids()) {
    const Track& nt = idx.track(nid);
    if (detail::has_history(nt, frame) && detail::has_future(nt, frame)) targets.push_back(nid);
  }
  if (targets.empty()) return std::nullopt;

  std::unordered_set<VehicleId> taken(targets.begin(), targets.end());
  taken.insert(ego_id);
  std::vector<VehicleId> others;
  for (VehicleId tid : targets)
    for (VehicleId nid : select_neighbors(snap, tid).ids())
      if (!taken.count(nid) && detail::has_history(idx.track(nid), frame)) {
        others.push_back(nid);
        taken.insert(nid);
      }

  MtpGraph g = build_mtp_graph(snap, ego_id, targets, others);
  Sample s;
  const double ox = now->x, oy = now->y;
  for (VehicleId id : g.node_ids) s.histories.push_back(detail::relative_history(idx.track(id), frame, ox, oy));
  s.edges = std::move(g.edges);
  for (std::size_t k = 1; k <= g.num_targets; ++k) {
    s.target_nodes.push_back(k);
    s.futures.push_back(detail::relative_future(idx.track(g.node_ids[k]), frame, ox, oy));
  }
  s.meta = {segment, ego_id, frame, ox, oy, Maneuver::kUnknown};
  return s;
}

// MTP records with `ego_id` as the ego over the same window around its lane
// change.
inline std::vector<Sample> extract_mtp_samples(const TrackIndex& idx, VehicleId ego_id, const std::string& segment,
                                               const ExtractOptions& opt = {}) {
  std::vector<Sample> out;
  auto changes = detect_lane_changes(idx.track(ego_id), opt.rules.hysteresis);
  if (changes.empty()) return out;
  const std::int64_t lc = changes[0].frame;
  for (std::int64_t f = lc - opt.window_frames; f < lc + opt.window_frames; ++f)
    if (auto s = make_mtp_sample(idx, ego_id, f, segment)) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Split

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

inline constexpr std::size_t kDefaultValidationSize = 10000;

// Uniformly random validation subset of `validation_size`; both parts keep
// the input order.
inline DatasetSplit split_samples(std::vector<Sample> samples, std::uint64_t seed,
                                  std::size_t validation_size = kDefaultValidationSize) {
  if (samples.size() <= validation_size)
    throw ContractError("split: need more than " + std::to_string(validation_size) + " samples, got " +
                        std::to_string(samples.size()));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_val(samples.size(), false);
  for (std::size_t i = 0; i < validation_size; ++i) is_val[order[i]] = true;
  DatasetSplit out;
  out.validation.reserve(validation_size);
  out.train.reserve(samples.size() - validation_size);
  for (std::size_t i = 0; i < samples.size(); ++i)
    (is_val[i] ? out.validation : out.train).push_back(std::move(samples[i]));
  return out;
}

inline DatasetSplit split_and_serialize(std::vector<Sample> samples, std::uint64_t seed, const std::string& train_path,
                                        const std::string& validation_path,
                                        std::size_t validation_size = kDefaultValidationSize) {
  DatasetSplit sp = split_samples(std::move(samples), seed, validation_size);
  save_dataset(train_path, sp.train);
  save_dataset(validation_path, sp.validation);
  return sp;
}

}  // namespace sgtraj
