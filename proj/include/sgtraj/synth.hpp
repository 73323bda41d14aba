#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sgtraj/pipeline.hpp"

namespace sgtraj {

// Desk-scale highway scenes. Every scene is simulated at 10 Hz for 3 s of
// history and 5 s of future around a target vehicle whose maneuver is set
// by its surroundings:
//   keep  - leader at similar speed, both adjacent lanes blocked
//   left  - slow leader, left lane empty, right lane blocked
//   right - slow leader, right lane empty, left lane blocked
// Every vehicle holds its speed. Lane changes follow a logistic lateral
// profile that mostly starts after the current frame, so only the neighbors
// reveal what is coming.
struct SynthOptions {
  double lane_width = 3.66;
  int lanes = 5;
  double position_noise = 0.01;  // m, per coordinate
};

struct SynthScene {
  std::vector<Track> tracks;
  VehicleId target = 0;
  Maneuver maneuver = Maneuver::kKeep;
  std::int64_t current_frame = 0;
};

namespace detail {

inline constexpr std::int64_t kSynthCurrentFrame = (kHistoryLen - 1) * kHistoryStride;
inline constexpr std::int64_t kSynthLastFrame = kSynthCurrentFrame + kFutureLen * kFutureStride;

class SceneBuilder {
 public:
  SceneBuilder(std::mt19937_64& rng, const SynthOptions& opt) : rng_(rng), opt_(opt) {}

  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  double lane_center(int lane) const { return (lane - 0.5) * opt_.lane_width; }
  int lane_of(double x) const { return static_cast<int>(std::floor(x / opt_.lane_width)) + 1; }

  // `lateral(tau)` and `longitudinal(tau)` give the position at time tau
  // (seconds relative to the current frame).
  template <class Lat, class Lon>
  VehicleId add(Lat lateral, Lon longitudinal) {
    Track t;
    t.id = next_id_++;
    std::normal_distribution<double> noise(0.0, opt_.position_noise);
    for (std::int64_t f = 0; f <= kSynthLastFrame; ++f) {
      const double tau = static_cast<double>(f - kSynthCurrentFrame) * kFrameSeconds;
      const double x = lateral(tau);
      TrackPoint p{f, lane_of(x), x, longitudinal(tau)};
      if (opt_.position_noise > 0) {
        p.x += noise(rng_);
        p.y += noise(rng_);
      }
      t.points.push_back(p);
    }
    tracks_.push_back(std::move(t));
    return tracks_.back().id;
  }

  VehicleId add_cruiser(int lane, double y0, double speed) {
    const double xc = lane_center(lane);
    return add([xc](double) { return xc; }, [y0, speed](double tau) { return y0 + speed * tau; });
  }

  // Blocked adjacent lane: a vehicle roughly alongside the target plus one
  // ahead and one behind it.
  void block_lane(int lane, double y_target, double v) {
    if (lane < 1 || lane > opt_.lanes) return;
    const double y = y_target + uni(-6.0, 6.0);
    add_cruiser(lane, y, v + uni(-0.5, 0.5));
    add_cruiser(lane, y + uni(12.0, 30.0), v + uni(-1.0, 1.0));
    add_cruiser(lane, y - uni(12.0, 30.0), v + uni(-1.0, 1.0));
  }

  std::vector<Track> take() { return std::move(tracks_); }

 private:
  std::mt19937_64& rng_;
  SynthOptions opt_;
  std::vector<Track> tracks_;
  VehicleId next_id_ = 1;
};

}  // namespace detail

inline SynthScene synth_scene(std::mt19937_64& rng, Maneuver maneuver, const SynthOptions& opt = {}) {
  detail::SceneBuilder b(rng, opt);
  const int lane = 2 + static_cast<int>(b.uni(0.0, 3.0));  // 2..4, both neighbors exist
  const double y0 = b.uni(100.0, 400.0);
  const double v = b.uni(8.0, 16.0);
  const double xc = b.lane_center(lane);

  bool left_blocked = true, right_blocked = true;
  double leader_speed = v + b.uni(-1.0, 1.5);
  switch (maneuver) {
    case Maneuver::kLeft:
      leader_speed = v - b.uni(2.0, 5.0);
      left_blocked = false;
      right_blocked = true;
      break;
    case Maneuver::kRight:
      leader_speed = v - b.uni(2.0, 5.0);
      left_blocked = true;
      right_blocked = false;
      break;
    default:
      break;
  }

  SynthScene scene;
  scene.maneuver = maneuver == Maneuver::kUnknown ? Maneuver::kKeep : maneuver;
  scene.current_frame = detail::kSynthCurrentFrame;

  // Target.
  auto target_y = [=](double tau) { return y0 + v * tau; };
  double shift = 0.0, mid = 0.0, k = 1.0;
  if (maneuver == Maneuver::kLeft || maneuver == Maneuver::kRight) {
    shift = maneuver == Maneuver::kLeft ? -opt.lane_width : opt.lane_width;
    const double start = b.uni(-0.5, 1.0), dur = b.uni(3.0, 4.5);
    mid = start + dur / 2.0;
    k = 8.0 / dur;
  }
  auto target_x = [=](double tau) { return xc + shift / (1.0 + std::exp(-k * (tau - mid))); };
  scene.target = b.add(target_x, target_y);

  // Same lane: leader and (usually) a follower.
  b.add_cruiser(lane, y0 + b.uni(18.0, 40.0), leader_speed);
  if (b.coin(0.8)) b.add_cruiser(lane, y0 - b.uni(12.0, 30.0), v + b.uni(-1.0, 1.0));

  if (left_blocked) b.block_lane(lane - 1, y0, v);
  if (right_blocked) b.block_lane(lane + 1, y0, v);

  // Two lanes over: background traffic that is never a neighbor of the target.
  for (int far : {lane - 2, lane + 2})
    if (far >= 1 && far <= opt.lanes) b.add_cruiser(far, y0 + b.uni(-25.0, 25.0), v + b.uni(-2.0, 2.0));

  scene.tracks = b.take();
  return scene;
}

namespace detail {

inline Maneuver balanced_maneuver(std::size_t i) {
  static constexpr Maneuver kCycle[3] = {Maneuver::kKeep, Maneuver::kLeft, Maneuver::kRight};
  return kCycle[i % 3];
}

inline std::mt19937_64 scene_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

// STP samples with maneuvers cycling keep/left/right.
inline std::vector<Sample> synth_dataset(std::size_t n, std::uint64_t seed, const SynthOptions& opt = {}) {
  if (n == 0) throw ContractError("synth_dataset: n must be positive");
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = detail::scene_rng(seed, i);
    SynthScene sc = synth_scene(rng, detail::balanced_maneuver(i), opt);
    TrackIndex idx(sc.tracks);
    auto s = make_stp_sample(idx, sc.target, sc.current_frame, "synthetic");
    if (!s) throw ContractError("synth_dataset: generated scene without a valid sample");
    s->meta.target_id = static_cast<VehicleId>(i);
    s->meta.maneuver = sc.maneuver;
    out.push_back(std::move(*s));
  }
  return out;
}

// MTP samples: the scene's maneuvering vehicle is the ego, its neighbors
// are the prediction targets.
inline std::vector<Sample> synth_mtp_dataset(std::size_t n, std::uint64_t seed, const SynthOptions& opt = {}) {
  if (n == 0) throw ContractError("synth_mtp_dataset: n must be positive");
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = detail::scene_rng(seed, i);
    SynthScene sc = synth_scene(rng, detail::balanced_maneuver(i), opt);
    TrackIndex idx(sc.tracks);
    auto s = make_mtp_sample(idx, sc.target, sc.current_frame, "synthetic-mtp");
    if (!s) throw ContractError("synth_mtp_dataset: generated scene without a valid sample");
    s->meta.target_id = static_cast<VehicleId>(i);
    out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace sgtraj
