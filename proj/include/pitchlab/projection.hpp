#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pitchlab/geometry.hpp"

namespace pitchlab::projection {

using PixelPoint = Vec2;

/// An image keypoint and its known location on the metric pitch.
struct Correspondence {
  PixelPoint image_pt;
  PitchPoint pitch_pt;
};

/// Image-plane to pitch-plane projective map. Always stored normalized:
/// h(2,2) = 1 when that entry is nonzero, unit Frobenius norm otherwise.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}

  /// Normalizes `m`; throws DegenerateConfiguration when it is singular.
  static Homography from_matrix(const Eigen::Matrix3d& m);
  static Homography translation(double dx, double dy);

  const Eigen::Matrix3d& matrix() const noexcept { return h_; }
  double operator()(int r, int c) const { return h_(r, c); }

 private:
  explicit Homography(const Eigen::Matrix3d& normalized) : h_(normalized) {}
  Eigen::Matrix3d h_;
};

/// Image bounding box of a tracked entity.
struct Detection {
  std::size_t frame_idx = 0;
  std::optional<std::size_t> agent;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  PixelPoint ground_contact() const noexcept { return {0.5 * (x_min + x_max), y_max}; }
};

/// Normalized direct linear transform (Hartley conditioning on both point sets).
Homography estimate_homography(std::span<const Correspondence> pairs);

PitchPoint project_point(const Homography& H, const PixelPoint& p);

inline constexpr double kClampMarginMeters = 0.5;

/// Projects the bottom-center of the box and converts to normalized pitch
/// coordinates. Excursions past the touchline up to 0.5 m are clamped.
NormalizedPoint project_detection(const Homography& H, const Detection& d, const PitchSpec& spec = {});

Homography interpolate_homography(const Homography& a, const Homography& b, double t);

/// RMS distance between projected image points and their pitch points.
double reprojection_error(const Homography& H, std::span<const Correspondence> pairs);

/// Per-frame calibrations with gap filling: frames bracketed by calibrated
/// frames within `max_gap` are interpolated, one-sided gaps within `max_gap`
/// reuse the nearest calibration, anything further is left unresolved.
class CalibrationTrack {
 public:
  static constexpr std::size_t kDefaultMaxGap = 12;

  void set(std::size_t frame, const Homography& h) { by_frame_[frame] = h; }
  bool empty() const noexcept { return by_frame_.empty(); }
  const std::map<std::size_t, Homography>& frames() const noexcept { return by_frame_; }

  std::optional<Homography> resolve(std::size_t frame, std::size_t max_gap = kDefaultMaxGap) const;

 private:
  std::map<std::size_t, Homography> by_frame_;
};

}  // namespace pitchlab::projection
