#include "pitchlab/projection.hpp"

#include <cmath>
#include <string>

#include "pitchlab/error.hpp"

namespace pitchlab::projection {

namespace {

constexpr double kSingularTol = 1e-12;

Eigen::Matrix3d normalize(const Eigen::Matrix3d& m) {
  if (std::abs(m(2, 2)) > 0.0) return m / m(2, 2);
  const double f = m.norm();
  return f > 0.0 ? Eigen::Matrix3d(m / f) : m;
}

// Similarity transform moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d conditioning(std::span<const Vec2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) { cx += p.x; cy += p.y; }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx,
       0, s, -s * cy,
       0, 0, 1;
  return t;
}

Vec2 apply(const Eigen::Matrix3d& m, const Vec2& p) {
  const Eigen::Vector3d q = m * Eigen::Vector3d(p.x, p.y, 1.0);
  return {q(0) / q(2), q(1) / q(2)};
}

}  // namespace

Homography Homography::from_matrix(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw Error(ErrorCode::DegenerateConfiguration, "non-finite homography entries");
  const Eigen::Matrix3d n = normalize(m);
  if (!(std::abs(n.determinant()) > kSingularTol)) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography is singular");
  }
  return Homography(n);
}

Homography Homography::translation(double dx, double dy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = dx;
  m(1, 2) = dy;
  return Homography(m);
}

Homography estimate_homography(std::span<const Correspondence> pairs) {
  if (pairs.size() < 4) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(pairs.size()));
  }
  for (const auto& c : pairs) {
    if (!std::isfinite(c.image_pt.x) || !std::isfinite(c.image_pt.y) || !std::isfinite(c.pitch_pt.x) ||
        !std::isfinite(c.pitch_pt.y)) {
      throw Error(ErrorCode::DegenerateConfiguration, "non-finite correspondence");
    }
  }
  std::vector<Vec2> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& c : pairs) {
    src.push_back(c.image_pt);
    dst.push_back(c.pitch_pt);
  }
  const Eigen::Matrix3d t_src = conditioning(src);
  const Eigen::Matrix3d t_dst = conditioning(dst);

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 p = apply(t_src, src[static_cast<std::size_t>(i)]);
    const Vec2 q = apply(t_dst, dst[static_cast<std::size_t>(i)]);
    a.row(2 * i) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
    a.row(2 * i + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
  }

  // Pad to at least 9 rows so the full right singular basis is available.
  if (a.rows() < 9) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(9, 9);
    padded.topRows(a.rows()) = a;
    a = padded;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // A homography needs a one-dimensional null space: rank(A) = 8.
  if (!(sv(7) > 1e-9 * sv(0))) {
    throw Error(ErrorCode::DegenerateConfiguration, "design matrix is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2),
        h(3), h(4), h(5),
        h(6), h(7), h(8);
  const Eigen::Matrix3d full = t_dst.inverse() * hn * t_src;
  return Homography::from_matrix(full);
}

PitchPoint project_point(const Homography& H, const PixelPoint& p) {
  const Eigen::Vector3d q = H.matrix() * Eigen::Vector3d(p.x, p.y, 1.0);
  if (std::abs(q(2)) <= kSingularTol) {
    throw Error(ErrorCode::ProjectionAtInfinity, "pixel maps to the line at infinity");
  }
  return {q(0) / q(2), q(1) / q(2)};
}

NormalizedPoint project_detection(const Homography& H, const Detection& d, const PitchSpec& spec) {
  if (!d.valid()) throw Error(ErrorCode::InvalidArgument, "bounding box has non-positive extent");
  PitchPoint m = project_point(H, d.ground_contact());
  const auto clamp_axis = [](double v, double hi, const char* axis) {
    if (v < 0.0) {
      if (v < -kClampMarginMeters) {
        throw Error(ErrorCode::OutOfBounds, std::string("projected ") + axis + " = " + std::to_string(v) + " m");
      }
      return 0.0;
    }
    if (v > hi) {
      if (v > hi + kClampMarginMeters) {
        throw Error(ErrorCode::OutOfBounds, std::string("projected ") + axis + " = " + std::to_string(v) + " m");
      }
      return hi;
    }
    return v;
  };
  if (!std::isfinite(m.x) || !std::isfinite(m.y)) throw Error(ErrorCode::OutOfBounds, "non-finite projection");
  m.x = clamp_axis(m.x, spec.length_m, "x");
  m.y = clamp_axis(m.y, spec.width_m, "y");
  return pitch_to_normalized(m, spec);
}

Homography interpolate_homography(const Homography& a, const Homography& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "interpolation fraction outside [0,1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const Eigen::Matrix3d m = (1.0 - t) * a.matrix() + t * b.matrix();
  try {
    return Homography::from_matrix(m);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateInterpolation, "interpolated homography is singular at t=" + std::to_string(t));
  }
}

double reprojection_error(const Homography& H, std::span<const Correspondence> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "no correspondences");
  double sum = 0.0;
  for (const auto& c : pairs) {
    const PitchPoint p = project_point(H, c.image_pt);
    const double dx = p.x - c.pitch_pt.x;
    const double dy = p.y - c.pitch_pt.y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

std::optional<Homography> CalibrationTrack::resolve(std::size_t frame, std::size_t max_gap) const {
  if (by_frame_.empty()) return std::nullopt;
  auto hit = by_frame_.find(frame);
  if (hit != by_frame_.end()) return hit->second;

  auto after = by_frame_.upper_bound(frame);
  const bool has_after = after != by_frame_.end();
  const bool has_before = after != by_frame_.begin();
  if (has_before && has_after) {
    auto before = std::prev(after);
    const std::size_t gap = after->first - before->first - 1;
    if (gap <= max_gap) {
      const double t = static_cast<double>(frame - before->first) /
                       static_cast<double>(after->first - before->first);
      return interpolate_homography(before->second, after->second, t);
    }
    return std::nullopt;
  }
  if (has_before) {
    auto before = std::prev(after);
    if (frame - before->first <= max_gap) return before->second;
    return std::nullopt;
  }
  if (after->first - frame <= max_gap) return after->second;
  return std::nullopt;
}

}  // namespace pitchlab::projection
