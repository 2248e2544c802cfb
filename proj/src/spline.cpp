#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/imputation.hpp"

namespace pitchlab::imputation {

namespace detail {

Vec2 hermite(const Vec2& p0, const Vec2& m0, const Vec2& p1, const Vec2& m1, double s) {
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return {h00 * p0.x + h10 * m0.x + h01 * p1.x + h11 * m1.x, h00 * p0.y + h10 * m0.y + h01 * p1.y + h11 * m1.y};
}

Vec2 hermite_derivative(const Vec2& p0, const Vec2& m0, const Vec2& p1, const Vec2& m1, double s) {
  const double s2 = s * s;
  const double d00 = 6 * s2 - 6 * s;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = -6 * s2 + 6 * s;
  const double d11 = 3 * s2 - 2 * s;
  return {d00 * p0.x + d10 * m0.x + d01 * p1.x + d11 * m1.x, d00 * p0.y + d10 * m0.y + d01 * p1.y + d11 * m1.y};
}

}  // namespace detail

namespace {

// Fills frames (a, b) exclusive of agent i, where a and b are observed.
// Velocities are per-frame one-sided differences; a missing neighbour falls
// back to the chord slope.
void fill_gap(const ObservedSequence& seq, std::size_t i, std::size_t a, std::size_t b, Tensor3& out) {
  const Vec2 pa = seq.x_obs.point(i, a);
  const Vec2 pb = seq.x_obs.point(i, b);
  const double span = static_cast<double>(b - a);
  const Vec2 chord = (1.0 / span) * (pb - pa);
  const Vec2 va = (a > 0 && seq.observed(i, a - 1)) ? pa - seq.x_obs.point(i, a - 1) : chord;
  const Vec2 vb = (b + 1 < seq.frames() && seq.observed(i, b + 1)) ? seq.x_obs.point(i, b + 1) - pb : chord;
  for (std::size_t t = a + 1; t < b; ++t) {
    const double s = static_cast<double>(t - a) / span;
    out.set(i, t, clamp_to_bounds(detail::hermite(pa, span * va, pb, span * vb, s)));
  }
}

}  // namespace

CompletedSequence spline_impute(const ObservedSequence& seq, std::size_t max_gap) {
  const std::size_t n = seq.agents(), T = seq.frames();
  CompletedSequence out{seq.x_obs, std::vector<Provenance>(n * T, Provenance::Unresolved)};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t t = 0; t < T; ++t) count += seq.observed(i, t) ? 1 : 0;
    if (count < 2) {
      throw Error(ErrorCode::InsufficientObservations,
                  "agent " + std::to_string(i) + " has " + std::to_string(count) + " observed frames, need 2");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> last;
    for (std::size_t t = 0; t < T; ++t) {
      if (!seq.observed(i, t)) continue;
      out.provenance[i * T + t] = Provenance::Observed;
      if (last && t - *last - 1 >= 1 && t - *last - 1 <= max_gap) {
        fill_gap(seq, i, *last, t, out.x_full);
        for (std::size_t k = *last + 1; k < t; ++k) out.provenance[i * T + k] = Provenance::Spline;
      }
      last = t;
    }
  }
  return out;
}

Tensor3 guide_fill(const ObservedSequence& seq) {
  const std::size_t n = seq.agents(), T = seq.frames();
  Tensor3 out = seq.x_obs;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> first, last;
    for (std::size_t t = 0; t < T; ++t) {
      if (!seq.observed(i, t)) continue;
      if (!first) first = t;
      if (last && t - *last > 1) fill_gap(seq, i, *last, t, out);
      last = t;
    }
    if (!first) continue;
    for (std::size_t t = 0; t < *first; ++t) out.set(i, t, seq.x_obs.point(i, *first));
    for (std::size_t t = *last + 1; t < T; ++t) out.set(i, t, seq.x_obs.point(i, *last));
  }
  return out;
}

}  // namespace pitchlab::imputation
