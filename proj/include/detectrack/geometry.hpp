#pragma once

// Oriented boxes, bird's-eye-view footprints and overlap measures.
//
// Frame convention: x/y span the ground plane, z points up. A box center is
// its geometric center (not the bottom face). Yaw rotates the length axis
// counter-clockwise from +x and is kept in (-pi, pi].

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace detectrack {

inline constexpr double kMinBoxDim = 1e-6;

template <typename Scalar>
Scalar normalize_angle(Scalar angle) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  angle = std::fmod(angle, 2 * pi);
  if (angle <= -pi) {
    angle += 2 * pi;
  } else if (angle > pi) {
    angle -= 2 * pi;
  }
  return angle;
}

template <typename Scalar>
class BoxBev {
 public:
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

  BoxBev(const Vec2& center, Scalar length, Scalar width, Scalar yaw)
      : center_(center), length_(length), width_(width),
        yaw_(normalize_angle(yaw)) {
    if (!center.allFinite() || !std::isfinite(yaw)) {
      throw std::invalid_argument("BoxBev: non-finite center or yaw");
    }
    if (!(length >= kMinBoxDim) || !(width >= kMinBoxDim)) {
      throw std::invalid_argument("BoxBev: dimensions must be >= 1e-6 m");
    }
  }

  const Vec2& center() const { return center_; }
  Scalar length() const { return length_; }
  Scalar width() const { return width_; }
  Scalar yaw() const { return yaw_; }
  Scalar area() const { return length_ * width_; }

  // Counter-clockwise corner list.
  std::array<Vec2, 4> corners() const {
    const Scalar c = std::cos(yaw_), s = std::sin(yaw_);
    const Scalar hl = length_ / 2, hw = width_ / 2;
    const std::array<Vec2, 4> local = {Vec2(hl, -hw), Vec2(hl, hw),
                                       Vec2(-hl, hw), Vec2(-hl, -hw)};
    std::array<Vec2, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
      out[i] = center_ + Vec2(c * local[i].x() - s * local[i].y(),
                              s * local[i].x() + c * local[i].y());
    }
    return out;
  }

  // Lexicographic key; only used to canonicalize argument order.
  auto key() const {
    return std::make_tuple(center_.x(), center_.y(), length_, width_, yaw_);
  }

 private:
  Vec2 center_;
  Scalar length_;
  Scalar width_;
  Scalar yaw_;
};

template <typename Scalar>
class Box3 {
 public:
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

  // dims = (length, width, height).
  Box3(const Vec3& center, const Vec3& dims, Scalar yaw, Scalar score = 1,
       int class_id = 0)
      : center_(center), dims_(dims), yaw_(normalize_angle(yaw)),
        score_(score), class_id_(class_id) {
    if (!center.allFinite() || !std::isfinite(yaw)) {
      throw std::invalid_argument("Box3: non-finite center or yaw");
    }
    if (!(dims.minCoeff() >= kMinBoxDim) || !dims.allFinite()) {
      throw std::invalid_argument("Box3: dimensions must be >= 1e-6 m");
    }
    if (!(score >= 0 && score <= 1)) {
      throw std::invalid_argument("Box3: score outside [0,1]");
    }
  }

  const Vec3& center() const { return center_; }
  const Vec3& dims() const { return dims_; }
  Scalar length() const { return dims_.x(); }
  Scalar width() const { return dims_.y(); }
  Scalar height() const { return dims_.z(); }
  Scalar yaw() const { return yaw_; }
  Scalar score() const { return score_; }
  int class_id() const { return class_id_; }
  Scalar volume() const { return dims_.prod(); }

  Box3 with_score(Scalar score) const {
    return Box3(center_, dims_, yaw_, score, class_id_);
  }

  bool operator==(const Box3&) const = default;

 private:
  Vec3 center_;
  Vec3 dims_;
  Scalar yaw_;
  Scalar score_;
  int class_id_;
};

using Box3D = Box3<double>;
using BoxBEV = BoxBev<double>;

template <typename Scalar>
BoxBev<Scalar> to_bev(const Box3<Scalar>& box) {
  return BoxBev<Scalar>(box.center().template head<2>(), box.length(),
                        box.width(), box.yaw());
}

template <typename Scalar>
Scalar polygon_area(const std::vector<Eigen::Matrix<Scalar, 2, 1>>& poly) {
  if (poly.size() < 3) return 0;
  Scalar twice = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(twice) / 2;
}

// Sutherland-Hodgman: clip `subject` against each edge of the convex,
// counter-clockwise polygon `clip`.
template <typename Scalar, std::size_t N>
std::vector<Eigen::Matrix<Scalar, 2, 1>> clip_convex(
    std::vector<Eigen::Matrix<Scalar, 2, 1>> subject,
    const std::array<Eigen::Matrix<Scalar, 2, 1>, N>& clip) {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  // Points within this signed distance of an edge count as inside, so shared
  // edges do not produce spurious slivers.
  constexpr Scalar kOnEdge = Scalar(1e-12);
  std::vector<Vec2> output;
  for (std::size_t e = 0; e < N && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % N];
    const Vec2 edge = b - a;
    const Scalar scale = std::max(edge.norm(), Scalar(1));
    auto side = [&](const Vec2& p) {
      return (edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x())) / scale;
    };
    output.clear();
    for (std::size_t i = 0, n = subject.size(); i < n; ++i) {
      const Vec2& cur = subject[i];
      const Vec2& nxt = subject[(i + 1) % n];
      const Scalar sc = side(cur), sn = side(nxt);
      const bool in_cur = sc >= -kOnEdge, in_nxt = sn >= -kOnEdge;
      if (in_cur) output.push_back(cur);
      if (in_cur != in_nxt) {
        const Scalar t = sc / (sc - sn);
        output.push_back(cur + t * (nxt - cur));
      }
    }
    subject.swap(output);
  }
  return subject;
}

template <typename Scalar>
Scalar intersection_area_bev(const BoxBev<Scalar>& a, const BoxBev<Scalar>& b) {
  // Evaluate in a canonical order so the result is exactly symmetric.
  const BoxBev<Scalar>& first = (b.key() < a.key()) ? b : a;
  const BoxBev<Scalar>& second = (b.key() < a.key()) ? a : b;
  const Scalar reach = (first.length() + first.width() + second.length() +
                        second.width()) / 2;
  if ((first.center() - second.center()).norm() > reach) return 0;
  const auto fc = first.corners();
  std::vector<Eigen::Matrix<Scalar, 2, 1>> subject(fc.begin(), fc.end());
  return polygon_area(clip_convex(std::move(subject), second.corners()));
}

template <typename Scalar>
Scalar iou_bev(const BoxBev<Scalar>& a, const BoxBev<Scalar>& b) {
  const Scalar inter = intersection_area_bev(a, b);
  if (inter <= 0) return 0;
  const Scalar uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar vertical_overlap(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar top = std::min(a.center().z() + a.height() / 2,
                              b.center().z() + b.height() / 2);
  const Scalar bottom = std::max(a.center().z() - a.height() / 2,
                                 b.center().z() - b.height() / 2);
  return std::max(Scalar(0), top - bottom);
}

template <typename Scalar>
Scalar iou_3d(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar dz = vertical_overlap(a, b);
  if (dz <= 0) return 0;
  const Scalar inter = intersection_area_bev(to_bev(a), to_bev(b)) * dz;
  if (inter <= 0) return 0;
  const Scalar uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar center_distance_bev(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar dx = a.center().x() - b.center().x();
  const Scalar dy = a.center().y() - b.center().y();
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detectrack
