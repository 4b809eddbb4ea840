#pragma once

#include <cmath>
#include <stdexcept>

namespace hyperv2x {

/// SE(2) pose in world coordinates (meters, radians). The world frame is
/// centered on the region: x,y in [-region/2, region/2).
struct Pose2 {
  double x = 0.0, y = 0.0, yaw = 0.0;
};

/// 2D affine transform p' = A p + t. Constructed from poses it is a rigid
/// SE(2) map; the general form exists so degenerate inputs can be detected
/// and rejected rather than silently accepted.
struct Se2 {
  double a00 = 1.0, a01 = 0.0, a10 = 0.0, a11 = 1.0;
  double tx = 0.0, ty = 0.0;

  static Se2 identity() { return {}; }

  /// local -> world transform of a pose.
  static Se2 from_pose(const Pose2& p) {
    const double c = std::cos(p.yaw), s = std::sin(p.yaw);
    return {c, -s, s, c, p.x, p.y};
  }

  double det() const { return a00 * a11 - a01 * a10; }

  Se2 inverse() const {
    const double d = det();
    if (std::fabs(d) < 1e-12) throw std::invalid_argument("Se2: singular transform");
    const double i00 = a11 / d, i01 = -a01 / d, i10 = -a10 / d, i11 = a00 / d;
    return {i00, i01, i10, i11, -(i00 * tx + i01 * ty), -(i10 * tx + i11 * ty)};
  }

  /// this ∘ other (apply `other` first).
  Se2 compose(const Se2& o) const {
    return {a00 * o.a00 + a01 * o.a10, a00 * o.a01 + a01 * o.a11,
            a10 * o.a00 + a11 * o.a10, a10 * o.a01 + a11 * o.a11,
            a00 * o.tx + a01 * o.ty + tx, a10 * o.tx + a11 * o.ty + ty};
  }

  void apply(double x, double y, double& ox, double& oy) const {
    ox = a00 * x + a01 * y + tx;
    oy = a10 * x + a11 * y + ty;
  }

  /// relative transform mapping frame `src` into frame `dst` (both given as
  /// local->world poses).
  static Se2 relative(const Pose2& src, const Pose2& dst) {
    return from_pose(dst).inverse().compose(from_pose(src));
  }
};

/// Oriented rectangle (vehicle footprint) in world coordinates.
struct OrientedBox {
  double cx = 0.0, cy = 0.0;
  double length = 4.0, width = 2.0;  // along/across heading
  double yaw = 0.0;
  int class_id = 1;

  bool contains(double px, double py) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = px - cx, dy = py - cy;
    const double u = c * dx + s * dy;   // along heading
    const double v = -s * dx + c * dy;  // across heading
    return std::fabs(u) <= 0.5 * length && std::fabs(v) <= 0.5 * width;
  }
};

/// Separating-axis overlap test for two oriented rectangles, each inflated by
/// `margin/2` on every side.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, double margin = 0.0);

/// Metric coordinates of a grid cell center in the grid's centered frame.
inline void cell_center(std::int64_t row, std::int64_t col, std::int64_t h, std::int64_t w,
                        double cell, double& x, double& y) {
  x = (static_cast<double>(col) + 0.5) * cell - 0.5 * static_cast<double>(w) * cell;
  y = (static_cast<double>(row) + 0.5) * cell - 0.5 * static_cast<double>(h) * cell;
}

}  // namespace hyperv2x
