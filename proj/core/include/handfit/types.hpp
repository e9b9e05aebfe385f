#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace handfit {

// Model dimensions. The vertex/face counts follow the common 778-vertex hand
// mesh layout; the skeleton has one palm joint plus four joints per finger.
inline constexpr int kNumVertices = 778;
inline constexpr int kNumFaces = 1538;
inline constexpr int kNumJoints = 21;          // regressed skeleton
inline constexpr int kNumKinJoints = 16;       // wrist + 3 per finger, skinning tree
inline constexpr int kNumArticulated = 15;     // kinematic joints excluding the wrist
inline constexpr int kPoseDim = 45;            // 15 axis-angle triples
inline constexpr int kShapeDim = 10;
inline constexpr int kParamDim = 63;           // pose + shape + quat + scale + translation
inline constexpr int kImageSize = 224;
inline constexpr int kHeatmapSize = 32;
inline constexpr int kJoint2dDim = 2 * kNumJoints;

// Index of the middle finger MCP joint in the 21-joint skeleton. Used as the
// root for skeleton normalization.
inline constexpr int kRootJoint = 9;

inline constexpr double kDefaultFocal = 245.0;

// Layout of the packed 63-vector h:
//   [0,45)   pose, axis-angle per articulated joint
//   [45,55)  shape coefficients
//   [55,59)  camera rotation quaternion (w, x, y, z)
//   [59]     camera scale
//   [60,63)  camera translation
inline constexpr int kPoseOffset = 0;
inline constexpr int kShapeOffset = 45;
inline constexpr int kQuatOffset = 55;
inline constexpr int kScaleOffset = 59;
inline constexpr int kTransOffset = 60;

using Vec63 = Eigen::Matrix<double, kParamDim, 1>;
using Skeleton3d = Eigen::Matrix<double, kNumJoints, 3>;
using Skeleton2d = Eigen::Matrix<double, kNumJoints, 2>;
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

// Axis-angle articulation, 15 joints. Construction wraps each joint's
// rotation vector so its magnitude stays within pi (same rotation, shorter
// encoding); synthesis itself accepts raw vectors.
struct PoseParams {
  Eigen::Matrix<double, kPoseDim, 1> theta = Eigen::Matrix<double, kPoseDim, 1>::Zero();

  static PoseParams wrap(const Eigen::Matrix<double, kPoseDim, 1>& raw) {
    PoseParams p;
    for (int j = 0; j < kNumArticulated; ++j) {
      Eigen::Vector3d r = raw.segment<3>(3 * j);
      double a = r.norm();
      if (a > M_PI) {
        double w = std::fmod(a, 2.0 * M_PI);
        if (w > M_PI) w -= 2.0 * M_PI;  // may flip sign, same rotation
        r *= w / a;
      }
      p.theta.segment<3>(3 * j) = r;
    }
    return p;
  }
};

// Shape coefficients in units of one standard deviation. Clamped to a sane
// range at construction; values beyond +-5 have no anatomical meaning.
struct ShapeParams {
  Eigen::Matrix<double, kShapeDim, 1> beta = Eigen::Matrix<double, kShapeDim, 1>::Zero();

  static ShapeParams clamp(const Eigen::Matrix<double, kShapeDim, 1>& raw) {
    ShapeParams s;
    s.beta = raw.cwiseMax(-5.0).cwiseMin(5.0);
    return s;
  }
};

// Global rigid transform plus intrinsics. The quaternion is stored (w,x,y,z)
// and is normalized inside the forward pass rather than at construction so
// gradients stay valid; the constructor only rejects degenerate values.
struct CameraParams {
  Eigen::Vector4d quat{1.0, 0.0, 0.0, 0.0};
  double scale = 1.0;
  Eigen::Vector3d translation{0.0, 0.0, 2.5};
  double focal = kDefaultFocal;

  void validate() const {
    if (!(scale > 0.0)) throw std::invalid_argument("camera scale must be positive");
    if (quat.norm() < 1e-12) throw std::invalid_argument("degenerate camera quaternion");
    if (!quat.allFinite() || !translation.allFinite() || !std::isfinite(scale) ||
        !std::isfinite(focal))
      throw std::invalid_argument("non-finite camera parameters");
  }
};

// The packed 63-dimensional mesh parameter vector.
struct MeshParams {
  Vec63 h = Vec63::Zero();

  MeshParams() { h[kQuatOffset] = 1.0; h[kScaleOffset] = 1.0; h[kTransOffset + 2] = 2.5; }
  explicit MeshParams(const Vec63& v) : h(v) {}

  Eigen::Map<const Eigen::Matrix<double, kPoseDim, 1>> pose() const {
    return Eigen::Map<const Eigen::Matrix<double, kPoseDim, 1>>(h.data() + kPoseOffset);
  }
  Eigen::Map<const Eigen::Matrix<double, kShapeDim, 1>> shape() const {
    return Eigen::Map<const Eigen::Matrix<double, kShapeDim, 1>>(h.data() + kShapeOffset);
  }
  Eigen::Vector4d quat() const { return h.segment<4>(kQuatOffset); }
  double scale() const { return h[kScaleOffset]; }
  Eigen::Vector3d translation() const { return h.segment<3>(kTransOffset); }

  CameraParams camera(double focal = kDefaultFocal) const {
    CameraParams c;
    c.quat = quat();
    c.scale = scale();
    c.translation = translation();
    c.focal = focal;
    return c;
  }

  bool allFinite() const { return h.allFinite(); }
};

// Render target. Principal point sits at the exact image center; pixel
// centers are at integer + 0.5.
struct ImagePlane {
  int width = kImageSize;
  int height = kImageSize;
  double focal = kDefaultFocal;

  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
};

struct BehindCameraError : std::runtime_error {
  std::vector<int> indices;
  explicit BehindCameraError(std::vector<int> idx)
      : std::runtime_error("points behind camera: " + std::to_string(idx.size()) +
                           " offending indices, first " +
                           (idx.empty() ? std::string("none") : std::to_string(idx.front()))),
        indices(std::move(idx)) {}
};

}  // namespace handfit
