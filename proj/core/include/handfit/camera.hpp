#pragma once

#include "handfit/types.hpp"

namespace handfit {

// Pinhole projection of camera-frame points: u = f*X/Z + cx, v = f*Y/Z + cy.
// Throws BehindCameraError listing every index with Z <= min_depth.
Eigen::Matrix<double, Eigen::Dynamic, 2> project(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& points, const ImagePlane& plane,
    double min_depth = 1e-6);

// Adjoint: pixel-space gradients back to camera-frame points.
Eigen::Matrix<double, Eigen::Dynamic, 3> project_vjp(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& points,
    const Eigen::Matrix<double, Eigen::Dynamic, 2>& uv_grad, const ImagePlane& plane);

}  // namespace handfit
