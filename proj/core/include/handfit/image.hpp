#pragma once

#include <string>

#include "handfit/types.hpp"

namespace handfit {

// Channels are row-major H x W with values in [0, 1].
struct RgbImage {
  Eigen::MatrixXd r, g, b;

  RgbImage() = default;
  RgbImage(int height, int width)
      : r(Eigen::MatrixXd::Zero(height, width)),
        g(Eigen::MatrixXd::Zero(height, width)),
        b(Eigen::MatrixXd::Zero(height, width)) {}

  int height() const { return static_cast<int>(r.rows()); }
  int width() const { return static_cast<int>(r.cols()); }
};

// Binary PGM (P5) and PPM (P6), maxval 255, values quantized with round half
// up. Deterministic byte-for-byte for identical inputs.
void write_pgm(const std::string& path, const Eigen::MatrixXd& gray);
Eigen::MatrixXd read_pgm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& image);
RgbImage read_ppm(const std::string& path);

}  // namespace handfit
