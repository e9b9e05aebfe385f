#include "handfit/descriptor.hpp"

#include <stdexcept>

namespace handfit {

namespace {

void check_shapes(const RgbImage& image, const Eigen::MatrixXd& mask) {
  if (image.height() != kImageSize || image.width() != kImageSize ||
      mask.rows() != kImageSize || mask.cols() != kImageSize)
    throw std::invalid_argument("descriptor expects 224 x 224 inputs");
}

}  // namespace

Eigen::VectorXd GridDescriptor::eval(const RgbImage& image, const Eigen::MatrixXd& mask) const {
  check_shapes(image, mask);
  Eigen::VectorXd out(dim());
  const double cell_px = static_cast<double>(kCell * kCell);
  const Eigen::MatrixXd* chans[3] = {&image.r, &image.g, &image.b};
  for (int gy = 0; gy < kGrid; ++gy)
    for (int gx = 0; gx < kGrid; ++gx) {
      const auto m = mask.block(gy * kCell, gx * kCell, kCell, kCell);
      const double msum = m.sum();
      const int base = 4 * (gy * kGrid + gx);
      for (int c = 0; c < 3; ++c) {
        const auto img = chans[c]->block(gy * kCell, gx * kCell, kCell, kCell);
        const double weighted = (m.array() * img.array()).sum();
        const double plain = img.sum() / cell_px;
        out[base + c] = kNorm * (weighted + kBlend * plain) / (msum + kBlend);
      }
      out[base + 3] = kNorm * msum / cell_px;
    }
  return out;
}

Eigen::MatrixXd GridDescriptor::mask_vjp(const RgbImage& image, const Eigen::MatrixXd& mask,
                                         const Eigen::VectorXd& desc_grad) const {
  check_shapes(image, mask);
  if (desc_grad.size() != dim()) throw std::invalid_argument("descriptor gradient size mismatch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kImageSize, kImageSize);
  const double cell_px = static_cast<double>(kCell * kCell);
  const Eigen::MatrixXd* chans[3] = {&image.r, &image.g, &image.b};
  for (int gy = 0; gy < kGrid; ++gy)
    for (int gx = 0; gx < kGrid; ++gx) {
      const auto m = mask.block(gy * kCell, gx * kCell, kCell, kCell);
      const double msum = m.sum();
      const double denom = msum + kBlend;
      const int base = 4 * (gy * kGrid + gx);
      auto gb = g.block(gy * kCell, gx * kCell, kCell, kCell);
      for (int c = 0; c < 3; ++c) {
        const double gd = desc_grad[base + c];
        if (gd == 0.0) continue;
        const auto img = chans[c]->block(gy * kCell, gx * kCell, kCell, kCell);
        const double weighted = (m.array() * img.array()).sum();
        const double plain = img.sum() / cell_px;
        const double feat = (weighted + kBlend * plain) / denom;
        gb.array() += kNorm * gd * (img.array() - feat) / denom;
      }
      gb.array() += kNorm * desc_grad[base + 3] / cell_px;
    }
  return g;
}

}  // namespace handfit
