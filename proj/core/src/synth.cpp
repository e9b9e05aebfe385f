#include "handfit/synth.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "handfit/camera.hpp"
#include "handfit/mesh.hpp"
#include "handfit/rasterize.hpp"
#include "handfit/shade.hpp"

namespace handfit {

namespace {

void draw_camera(MeshParams& h, const AugmentConfig& cfg, Rng& rng) {
  const double a = rng.uniform(cfg.rot_lo, cfg.rot_hi);
  const double b = rng.uniform(cfg.rot_lo, cfg.rot_hi);
  const double c = rng.uniform(cfg.rot_lo, cfg.rot_hi);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(c, Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()));
  h.h[kQuatOffset] = q.w();
  h.h[kQuatOffset + 1] = q.x();
  h.h[kQuatOffset + 2] = q.y();
  h.h[kQuatOffset + 3] = q.z();
  h.h[kScaleOffset] = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  h.h[kTransOffset] = rng.uniform(-cfg.xy_range, cfg.xy_range);
  h.h[kTransOffset + 1] = rng.uniform(-cfg.xy_range, cfg.xy_range);
  h.h[kTransOffset + 2] = rng.uniform(cfg.depth_lo, cfg.depth_hi);
}

std::string record_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace

MeshParams perturb_seed(const MeshParams& seed, const AugmentConfig& cfg, Rng& rng) {
  MeshParams out = seed;  // pose carries over
  for (int i = 0; i < kShapeDim; ++i)
    out.h[kShapeOffset + i] = rng.uniform(-cfg.shape_range, cfg.shape_range);
  draw_camera(out, cfg, rng);
  return out;
}

GeneratedRecord generate_record(const MeshParams& h, const HandModelAssets& assets,
                                const RgbImage& background, Rng& rng) {
  const ImagePlane plane;
  GeneratedRecord rec;

  const Eigen::Vector3d albedo(rng.uniform(0.70, 0.88), rng.uniform(0.48, 0.62),
                               rng.uniform(0.38, 0.52));
  const Eigen::Vector3d light =
      Eigen::Vector3d(rng.normal(0.0, 0.4), rng.normal(0.0, 0.4), -1.0).normalized();

  MeshParams cur = h;
  const AugmentConfig safe{};  // translation redraw ranges for retries
  for (int attempt = 0;; ++attempt) {
    try {
      const MeshSynthesis synth = synthesize_mesh(cur, assets);
      rec.mask = rasterize_hard(synth.mesh.vertices, assets.faces, plane);
      rec.image = render_shaded(synth.mesh.vertices, assets.faces, plane, albedo, light,
                                background);
      rec.gt.h = cur;
      rec.gt.joints = regress_skeleton(synth.mesh.vertices, assets);
      rec.gt.j2d = project(rec.gt.joints, plane);
      break;
    } catch (const BehindCameraError&) {
      if (attempt >= 9) throw;
      cur.h[kTransOffset] = rng.uniform(-safe.xy_range, safe.xy_range);
      cur.h[kTransOffset + 1] = rng.uniform(-safe.xy_range, safe.xy_range);
      cur.h[kTransOffset + 2] = rng.uniform(safe.depth_lo, safe.depth_hi);
    }
  }

  const double w = rec.gt.j2d.col(0).maxCoeff() - rec.gt.j2d.col(0).minCoeff();
  const double hgt = rec.gt.j2d.col(1).maxCoeff() - rec.gt.j2d.col(1).minCoeff();
  rec.gt.ctx.root_index = kRootJoint;
  rec.gt.ctx.g = 1.5 * std::max(w, hgt);
  rec.gt.ctx.z_root = rec.gt.joints(kRootJoint, 2);
  rec.gt.ctx.focal = plane.focal;
  rec.gt.ctx.validate();
  return rec;
}

std::vector<GeneratedRecord> augment_epoch_hook(int epoch,
                                                const std::vector<MeshParams>& seed_predictions,
                                                const AugmentConfig& cfg,
                                                const HandModelAssets& assets, const Rng& rng) {
  std::vector<GeneratedRecord> out;
  if (epoch < cfg.start_epoch) return out;
  out.reserve(seed_predictions.size() * cfg.per_seed);
  for (std::size_t i = 0; i < seed_predictions.size(); ++i)
    for (int k = 0; k < cfg.per_seed; ++k) {
      Rng r = rng.split(static_cast<std::uint64_t>(i) * cfg.per_seed + k);
      const MeshParams h = perturb_seed(seed_predictions[i], cfg, r);
      const RgbImage bg = procedural_background(ImagePlane{}.height, ImagePlane{}.width, r);
      out.push_back(generate_record(h, assets, bg, r));
    }
  return out;
}

std::vector<DatasetRecord> generate_dataset(const std::string& out_dir,
                                            const HandModelAssets& assets, int count,
                                            std::uint64_t seed, const AugmentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "img");
  fs::create_directories(fs::path(out_dir) / "mask");
  fs::create_directories(fs::path(out_dir) / "gt");

  const Rng root(seed);
  std::vector<DatasetRecord> records;
  records.reserve(count);
  for (int i = 0; i < count; ++i) {
    // Deterministic retry chain: records whose projected skeleton strays too
    // close to the evidence bounds are redrawn from the next split stream.
    // Fresh records sample a camera-facing rotation band instead of the full
    // sphere: base data has to stay identifiable for the linear heads, the
    // full rotation range enters later through augmentation around seeds.
    AugmentConfig fresh = cfg;
    fresh.rot_lo = -0.6;
    fresh.rot_hi = 0.6;
    fresh.shape_range = std::min(cfg.shape_range, 2.0);

    GeneratedRecord rec;
    for (int attempt = 0;; ++attempt) {
      Rng r = root.split(static_cast<std::uint64_t>(i) * 64 + attempt);
      MeshParams base;
      base.h.setZero();
      for (int p = 0; p < kPoseDim; ++p)
        base.h[p] = assets.mean_pose[p] + r.uniform(-0.35, 0.35);
      base.h[kQuatOffset] = 1.0;
      const MeshParams h = perturb_seed(base, fresh, r);
      const RgbImage bg = procedural_background(ImagePlane{}.height, ImagePlane{}.width, r);
      rec = generate_record(h, assets, bg, r);
      const bool framed = rec.gt.j2d.minCoeff() > -16.0 && rec.gt.j2d.maxCoeff() < 240.0;
      if (framed || attempt >= 49) break;
    }

    DatasetRecord dr;
    dr.id = record_name(i);
    dr.image_path = "img/" + dr.id + ".ppm";
    dr.mask_path = "mask/" + dr.id + ".pgm";
    dr.gt_path = "gt/" + dr.id + ".json";
    write_ppm((fs::path(out_dir) / dr.image_path).string(), rec.image);
    write_pgm((fs::path(out_dir) / dr.mask_path).string(), rec.mask);
    write_ground_truth((fs::path(out_dir) / dr.gt_path).string(), rec.gt);
    records.push_back(std::move(dr));
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
  return records;
}

RgbImage procedural_background(int height, int width, Rng& rng) {
  constexpr int kSpacing = 32;
  const int gh = height / kSpacing + 2, gw = width / kSpacing + 2;
  RgbImage img(height, width);
  Eigen::MatrixXd* chans[3] = {&img.r, &img.g, &img.b};
  for (auto* chan : chans) {
    Eigen::MatrixXd lattice(gh, gw);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) lattice(y, x) = rng.uniform(0.15, 0.75);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double fy = static_cast<double>(y) / kSpacing;
        const double fx = static_cast<double>(x) / kSpacing;
        const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
        double ty = fy - iy, tx = fx - ix;
        ty = ty * ty * (3.0 - 2.0 * ty);
        tx = tx * tx * (3.0 - 2.0 * tx);
        const double top = lattice(iy, ix) * (1.0 - tx) + lattice(iy, ix + 1) * tx;
        const double bot = lattice(iy + 1, ix) * (1.0 - tx) + lattice(iy + 1, ix + 1) * tx;
        (*chan)(y, x) = top * (1.0 - ty) + bot * ty;
      }
  }
  return img;
}

}  // namespace handfit
