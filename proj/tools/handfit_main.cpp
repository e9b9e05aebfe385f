#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "handfit/camera.hpp"
#include "handfit/dataset.hpp"
#include "handfit/descriptor.hpp"
#include "handfit/estimator.hpp"
#include "handfit/image.hpp"
#include "handfit/mesh.hpp"
#include "handfit/metrics.hpp"
#include "handfit/rasterize.hpp"
#include "handfit/refine.hpp"
#include "handfit/rng.hpp"
#include "handfit/shade.hpp"
#include "handfit/synth.hpp"
#include "handfit/toy_model.hpp"
#include "handfit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace handfit;

namespace {

std::string config_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Expands `--config file.json` into trailing --key=value tokens. Keys already
// present on the command line are skipped, so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] != "--config") continue;
    if (i + 1 >= args.size()) throw std::runtime_error("--config expects a file path");
    std::ifstream in(args[i + 1]);
    if (!in) throw std::runtime_error("cannot open config file " + args[i + 1]);
    const json cfg = json::parse(in);
    if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");
    args.erase(args.begin() + i, args.begin() + i + 2);
    for (const auto& [key, value] : cfg.items()) {
      const std::string flag = "--" + key;
      bool present = false;
      for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
      if (present) continue;
      if (value.is_array()) {
        args.push_back(flag);
        for (const auto& el : value) args.push_back(config_scalar(el));
      } else {
        args.push_back(flag + "=" + config_scalar(value));
      }
    }
    break;
  }
  return args;
}

json skeleton_to_json(const Skeleton3d& s) {
  json rows = json::array();
  for (int j = 0; j < kNumJoints; ++j) rows.push_back({s(j, 0), s(j, 1), s(j, 2)});
  return rows;
}

json joints2d_to_json(const Skeleton2d& s) {
  json rows = json::array();
  for (int j = 0; j < kNumJoints; ++j) rows.push_back({s(j, 0), s(j, 1)});
  return rows;
}

Skeleton3d skeleton_from_json(const json& rows) {
  if (!rows.is_array() || rows.size() != kNumJoints)
    throw std::runtime_error("skeleton must hold 21 rows");
  Skeleton3d s;
  for (int j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) s(j, a) = rows[j][a].get<double>();
  return s;
}

MeshParams params_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file " + path);
  const json j = json::parse(in);
  const json& arr = j.is_object() ? j.at("h") : j;
  if (!arr.is_array() || arr.size() != kParamDim)
    throw std::runtime_error("params file must hold 63 values");
  MeshParams h;
  for (int i = 0; i < kParamDim; ++i) h.h[i] = arr[i].get<double>();
  return h;
}

// Fixed shading constants so renders are reproducible without a seed.
const Eigen::Vector3d kRenderAlbedo(0.80, 0.55, 0.45);
const Eigen::Vector3d kRenderLight = Eigen::Vector3d(0.3, -0.25, -1.0).normalized();

RgbImage flat_background(double value) {
  RgbImage bg(kImageSize, kImageSize);
  bg.r.setConstant(value);
  bg.g.setConstant(value);
  bg.b.setConstant(value);
  return bg;
}

int run_gen_toy_model(std::uint64_t seed, const std::string& out) {
  const HandModelAssets assets = gen_toy_model(seed);
  save_model_assets(out, assets);
  std::cout << "wrote " << out << " (" << kNumVertices << " vertices, " << kNumFaces
            << " faces)\n";
  return 0;
}

int run_synth(const std::string& assets_path, int count, std::uint64_t seed,
              const std::string& out) {
  const HandModelAssets assets = load_model_assets(assets_path);
  const auto records = generate_dataset(out, assets, count, seed);
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  return 0;
}

int run_train(const std::string& assets_path, const std::string& manifest, int epochs, double lr,
              std::uint64_t seed, int augment_after, int batch_size, bool no_augment,
              const std::string& out_weights) {
  const HandModelAssets assets = load_model_assets(assets_path);
  const auto records = read_manifest(manifest);
  std::vector<LoadedSample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records) samples.push_back(load_sample(manifest, rec));

  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.adam.lr = lr;
  cfg.seed = seed;
  cfg.batch_size = batch_size;
  cfg.augment = !no_augment;
  cfg.augment_cfg.start_epoch = augment_after;

  GridDescriptor descriptor;
  WeightsMeta meta;
  meta.seed = seed;
  meta.epochs = epochs;
  const TrainResult result =
      train(samples, assets, descriptor, cfg, [&](int epoch, const EpochStats& stats) {
        meta.loss_trace.push_back(stats.mean_total);
        meta.lambda_trace.push_back(stats.lambda_fraction);
        std::cout << "epoch " << epoch << " loss " << stats.mean_total << " lambda "
                  << stats.lambda_fraction << "\n";
      });
  save_weights(out_weights, result.weights, meta);
  std::cout << "wrote " << out_weights << "\n";
  return 0;
}

int run_fit(const std::string& assets_path, const std::string& weights_path,
            const std::string& manifest, int refine_iters, double refine_step, double noise_px,
            std::uint64_t seed, const std::string& trace_dir, const std::string& out) {
  const HandModelAssets assets = load_model_assets(assets_path);
  const LinearRegressorWeights weights = load_weights(weights_path);
  const auto records = read_manifest(manifest);
  const GridDescriptor descriptor;
  const ImagePlane plane;
  const Rng noise_root(seed);

  fs::create_directories(fs::path(out) / "mask");
  if (!trace_dir.empty()) fs::create_directories(trace_dir);
  std::ofstream fits(fs::path(out) / "fits.jsonl");
  if (!fits) throw std::runtime_error("cannot open output manifest under " + out);

  RefineConfig rcfg;
  rcfg.iterations = refine_iters;
  rcfg.gamma = refine_step;

  const auto renderable = [&](const MeshParams& h) {
    try {
      project(synthesize_mesh(h, assets).mesh.vertices, plane);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const LoadedSample sample = load_sample(manifest, records[i]);
    Skeleton2d j2d = sample.gt.j2d;
    if (noise_px > 0.0) {
      Rng r = noise_root.split(i);
      for (int j = 0; j < kNumJoints; ++j)
        for (int a = 0; a < 2; ++a) j2d(j, a) += r.normal(0.0, noise_px);
    }
    const Evidence2D evidence = make_evidence(sample.image, j2d, descriptor);
    const HmeResult hme = run_hme(evidence, weights, assets);
    MeshParams result = hme.h;
    if (refine_iters > 0) {
      // under-trained weights can predict a mesh outside the view frustum;
      // refinement then restarts from the renderable default placement
      MeshParams start = hme.h;
      if (!renderable(start)) start = to_synthesis_encoding(initial_params(assets));
      const RefineResult refined =
          testing_refine(sample.image, hme.j2d, start, assets, descriptor, rcfg);
      result = refined.h;
      if (!trace_dir.empty())
        write_refine_trace_csv((fs::path(trace_dir) / (records[i].id + ".csv")).string(),
                               refined.trace);
    }

    json line;
    line["id"] = records[i].id;
    line["h"] = std::vector<double>(result.h.data(), result.h.data() + kParamDim);
    const std::string mask_rel = "mask/" + records[i].id + ".pgm";
    if (renderable(result)) {
      const MeshSynthesis synth = synthesize_mesh(result, assets);
      const Skeleton3d skeleton = regress_skeleton(synth.mesh.vertices, assets);
      write_pgm((fs::path(out) / mask_rel).string(),
                rasterize_hard(synth.mesh.vertices, assets.faces, plane));
      line["mask"] = mask_rel;
      line["skeleton"] = skeleton_to_json(skeleton);
      line["j2d"] = joints2d_to_json(project(skeleton, plane));
    } else {
      // keep the record shape stable for eval even when the raw prediction
      // cannot be rendered (refine-iters 0 with wild weights)
      write_pgm((fs::path(out) / mask_rel).string(),
                Eigen::MatrixXd::Zero(plane.height, plane.width));
      line["mask"] = mask_rel;
      line["skeleton"] = skeleton_to_json(Skeleton3d::Zero());
      line["j2d"] = joints2d_to_json(Skeleton2d::Zero());
    }
    fits << line.dump() << "\n";
  }
  std::cout << "wrote " << records.size() << " fits to " << out << "\n";
  return 0;
}

int run_render(const std::string& assets_path, const std::string& params_path,
               const std::string& mode, const std::string& out) {
  const HandModelAssets assets = load_model_assets(assets_path);
  MeshParams h = params_from_json_file(params_path);
  if (mode == "canonical") {
    // Keep the recovered shape, reset articulation to the mean pose and the
    // camera to a frontal identity placement.
    MeshParams canonical;
    canonical.h.segment<kPoseDim>(kPoseOffset) = assets.mean_pose;
    canonical.h.segment<kShapeDim>(kShapeOffset) = h.h.segment<kShapeDim>(kShapeOffset);
    h = canonical;
  }
  const ImagePlane plane;
  const MeshSynthesis synth = synthesize_mesh(h, assets);
  if (mode == "mask") {
    write_pgm(out, rasterize_hard(synth.mesh.vertices, assets.faces, plane));
  } else if (mode == "shaded" || mode == "canonical") {
    const RgbImage img = render_shaded(synth.mesh.vertices, assets.faces, plane, kRenderAlbedo,
                                       kRenderLight, flat_background(0.35));
    write_ppm(out, img);
  } else {
    throw std::runtime_error("unknown render mode " + mode);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_manifest,
             std::vector<double> thresholds, const std::string& report_path) {
  std::ifstream in(pred_path);
  if (!in) throw std::runtime_error("cannot open predictions " + pred_path);

  std::map<std::string, DatasetRecord> gt_by_id;
  for (const auto& rec : read_manifest(gt_manifest)) gt_by_id[rec.id] = rec;

  std::vector<Skeleton3d> pred_joints, gt_joints;
  std::vector<SegMetrics> seg;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json entry = json::parse(line);
    const std::string id = entry.at("id").get<std::string>();
    const auto it = gt_by_id.find(id);
    if (it == gt_by_id.end()) throw std::runtime_error("prediction id " + id + " not in gt");
    const GroundTruth gt = read_ground_truth(resolve_path(gt_manifest, it->second.gt_path));
    pred_joints.push_back(skeleton_from_json(entry.at("skeleton")));
    gt_joints.push_back(gt.joints);
    const Eigen::MatrixXd pred_mask =
        read_pgm(resolve_path(pred_path, entry.at("mask").get<std::string>()));
    const Eigen::MatrixXd gt_mask = read_pgm(resolve_path(gt_manifest, it->second.mask_path));
    seg.push_back(compute_seg_metrics(pred_mask, gt_mask));
  }
  if (pred_joints.empty()) throw std::runtime_error("no predictions in " + pred_path);

  EvalReport report;
  report.pck = compute_pck_auc(pred_joints, gt_joints, thresholds);
  report.seg = average_seg_metrics(seg);
  report.num_samples = static_cast<int>(pred_joints.size());
  double err = 0.0;
  for (std::size_t i = 0; i < pred_joints.size(); ++i)
    err += (pred_joints[i] - gt_joints[i]).rowwise().norm().mean();
  report.mean_joint_error = err / static_cast<double>(pred_joints.size());
  write_eval_report(report_path, report);
  std::cout << "wrote " << report_path << " (auc " << report.pck.auc << ", iou "
            << report.seg.iou << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense articulated hand fitting toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string assets_path, out, manifest, weights_path, params_path;

  auto* gen = app.add_subcommand("gen-toy-model", "Generate procedural hand model assets");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out, "Output asset file")->required();

  int count = 100;
  auto* synth = app.add_subcommand("synth", "Render a labelled synthetic dataset");
  synth->add_option("--assets", assets_path, "Model asset file")->required();
  synth->add_option("--count", count, "Number of records");
  synth->add_option("--seed", seed, "Dataset seed");
  synth->add_option("--out", out, "Output dataset directory")->required();

  int epochs = 100, batch_size = 32, augment_after = 20;
  double lr = 1e-3;
  bool no_augment = false;
  std::string out_weights;
  auto* train_cmd = app.add_subcommand("train", "Train the regression heads");
  train_cmd->add_option("--assets", assets_path, "Model asset file")->required();
  train_cmd->add_option("--data", manifest, "Dataset manifest")->required();
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  train_cmd->add_option("--lr", lr, "Adam learning rate");
  train_cmd->add_option("--seed", seed, "Shuffle and augmentation seed");
  train_cmd->add_option("--batch-size", batch_size, "Mini-batch size");
  train_cmd->add_option("--augment-after", augment_after, "First augmenting epoch");
  train_cmd->add_flag("--no-augment", no_augment, "Disable the augmentation hook");
  train_cmd->add_option("--out-weights", out_weights, "Output weight file")->required();

  int refine_iters = 50;
  double refine_step = 1e-3, noise_px = 0.0;
  std::string trace_dir;
  auto* fit = app.add_subcommand("fit", "Estimate and refine mesh parameters per record");
  fit->add_option("--assets", assets_path, "Model asset file")->required();
  fit->add_option("--weights", weights_path, "Trained weight file")->required();
  fit->add_option("--input-manifest", manifest, "Evidence manifest")->required();
  fit->add_option("--refine-iters", refine_iters, "Refinement iterations");
  fit->add_option("--refine-step", refine_step, "Refinement step size");
  fit->add_option("--noise-px", noise_px, "Gaussian keypoint noise, pixels");
  fit->add_option("--seed", seed, "Noise seed");
  fit->add_option("--trace-dir", trace_dir, "Directory for per-record refinement traces");
  fit->add_option("--out", out, "Output directory")->required();

  std::string mode = "mask";
  auto* render = app.add_subcommand("render", "Render stored parameters");
  render->add_option("--assets", assets_path, "Model asset file")->required();
  render->add_option("--params", params_path, "Parameter JSON file")->required();
  render->add_option("--mode", mode, "mask|shaded|canonical")
      ->check(CLI::IsMember({"mask", "shaded", "canonical"}));
  render->add_option("--out", out, "Output image path")->required();

  std::string pred_path, gt_path, report_path;
  std::vector<double> thresholds{0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  auto* eval = app.add_subcommand("eval", "Compare fits against ground truth");
  eval->add_option("--pred", pred_path, "fits.jsonl from the fit subcommand")->required();
  eval->add_option("--gt", gt_path, "Ground-truth dataset manifest")->required();
  // Default interval mirrors the usual 20..50 mm convention at 10 cm per
  // model unit.
  eval->add_option("--thresholds", thresholds, "PCK thresholds, model units");
  eval->add_option("--report", report_path, "Output report JSON")->required();

  try {
    const std::vector<std::string> args =
        expand_config(std::vector<std::string>(argv + 1, argv + argc));
    std::vector<const char*> cargv{argv[0]};
    for (const auto& a : args) cargv.push_back(a.c_str());
    app.parse(static_cast<int>(cargv.size()), cargv.data());

    if (gen->parsed()) return run_gen_toy_model(seed, out);
    if (synth->parsed()) return run_synth(assets_path, count, seed, out);
    if (train_cmd->parsed())
      return run_train(assets_path, manifest, epochs, lr, seed, augment_after, batch_size,
                       no_augment, out_weights);
    if (fit->parsed())
      return run_fit(assets_path, weights_path, manifest, refine_iters, refine_step, noise_px,
                     seed, trace_dir, out);
    if (render->parsed()) return run_render(assets_path, params_path, mode, out);
    if (eval->parsed()) return run_eval(pred_path, gt_path, thresholds, report_path);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
