#include "handfit/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace handfit {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void json_to_matrix(const nlohmann::json& j, Eigen::Ref<Eigen::MatrixXd> out, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(out.rows()))
    throw std::runtime_error(std::string("ground truth field ") + what + " has wrong row count");
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(out.cols()))
      throw std::runtime_error(std::string("ground truth field ") + what +
                               " has wrong column count");
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = row[c].get<double>();
  }
}

}  // namespace

std::vector<DatasetRecord> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  std::vector<DatasetRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.image_path = j.at("image").get<std::string>();
    r.mask_path = j.at("mask").get<std::string>();
    r.gt_path = j.at("gt").get<std::string>();
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::string& manifest_path,
                    const std::vector<DatasetRecord>& records) {
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + manifest_path);
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"image", r.image_path}, {"mask", r.mask_path},
                     {"gt", r.gt_path}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("short write to manifest: " + manifest_path);
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth: " + path);
  nlohmann::json j;
  in >> j;

  GroundTruth gt;
  const auto hv = j.at("h").get<std::vector<double>>();
  if (hv.size() != kParamDim)
    throw std::runtime_error("ground truth h has wrong length in " + path);
  for (int i = 0; i < kParamDim; ++i) gt.h.h[i] = hv[i];
  json_to_matrix(j.at("skeleton"), gt.joints, "skeleton");
  json_to_matrix(j.at("j2d"), gt.j2d, "j2d");
  const auto& c = j.at("normalization");
  gt.ctx.root_index = c.at("root_index").get<int>();
  gt.ctx.g = c.at("g").get<double>();
  gt.ctx.z_root = c.at("z_root").get<double>();
  gt.ctx.focal = c.at("focal").get<double>();
  gt.ctx.validate();
  return gt;
}

void write_ground_truth(const std::string& path, const GroundTruth& gt) {
  nlohmann::json j;
  j["h"] = std::vector<double>(gt.h.h.data(), gt.h.h.data() + kParamDim);
  j["skeleton"] = matrix_to_json(gt.joints);
  j["j2d"] = matrix_to_json(gt.j2d);
  j["normalization"] = {{"root_index", gt.ctx.root_index},
                        {"g", gt.ctx.g},
                        {"z_root", gt.ctx.z_root},
                        {"focal", gt.ctx.focal}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open ground truth for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

std::string resolve_path(const std::string& manifest_path, const std::string& relative) {
  return (std::filesystem::path(manifest_path).parent_path() / relative).string();
}

LoadedSample load_sample(const std::string& manifest_path, const DatasetRecord& record) {
  LoadedSample s;
  s.image = read_ppm(resolve_path(manifest_path, record.image_path));
  s.mask = read_pgm(resolve_path(manifest_path, record.mask_path));
  s.gt = read_ground_truth(resolve_path(manifest_path, record.gt_path));
  return s;
}

}  // namespace handfit
