#include "handfit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace handfit {

namespace {

unsigned char to_byte(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::min(255.0, std::floor(clamped * 255.0 + 0.5)));
}

// Reads "P5"/"P6", dimensions and maxval, skipping comment lines.
void read_header(std::istream& in, const char* magic, int& width, int& height) {
  std::string tag;
  in >> tag;
  if (tag != magic) throw std::runtime_error("unexpected magic, wanted " + std::string(magic));
  auto next_int = [&in]() {
    int v;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (!(in >> v)) throw std::runtime_error("truncated pnm header");
      return v;
    }
  };
  width = next_int();
  height = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("unsupported pnm maxval");
  in.get();  // single whitespace before payload
}

}  // namespace

void write_pgm(const std::string& path, const Eigen::MatrixXd& gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << gray.cols() << " " << gray.rows() << "\n255\n";
  std::vector<unsigned char> row(gray.cols());
  for (Eigen::Index y = 0; y < gray.rows(); ++y) {
    for (Eigen::Index x = 0; x < gray.cols(); ++x) row[x] = to_byte(gray(y, x));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

Eigen::MatrixXd read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  int w, h;
  read_header(in, "P5", w, h);
  Eigen::MatrixXd gray(h, w);
  std::vector<unsigned char> row(w);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), w);
    if (in.gcount() != w) throw std::runtime_error("truncated pgm payload in " + path);
    for (int x = 0; x < w; ++x) gray(y, x) = row[x] / 255.0;
  }
  return gray;
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> row(3 * image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      row[3 * x] = to_byte(image.r(y, x));
      row[3 * x + 1] = to_byte(image.g(y, x));
      row[3 * x + 2] = to_byte(image.b(y, x));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  int w, h;
  read_header(in, "P6", w, h);
  RgbImage img(h, w);
  std::vector<unsigned char> row(3 * w);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), 3 * w);
    if (in.gcount() != 3 * w) throw std::runtime_error("truncated ppm payload in " + path);
    for (int x = 0; x < w; ++x) {
      img.r(y, x) = row[3 * x] / 255.0;
      img.g(y, x) = row[3 * x + 1] / 255.0;
      img.b(y, x) = row[3 * x + 2] / 255.0;
    }
  }
  return img;
}

}  // namespace handfit
