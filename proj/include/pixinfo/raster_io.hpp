#pragma once

// Map persistence: one JSON header line, a newline, then width*height
// little-endian float32 values. Heatmap PNGs are for inspection only.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixinfo/files.hpp"
#include "pixinfo/image_io.hpp"
#include "pixinfo/infometrics.hpp"

namespace pixinfo {

struct FloatRaster {
  nlohmann::json header;  // always carries width and height
  std::vector<float> values;
};

inline std::string encode_raster(const nlohmann::json& header, std::span<const double> values) {
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + values.size() * 4);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  return out;
}

inline FloatRaster decode_raster(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) fail(ErrorKind::data, "raster file has no header line");
  FloatRaster r;
  try {
    r.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("raster header: ") + e.what());
  }
  if (!r.header.contains("width") || !r.header.contains("height")) fail(ErrorKind::data, "raster header lacks width/height");
  const std::size_t n = r.header["width"].get<std::size_t>() * r.header["height"].get<std::size_t>();
  if (bytes.size() != nl + 1 + 4 * n) fail(ErrorKind::data, "raster payload size does not match header");
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[nl + 1 + 4 * i + b])) << (8 * b);
    r.values[i] = std::bit_cast<float>(bits);
  }
  return r;
}

inline std::string encode_entropy_map(const EntropyMap& em) {
  nlohmann::json h = {{"kind", "entropy"}, {"width", em.width}, {"height", em.height},
                      {"k", em.patch_side}, {"bins", em.bins}, {"log_base", em.log_base}};
  return encode_raster(h, em.values);
}

inline EntropyMap decode_entropy_map(const std::string& bytes) {
  const auto r = decode_raster(bytes);
  if (r.header.value("kind", "") != "entropy") fail(ErrorKind::data, "raster is not an entropy map");
  EntropyMap em{r.header["width"], r.header["height"], r.header["k"], r.header["bins"], r.header["log_base"], {}};
  em.values.assign(r.values.begin(), r.values.end());
  return em;
}

inline std::string encode_weight_map(const WeightMap& wm) {
  nlohmann::json h = {{"kind", "weight"}, {"width", wm.width}, {"height", wm.height},
                      {"normalized", wm.normalized}, {"total", wm.total}};
  return encode_raster(h, wm.weights);
}

inline WeightMap decode_weight_map(const std::string& bytes) {
  const auto r = decode_raster(bytes);
  if (r.header.value("kind", "") != "weight") fail(ErrorKind::data, "raster is not a weight map");
  WeightMap wm{r.header["width"], r.header["height"], std::vector<double>(r.values.begin(), r.values.end()),
               r.header["normalized"], 0.0};
  wm.recompute_total();
  return wm;
}

/// Category labels stored as their numeric codes (0 invalid, 1 low, 2 medium, 3 high).
inline std::string encode_category_map(const CategoryMap& cm) {
  nlohmann::json h = {{"kind", "category"}, {"width", cm.width}, {"height", cm.height},
                      {"t_lm", cm.t_lm}, {"t_mh", cm.t_mh}};
  std::vector<double> codes(cm.labels.size());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = static_cast<double>(cm.labels[i]);
  return encode_raster(h, codes);
}

inline CategoryMap decode_category_map(const std::string& bytes) {
  const auto r = decode_raster(bytes);
  if (r.header.value("kind", "") != "category") fail(ErrorKind::data, "raster is not a category map");
  CategoryMap cm{r.header["width"], r.header["height"], r.header["t_lm"], r.header["t_mh"], {}};
  cm.labels.reserve(r.values.size());
  for (float v : r.values) {
    if (v < 0.0f || v > 3.0f) fail(ErrorKind::data, "bad category code");
    cm.labels.push_back(static_cast<Category>(static_cast<int>(v)));
  }
  return cm;
}

/// Black-red-yellow-white ramp over [0, max]; negative (invalid) values are black.
inline std::string heatmap_png(int width, int height, std::span<const double> values) {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  std::vector<std::uint8_t> rgb(values.size() * 3, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || hi <= 0.0) continue;
    const double t = values[i] / hi;
    rgb[3 * i + 0] = to_byte(std::min(1.0, 3.0 * t));
    rgb[3 * i + 1] = to_byte(std::clamp(3.0 * t - 1.0, 0.0, 1.0));
    rgb[3 * i + 2] = to_byte(std::clamp(3.0 * t - 2.0, 0.0, 1.0));
  }
  return encode_png(width, height, rgb, true);
}

}  // namespace pixinfo
