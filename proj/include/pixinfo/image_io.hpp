#pragma once

// 8-bit PGM (P5) and grayscale PNG I/O plus JSON landmark lists.
// Intensities map v / 255 on load and round(v * 255) on save.

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixinfo/files.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/landmarks.hpp"

namespace pixinfo {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline GrayImage image_from_bytes(int width, int height, const std::uint8_t* bytes, double spacing = 1.0) {
  std::vector<double> data(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = bytes[i] / 255.0;
  return GrayImage(width, height, std::move(data), spacing);
}

inline std::vector<std::uint8_t> image_to_bytes(const GrayImage& img) {
  std::vector<std::uint8_t> out(img.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(img.data()[i]);
  return out;
}

namespace detail {

inline int pgm_token(const std::string& s, std::size_t& pos) {
  for (;;) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) fail(ErrorKind::data, "malformed PGM header");
  return std::stoi(s.substr(start, pos - start));
}

}  // namespace detail

inline GrayImage decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail(ErrorKind::data, "not a binary PGM (P5)");
  std::size_t pos = 2;
  const int width = detail::pgm_token(bytes, pos);
  const int height = detail::pgm_token(bytes, pos);
  const int maxval = detail::pgm_token(bytes, pos);
  if (maxval != 255) fail(ErrorKind::data, "only 8-bit PGM (maxval 255) is supported");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width < 1 || height < 1 || bytes.size() < pos + n) fail(ErrorKind::data, "truncated PGM payload");
  return image_from_bytes(width, height, reinterpret_cast<const std::uint8_t*>(bytes.data() + pos));
}

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  const auto px = image_to_bytes(img);
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

inline GrayImage read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    fail(ErrorKind::data, "cannot decode PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorKind::data, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  return image_from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), px.data());
}

inline std::string encode_png(int width, int height, const std::vector<std::uint8_t>& px, bool rgb = false) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr))
    fail(ErrorKind::data, std::string("PNG encode failed: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr))
    fail(ErrorKind::data, std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

inline std::string encode_png(const GrayImage& img) { return encode_png(img.width(), img.height(), image_to_bytes(img)); }

inline GrayImage read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  return decode_pgm(read_file(path));
}

inline void write_image(const std::filesystem::path& path, const GrayImage& img) {
  const auto ext = path.extension().string();
  write_file_atomic(path, (ext == ".png" || ext == ".PNG") ? encode_png(img) : encode_pgm(img));
}

inline nlohmann::json landmarks_to_json(const LandmarkSet& set) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : set.points) arr.push_back({p.row, p.col});
  return arr;
}

inline LandmarkSet landmarks_from_json(const nlohmann::json& j, double spacing = 1.0) {
  if (!j.is_array()) fail(ErrorKind::data, "landmark list must be a JSON array of [row, col]");
  LandmarkSet set{{}, spacing};
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      fail(ErrorKind::data, "landmark entries must be [row, col] number pairs");
    set.points.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return set;
}

inline LandmarkSet read_landmarks(const std::filesystem::path& path, double spacing = 1.0) {
  try {
    return landmarks_from_json(nlohmann::json::parse(read_file(path)), spacing);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, path.string() + ": " + e.what());
  }
}

inline void write_landmarks(const std::filesystem::path& path, const LandmarkSet& set) {
  write_file_atomic(path, landmarks_to_json(set).dump() + "\n");
}

}  // namespace pixinfo
