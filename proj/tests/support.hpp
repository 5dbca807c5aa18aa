#pragma once

// Independent reference computations used as test oracles. They share no
// code with the library beyond the data types.

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixinfo/imaging.hpp"

namespace oracle {

inline pixinfo::Patch random_patch(std::mt19937_64& gen, int side) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  pixinfo::Patch p{side, {side / 2, side / 2}, std::vector<double>(static_cast<std::size_t>(side) * side)};
  for (double& v : p.data) v = u(gen);
  return p;
}

inline pixinfo::GrayImage random_image(std::mt19937_64& gen, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (double& v : d) v = u(gen);
  return pixinfo::GrayImage(w, h, std::move(d));
}

inline int bin_of(double v, int bins) {
  if (v >= 1.0) return bins - 1;
  if (v <= 0.0) return 0;
  return static_cast<int>(v * bins);
}

/// Shannon entropy in nats by explicit outcome counting.
inline double entropy(const std::vector<double>& values, int bins) {
  std::map<int, int> counts;
  for (double v : values) ++counts[bin_of(v, bins)];
  double h = 0.0;
  const double n = static_cast<double>(values.size());
  for (const auto& [b, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

/// Plug-in MI as H(X) + H(Y) - H(X, Y), from a sparse joint count table.
inline double mutual_information(const std::vector<double>& x, const std::vector<double>& y, int bins) {
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < x.size(); ++i) ++joint[{bin_of(x[i], bins), bin_of(y[i], bins)}];
  double hxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (const auto& [cell, c] : joint) hxy -= (c / n) * std::log(c / n);
  return entropy(x, bins) + entropy(y, bins) - hxy;
}

/// Upper critical value of the chi-square distribution.
inline double chi_square_critical(int dof, double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return s;
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("pixinfo_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace oracle
