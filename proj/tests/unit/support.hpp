#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dnewton/types.hpp"

namespace testing {

inline dnewton::Matrix<double> gaussian(dnewton::Index r, dnewton::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  dnewton::Matrix<double> m(r, c);
  for (dnewton::Index j = 0; j < c; ++j)
    for (dnewton::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline dnewton::Matrix<double> random_spd(dnewton::Index d, std::mt19937_64& rng, double shift = 1.0) {
  const dnewton::Matrix<double> G = gaussian(d, d, rng);
  dnewton::Matrix<double> A = G * G.transpose();
  A.diagonal().array() += shift;
  return A;
}

// Fresh, empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dnewton_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testing
