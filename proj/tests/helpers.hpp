#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "stirkit/linalg.hpp"
#include "stirkit/rng.hpp"

namespace stirkit::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("stirkit_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace stirkit::testing
