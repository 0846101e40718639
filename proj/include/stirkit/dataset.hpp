#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "stirkit/linalg.hpp"

namespace stirkit {

/// Labeled inputs in the unit box [0,1]^d.
struct Dataset {
    Matrix inputs;                    // n × d
    std::vector<std::size_t> labels;  // n entries in [0, class_count)
    std::size_t class_count = 0;
    std::string name;
    /// Inputs are quantized pixel intensities (IDX images).
    bool image_like = false;

    std::size_t size() const { return labels.size(); }
    std::size_t dims() const { return inputs.cols(); }

    /// Throws InvalidArgument if any invariant is violated.
    void validate() const;

    /// Rows by index, preserving order.
    Dataset select(std::span<const std::size_t> indices) const;
};

/// Equality of contents; `name` is metadata and not compared.
bool same_contents(const Dataset& a, const Dataset& b);

/// Gaussian blobs around lattice points. Class i sits at the mixed-radix
/// lattice point of i with L levels per axis, L the smallest integer with
/// L^dims ≥ classes; coordinates (digit + 0.5) / L. Clamped to [0,1].
Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dims, double spread,
                  std::uint64_t seed);

/// Two concentric rings around (0.5, 0.5): class 0 at radius 0.25, class 1
/// at radius 0.45, radial Gaussian noise of standard deviation `noise`.
Dataset gen_rings(std::size_t per_class, double noise, std::uint64_t seed);

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image/label file pair (MNIST layout). `limit` caps the
/// number of samples read.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t limit);

/// Cumulative training-set sizes for incremental model updates.
struct SplitPlan {
    std::vector<std::size_t> increments;  // strictly increasing
    std::size_t holdout = 0;
    std::uint64_t shuffle_seed = 0;

    void validate(std::size_t dataset_size) const;
};

/// Train split for `step` and the fixed holdout split. One permutation per
/// (dataset, plan.shuffle_seed): step i's train set is a prefix of step
/// i+1's, holdout is the tail of the permutation.
std::pair<Dataset, Dataset> subset(const Dataset& ds, const SplitPlan& plan, std::size_t step);

/// CSV with header `label,f0,...,f{d-1}`; values printed with 17
/// significant digits so that loading restores them bit-exactly.
void save_csv(const Dataset& ds, const std::filesystem::path& path);
/// `class_count` 0 infers max label + 1.
Dataset load_csv(const std::filesystem::path& path, std::size_t class_count = 0);

std::string format_real(double v);

}  // namespace stirkit
