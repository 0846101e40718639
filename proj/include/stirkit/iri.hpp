#pragma once

// Identically represented inputs (IRIs): inputs x′ whose representation
// under a reference model matches that of x within a relative tolerance,
// found by gradient descent on the input.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stirkit/dataset.hpp"
#include "stirkit/model.hpp"

namespace stirkit {

enum class IriMode { arbitrary, adversarial, controversial };

std::string to_string(IriMode mode);
IriMode parse_iri_mode(const std::string& text);

/// Per-row distance the descent minimizes.
///   norm:     ‖m(x′) − m(x)‖₂
///   relative: ‖m(x′) − m(x)‖₂ / ‖m(x)‖₂, the residual acceptance is judged on
///   scaled:   ½‖m(x′) − m(x)‖₂² / ‖m(x)‖₂²
/// All vanish exactly on IRIs.
enum class InversionLoss { norm, relative, scaled };

std::string to_string(InversionLoss loss);
InversionLoss parse_inversion_loss(const std::string& text);

struct InversionConfig {
    double alpha = 0.05;         // gradient step
    std::size_t steps = 500;
    double delta = 0.05;         // acceptance bound on the relative residual
    std::optional<Tap> tap;      // reference-model tap; unset = penultimate
    bool clamp = true;           // project x′ to [0,1] after every step
    std::uint64_t seed = 0;
    double lambda = 1.0;         // weight of the target-model term
    InversionLoss loss = InversionLoss::relative;
    /// Controversial stimuli stop once m₁'s residual is ≤ delta and m₂'s
    /// relative change is ≥ this target; 0 runs the full step budget.
    double controversial_target = 0.1;

    void validate() const;
};

/// Where inversion seeds are drawn from.
struct InputDomain {
    /// Pixel grids draw every coordinate as k/255, k uniform in 0..255.
    bool pixels = false;
    /// Per-coordinate bounding box for non-pixel domains.
    std::vector<double> lo, hi;

    static InputDomain pixel_grid(std::size_t dims);
    static InputDomain bounding_box(const Dataset& ds);
    /// pixel_grid for image-like datasets, bounding_box otherwise.
    static InputDomain for_dataset(const Dataset& ds);

    std::size_t dims() const { return lo.size(); }
};

/// Seed matrix; row i comes from stream (seed, index_offset + i) so a batch
/// and its concatenated halves agree.
Matrix seed_init(std::size_t rows, const InputDomain& domain, std::uint64_t seed,
                 std::size_t index_offset = 0);

struct IriBatch {
    Matrix x;
    Matrix x_prime;
    /// ‖m₁(x′) − m₁(x)‖₂ / ‖m₁(x)‖₂ per row (see relative_residual).
    std::vector<double> residuals;
    IriMode mode = IriMode::arbitrary;
    std::vector<bool> accepted;  // residual ≤ delta

    std::size_t accepted_count() const;
    std::vector<std::size_t> accepted_indices() const;
    /// Mean ‖x − x′‖₂ over accepted rows (0 when none).
    double mean_distance() const;
    /// Mean ‖x − x′‖₂ over all rows.
    double mean_distance_all() const;
};

/// Relative residual, with the zero-denominator convention: 0 when the
/// numerator is ≤ 1e-12, +∞ otherwise.
double relative_residual(double numerator, double denominator);

/// Reference residuals of x′ against x at `tap`.
std::vector<double> residuals_at(const Model& m1, Tap tap, const Matrix& x, const Matrix& x_prime);

/// Descends d₁(x′) = distance of m₁(x′) to m₁(x) from random seeds.
IriBatch invert_arbitrary(const Model& m1, const Matrix& x, const InversionConfig& cfg,
                          const InputDomain& domain, std::size_t index_offset = 0);

/// Descends d₁(x′) − λ·d₂(x′) from random seeds; acceptance is still
/// judged on m₁ alone.
IriBatch invert_adversarial(const Model& m1, const Model& m2, const Matrix& x,
                            const InversionConfig& cfg, const InputDomain& domain,
                            std::size_t index_offset = 0);

/// Controversial stimuli: starts at x plus uniform noise in [−1e-3, 1e-3]
/// and descends d₁(x_c) − d₂(x_c).
IriBatch controversial(const Model& m1, const Model& m2, const Matrix& x,
                       const InversionConfig& cfg, std::size_t index_offset = 0);

/// Dispatch on mode; m2 is required unless mode is arbitrary.
IriBatch batch_iris(const Model& m1, const Model* m2, const Matrix& x, const InversionConfig& cfg,
                    IriMode mode, const InputDomain& domain, std::size_t index_offset = 0);

/// The tap on `m` matching the reference tap choice: same hidden index when
/// set, otherwise m's penultimate layer.
Tap resolve_tap(const Model& m, const std::optional<Tap>& tap);

}  // namespace stirkit
