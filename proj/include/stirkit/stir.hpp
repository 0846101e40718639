#pragma once

// Similarity Through Inverted Representations: how much of a reference
// model's invariance a target model shares, scored by the target's
// representational similarity between inputs and the reference's IRIs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stirkit/dataset.hpp"
#include "stirkit/iri.hpp"
#include "stirkit/linalg.hpp"
#include "stirkit/model.hpp"
#include "stirkit/rsm.hpp"

namespace stirkit {

struct StirConfig {
    std::size_t k = 5;    // repetitions, each on a fresh sample of the data
    std::size_t n = 200;  // samples per repetition
    RsmKind rsm = RsmKind::linear_cka;
    InversionConfig inversion;
    IriMode mode = IriMode::arbitrary;  // arbitrary → STIR, adversarial → STIR_adv
    std::uint64_t seed = 0;
    /// Also generate controversial stimuli on run 0 and report their Δ.
    bool controversial_delta = false;
    /// Worker threads for the k runs; results do not depend on it.
    std::size_t threads = 1;

    void validate() const;
};

struct Direction {
    std::string reference = "m1";
    std::string target = "m2";
};

struct StirReport {
    double stir_mean = 0.0;
    double stir_stderr = 0.0;
    std::vector<double> per_run;  // successful runs only
    std::size_t failed_runs = 0;
    /// S_r(m₁(X), m₂(X)) on run 0's sample.
    double cka_baseline = 0.0;
    /// Prediction agreement of the two models on accepted x′, pooled over runs.
    double agreement = 0.0;
    /// Controversial-stimuli Δ when requested, else mean ‖x − x′‖₂ of accepted IRIs.
    double delta_mean = 0.0;
    /// Mean ‖x − x′‖₂ over accepted IRIs.
    double iri_distance = 0.0;
    double rejected_fraction = 0.0;
    Direction direction;
    StirConfig config;
};

/// STIR(target | reference): k runs of (sample X, invert on the reference,
/// score S_r(target(X), target(X′)) on accepted rows).
StirReport stir(const Model& target, const Model& reference, const Dataset& ds,
                const StirConfig& cfg, const Direction& direction = {});

/// Fraction of accepted x′ on which both models predict the same class.
double agreement(const Model& m1, const Model& m2, const IriBatch& batch);

struct LayerPoint {
    std::size_t layer = 0;
    StirReport forward;   // STIR(m2 | m1)
    StirReport backward;  // STIR(m1 | m2)
};

struct LayerwiseResult {
    std::vector<LayerPoint> layers;
    LineFit forward_fit;
    LineFit backward_fit;
    /// Fit over both directions' points together.
    LineFit combined_fit;
};

/// STIR at every matched hidden layer, in both directions, with OLS trend
/// lines over (layer, stir_mean). Needs ≥ 2 hidden layers for the fit.
LayerwiseResult layerwise_stir(const Model& m1, const Model& m2, const Dataset& ds,
                               const StirConfig& cfg);

/// Entry (i, j) = STIR(models[j] | models[i]) at the penultimate tap.
Matrix stir_matrix(const std::vector<Model>& models, const Dataset& ds, const StirConfig& cfg);

struct RankedModel {
    std::string id;
    const Model* model = nullptr;
    double robust_accuracy = 0.0;
};

struct OrderingRow {
    std::string more_robust;  // higher robust accuracy (first listed on ties)
    std::string less_robust;
    double robust_more = 0.0;
    double robust_less = 0.0;
    StirReport less_given_more;  // STIR(less | more)
    StirReport more_given_less;  // STIR(more | less)
    /// False when robust accuracies tie: no inequality is predicted.
    bool predicted = true;
    /// STIR(less | more) > STIR(more | less), or for ties |difference| within
    /// the summed standard errors.
    bool holds = false;
};

/// Both STIR directions for every pair, checking that a more robust
/// reference shares more of the other model's invariances than vice versa.
std::vector<OrderingRow> robustness_ordering(const std::vector<RankedModel>& models,
                                             const Dataset& ds, const StirConfig& cfg);

/// Spearman rank correlation with average ranks for ties. 0 when either
/// side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace stirkit
