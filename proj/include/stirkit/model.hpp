#pragma once

// ReLU multilayer perceptrons with tappable hidden representations,
// analytic input/parameter gradients, and vanilla / adversarial (PGD-ℓ2) /
// TRADES training.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "stirkit/dataset.hpp"
#include "stirkit/linalg.hpp"

namespace stirkit {

enum class Activation { relu };

struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t class_count = 0;
    Activation activation = Activation::relu;

    void validate() const;
    /// Hidden layers plus the logit layer.
    std::size_t layer_count() const { return hidden.size() + 1; }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class LossKind { vanilla, at, trades };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct TrainConfig {
    LossKind loss = LossKind::vanilla;
    std::size_t epochs = 0;
    std::size_t batch = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double at_eps = 1.0;        // ℓ2 radius of the threat model
    std::size_t at_iters = 10;  // inner PGD iterations
    double at_step = 0.0;       // 0 selects 2.5·at_eps/at_iters
    double trades_beta = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    double effective_at_step() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Which layer output to read: a hidden layer (post-ReLU) or the logits.
class Tap {
  public:
    static Tap hidden(std::size_t layer) { return Tap(layer, false); }
    static Tap logits() { return Tap(0, true); }

    bool is_logits() const { return logits_; }
    /// Hidden-layer index; meaningless for the logit tap.
    std::size_t layer() const { return layer_; }

    std::string to_string() const;

    friend bool operator==(const Tap&, const Tap&) = default;

  private:
    Tap(std::size_t layer, bool logits) : layer_(layer), logits_(logits) {}
    std::size_t layer_;
    bool logits_;
};

struct DenseLayer {
    Matrix weights;             // out × in
    std::vector<double> bias;   // out

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct Model {
    Architecture arch;
    std::vector<DenseLayer> layers;  // hidden layers then the logit layer
    TrainConfig train_provenance;
    std::uint64_t rng_seed = 0;

    /// Last hidden layer, the default comparison point.
    Tap penultimate() const { return Tap::hidden(arch.hidden.size() - 1); }
    std::size_t hidden_count() const { return arch.hidden.size(); }
    /// Width of the representation at `tap`.
    std::size_t width(Tap tap) const;
    void validate_tap(Tap tap) const;

    /// Throws if shapes disagree with `arch` or a parameter is non-finite.
    void validate() const;
};

/// He-uniform weights (bound √(6/fan_in)), zero biases.
Model init_model(const Architecture& arch, std::uint64_t seed);

struct Representation {
    Tap tap;
    Matrix values;  // n × width(tap)
};

Representation forward(const Model& m, const Matrix& x, Tap tap);

/// Argmax of logits, ties to the lowest class index.
std::vector<std::size_t> predict(const Model& m, const Matrix& x);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

// ---------------------------------------------------------------------------
// Scalar objectives. Each is a sum over rows of a per-row term, so the
// gradient of row i only depends on x_i.
// ---------------------------------------------------------------------------

/// Σ_i w_i‖m(x_i) − t_i‖₂ at `tap`, or Σ_i w_i·½‖m(x_i) − t_i‖₂² when
/// `squared`. Empty `row_weights` means w_i = 1.
struct RepresentationDistance {
    Tap tap;
    Matrix target;
    bool squared = false;
    std::vector<double> row_weights;
};

/// Σ_i −log softmax(m(x_i))[y_i]; the PGD attack objective.
struct CrossEntropy {
    std::vector<std::size_t> labels;
};

/// Σ_i KL(p_i ‖ softmax(m(x_i))) for fixed reference distributions p_i.
struct KlDivergence {
    Matrix reference_probs;
};

/// d(m(x_i), t_i) − weight·d(o(x_i), u_i) for a second model `o`, with d
/// the (optionally squared, row-weighted) distance of RepresentationDistance.
/// Drives adversarial IRIs and controversial stimuli.
struct ContrastiveDistance {
    RepresentationDistance first;
    const Model* other = nullptr;
    RepresentationDistance second;
    double weight = 1.0;
};

using ScalarObjective =
    std::variant<RepresentationDistance, CrossEntropy, KlDivergence, ContrastiveDistance>;

/// Per-row objective terms.
std::vector<double> objective_values(const Model& m, const Matrix& x, const ScalarObjective& obj);

/// ∂(Σ_i term_i)/∂x, same shape as x. Norm terms use the zero subgradient
/// at a zero residual.
Matrix input_grad(const Model& m, const Matrix& x, const ScalarObjective& obj);

struct ObjectiveEval {
    std::vector<double> values;  // per row
    Matrix grad;                 // w.r.t. x
};

/// Per-row values and input gradient from a single forward/backward pass.
ObjectiveEval evaluate_objective(const Model& m, const Matrix& x, const ScalarObjective& obj);

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

struct LossEval {
    double loss = 0.0;
    ParamGrads grads;
};

/// Batch-mean training loss and its parameter gradient, with the
/// adversarial batch held fixed (Danskin). `x_adv` is ignored for vanilla.
///   vanilla: CE(x)        at: CE(x_adv)
///   trades:  CE(x) + β·KL(softmax(m(x)) ‖ softmax(m(x_adv)))
LossEval training_loss(const Model& m, const Matrix& x, std::span<const std::size_t> labels,
                       const Matrix& x_adv, LossKind kind, double trades_beta);

struct PgdOptions {
    double eps = 1.0;
    std::size_t iters = 10;
    double step = 0.0;  // 0 selects 2.5·eps/iters
    /// Per-coordinate N(0, start_noise²) offset of the starting point.
    double start_noise = 0.0;
    std::uint64_t seed = 0;
};

/// Projected ℓ2 ascent on `obj` from x: normalized-gradient steps, then
/// projection onto ‖δ‖₂ ≤ eps, then clamping to [0,1].
Matrix pgd_l2(const Model& m, const Matrix& x, const ScalarObjective& obj, const PgdOptions& opt);

/// SGD with momentum (PyTorch convention v ← μv + g, w ← w − lr·v).
/// Throws NumericalError on a non-finite loss.
Model train(const Model& m, const Dataset& ds, const TrainConfig& cfg);

double accuracy(const Model& m, const Dataset& ds);

/// Fraction of samples classified correctly after a PGD-ℓ2 cross-entropy
/// attack started at the clean input.
double robust_accuracy(const Model& m, const Dataset& ds, double eps, std::size_t iters,
                       double step = 0.0);

// ---------------------------------------------------------------------------
// Checkpoints: a JSON document, format_version 1.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

std::string checkpoint_to_string(const Model& m);
Model checkpoint_from_string(const std::string& text);
void save_checkpoint(const Model& m, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace stirkit
