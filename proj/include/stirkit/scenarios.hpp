#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite. Each returns typed results plus a ReportBundle ready to write.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stirkit/dataset.hpp"
#include "stirkit/model.hpp"
#include "stirkit/report.hpp"
#include "stirkit/stir.hpp"

namespace stirkit {

struct NamedModel {
    std::string id;
    const Model* model = nullptr;
};

enum class ModeSelection { arbitrary, adversarial, both };
ModeSelection parse_mode_selection(const std::string& text);
std::string to_string(ModeSelection modes);

/// forward = STIR(target | reference), backward = STIR(reference | target).
enum class DirectionSelection { both, forward, backward };
DirectionSelection parse_direction_selection(const std::string& text);

Json dataset_json(const Dataset& ds);
Json model_json(const NamedModel& m);

struct PairwiseResult {
    std::vector<StirReport> reports;
    ReportBundle bundle;
};

/// Adversarial-mode rows never generate controversial stimuli; their delta
/// column is the IRI distance.
PairwiseResult run_pairwise(const NamedModel& reference, const NamedModel& target, const Dataset& ds,
                            const StirConfig& cfg, ModeSelection modes = ModeSelection::arbitrary,
                            DirectionSelection directions = DirectionSelection::both);

struct LayerwiseScenario {
    LayerwiseResult result;
    ReportBundle bundle;  // CSV layer,forward,backward plus SVG
};

LayerwiseScenario run_layerwise(const NamedModel& m1, const NamedModel& m2, const Dataset& ds,
                                const StirConfig& cfg);

struct MatrixScenario {
    Matrix stir;  // (i, j) = STIR(models[j] | models[i])
    ReportBundle bundle;
};

MatrixScenario run_matrix(const std::vector<NamedModel>& models, const Dataset& ds, const StirConfig& cfg);

struct UpdateSimConfig {
    SplitPlan plan;
    Architecture arch;
    TrainConfig train;
    std::uint64_t init_seed = 0;
    /// Continue from m_{t−1}; false retrains every step from the same init.
    bool warm_start = true;
};

struct UpdateStep {
    std::size_t t = 0;
    std::size_t train_size = 0;
    double holdout_accuracy = 0.0;
};

struct UpdateTransition {
    std::size_t t = 0;
    StirReport forward;   // STIR(m_t | m_{t−1})
    StirReport backward;  // STIR(m_{t−1} | m_t)
};

struct UpdateSimResult {
    std::vector<UpdateStep> steps;
    std::vector<UpdateTransition> transitions;
    double spearman_forward = 0.0;   // of STIR(m_t | m_{t−1}) against t
    double spearman_backward = 0.0;
    std::vector<Model> models;
    ReportBundle bundle;  // CSV t,stir_forward,stir_backward plus SVG
};

/// STIR is measured on the holdout split (the whole dataset when the plan
/// has no holdout).
UpdateSimResult run_update_sim(const Dataset& ds, const UpdateSimConfig& cfg, const StirConfig& stir_cfg);

struct RobustnessScenario {
    std::vector<RankedModel> ranked;
    std::vector<OrderingRow> rows;
    /// Robust accuracy strictly increases along the input order.
    bool input_order_confirmed = false;
    bool all_hold = false;
    std::string table;  // STIR(column | row) with CKA in parentheses
    ReportBundle bundle;
};

/// `models` in expected order of increasing robustness (e.g. vanilla, AT
/// with 1 iteration, AT with 10). Robust accuracy is measured on `ds` under
/// a PGD-ℓ2 attack of radius `eps`.
RobustnessScenario run_robustness_order(const std::vector<NamedModel>& models, const Dataset& ds,
                                        const StirConfig& cfg, double eps, std::size_t attack_iters);

}  // namespace stirkit
