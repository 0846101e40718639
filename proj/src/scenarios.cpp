#include "stirkit/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stirkit/error.hpp"

namespace stirkit {

ModeSelection parse_mode_selection(const std::string& text) {
    if (text == "arbitrary") return ModeSelection::arbitrary;
    if (text == "adversarial") return ModeSelection::adversarial;
    if (text == "both") return ModeSelection::both;
    throw InvalidArgument("unknown mode '" + text + "' (arbitrary|adversarial|both)");
}

std::string to_string(ModeSelection modes) {
    switch (modes) {
        case ModeSelection::arbitrary: return "arbitrary";
        case ModeSelection::adversarial: return "adversarial";
        case ModeSelection::both: return "both";
    }
    return "arbitrary";
}

DirectionSelection parse_direction_selection(const std::string& text) {
    if (text == "both") return DirectionSelection::both;
    if (text == "forward") return DirectionSelection::forward;
    if (text == "backward") return DirectionSelection::backward;
    throw InvalidArgument("unknown direction '" + text + "' (both|forward|backward)");
}

Json dataset_json(const Dataset& ds) {
    return Json{{"name", ds.name},
                {"samples", ds.size()},
                {"dims", ds.dims()},
                {"classes", ds.class_count},
                {"image_like", ds.image_like}};
}

Json model_json(const NamedModel& m) {
    return Json{{"id", m.id},
                {"arch", to_json(m.model->arch)},
                {"train", to_json(m.model->train_provenance)},
                {"init_seed", m.model->rng_seed}};
}

namespace {

void require(const NamedModel& m) {
    if (m.model == nullptr) throw InvalidArgument("model '" + m.id + "' is missing");
}

Json reports_json(const std::vector<StirReport>& reports) {
    Json out = Json::array();
    for (const auto& r : reports) out.push_back(to_json(r));
    return out;
}

std::string cell(double v) {
    if (!std::isfinite(v)) return "  nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

PairwiseResult run_pairwise(const NamedModel& reference, const NamedModel& target, const Dataset& ds,
                            const StirConfig& cfg, ModeSelection modes, DirectionSelection directions) {
    require(reference);
    require(target);
    std::vector<IriMode> mode_list;
    if (modes != ModeSelection::adversarial) mode_list.push_back(IriMode::arbitrary);
    if (modes != ModeSelection::arbitrary) mode_list.push_back(IriMode::adversarial);

    struct Job {
        const NamedModel* ref;
        const NamedModel* tgt;
    };
    std::vector<Job> jobs;
    if (directions != DirectionSelection::backward) jobs.push_back({&reference, &target});
    if (directions != DirectionSelection::forward) jobs.push_back({&target, &reference});

    PairwiseResult out;
    for (IriMode mode : mode_list) {
        for (const auto& job : jobs) {
            StirConfig c = cfg;
            c.mode = mode;
            if (mode == IriMode::adversarial) c.controversial_delta = false;
            out.reports.push_back(stir(*job.tgt->model, *job.ref->model, ds, c, {job.ref->id, job.tgt->id}));
        }
    }
    out.bundle.csv = stir_table(out.reports);
    out.bundle.report = Json{{"scenario", "pairwise"},
                             {"dataset", dataset_json(ds)},
                             {"models", {model_json(reference), model_json(target)}},
                             {"modes", to_string(modes)},
                             {"stir", to_json(cfg)},
                             {"results", reports_json(out.reports)}};
    return out;
}

LayerwiseScenario run_layerwise(const NamedModel& m1, const NamedModel& m2, const Dataset& ds,
                                const StirConfig& cfg) {
    require(m1);
    require(m2);
    LayerwiseScenario out;
    out.result = layerwise_stir(*m1.model, *m2.model, ds, cfg);
    out.bundle.csv.header = {"layer", "forward", "backward"};
    Json layers = Json::array();
    for (auto& p : out.result.layers) {
        p.forward.direction = {m1.id, m2.id};
        p.backward.direction = {m2.id, m1.id};
        out.bundle.csv.add_row({std::to_string(p.layer), format_real(p.forward.stir_mean),
                                format_real(p.backward.stir_mean)});
        layers.push_back(Json{{"layer", p.layer},
                              {"forward", to_json(p.forward)},
                              {"backward", to_json(p.backward)}});
    }
    out.bundle.svg = svg_scatter(out.bundle.csv.to_string());
    out.bundle.report = Json{{"scenario", "layerwise"},
                             {"dataset", dataset_json(ds)},
                             {"models", {model_json(m1), model_json(m2)}},
                             {"stir", to_json(cfg)},
                             {"forward", "STIR(" + m2.id + "|" + m1.id + ")"},
                             {"backward", "STIR(" + m1.id + "|" + m2.id + ")"},
                             {"layers", layers},
                             {"fit_forward", to_json(out.result.forward_fit)},
                             {"fit_backward", to_json(out.result.backward_fit)},
                             {"fit_combined", to_json(out.result.combined_fit)}};
    return out;
}

MatrixScenario run_matrix(const std::vector<NamedModel>& models, const Dataset& ds, const StirConfig& cfg) {
    if (models.size() < 2) throw InvalidArgument("matrix: need at least 2 models");
    for (const auto& m : models) require(m);
    MatrixScenario out;
    out.stir = Matrix(models.size(), models.size());
    out.bundle.csv.header = {"reference"};
    for (const auto& m : models) out.bundle.csv.header.push_back(m.id);
    std::vector<StirReport> reports;
    for (std::size_t i = 0; i < models.size(); ++i) {
        std::vector<std::string> row{models[i].id};
        for (std::size_t j = 0; j < models.size(); ++j) {
            reports.push_back(stir(*models[j].model, *models[i].model, ds, cfg, {models[i].id, models[j].id}));
            out.stir(i, j) = reports.back().stir_mean;
            row.push_back(format_real(out.stir(i, j)));
        }
        out.bundle.csv.add_row(std::move(row));
    }
    Json mj = Json::array();
    for (const auto& m : models) mj.push_back(model_json(m));
    out.bundle.report = Json{{"scenario", "matrix"},
                             {"dataset", dataset_json(ds)},
                             {"models", mj},
                             {"stir", to_json(cfg)},
                             {"cell", "STIR(column | row)"},
                             {"results", reports_json(reports)}};
    return out;
}

UpdateSimResult run_update_sim(const Dataset& ds, const UpdateSimConfig& cfg, const StirConfig& stir_cfg) {
    cfg.plan.validate(ds.size());
    cfg.arch.validate();
    if (cfg.plan.increments.size() < 2) throw InvalidArgument("update-sim: need at least 2 increments");

    UpdateSimResult out;
    Dataset eval_set;
    for (std::size_t t = 0; t < cfg.plan.increments.size(); ++t) {
        auto [train_set, holdout] = subset(ds, cfg.plan, t);
        if (t == 0) eval_set = holdout.size() > 0 ? holdout : ds;
        const Model start = cfg.warm_start && t > 0 ? out.models.back() : init_model(cfg.arch, cfg.init_seed);
        out.models.push_back(train(start, train_set, cfg.train));
        out.steps.push_back({t, train_set.size(), accuracy(out.models.back(), eval_set)});
    }

    std::vector<double> ts, fwd, bwd;
    out.bundle.csv.header = {"t", "stir_forward", "stir_backward"};
    Json transitions = Json::array();
    for (std::size_t t = 1; t < out.models.size(); ++t) {
        const std::string cur = "m" + std::to_string(t), prev = "m" + std::to_string(t - 1);
        UpdateTransition tr;
        tr.t = t;
        tr.forward = stir(out.models[t], out.models[t - 1], eval_set, stir_cfg, {prev, cur});
        tr.backward = stir(out.models[t - 1], out.models[t], eval_set, stir_cfg, {cur, prev});
        ts.push_back(static_cast<double>(t));
        fwd.push_back(tr.forward.stir_mean);
        bwd.push_back(tr.backward.stir_mean);
        out.bundle.csv.add_row({std::to_string(t), format_real(tr.forward.stir_mean),
                                format_real(tr.backward.stir_mean)});
        transitions.push_back(Json{{"t", t}, {"forward", to_json(tr.forward)}, {"backward", to_json(tr.backward)}});
        out.transitions.push_back(std::move(tr));
    }
    out.spearman_forward = ts.size() >= 2 ? spearman(ts, fwd) : 0.0;
    out.spearman_backward = ts.size() >= 2 ? spearman(ts, bwd) : 0.0;
    out.bundle.svg = svg_scatter(out.bundle.csv.to_string());

    Json steps = Json::array();
    for (const auto& s : out.steps)
        steps.push_back(Json{{"t", s.t}, {"train_size", s.train_size}, {"eval_accuracy", s.holdout_accuracy}});
    out.bundle.report = Json{{"scenario", "update_sim"},
                             {"dataset", dataset_json(ds)},
                             {"eval_set", dataset_json(eval_set)},
                             {"plan", Json{{"increments", cfg.plan.increments},
                                           {"holdout", cfg.plan.holdout},
                                           {"shuffle_seed", cfg.plan.shuffle_seed}}},
                             {"arch", to_json(cfg.arch)},
                             {"train", to_json(cfg.train)},
                             {"init_seed", cfg.init_seed},
                             {"warm_start", cfg.warm_start},
                             {"stir", to_json(stir_cfg)},
                             {"steps", steps},
                             {"transitions", transitions},
                             {"spearman_forward", json_number(out.spearman_forward)},
                             {"spearman_backward", json_number(out.spearman_backward)}};
    return out;
}

RobustnessScenario run_robustness_order(const std::vector<NamedModel>& models, const Dataset& ds,
                                        const StirConfig& cfg, double eps, std::size_t attack_iters) {
    if (models.size() < 2) throw InvalidArgument("robustness-order: need at least 2 models");
    for (const auto& m : models) require(m);
    RobustnessScenario out;
    for (const auto& m : models)
        out.ranked.push_back({m.id, m.model, robust_accuracy(*m.model, ds, eps, attack_iters)});
    out.input_order_confirmed = true;
    for (std::size_t i = 1; i < out.ranked.size(); ++i)
        if (!(out.ranked[i].robust_accuracy > out.ranked[i - 1].robust_accuracy))
            out.input_order_confirmed = false;

    out.rows = robustness_ordering(out.ranked, ds, cfg);
    out.all_hold = out.input_order_confirmed;
    for (const auto& r : out.rows) out.all_hold = out.all_hold && r.holds;

    const std::size_t n = models.size();
    auto index_of = [&](const std::string& id) {
        for (std::size_t i = 0; i < n; ++i)
            if (models[i].id == id) return i;
        throw InvalidArgument("robustness-order: duplicate or unknown id '" + id + "'");
    };
    std::vector<std::vector<const StirReport*>> cells(n, std::vector<const StirReport*>(n, nullptr));
    for (const auto& r : out.rows) {
        const std::size_t more = index_of(r.more_robust), less = index_of(r.less_robust);
        cells[more][less] = &r.less_given_more;
        cells[less][more] = &r.more_given_less;
    }

    out.bundle.csv.header = {"reference", "target", "stir_mean", "stir_stderr", "cka"};
    std::ostringstream table;
    std::size_t w = 12;
    for (const auto& m : models) w = std::max(w, m.id.size() + 2);
    const std::size_t cw = std::max<std::size_t>(w, 16);
    auto pad_to = [](const std::string& s, std::size_t width) {
        return s + std::string(width > s.size() ? width - s.size() : 1, ' ');
    };
    auto pad = [&](const std::string& s) { return pad_to(s, w); };
    table << pad("ref\\target");
    for (const auto& m : models) table << pad_to(m.id, cw);
    table << "robust_acc\n";
    for (std::size_t i = 0; i < n; ++i) {
        table << pad(models[i].id);
        for (std::size_t j = 0; j < n; ++j) {
            const StirReport* c = cells[i][j];
            if (c == nullptr) {
                table << pad_to("-", cw);
                continue;
            }
            table << pad_to(cell(c->stir_mean) + " (" + cell(c->cka_baseline) + ")", cw);
            out.bundle.csv.add_row({models[i].id, models[j].id, format_real(c->stir_mean),
                                    format_real(c->stir_stderr), format_real(c->cka_baseline)});
        }
        table << cell(out.ranked[i].robust_accuracy) << "\n";
    }
    Json verdicts = Json::array();
    for (const auto& r : out.rows) {
        table << (r.holds ? "holds  " : "FAILS  ");
        if (r.predicted)
            table << "STIR(" << r.less_robust << "|" << r.more_robust << ") = " << cell(r.less_given_more.stir_mean)
                  << " > STIR(" << r.more_robust << "|" << r.less_robust
                  << ") = " << cell(r.more_given_less.stir_mean) << "\n";
        else
            table << "tie in robust accuracy between " << r.more_robust << " and " << r.less_robust << "\n";
        verdicts.push_back(Json{{"more_robust", r.more_robust},
                                {"less_robust", r.less_robust},
                                {"robust_more", r.robust_more},
                                {"robust_less", r.robust_less},
                                {"stir_less_given_more", to_json(r.less_given_more)},
                                {"stir_more_given_less", to_json(r.more_given_less)},
                                {"predicted", r.predicted},
                                {"holds", r.holds}});
    }
    table << (out.input_order_confirmed ? "holds  " : "FAILS  ") << "robust accuracy increases along";
    for (const auto& m : models) table << " " << m.id;
    table << "\n";
    out.table = table.str();

    Json mj = Json::array(), acc = Json::object();
    for (const auto& m : models) mj.push_back(model_json(m));
    for (const auto& r : out.ranked) acc[r.id] = r.robust_accuracy;
    out.bundle.report = Json{{"scenario", "robustness_order"},
                             {"dataset", dataset_json(ds)},
                             {"models", mj},
                             {"stir", to_json(cfg)},
                             {"attack", Json{{"eps", eps}, {"iters", attack_iters}}},
                             {"robust_accuracy", acc},
                             {"input_order_confirmed", out.input_order_confirmed},
                             {"verdicts", verdicts},
                             {"all_hold", out.all_hold}};
    return out;
}

}  // namespace stirkit
