#include "stirkit/stir.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "stirkit/error.hpp"
#include "stirkit/rng.hpp"

namespace stirkit {

void StirConfig::validate() const {
    if (k == 0) throw InvalidArgument("stir: k must be ≥ 1");
    if (n < 2) throw InvalidArgument("stir: n must be ≥ 2");
    if (mode == IriMode::controversial)
        throw InvalidArgument("stir: mode must be arbitrary or adversarial");
    inversion.validate();
}

double agreement(const Model& m1, const Model& m2, const IriBatch& batch) {
    const auto idx = batch.accepted_indices();
    if (idx.empty()) throw InvalidArgument("agreement: no accepted samples");
    const Matrix xp = batch.x_prime.select_rows(idx);
    const auto p1 = predict(m1, xp);
    const auto p2 = predict(m2, xp);
    std::size_t same = 0;
    for (std::size_t i = 0; i < p1.size(); ++i) same += p1[i] == p2[i];
    return static_cast<double>(same) / static_cast<double>(p1.size());
}

namespace {

struct RunResult {
    bool ok = false;
    double score = 0.0;
    std::size_t accepted = 0;
    std::size_t agree = 0;
    double distance_sum = 0.0;
};

// Runs `task(i)` for i in [0, count) on up to `threads` workers. Each task
// writes only its own slot, so results never depend on scheduling.
template <typename Task>
void run_indexed(std::size_t count, std::size_t threads, Task&& task) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < count; i = next++) task(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double row_distance(const Matrix& a, const Matrix& b, std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    return std::sqrt(acc);
}

}  // namespace

StirReport stir(const Model& target, const Model& reference, const Dataset& ds,
                const StirConfig& cfg, const Direction& direction) {
    cfg.validate();
    if (target.arch.input_dim != reference.arch.input_dim)
        throw DimensionError("stir: models differ in input dimension");
    if (ds.dims() != reference.arch.input_dim)
        throw DimensionError("stir: dataset dimension does not match the models");
    const std::size_t n = std::min(cfg.n, ds.size());
    if (n < 2) throw InvalidArgument("stir: dataset has fewer than 2 samples");

    const InputDomain domain = InputDomain::for_dataset(ds);
    const Tap ref_tap = resolve_tap(reference, cfg.inversion.tap);
    const Tap tgt_tap = resolve_tap(target, cfg.inversion.tap);

    auto draw = [&](std::size_t run) {
        auto perm = Rng::stream(cfg.seed, run).permutation(ds.size());
        perm.resize(n);
        return ds.inputs.select_rows(perm);
    };

    std::vector<RunResult> results(cfg.k);
    run_indexed(cfg.k, cfg.threads, [&](std::size_t run) {
        const Matrix x = draw(run);
        InversionConfig inv = cfg.inversion;
        inv.seed = derive_seed(cfg.seed, 1000 + run);
        const IriBatch batch = batch_iris(reference, &target, x, inv, cfg.mode, domain);
        const auto idx = batch.accepted_indices();
        RunResult& out = results[run];
        out.accepted = idx.size();
        if (idx.empty()) return;
        const Matrix xa = x.select_rows(idx);
        const Matrix xpa = batch.x_prime.select_rows(idx);
        const auto p1 = predict(reference, xpa);
        const auto p2 = predict(target, xpa);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.agree += p1[i] == p2[i];
            out.distance_sum += row_distance(xa, xpa, i);
        }
        if (idx.size() < 2) return;
        try {
            out.score = std::clamp(similarity(cfg.rsm, forward(target, xa, tgt_tap).values,
                                              forward(target, xpa, tgt_tap).values),
                                   0.0, 1.0);
            out.ok = true;
        } catch (const NumericalError&) {
            out.ok = false;
        }
    });

    StirReport report;
    report.direction = direction;
    report.config = cfg;
    std::size_t accepted = 0, agree = 0;
    double distance_sum = 0.0;
    for (const auto& r : results) {
        accepted += r.accepted;
        agree += r.agree;
        distance_sum += r.distance_sum;
        if (r.ok)
            report.per_run.push_back(r.score);
        else
            ++report.failed_runs;
    }
    if (report.per_run.empty())
        throw NumericalError("stir: all " + std::to_string(cfg.k) +
                             " runs failed (fewer than 2 accepted IRIs or degenerate representation)");

    const double runs = static_cast<double>(report.per_run.size());
    report.stir_mean = std::accumulate(report.per_run.begin(), report.per_run.end(), 0.0) / runs;
    if (report.per_run.size() > 1) {
        double ss = 0.0;
        for (double v : report.per_run) ss += (v - report.stir_mean) * (v - report.stir_mean);
        report.stir_stderr = std::sqrt(ss / (runs - 1.0)) / std::sqrt(runs);
    }
    report.rejected_fraction =
        1.0 - static_cast<double>(accepted) / static_cast<double>(cfg.k * n);
    report.agreement = accepted == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(accepted);
    report.iri_distance = accepted == 0 ? 0.0 : distance_sum / static_cast<double>(accepted);
    report.delta_mean = report.iri_distance;

    const Matrix x0 = draw(0);
    try {
        report.cka_baseline = linear_cka(forward(reference, x0, ref_tap).values,
                                         forward(target, x0, tgt_tap).values);
    } catch (const NumericalError&) {
        report.cka_baseline = std::numeric_limits<double>::quiet_NaN();
    }
    if (cfg.controversial_delta) {
        InversionConfig inv = cfg.inversion;
        inv.seed = derive_seed(cfg.seed, 2000);
        report.delta_mean = controversial(reference, target, x0, inv).mean_distance_all();
    }
    return report;
}

LayerwiseResult layerwise_stir(const Model& m1, const Model& m2, const Dataset& ds,
                               const StirConfig& cfg) {
    if (m1.hidden_count() != m2.hidden_count())
        throw DimensionError("layerwise_stir: layer-count mismatch (" +
                             std::to_string(m1.hidden_count()) + " vs " +
                             std::to_string(m2.hidden_count()) + " hidden layers)");
    LayerwiseResult result;
    std::vector<double> xs, fwd, bwd, all_x, all_y;
    for (std::size_t l = 0; l < m1.hidden_count(); ++l) {
        StirConfig layer_cfg = cfg;
        layer_cfg.inversion.tap = Tap::hidden(l);
        LayerPoint p;
        p.layer = l;
        p.forward = stir(m2, m1, ds, layer_cfg, {"m1", "m2"});
        p.backward = stir(m1, m2, ds, layer_cfg, {"m2", "m1"});
        xs.push_back(static_cast<double>(l));
        fwd.push_back(p.forward.stir_mean);
        bwd.push_back(p.backward.stir_mean);
        all_x.insert(all_x.end(), {static_cast<double>(l), static_cast<double>(l)});
        all_y.insert(all_y.end(), {p.forward.stir_mean, p.backward.stir_mean});
        result.layers.push_back(std::move(p));
    }
    result.forward_fit = ols_fit(xs, fwd);
    result.backward_fit = ols_fit(xs, bwd);
    result.combined_fit = ols_fit(all_x, all_y);
    return result;
}

Matrix stir_matrix(const std::vector<Model>& models, const Dataset& ds, const StirConfig& cfg) {
    if (models.size() < 2) throw InvalidArgument("stir_matrix: need at least 2 models");
    Matrix out(models.size(), models.size());
    for (std::size_t i = 0; i < models.size(); ++i)
        for (std::size_t j = 0; j < models.size(); ++j)
            out(i, j) = stir(models[j], models[i], ds, cfg,
                             {"m" + std::to_string(i), "m" + std::to_string(j)})
                            .stir_mean;
    return out;
}

std::vector<OrderingRow> robustness_ordering(const std::vector<RankedModel>& models,
                                             const Dataset& ds, const StirConfig& cfg) {
    std::vector<OrderingRow> rows;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            const RankedModel* more = &models[i];
            const RankedModel* less = &models[j];
            if (less->robust_accuracy > more->robust_accuracy) std::swap(more, less);
            OrderingRow row;
            row.more_robust = more->id;
            row.less_robust = less->id;
            row.robust_more = more->robust_accuracy;
            row.robust_less = less->robust_accuracy;
            row.less_given_more = stir(*less->model, *more->model, ds, cfg, {more->id, less->id});
            row.more_given_less = stir(*more->model, *less->model, ds, cfg, {less->id, more->id});
            row.predicted = more->robust_accuracy != less->robust_accuracy;
            const double diff = row.less_given_more.stir_mean - row.more_given_less.stir_mean;
            row.holds = row.predicted
                            ? diff > 0.0
                            : std::abs(diff) <= row.less_given_more.stir_stderr +
                                                    row.more_given_less.stir_stderr;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("spearman: length mismatch");
    if (a.size() < 2) throw InvalidArgument("spearman: need at least 2 points");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace stirkit
