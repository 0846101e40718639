#include "stirkit/iri.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "stirkit/error.hpp"
#include "stirkit/rng.hpp"

namespace stirkit {

namespace {

constexpr double kZeroResidual = 1e-12;
constexpr double kControversialNoise = 1e-3;

double row_distance(const Matrix& a, const Matrix& b, std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double d = a(i, j) - b(i, j);
        acc += d * d;
    }
    return std::sqrt(acc);
}

using RowRule = std::function<std::vector<bool>(const Matrix&)>;

// Plain gradient descent x′ ← x′ − α∇L per row. Each row returns its
// lowest-L iterate, so the final L never exceeds the initial one; with a
// `feasible` rule, feasible iterates rank ahead of infeasible ones. Rows whose
// objective turns non-finite stop at their best iterate and are flagged in
// `failed`. A row satisfying `stop` is frozen at that iterate.
Matrix descend(const Model& m1, Matrix start, const ScalarObjective& obj,
               const InversionConfig& cfg, std::vector<bool>& failed,
               const RowRule& stop = {}, const RowRule& feasible = {}) {
    const std::size_t n = start.rows();
    failed.assign(n, false);
    Matrix current = std::move(start);
    Matrix best = current;
    std::vector<double> best_value(n, std::numeric_limits<double>::infinity());
    std::vector<bool> best_feasible(n, false);
    std::vector<bool> active(n, true);

    auto keep = [&](std::size_t i) {
        auto src = current.row(i);
        std::copy(src.begin(), src.end(), best.row(i).begin());
    };
    auto track = [&](const std::vector<double>& values) {
        const std::vector<bool> ok = feasible ? feasible(current) : std::vector<bool>(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            if (!std::isfinite(values[i])) {
                failed[i] = true;
                active[i] = false;
                continue;
            }
            const bool better = ok[i] != best_feasible[i] ? ok[i] : values[i] < best_value[i];
            if (better) {
                best_value[i] = values[i];
                best_feasible[i] = ok[i];
                keep(i);
            }
        }
    };
    auto freeze = [&] {
        if (!stop) return;
        const auto done = stop(current);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i] || !done[i]) continue;
            active[i] = false;
            keep(i);
        }
    };

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        freeze();
        const ObjectiveEval eval = evaluate_objective(m1, current, obj);
        track(eval.values);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            auto row = current.row(i);
            auto gi = eval.grad.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                row[j] -= cfg.alpha * gi[j];
                if (cfg.clamp) row[j] = std::clamp(row[j], 0.0, 1.0);
            }
        }
    }
    freeze();
    track(objective_values(m1, current, obj));
    return best;
}

IriBatch assemble(const Model& m1, Tap tap, const Matrix& x, Matrix x_prime, IriMode mode,
                  const std::vector<bool>& failed, double delta) {
    IriBatch batch;
    batch.x = x;
    batch.residuals = residuals_at(m1, tap, x, x_prime);
    batch.x_prime = std::move(x_prime);
    batch.mode = mode;
    batch.accepted.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (failed[i]) batch.residuals[i] = std::numeric_limits<double>::infinity();
        batch.accepted[i] = batch.residuals[i] <= delta;
    }
    return batch;
}

RepresentationDistance distance_to(const Model& m, Tap tap, const Matrix& x, InversionLoss loss) {
    RepresentationDistance d{tap, forward(m, x, tap).values, loss == InversionLoss::scaled, {}};
    if (loss != InversionLoss::norm) {
        d.row_weights.resize(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            double sq = 0.0;
            for (double v : d.target.row(i)) sq += v * v;
            const double w = loss == InversionLoss::scaled ? 1.0 / sq : 1.0 / std::sqrt(sq);
            d.row_weights[i] = sq > 0.0 ? w : 1.0;
        }
    }
    return d;
}

void check_input(const Model& m, const Matrix& x) {
    if (x.cols() != m.arch.input_dim)
        throw DimensionError("inversion: input has " + std::to_string(x.cols()) +
                             " columns, model expects " + std::to_string(m.arch.input_dim));
}

}  // namespace

std::string to_string(IriMode mode) {
    switch (mode) {
        case IriMode::arbitrary: return "arbitrary";
        case IriMode::adversarial: return "adversarial";
        case IriMode::controversial: return "controversial";
    }
    return "arbitrary";
}

std::string to_string(InversionLoss loss) {
    switch (loss) {
        case InversionLoss::norm: return "norm";
        case InversionLoss::relative: return "relative";
        case InversionLoss::scaled: return "scaled";
    }
    return "norm";
}

InversionLoss parse_inversion_loss(const std::string& text) {
    if (text == "scaled") return InversionLoss::scaled;
    if (text == "norm") return InversionLoss::norm;
    if (text == "relative") return InversionLoss::relative;
    throw InvalidArgument("unknown inversion loss '" + text + "'");
}

IriMode parse_iri_mode(const std::string& text) {
    if (text == "arbitrary") return IriMode::arbitrary;
    if (text == "adversarial") return IriMode::adversarial;
    if (text == "controversial") return IriMode::controversial;
    throw InvalidArgument("unknown IRI mode '" + text + "'");
}

void InversionConfig::validate() const {
    if (!(alpha > 0.0)) throw InvalidArgument("inversion: alpha must be > 0");
    if (steps == 0) throw InvalidArgument("inversion: steps must be ≥ 1");
    if (!(delta > 0.0)) throw InvalidArgument("inversion: delta must be > 0");
    if (!std::isfinite(lambda)) throw InvalidArgument("inversion: lambda must be finite");
}

InputDomain InputDomain::pixel_grid(std::size_t dims) {
    return InputDomain{true, std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0)};
}

InputDomain InputDomain::bounding_box(const Dataset& ds) {
    InputDomain d{false, std::vector<double>(ds.dims(), 0.0), std::vector<double>(ds.dims(), 1.0)};
    if (ds.size() == 0) return d;
    for (std::size_t j = 0; j < ds.dims(); ++j) {
        d.lo[j] = d.hi[j] = ds.inputs(0, j);
        for (std::size_t i = 1; i < ds.size(); ++i) {
            d.lo[j] = std::min(d.lo[j], ds.inputs(i, j));
            d.hi[j] = std::max(d.hi[j], ds.inputs(i, j));
        }
    }
    return d;
}

InputDomain InputDomain::for_dataset(const Dataset& ds) {
    return ds.image_like ? pixel_grid(ds.dims()) : bounding_box(ds);
}

Matrix seed_init(std::size_t rows, const InputDomain& domain, std::uint64_t seed,
                 std::size_t index_offset) {
    Matrix out(rows, domain.dims());
    for (std::size_t i = 0; i < rows; ++i) {
        Rng rng = Rng::stream(seed, index_offset + i);
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (domain.pixels)
                row[j] = static_cast<double>(rng.uniform_index(256)) / 255.0;
            else
                row[j] = rng.uniform(domain.lo[j], domain.hi[j]);
        }
    }
    return out;
}

std::size_t IriBatch::accepted_count() const {
    return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
}

std::vector<std::size_t> IriBatch::accepted_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < accepted.size(); ++i)
        if (accepted[i]) idx.push_back(i);
    return idx;
}

double IriBatch::mean_distance() const {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (!accepted[i]) continue;
        acc += row_distance(x, x_prime, i);
        ++count;
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

double IriBatch::mean_distance_all() const {
    if (x.rows() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) acc += row_distance(x, x_prime, i);
    return acc / static_cast<double>(x.rows());
}

double relative_residual(double numerator, double denominator) {
    if (denominator > 0.0) return numerator / denominator;
    return numerator <= kZeroResidual ? 0.0 : std::numeric_limits<double>::infinity();
}

std::vector<double> residuals_at(const Model& m1, Tap tap, const Matrix& x, const Matrix& x_prime) {
    const Matrix r = forward(m1, x, tap).values;
    const Matrix rp = forward(m1, x_prime, tap).values;
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < r.cols(); ++j) {
            const double d = rp(i, j) - r(i, j);
            num += d * d;
            den += r(i, j) * r(i, j);
        }
        out[i] = relative_residual(std::sqrt(num), std::sqrt(den));
    }
    return out;
}

Tap resolve_tap(const Model& m, const std::optional<Tap>& tap) {
    if (!tap) return m.penultimate();
    m.validate_tap(*tap);
    return *tap;
}

IriBatch invert_arbitrary(const Model& m1, const Matrix& x, const InversionConfig& cfg,
                          const InputDomain& domain, std::size_t index_offset) {
    cfg.validate();
    check_input(m1, x);
    if (domain.dims() != x.cols()) throw DimensionError("inversion: domain dimension mismatch");
    const Tap tap = resolve_tap(m1, cfg.tap);
    std::vector<bool> failed;
    Matrix x_prime = descend(m1, seed_init(x.rows(), domain, cfg.seed, index_offset),
                             distance_to(m1, tap, x, cfg.loss), cfg, failed);
    return assemble(m1, tap, x, std::move(x_prime), IriMode::arbitrary, failed, cfg.delta);
}

IriBatch invert_adversarial(const Model& m1, const Model& m2, const Matrix& x,
                            const InversionConfig& cfg, const InputDomain& domain,
                            std::size_t index_offset) {
    cfg.validate();
    check_input(m1, x);
    check_input(m2, x);
    if (domain.dims() != x.cols()) throw DimensionError("inversion: domain dimension mismatch");
    const Tap tap = resolve_tap(m1, cfg.tap);
    const Tap tap2 = resolve_tap(m2, cfg.tap);
    ContrastiveDistance obj{distance_to(m1, tap, x, cfg.loss), &m2,
                            distance_to(m2, tap2, x, cfg.loss), cfg.lambda};
    const RowRule is_iri = [&](const Matrix& xp) {
        const auto r = residuals_at(m1, tap, x, xp);
        std::vector<bool> ok(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) ok[i] = r[i] <= cfg.delta;
        return ok;
    };
    std::vector<bool> failed;
    Matrix x_prime = descend(m1, seed_init(x.rows(), domain, cfg.seed, index_offset), obj, cfg,
                             failed, {}, is_iri);
    return assemble(m1, tap, x, std::move(x_prime), IriMode::adversarial, failed, cfg.delta);
}

IriBatch controversial(const Model& m1, const Model& m2, const Matrix& x,
                       const InversionConfig& cfg, std::size_t index_offset) {
    cfg.validate();
    check_input(m1, x);
    check_input(m2, x);
    const Tap tap = resolve_tap(m1, cfg.tap);
    const Tap tap2 = resolve_tap(m2, cfg.tap);
    Matrix start = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        Rng rng = Rng::stream(cfg.seed, index_offset + i);
        for (double& v : start.row(i)) {
            v += rng.uniform(-kControversialNoise, kControversialNoise);
            if (cfg.clamp) v = std::clamp(v, 0.0, 1.0);
        }
    }
    ContrastiveDistance obj{distance_to(m1, tap, x, cfg.loss), &m2,
                            distance_to(m2, tap2, x, cfg.loss), 1.0};
    RowRule stop;
    if (cfg.controversial_target > 0.0) {
        stop = [&](const Matrix& xc) {
            const auto r1 = residuals_at(m1, tap, x, xc);
            const auto r2 = residuals_at(m2, tap2, x, xc);
            std::vector<bool> done(xc.rows());
            for (std::size_t i = 0; i < done.size(); ++i)
                done[i] = r1[i] <= cfg.delta && r2[i] >= cfg.controversial_target;
            return done;
        };
    }
    std::vector<bool> failed;
    Matrix x_c = descend(m1, std::move(start), obj, cfg, failed, stop);
    return assemble(m1, tap, x, std::move(x_c), IriMode::controversial, failed, cfg.delta);
}

IriBatch batch_iris(const Model& m1, const Model* m2, const Matrix& x, const InversionConfig& cfg,
                    IriMode mode, const InputDomain& domain, std::size_t index_offset) {
    if (mode != IriMode::arbitrary && m2 == nullptr)
        throw InvalidArgument("batch_iris: mode " + to_string(mode) + " needs a second model");
    if (x.rows() == 0) {
        IriBatch empty;
        empty.x = x;
        empty.x_prime = x;
        empty.mode = mode;
        return empty;
    }
    switch (mode) {
        case IriMode::arbitrary: return invert_arbitrary(m1, x, cfg, domain, index_offset);
        case IriMode::adversarial: return invert_adversarial(m1, *m2, x, cfg, domain, index_offset);
        case IriMode::controversial: return controversial(m1, *m2, x, cfg, index_offset);
    }
    throw InvalidArgument("batch_iris: unknown mode");
}

}  // namespace stirkit
