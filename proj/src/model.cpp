#include "stirkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stirkit/error.hpp"
#include "stirkit/rng.hpp"

namespace stirkit {

void Architecture::validate() const {
    if (input_dim == 0) throw InvalidArgument("architecture: input_dim must be ≥ 1");
    if (hidden.empty()) throw InvalidArgument("architecture: need at least one hidden layer");
    for (std::size_t w : hidden)
        if (w == 0) throw InvalidArgument("architecture: hidden widths must be ≥ 1");
    if (class_count == 0) throw InvalidArgument("architecture: class_count must be ≥ 1");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::vanilla: return "vanilla";
        case LossKind::at: return "at";
        case LossKind::trades: return "trades";
    }
    return "vanilla";
}

LossKind parse_loss_kind(const std::string& text) {
    if (text == "vanilla") return LossKind::vanilla;
    if (text == "at") return LossKind::at;
    if (text == "trades") return LossKind::trades;
    throw InvalidArgument("unknown loss '" + text + "' (vanilla|at|trades)");
}

void TrainConfig::validate() const {
    if (batch == 0) throw InvalidArgument("train config: batch must be ≥ 1");
    if (!(lr > 0.0)) throw InvalidArgument("train config: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw InvalidArgument("train config: momentum must be in [0,1)");
    if (loss != LossKind::vanilla) {
        if (!(at_eps > 0.0)) throw InvalidArgument("train config: at_eps must be > 0");
        if (at_iters == 0) throw InvalidArgument("train config: at_iters must be ≥ 1");
        if (at_step < 0.0) throw InvalidArgument("train config: at_step must be ≥ 0");
    }
    if (loss == LossKind::trades && !(trades_beta >= 0.0))
        throw InvalidArgument("train config: trades_beta must be ≥ 0");
}

double TrainConfig::effective_at_step() const {
    return at_step > 0.0 ? at_step : 2.5 * at_eps / static_cast<double>(at_iters);
}

std::string Tap::to_string() const {
    return logits_ ? std::string("logits") : std::to_string(layer_);
}

std::size_t Model::width(Tap tap) const {
    validate_tap(tap);
    return tap.is_logits() ? arch.class_count : arch.hidden[tap.layer()];
}

void Model::validate_tap(Tap tap) const {
    if (!tap.is_logits() && tap.layer() >= arch.hidden.size())
        throw InvalidArgument("invalid tap " + tap.to_string() + ": model has " +
                              std::to_string(arch.hidden.size()) + " hidden layers");
}

void Model::validate() const {
    arch.validate();
    if (layers.size() != arch.layer_count())
        throw InvalidArgument("model: expected " + std::to_string(arch.layer_count()) +
                              " layers, found " + std::to_string(layers.size()));
    std::size_t fan_in = arch.input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::size_t out = l < arch.hidden.size() ? arch.hidden[l] : arch.class_count;
        const auto& layer = layers[l];
        if (layer.weights.rows() != out || layer.weights.cols() != fan_in ||
            layer.bias.size() != out)
            throw DimensionError("model: layer " + std::to_string(l) + " has wrong shape");
        if (!layer.weights.all_finite() ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), [](double b) { return std::isfinite(b); }))
            throw NumericalError("model: non-finite parameter in layer " + std::to_string(l));
        fan_in = out;
    }
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    Model m;
    m.arch = arch;
    m.rng_seed = seed;
    Rng rng = Rng::stream(seed, 0);
    std::size_t fan_in = arch.input_dim;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const std::size_t out = l < arch.hidden.size() ? arch.hidden[l] : arch.class_count;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        DenseLayer layer{Matrix(out, fan_in), std::vector<double>(out, 0.0)};
        for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
        m.layers.push_back(std::move(layer));
        fan_in = out;
    }
    return m;
}

namespace {

std::size_t layer_index(const Model& m, Tap tap) {
    m.validate_tap(tap);
    return tap.is_logits() ? m.arch.hidden.size() : tap.layer();
}

// Activations of layers 0..top. post[l] is the layer output (ReLU applied
// on hidden layers); pre[l] the affine output.
struct Trace {
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
};

Trace run_forward(const Model& m, const Matrix& x, std::size_t top) {
    if (x.cols() != m.arch.input_dim)
        throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                             " columns, model expects " + std::to_string(m.arch.input_dim));
    Trace t;
    t.pre.reserve(top + 1);
    t.post.reserve(top + 1);
    for (std::size_t l = 0; l <= top; ++l) {
        const Matrix& in = l == 0 ? x : t.post[l - 1];
        const DenseLayer& layer = m.layers[l];
        Matrix z = matmul_nt(in, layer.weights);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto row = z.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
        }
        Matrix a = z;
        if (l < m.arch.hidden.size())
            for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
        t.pre.push_back(std::move(z));
        t.post.push_back(std::move(a));
    }
    return t;
}

// Backpropagates `grad` (w.r.t. post[top]) down to the input. Adds parameter
// gradients into `pg` when given.
Matrix run_backward(const Model& m, const Matrix& x, const Trace& t, std::size_t top, Matrix grad,
                    ParamGrads* pg) {
    for (std::size_t l = top + 1; l-- > 0;) {
        if (l < m.arch.hidden.size()) {
            const Matrix& z = t.pre[l];
            for (std::size_t k = 0; k < grad.size(); ++k)
                if (!(z.values()[k] > 0.0)) grad.values()[k] = 0.0;
        }
        if (pg != nullptr) {
            const Matrix& in = l == 0 ? x : t.post[l - 1];
            Matrix dw = matmul_tn(grad, in);
            auto& acc_w = pg->weights[l];
            for (std::size_t k = 0; k < dw.size(); ++k) acc_w.values()[k] += dw.values()[k];
            auto& acc_b = pg->biases[l];
            for (std::size_t i = 0; i < grad.rows(); ++i) {
                auto row = grad.row(i);
                for (std::size_t j = 0; j < row.size(); ++j) acc_b[j] += row[j];
            }
        }
        grad = matmul(grad, m.layers[l].weights);
    }
    return grad;
}

ParamGrads zero_grads(const Model& m) {
    ParamGrads g;
    for (const auto& layer : m.layers) {
        g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
        g.biases.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        for (double& v : row) v -= lse;
    }
    return out;
}

void require_rows(const Matrix& a, std::size_t rows, const char* what) {
    if (a.rows() != rows)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) +
                             " rows, got " + std::to_string(a.rows()));
}

// Per-row value and gradient w.r.t. the tapped output for single-model terms.
struct OutputTerm {
    std::vector<double> values;
    Matrix grad;
};

OutputTerm distance_term(const Matrix& out, const RepresentationDistance& d) {
    if (out.rows() != d.target.rows() || out.cols() != d.target.cols())
        throw DimensionError("representation distance: target shape mismatch");
    if (!d.row_weights.empty() && d.row_weights.size() != out.rows())
        throw DimensionError("representation distance: row weight count mismatch");
    OutputTerm t{std::vector<double>(out.rows()), Matrix(out.rows(), out.cols())};
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double w = d.row_weights.empty() ? 1.0 : d.row_weights[i];
        double sq = 0.0;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            const double r = out(i, j) - d.target(i, j);
            sq += r * r;
        }
        if (d.squared) {
            t.values[i] = w * 0.5 * sq;
            for (std::size_t j = 0; j < out.cols(); ++j) t.grad(i, j) = w * (out(i, j) - d.target(i, j));
        } else {
            const double norm = std::sqrt(sq);
            t.values[i] = w * norm;
            if (norm > 0.0)
                for (std::size_t j = 0; j < out.cols(); ++j)
                    t.grad(i, j) = w * (out(i, j) - d.target(i, j)) / norm;
        }
    }
    return t;
}

OutputTerm cross_entropy_term(const Matrix& logits, std::span<const std::size_t> labels) {
    if (labels.size() != logits.rows())
        throw DimensionError("cross entropy: label count does not match batch size");
    const Matrix logp = log_softmax_rows(logits);
    OutputTerm t{std::vector<double>(logits.rows()), Matrix(logits.rows(), logits.cols())};
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (labels[i] >= logits.cols()) throw InvalidArgument("cross entropy: label out of range");
        t.values[i] = -logp(i, labels[i]);
        for (std::size_t j = 0; j < logits.cols(); ++j) t.grad(i, j) = std::exp(logp(i, j));
        t.grad(i, labels[i]) -= 1.0;
    }
    return t;
}

// KL(p ‖ softmax(z)) with p fixed: value and gradient q − p.
OutputTerm kl_term(const Matrix& logits, const Matrix& p) {
    if (p.rows() != logits.rows() || p.cols() != logits.cols())
        throw DimensionError("KL divergence: reference distribution shape mismatch");
    const Matrix logq = log_softmax_rows(logits);
    OutputTerm t{std::vector<double>(logits.rows(), 0.0), Matrix(logits.rows(), logits.cols())};
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double kl = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            const double pj = p(i, j);
            if (pj > 0.0) kl += pj * (std::log(pj) - logq(i, j));
            t.grad(i, j) = std::exp(logq(i, j)) - pj;
        }
        t.values[i] = kl;
    }
    return t;
}

struct SingleModelPass {
    std::vector<double> values;
    Matrix input_grad;
};

SingleModelPass single_model_pass(const Model& m, const Matrix& x, Tap tap, bool want_grad,
                                  auto&& make_term) {
    const std::size_t top = layer_index(m, tap);
    const Trace t = run_forward(m, x, top);
    OutputTerm term = make_term(t.post[top]);
    SingleModelPass pass{std::move(term.values), Matrix()};
    if (want_grad) pass.input_grad = run_backward(m, x, t, top, std::move(term.grad), nullptr);
    return pass;
}

SingleModelPass evaluate(const Model& m, const Matrix& x, const ScalarObjective& obj,
                         bool want_grad) {
    const std::size_t n = x.rows();
    return std::visit(
        [&](const auto& o) -> SingleModelPass {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, RepresentationDistance>) {
                require_rows(o.target, n, "representation distance target");
                return single_model_pass(m, x, o.tap, want_grad,
                                         [&](const Matrix& out) { return distance_term(out, o); });
            } else if constexpr (std::is_same_v<T, CrossEntropy>) {
                return single_model_pass(m, x, Tap::logits(), want_grad, [&](const Matrix& out) {
                    return cross_entropy_term(out, o.labels);
                });
            } else if constexpr (std::is_same_v<T, KlDivergence>) {
                require_rows(o.reference_probs, n, "KL reference distribution");
                return single_model_pass(m, x, Tap::logits(), want_grad, [&](const Matrix& out) {
                    return kl_term(out, o.reference_probs);
                });
            } else {
                if (o.other == nullptr) throw InvalidArgument("contrastive objective: no second model");
                if (o.other->arch.input_dim != m.arch.input_dim)
                    throw DimensionError("contrastive objective: models differ in input dimension");
                require_rows(o.first.target, n, "contrastive target");
                require_rows(o.second.target, n, "contrastive second target");
                auto first = single_model_pass(m, x, o.first.tap, want_grad, [&](const Matrix& out) {
                    return distance_term(out, o.first);
                });
                auto second =
                    single_model_pass(*o.other, x, o.second.tap, want_grad, [&](const Matrix& out) {
                        return distance_term(out, o.second);
                    });
                for (std::size_t i = 0; i < n; ++i) first.values[i] -= o.weight * second.values[i];
                if (want_grad)
                    for (std::size_t k = 0; k < first.input_grad.size(); ++k)
                        first.input_grad.values()[k] -= o.weight * second.input_grad.values()[k];
                return first;
            }
        },
        obj);
}

}  // namespace

Representation forward(const Model& m, const Matrix& x, Tap tap) {
    const std::size_t top = layer_index(m, tap);
    Trace t = run_forward(m, x, top);
    return Representation{tap, std::move(t.post[top])};
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        auto row = p.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) sum += (v = std::exp(v - mx));
        for (double& v : row) v /= sum;
    }
    return p;
}

std::vector<std::size_t> predict(const Model& m, const Matrix& x) {
    const Matrix logits = forward(m, x, Tap::logits()).values;
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        // max_element returns the first maximum: ties go to the lower index.
        out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

std::vector<double> objective_values(const Model& m, const Matrix& x, const ScalarObjective& obj) {
    return evaluate(m, x, obj, false).values;
}

Matrix input_grad(const Model& m, const Matrix& x, const ScalarObjective& obj) {
    return evaluate(m, x, obj, true).input_grad;
}

ObjectiveEval evaluate_objective(const Model& m, const Matrix& x, const ScalarObjective& obj) {
    auto pass = evaluate(m, x, obj, true);
    return ObjectiveEval{std::move(pass.values), std::move(pass.input_grad)};
}

LossEval training_loss(const Model& m, const Matrix& x, std::span<const std::size_t> labels,
                       const Matrix& x_adv, LossKind kind, double trades_beta) {
    const std::size_t n = x.rows();
    if (n == 0) throw InvalidArgument("training_loss: empty batch");
    if (labels.size() != n) throw DimensionError("training_loss: label count mismatch");
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t top = m.arch.hidden.size();
    LossEval eval{0.0, zero_grads(m)};

    if (kind == LossKind::vanilla || kind == LossKind::at) {
        const Matrix& input = kind == LossKind::at ? x_adv : x;
        if (input.rows() != n || input.cols() != x.cols())
            throw DimensionError("training_loss: adversarial batch shape mismatch");
        const Trace t = run_forward(m, input, top);
        OutputTerm ce = cross_entropy_term(t.post[top], labels);
        eval.loss = std::accumulate(ce.values.begin(), ce.values.end(), 0.0) * inv_n;
        run_backward(m, input, t, top, scale(ce.grad, inv_n), &eval.grads);
        return eval;
    }

    if (x_adv.rows() != n || x_adv.cols() != x.cols())
        throw DimensionError("training_loss: adversarial batch shape mismatch");
    const Trace clean = run_forward(m, x, top);
    const Trace adv = run_forward(m, x_adv, top);
    const Matrix& z = clean.post[top];
    const Matrix& z_adv = adv.post[top];
    OutputTerm ce = cross_entropy_term(z, labels);

    // KL(p ‖ q), p = softmax(z), q = softmax(z_adv); both sides carry gradient.
    const Matrix logp = log_softmax_rows(z);
    const Matrix logq = log_softmax_rows(z_adv);
    Matrix grad_clean = ce.grad;
    Matrix grad_adv(n, z.cols());
    double ce_sum = std::accumulate(ce.values.begin(), ce.values.end(), 0.0);
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double kl = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) kl += std::exp(logp(i, j)) * (logp(i, j) - logq(i, j));
        kl_sum += kl;
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const double p = std::exp(logp(i, j));
            grad_clean(i, j) += trades_beta * p * ((logp(i, j) - logq(i, j)) - kl);
            grad_adv(i, j) = trades_beta * (std::exp(logq(i, j)) - p);
        }
    }
    eval.loss = (ce_sum + trades_beta * kl_sum) * inv_n;
    run_backward(m, x, clean, top, scale(grad_clean, inv_n), &eval.grads);
    run_backward(m, x_adv, adv, top, scale(grad_adv, inv_n), &eval.grads);
    return eval;
}

Matrix pgd_l2(const Model& m, const Matrix& x, const ScalarObjective& obj, const PgdOptions& opt) {
    if (!(opt.eps > 0.0)) throw InvalidArgument("pgd: eps must be > 0");
    const double step = opt.step > 0.0 ? opt.step : 2.5 * opt.eps / static_cast<double>(opt.iters);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Matrix delta(n, d);

    auto project = [&](std::size_t i) {
        auto row = delta.row(i);
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > opt.eps) {
            const double f = opt.eps / norm;
            for (double& v : row) v *= f;
        }
        for (std::size_t j = 0; j < d; ++j)
            row[j] = std::clamp(x(i, j) + row[j], 0.0, 1.0) - x(i, j);
    };

    if (opt.start_noise > 0.0) {
        Rng rng = Rng::stream(opt.seed, 0);
        for (double& v : delta.values()) v = opt.start_noise * rng.normal();
        for (std::size_t i = 0; i < n; ++i) project(i);
    }

    Matrix x_adv = add(x, delta);
    for (std::size_t it = 0; it < opt.iters; ++it) {
        const Matrix g = input_grad(m, x_adv, obj);
        for (std::size_t i = 0; i < n; ++i) {
            auto gi = g.row(i);
            double norm = 0.0;
            for (double v : gi) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                auto di = delta.row(i);
                for (std::size_t j = 0; j < d; ++j) di[j] += step * gi[j] / norm;
            }
            project(i);
        }
        x_adv = add(x, delta);
    }
    return x_adv;
}

Model train(const Model& m, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    m.validate();
    if (ds.size() == 0) throw InvalidArgument("train: empty dataset");
    if (ds.dims() != m.arch.input_dim)
        throw DimensionError("train: dataset has " + std::to_string(ds.dims()) +
                             " features, model expects " + std::to_string(m.arch.input_dim));
    for (std::size_t y : ds.labels)
        if (y >= m.arch.class_count) throw InvalidArgument("train: label exceeds class count");

    Model out = m;
    out.train_provenance = cfg;
    ParamGrads velocity = zero_grads(out);
    Rng order_rng = Rng::stream(cfg.seed, 1);
    const std::size_t n = ds.size();
    const std::size_t batch = std::min(cfg.batch, n);
    std::uint64_t batch_counter = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto perm = order_rng.permutation(n);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            const std::span<const std::size_t> idx(perm.data() + start, stop - start);
            const Matrix xb = ds.inputs.select_rows(idx);
            std::vector<std::size_t> yb;
            yb.reserve(idx.size());
            for (std::size_t i : idx) yb.push_back(ds.labels[i]);

            Matrix x_adv;
            if (cfg.loss == LossKind::at) {
                x_adv = pgd_l2(out, xb, CrossEntropy{yb},
                               PgdOptions{cfg.at_eps, cfg.at_iters, cfg.effective_at_step(), 0.0, 0});
            } else if (cfg.loss == LossKind::trades) {
                const Matrix p = softmax_rows(forward(out, xb, Tap::logits()).values);
                x_adv = pgd_l2(out, xb, KlDivergence{p},
                               PgdOptions{cfg.at_eps, cfg.at_iters, cfg.effective_at_step(), 1e-3,
                                          derive_seed(cfg.seed, 1000 + batch_counter)});
            }
            ++batch_counter;

            const LossEval eval = training_loss(out, xb, yb, x_adv, cfg.loss, cfg.trades_beta);
            if (!std::isfinite(eval.loss))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     " (learning rate " + std::to_string(cfg.lr) +
                                     " likely too high)");
            for (std::size_t l = 0; l < out.layers.size(); ++l) {
                auto& w = out.layers[l].weights.values();
                auto& vw = velocity.weights[l].values();
                const auto& gw = eval.grads.weights[l].values();
                for (std::size_t k = 0; k < w.size(); ++k) {
                    vw[k] = cfg.momentum * vw[k] + gw[k];
                    w[k] -= cfg.lr * vw[k];
                }
                auto& b = out.layers[l].bias;
                auto& vb = velocity.biases[l];
                const auto& gb = eval.grads.biases[l];
                for (std::size_t k = 0; k < b.size(); ++k) {
                    vb[k] = cfg.momentum * vb[k] + gb[k];
                    b[k] -= cfg.lr * vb[k];
                }
            }
        }
    }
    for (const auto& layer : out.layers)
        if (!layer.weights.all_finite())
            throw NumericalError("train: parameters diverged (learning rate too high)");
    return out;
}

double accuracy(const Model& m, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    const auto pred = predict(m, ds.inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

double robust_accuracy(const Model& m, const Dataset& ds, double eps, std::size_t iters,
                       double step) {
    if (!(eps > 0.0)) throw InvalidArgument("robust_accuracy: eps must be > 0");
    if (iters == 0) throw InvalidArgument("robust_accuracy: iters must be ≥ 1");
    if (ds.size() == 0) return 0.0;
    const Matrix x_adv = pgd_l2(m, ds.inputs, CrossEntropy{ds.labels}, PgdOptions{eps, iters, step, 0.0, 0});
    const auto pred = predict(m, x_adv);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace stirkit
