// stirkit: data generation, training and shared-invariance experiments.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical abort,
// 3 a predicted inequality failed (robustness-order).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stirkit/dataset.hpp"
#include "stirkit/error.hpp"
#include "stirkit/model.hpp"
#include "stirkit/report.hpp"
#include "stirkit/scenarios.hpp"
#include "stirkit/stir.hpp"

namespace fs = std::filesystem;
using namespace stirkit;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerdict = 3;

struct DataOpts {
    std::string data;
    std::string labels;  // set → --data is an IDX image file
    std::size_t limit = 0;

    void add(CLI::App* cmd, bool required = true) {
        auto* o = cmd->add_option("--data", data, "Dataset CSV, or IDX image file with --labels");
        if (required) o->required();
        cmd->add_option("--labels", labels, "IDX label file (makes --data an IDX image file)");
        cmd->add_option("--limit", limit, "Read at most this many IDX samples (0 = all)");
    }

    Dataset load() const {
        if (labels.empty()) return load_csv(data);
        return load_idx(data, labels, limit == 0 ? std::numeric_limits<std::size_t>::max() : limit);
    }
};

struct StirOpts {
    std::size_t k = 5;
    std::size_t n = 200;
    std::string rsm = "cka";
    std::string tap = "penultimate";
    double alpha = 0.05;
    std::size_t steps = 500;
    double delta = 0.05;
    double lambda = 1.0;
    std::string inversion_loss = "relative";
    bool no_clamp = false;
    double controversial_target = 0.1;
    bool no_controversial = false;
    std::size_t threads = 1;

    void add(CLI::App* cmd) {
        cmd->add_option("--k", k, "Repetitions, each on a fresh sample")->capture_default_str();
        cmd->add_option("--n", n, "Samples per repetition")->capture_default_str();
        cmd->add_option("--rsm", rsm, "Similarity measure")
            ->check(CLI::IsMember({"cka", "svcca", "pwcca"}))
            ->capture_default_str();
        cmd->add_option("--tap", tap, "Hidden layer index, or 'penultimate'")->capture_default_str();
        cmd->add_option("--alpha", alpha, "Inversion step size")->capture_default_str();
        cmd->add_option("--steps", steps, "Inversion steps")->capture_default_str();
        cmd->add_option("--delta", delta, "IRI acceptance bound on the relative residual")->capture_default_str();
        cmd->add_option("--lambda", lambda, "Weight of the target term in adversarial inversion")
            ->capture_default_str();
        cmd->add_option("--inversion-loss", inversion_loss, "Inversion objective")
            ->check(CLI::IsMember({"norm", "relative", "scaled"}))
            ->capture_default_str();
        cmd->add_flag("--no-clamp", no_clamp, "Do not clamp inverted inputs to [0,1]");
        cmd->add_option("--controversial-target", controversial_target,
                        "Target's relative change at which a controversial stimulus stops (0 = full budget)")
            ->capture_default_str();
        cmd->add_flag("--no-controversial", no_controversial,
                      "Skip controversial stimuli; delta is then the mean IRI distance");
        cmd->add_option("--threads", threads, "Worker threads (results do not depend on it)")
            ->capture_default_str();
    }

    StirConfig config(std::uint64_t seed) const {
        StirConfig c;
        c.k = k;
        c.n = n;
        c.rsm = parse_rsm_kind(rsm);
        c.seed = seed;
        c.threads = threads;
        c.controversial_delta = !no_controversial;
        c.inversion.alpha = alpha;
        c.inversion.steps = steps;
        c.inversion.delta = delta;
        c.inversion.lambda = lambda;
        c.inversion.loss = parse_inversion_loss(inversion_loss);
        c.inversion.clamp = !no_clamp;
        c.inversion.controversial_target = controversial_target;
        if (tap != "penultimate") {
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(tap, &used);
                if (used != tap.size()) throw std::invalid_argument(tap);
            } catch (const std::exception&) {
                throw InvalidArgument("--tap must be a hidden layer index or 'penultimate', got '" + tap + "'");
            }
            c.inversion.tap = Tap::hidden(idx);
        }
        c.validate();
        return c;
    }
};

struct TrainOpts {
    std::string arch;
    std::string loss = "vanilla";
    std::size_t epochs = 50;
    std::size_t batch = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double at_eps = 1.0;
    std::size_t at_iters = 10;
    double at_step = 0.0;
    double trades_beta = 1.0;

    void add(CLI::App* cmd, bool with_loss = true) {
        cmd->add_option("--arch", arch, "input_dim,hidden1,...,hiddenL (classes come from the data)")
            ->required();
        if (with_loss)
            cmd->add_option("--loss", loss, "Training loss")
                ->check(CLI::IsMember({"vanilla", "at", "trades"}))
                ->capture_default_str();
        cmd->add_option("--epochs", epochs)->capture_default_str();
        cmd->add_option("--batch", batch)->capture_default_str();
        cmd->add_option("--lr", lr)->capture_default_str();
        cmd->add_option("--momentum", momentum)->capture_default_str();
        cmd->add_option("--at-eps", at_eps, "l2 radius for AT/TRADES and the robustness attack")
            ->capture_default_str();
        cmd->add_option("--at-iters", at_iters, "Inner PGD iterations")->capture_default_str();
        cmd->add_option("--at-step", at_step, "Inner PGD step (0 = 2.5*eps/iters)")->capture_default_str();
        cmd->add_option("--trades-beta", trades_beta)->capture_default_str();
    }

    TrainConfig config(std::uint64_t seed) const {
        TrainConfig c;
        c.loss = parse_loss_kind(loss);
        c.epochs = epochs;
        c.batch = batch;
        c.lr = lr;
        c.momentum = momentum;
        c.at_eps = at_eps;
        c.at_iters = at_iters;
        c.at_step = at_step;
        c.trades_beta = trades_beta;
        c.seed = seed;
        c.validate();
        return c;
    }

    Architecture architecture(const Dataset& ds) const {
        std::vector<std::size_t> dims;
        std::size_t start = 0;
        while (start <= arch.size()) {
            const std::size_t comma = std::min(arch.find(',', start), arch.size());
            const std::string part = arch.substr(start, comma - start);
            try {
                std::size_t used = 0;
                dims.push_back(std::stoul(part, &used));
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw InvalidArgument("--arch: '" + part + "' is not a layer width");
            }
            start = comma + 1;
        }
        if (dims.size() < 2) throw InvalidArgument("--arch needs the input dimension and at least one hidden width");
        if (dims[0] != ds.dims())
            throw DimensionError("--arch input dimension " + std::to_string(dims[0]) + " does not match the data (" +
                                 std::to_string(ds.dims()) + ")");
        Architecture a{dims[0], std::vector<std::size_t>(dims.begin() + 1, dims.end()), ds.class_count};
        a.validate();
        return a;
    }
};

NamedModel named(const std::string& path, std::vector<Model>& store) {
    store.push_back(load_checkpoint(path));
    return {fs::path(path).stem().string(), nullptr};
}

// Loads checkpoints and fixes up pointers once the store stops growing.
std::vector<NamedModel> load_models(const std::vector<std::string>& paths, std::vector<Model>& store) {
    store.reserve(store.size() + paths.size());
    std::vector<NamedModel> out;
    for (const auto& p : paths) out.push_back(named(p, store));
    for (std::size_t i = 0; i < out.size(); ++i) out[i].model = &store[store.size() - paths.size() + i];
    std::vector<std::string> ids;
    for (const auto& m : out) {
        if (std::find(ids.begin(), ids.end(), m.id) != ids.end())
            throw InvalidArgument("two checkpoints share the file stem '" + m.id + "'");
        ids.push_back(m.id);
    }
    return out;
}

void emit(const ReportBundle& bundle, const std::string& out_dir, const std::string& stem) {
    write_bundle(bundle, out_dir, stem);
    std::cout << bundle.csv.to_string();
    std::cerr << "wrote " << (fs::path(out_dir) / (stem + ".json")).string() << ", " << stem << ".csv"
              << (bundle.svg ? ", " + stem + ".svg" : std::string()) << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared invariance between neural networks via inverted representations"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI experiment file; one [section] per subcommand, flags override it");

    int exit_code = 0;
    std::uint64_t seed = 0;
    std::string out;

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic or converted dataset as CSV");
    std::string generator;
    std::size_t classes = 4, per_class = 100, dims = 2;
    double spread = 0.05, noise = 0.01;
    DataOpts gen_idx;
    gen->add_option("generator", generator, "blobs | rings | idx")
        ->required()
        ->check(CLI::IsMember({"blobs", "rings", "idx"}));
    gen->add_option("--classes", classes)->capture_default_str();
    gen->add_option("--per-class", per_class)->capture_default_str();
    gen->add_option("--dims", dims)->capture_default_str();
    gen->add_option("--spread", spread, "Blob standard deviation")->capture_default_str();
    gen->add_option("--noise", noise, "Ring radial noise")->capture_default_str();
    gen->add_option("--images", gen_idx.data, "IDX image file (idx generator)");
    gen->add_option("--labels", gen_idx.labels, "IDX label file (idx generator)");
    gen->add_option("--limit", gen_idx.limit, "IDX samples to convert (0 = all)");
    gen->add_option("--seed", seed)->required();
    gen->add_option("--out", out, "Output CSV (default <generator>.csv)");
    gen->callback([&] {
        Dataset ds;
        if (generator == "blobs") {
            ds = gen_blobs(classes, per_class, dims, spread, seed);
        } else if (generator == "rings") {
            ds = gen_rings(per_class, noise, seed);
        } else {
            if (gen_idx.data.empty() || gen_idx.labels.empty())
                throw InvalidArgument("idx generator needs --images and --labels");
            ds = gen_idx.load();
        }
        const std::string path = out.empty() ? generator + ".csv" : out;
        save_csv(ds, path);
        std::cout << "n=" << ds.size() << " d=" << ds.dims() << " classes=" << ds.class_count << " -> " << path
                  << "\n";
    });

    // train ------------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train an MLP and write a checkpoint");
    DataOpts tr_data;
    TrainOpts tr_opts;
    std::size_t attack_iters = 10;
    tr_data.add(tr);
    tr_opts.add(tr);
    tr->add_option("--attack-iters", attack_iters, "PGD iterations for the robust-accuracy report")
        ->capture_default_str();
    tr->add_option("--seed", seed, "Initialization and shuffling seed")->required();
    tr->add_option("--out", out, "Checkpoint path")->capture_default_str();
    tr->callback([&] {
        const Dataset ds = tr_data.load();
        const TrainConfig cfg = tr_opts.config(seed);
        const Model m = train(init_model(tr_opts.architecture(ds), seed), ds, cfg);
        const std::string path = out.empty() ? "model.json" : out;
        save_checkpoint(m, path);
        std::cout << "accuracy=" << fmt(accuracy(m, ds));
        if (cfg.loss != LossKind::vanilla)
            std::cout << " robust_accuracy=" << fmt(robust_accuracy(m, ds, cfg.at_eps, attack_iters))
                      << " (l2 eps " << cfg.at_eps << ")";
        std::cout << " -> " << path << "\n";
    });

    // stir -------------------------------------------------------------------
    auto* st = app.add_subcommand("stir", "STIR in both directions for two checkpoints");
    DataOpts st_data;
    StirOpts st_opts;
    std::string ref_path, target_path, mode = "arbitrary", direction = "both";
    st->add_option("--ref", ref_path, "Reference checkpoint")->required();
    st->add_option("--target", target_path, "Target checkpoint")->required();
    st_data.add(st);
    st_opts.add(st);
    st->add_option("--mode", mode, "IRI generation")
        ->check(CLI::IsMember({"arbitrary", "adversarial", "both"}))
        ->capture_default_str();
    st->add_option("--direction", direction, "forward = STIR(target|ref), backward = STIR(ref|target)")
        ->check(CLI::IsMember({"both", "forward", "backward"}))
        ->capture_default_str();
    st->add_option("--seed", seed)->required();
    st->add_option("--out", out, "Output directory")->capture_default_str();
    st->callback([&] {
        const Dataset ds = st_data.load();
        std::vector<Model> store;
        const auto models = load_models({ref_path, target_path}, store);
        const auto result = run_pairwise(models[0], models[1], ds, st_opts.config(seed),
                                         parse_mode_selection(mode), parse_direction_selection(direction));
        emit(result.bundle, out.empty() ? "stir_out" : out, "stir");
    });

    // layerwise --------------------------------------------------------------
    auto* lw = app.add_subcommand("layerwise", "STIR at every hidden layer with OLS trend lines");
    DataOpts lw_data;
    StirOpts lw_opts;
    lw->add_option("--ref", ref_path, "First model (m1)")->required();
    lw->add_option("--target", target_path, "Second model (m2)")->required();
    lw_data.add(lw);
    lw_opts.add(lw);
    lw->add_option("--seed", seed)->required();
    lw->add_option("--out", out, "Output directory")->capture_default_str();
    lw->callback([&] {
        const Dataset ds = lw_data.load();
        std::vector<Model> store;
        const auto models = load_models({ref_path, target_path}, store);
        StirConfig cfg = lw_opts.config(seed);
        const auto result = run_layerwise(models[0], models[1], ds, cfg);
        emit(result.bundle, out.empty() ? "layerwise_out" : out, "layerwise");
        const auto& f = result.result;
        std::cout << "slope forward=" << fmt(f.forward_fit.slope) << " backward=" << fmt(f.backward_fit.slope)
                  << " combined=" << fmt(f.combined_fit.slope) << " intercept=" << fmt(f.combined_fit.intercept)
                  << "\n";
    });

    // matrix -----------------------------------------------------------------
    auto* mx = app.add_subcommand("matrix", "STIR(column | row) for every ordered pair of checkpoints");
    DataOpts mx_data;
    StirOpts mx_opts;
    std::vector<std::string> model_paths;
    mx->add_option("--models", model_paths, "Checkpoints (comma separated or repeated)")
        ->required()
        ->delimiter(',');
    mx_data.add(mx);
    mx_opts.add(mx);
    mx->add_option("--seed", seed)->required();
    mx->add_option("--out", out, "Output directory")->capture_default_str();
    mx->callback([&] {
        const Dataset ds = mx_data.load();
        std::vector<Model> store;
        const auto models = load_models(model_paths, store);
        emit(run_matrix(models, ds, mx_opts.config(seed)).bundle, out.empty() ? "matrix_out" : out, "matrix");
    });

    // update-sim -------------------------------------------------------------
    auto* us = app.add_subcommand("update-sim", "Train on nested data increments and track STIR between updates");
    DataOpts us_data;
    StirOpts us_opts;
    TrainOpts us_train;
    std::vector<std::size_t> increments;
    std::size_t holdout = 0;
    std::optional<std::uint64_t> shuffle_seed;
    bool from_scratch = false;
    us_data.add(us);
    us_train.add(us);
    us_opts.add(us);
    us->add_option("--increments", increments, "Cumulative training-set sizes")->required()->delimiter(',');
    us->add_option("--holdout", holdout, "Samples held out for evaluation")->capture_default_str();
    us->add_option("--shuffle-seed", shuffle_seed, "Split permutation seed (default --seed)");
    us->add_flag("--from-scratch", from_scratch, "Retrain every step from the same initialization");
    us->add_option("--seed", seed)->required();
    us->add_option("--out", out, "Output directory")->capture_default_str();
    us->callback([&] {
        const Dataset ds = us_data.load();
        UpdateSimConfig cfg;
        cfg.plan = SplitPlan{increments, holdout, shuffle_seed.value_or(seed)};
        cfg.arch = us_train.architecture(ds);
        cfg.train = us_train.config(seed);
        cfg.init_seed = seed;
        cfg.warm_start = !from_scratch;
        const auto result = run_update_sim(ds, cfg, us_opts.config(seed));
        emit(result.bundle, out.empty() ? "update_sim_out" : out, "update_sim");
        std::cout << "spearman forward=" << fmt(result.spearman_forward)
                  << " backward=" << fmt(result.spearman_backward) << "\n";
    });

    // robustness-order -------------------------------------------------------
    auto* ro = app.add_subcommand("robustness-order",
                                  "Directional STIR table for vanilla / AT(1 iteration) / AT(10 iterations)");
    DataOpts ro_data;
    StirOpts ro_opts;
    TrainOpts ro_train;
    bool train_all = false;
    std::optional<double> attack_eps;
    std::vector<std::string> ro_paths;
    ro_data.add(ro);
    ro_opts.add(ro);
    ro->add_option("--models", ro_paths, "Checkpoints with training provenance")->delimiter(',');
    ro->add_flag("--train-all", train_all, "Train the three models first (needs --arch and training flags)");
    ro->add_option("--arch", ro_train.arch, "input_dim,hidden1,... for --train-all");
    ro->add_option("--epochs", ro_train.epochs)->capture_default_str();
    ro->add_option("--batch", ro_train.batch)->capture_default_str();
    ro->add_option("--lr", ro_train.lr)->capture_default_str();
    ro->add_option("--momentum", ro_train.momentum)->capture_default_str();
    ro->add_option("--at-eps", ro_train.at_eps, "AT radius for --train-all")->capture_default_str();
    ro->add_option("--attack-eps", attack_eps, "Radius for robust accuracy (default: the AT models' radius)");
    ro->add_option("--attack-iters", attack_iters)->capture_default_str();
    ro->add_option("--seed", seed)->required();
    ro->add_option("--out", out, "Output directory")->capture_default_str();
    ro->callback([&] {
        const Dataset ds = ro_data.load();
        const std::string dir = out.empty() ? "robustness_out" : out;
        std::vector<Model> store;
        std::vector<NamedModel> models;
        if (train_all) {
            if (!ro_paths.empty()) throw InvalidArgument("use either --models or --train-all");
            if (ro_train.arch.empty()) throw InvalidArgument("--train-all needs --arch");
            const Architecture arch = ro_train.architecture(ds);
            std::vector<std::pair<std::string, TrainConfig>> plans;
            TrainOpts v = ro_train;
            v.loss = "vanilla";
            plans.emplace_back("vanilla", v.config(seed));
            for (std::size_t iters : {1u, 10u}) {
                TrainOpts a = ro_train;
                a.loss = "at";
                a.at_iters = iters;
                plans.emplace_back("at_it" + std::to_string(iters), a.config(seed));
            }
            fs::create_directories(dir);
            store.reserve(plans.size());
            for (const auto& [id, cfg] : plans) {
                store.push_back(train(init_model(arch, seed), ds, cfg));
                save_checkpoint(store.back(), fs::path(dir) / (id + ".json"));
                models.push_back({id, nullptr});
            }
            for (std::size_t i = 0; i < models.size(); ++i) models[i].model = &store[i];
        } else {
            if (ro_paths.size() < 2) throw InvalidArgument("--models needs at least two checkpoints");
            models = load_models(ro_paths, store);
            auto key = [](const Model& m) {
                const auto& p = m.train_provenance;
                if (p.epochs == 0) throw InvalidArgument("checkpoint has no training provenance (0 epochs)");
                return p.loss == LossKind::vanilla ? std::size_t{0} : p.at_iters;
            };
            std::stable_sort(models.begin(), models.end(),
                             [&](const NamedModel& a, const NamedModel& b) { return key(*a.model) < key(*b.model); });
        }
        double eps = 0.0;
        for (const auto& m : models)
            if (m.model->train_provenance.loss != LossKind::vanilla)
                eps = std::max(eps, m.model->train_provenance.at_eps);
        eps = attack_eps.value_or(eps > 0.0 ? eps : ro_train.at_eps);

        const auto result = run_robustness_order(models, ds, ro_opts.config(seed), eps, attack_iters);
        write_bundle(result.bundle, dir, "robustness_order");
        std::cout << result.table;
        if (!result.all_hold) exit_code = kExitVerdict;
    });

    // plot -------------------------------------------------------------------
    auto* pl = app.add_subcommand("plot", "Regenerate the SVG scatter of a report CSV");
    std::string csv_path;
    pl->add_option("csv", csv_path, "Report CSV")->required()->check(CLI::ExistingFile);
    pl->add_option("--out", out, "SVG path (default: CSV path with .svg)");
    pl->callback([&] {
        const std::string path = out.empty() ? fs::path(csv_path).replace_extension(".svg").string() : out;
        write_text(path, svg_scatter(read_text(csv_path)));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return exit_code;
}
