#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stirkit/error.hpp"
#include "stirkit/model.hpp"

namespace stirkit {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols) {
    if (!j.is_array() || j.size() != rows) throw FormatError("checkpoint: weight matrix has wrong row count");
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols)
            throw FormatError("checkpoint: weight row has wrong length");
        for (const auto& v : row) data.push_back(v.get<double>());
    }
    return Matrix(rows, cols, std::move(data));
}

json provenance_to_json(const TrainConfig& c) {
    return json{{"loss", to_string(c.loss)},     {"epochs", c.epochs},
                {"batch", c.batch},              {"lr", c.lr},
                {"momentum", c.momentum},        {"at_eps", c.at_eps},
                {"at_iters", c.at_iters},        {"at_step", c.at_step},
                {"trades_beta", c.trades_beta},  {"seed", c.seed}};
}

TrainConfig provenance_from_json(const json& j) {
    TrainConfig c;
    c.loss = parse_loss_kind(j.at("loss").get<std::string>());
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.at_eps = j.at("at_eps").get<double>();
    c.at_iters = j.at("at_iters").get<std::size_t>();
    c.at_step = j.at("at_step").get<double>();
    c.trades_beta = j.at("trades_beta").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string checkpoint_to_string(const Model& m) {
    m.validate();
    json layers = json::array();
    for (const auto& layer : m.layers)
        layers.push_back(json{{"weights", matrix_to_json(layer.weights)}, {"bias", layer.bias}});
    json doc{{"format_version", kCheckpointFormatVersion},
             {"arch",
              {{"input_dim", m.arch.input_dim},
               {"hidden", m.arch.hidden},
               {"class_count", m.arch.class_count},
               {"activation", "relu"}}},
             {"layers", std::move(layers)},
             {"train_provenance", provenance_to_json(m.train_provenance)},
             {"rng_seed", m.rng_seed}};
    // Doubles are written in shortest round-trip form, which restores them
    // bit-exactly.
    return doc.dump(1) + "\n";
}

Model checkpoint_from_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint: malformed document: ") + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion)
            throw FormatError("checkpoint: unsupported format_version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
        Model m;
        const auto& a = doc.at("arch");
        m.arch.input_dim = a.at("input_dim").get<std::size_t>();
        m.arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
        m.arch.class_count = a.at("class_count").get<std::size_t>();
        if (a.at("activation").get<std::string>() != "relu")
            throw FormatError("checkpoint: unsupported activation");
        m.arch.validate();
        const auto& layers = doc.at("layers");
        if (!layers.is_array() || layers.size() != m.arch.layer_count())
            throw FormatError("checkpoint: layer count does not match architecture");
        std::size_t fan_in = m.arch.input_dim;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::size_t out = l < m.arch.hidden.size() ? m.arch.hidden[l] : m.arch.class_count;
            DenseLayer layer;
            layer.weights = matrix_from_json(layers[l].at("weights"), out, fan_in);
            layer.bias = layers[l].at("bias").get<std::vector<double>>();
            if (layer.bias.size() != out) throw FormatError("checkpoint: bias has wrong length");
            m.layers.push_back(std::move(layer));
            fan_in = out;
        }
        m.train_provenance = provenance_from_json(doc.at("train_provenance"));
        m.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    const std::string text = checkpoint_to_string(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out << text;
    if (!out) throw FormatError("write failed for checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

}  // namespace stirkit
