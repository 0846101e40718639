#include "stirkit/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "stirkit/error.hpp"
#include "stirkit/rng.hpp"

namespace stirkit {

void Dataset::validate() const {
    if (inputs.rows() != labels.size())
        throw InvalidArgument("dataset '" + name + "': " + std::to_string(inputs.rows()) +
                              " input rows but " + std::to_string(labels.size()) + " labels");
    for (std::size_t label : labels)
        if (label >= class_count)
            throw InvalidArgument("dataset '" + name + "': label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(class_count) + ")");
    for (double v : inputs.values())
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidArgument("dataset '" + name + "': input value outside [0,1]");
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
    Dataset out;
    out.inputs = inputs.select_rows(indices);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) out.labels.push_back(labels.at(i));
    out.class_count = class_count;
    out.name = name;
    out.image_like = image_like;
    return out;
}

bool same_contents(const Dataset& a, const Dataset& b) {
    return a.inputs == b.inputs && a.labels == b.labels && a.class_count == b.class_count &&
           a.image_like == b.image_like;
}

Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dims, double spread,
                  std::uint64_t seed) {
    if (classes < 2) throw InvalidArgument("gen_blobs: need at least 2 classes");
    if (dims < 2) throw InvalidArgument("gen_blobs: need at least 2 dims");
    if (!(spread >= 0.0)) throw InvalidArgument("gen_blobs: spread must be non-negative");

    std::size_t levels = 1;
    for (;;) {
        double capacity = std::pow(static_cast<double>(levels), static_cast<double>(dims));
        if (capacity >= static_cast<double>(classes)) break;
        ++levels;
    }

    Rng rng(seed);
    const std::size_t n = classes * per_class;
    Matrix x(n, dims);
    std::vector<std::size_t> labels(n);
    std::vector<double> center(dims);
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t digits = c;
        for (std::size_t j = 0; j < dims; ++j) {
            center[j] = (static_cast<double>(digits % levels) + 0.5) / static_cast<double>(levels);
            digits /= levels;
        }
        for (std::size_t s = 0; s < per_class; ++s) {
            const std::size_t row = c * per_class + s;
            labels[row] = c;
            for (std::size_t j = 0; j < dims; ++j)
                x(row, j) = std::clamp(center[j] + spread * rng.normal(), 0.0, 1.0);
        }
    }
    return Dataset{std::move(x), std::move(labels), classes, "blobs", false};
}

Dataset gen_rings(std::size_t per_class, double noise, std::uint64_t seed) {
    if (per_class < 8) throw InvalidArgument("gen_rings: need at least 8 points per class");
    if (!(noise >= 0.0)) throw InvalidArgument("gen_rings: noise must be non-negative");
    constexpr std::array<double, 2> radii{0.25, 0.45};
    Rng rng(seed);
    Matrix x(2 * per_class, 2);
    std::vector<std::size_t> labels(2 * per_class);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t s = 0; s < per_class; ++s) {
            const std::size_t row = c * per_class + s;
            const double angle = 2.0 * std::numbers::pi * rng.uniform();
            const double r = radii[c] + noise * rng.normal();
            x(row, 0) = std::clamp(0.5 + r * std::cos(angle), 0.0, 1.0);
            x(row, 1) = std::clamp(0.5 + r * std::sin(angle), 0.0, 1.0);
            labels[row] = c;
        }
    }
    return Dataset{std::move(x), std::move(labels), 2, "rings", false};
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) throw FormatError("truncated IDX header in " + path.string());
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t limit) {
    const auto images = read_file(images_path);
    const auto labels = read_file(labels_path);

    if (read_be32(images, 0, images_path) != kIdxImagesMagic)
        throw FormatError("bad magic in image file " + images_path.string());
    if (read_be32(labels, 0, labels_path) != kIdxLabelsMagic)
        throw FormatError("bad magic in label file " + labels_path.string());

    const std::size_t image_count = read_be32(images, 4, images_path);
    const std::size_t height = read_be32(images, 8, images_path);
    const std::size_t width = read_be32(images, 12, images_path);
    const std::size_t label_count = read_be32(labels, 4, labels_path);
    if (image_count != label_count)
        throw FormatError("count mismatch: " + std::to_string(image_count) + " images vs " +
                          std::to_string(label_count) + " labels");

    const std::size_t pixels = height * width;
    constexpr std::size_t kImageHeader = 16;
    constexpr std::size_t kLabelHeader = 8;
    if (images.size() < kImageHeader + image_count * pixels)
        throw FormatError("truncated image file " + images_path.string());
    if (labels.size() < kLabelHeader + label_count)
        throw FormatError("truncated label file " + labels_path.string());

    const std::size_t n = std::min(limit, image_count);
    Matrix x(n, pixels);
    std::vector<std::size_t> y(n);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* src = images.data() + kImageHeader + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p) x(i, p) = static_cast<double>(src[p]) / 255.0;
        y[i] = labels[kLabelHeader + i];
        max_label = std::max(max_label, y[i]);
    }
    // MNIST-style label files hold digits; keep 10 classes unless more appear.
    const std::size_t classes = std::max<std::size_t>(10, n == 0 ? 0 : max_label + 1);
    return Dataset{std::move(x), std::move(y), classes, "idx", true};
}

void SplitPlan::validate(std::size_t dataset_size) const {
    if (increments.empty()) throw InvalidArgument("split plan: no increments");
    for (std::size_t i = 1; i < increments.size(); ++i)
        if (increments[i] <= increments[i - 1])
            throw InvalidArgument("split plan: increments must be strictly increasing");
    if (increments.front() == 0) throw InvalidArgument("split plan: empty first increment");
    if (increments.back() + holdout > dataset_size)
        throw InvalidArgument("split plan: last increment " + std::to_string(increments.back()) +
                              " + holdout " + std::to_string(holdout) + " exceeds dataset size " +
                              std::to_string(dataset_size));
}

std::pair<Dataset, Dataset> subset(const Dataset& ds, const SplitPlan& plan, std::size_t step) {
    plan.validate(ds.size());
    if (step >= plan.increments.size())
        throw InvalidArgument("subset: step " + std::to_string(step) + " out of range");
    const auto perm = Rng::stream(plan.shuffle_seed, 0).permutation(ds.size());
    const std::span<const std::size_t> all(perm);
    const auto train = all.first(plan.increments[step]);
    const auto holdout = all.last(plan.holdout);
    return {ds.select(train), ds.select(holdout)};
}

std::string format_real(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "label";
    for (std::size_t j = 0; j < ds.dims(); ++j) out << ",f" << j;
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (double v : ds.inputs.row(i)) out << ',' << format_real(v);
        out << '\n';
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::size_t class_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV file " + path.string());
    const auto header = split_commas(line);
    if (header.empty() || header[0] != "label") throw FormatError("CSV header must start with 'label'");
    for (std::size_t j = 1; j < header.size(); ++j)
        if (header[j] != "f" + std::to_string(j - 1))
            throw FormatError("CSV header column " + std::to_string(j) + " should be f" +
                              std::to_string(j - 1));
    const std::size_t dims = header.size() - 1;

    std::vector<double> values;
    std::vector<std::size_t> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != dims + 1)
            throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(dims + 1) + " cells, got " +
                              std::to_string(cells.size()));
        std::size_t label = 0;
        auto [lp, lec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
        if (lec != std::errc{} || lp != cells[0].data() + cells[0].size())
            throw FormatError("CSV line " + std::to_string(line_no) + ": bad label '" +
                              std::string(cells[0]) + "'");
        labels.push_back(label);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
            if (ec != std::errc{} || p != cells[j].data() + cells[j].size())
                throw FormatError("CSV line " + std::to_string(line_no) + ": non-numeric cell '" +
                                  std::string(cells[j]) + "'");
            values.push_back(v);
        }
    }
    Dataset ds;
    ds.inputs = Matrix(labels.size(), dims, std::move(values));
    if (class_count == 0)
        class_count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    ds.class_count = class_count;
    ds.labels = std::move(labels);
    ds.name = path.stem().string();
    ds.validate();
    return ds;
}

}  // namespace stirkit
