#include "stirkit/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "stirkit/error.hpp"

namespace stirkit {

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size())
        throw DimensionError("csv: row has " + std::to_string(row.size()) + " cells, header has " +
                             std::to_string(header.size()));
    rows.push_back(std::move(row));
}

std::string CsvTable::to_string() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

CsvTable CsvTable::parse(std::string_view text) {
    CsvTable t;
    bool first = true;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.emplace_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else if (cells.size() != t.header.size()) {
            throw FormatError("csv line " + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw FormatError("csv: empty document");
    return t;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw InvalidArgument("csv: no column '" + std::string(name) + "'");
}

std::string direction_label(const StirReport& r) {
    std::string label = r.direction.target + "|" + r.direction.reference;
    if (r.config.mode == IriMode::adversarial) label += ":adversarial";
    return label;
}

CsvTable stir_table(const std::vector<StirReport>& reports) {
    CsvTable t;
    t.header = {"direction", "stir_mean", "stir_stderr", "cka", "agreement", "delta", "rejected"};
    for (const auto& r : reports)
        t.add_row({direction_label(r), format_real(r.stir_mean), format_real(r.stir_stderr),
                   format_real(r.cka_baseline), format_real(r.agreement), format_real(r.delta_mean),
                   format_real(r.rejected_fraction)});
    return t;
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 20, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::optional<double> parse_number(const std::string& cell) {
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

}  // namespace

std::string svg_scatter(std::string_view csv_text) {
    const CsvTable t = CsvTable::parse(csv_text);
    if (t.header.size() < 2) throw FormatError("svg: need at least two columns");

    struct Point {
        double x, y;
        std::size_t series;
    };
    std::vector<Point> points;
    for (const auto& row : t.rows) {
        const auto x = parse_number(row[0]);
        if (!x) continue;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (const auto y = parse_number(row[c])) points.push_back({*x, *y, c - 1});
    }

    Range xr, yr;
    for (const auto& p : points) {
        xr.include(p.x);
        yr.include(p.y);
    }
    xr.finish();
    yr.finish();

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
    o << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    o << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(pw)
      << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        o << "<text x=\"" << fixed(sx(xv)) << "\" y=\"" << fixed(kTop + ph + 16)
          << "\" font-size=\"11\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
        o << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy(yv) + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    }

    std::string ylabel;
    for (std::size_t c = 1; c < t.header.size(); ++c) ylabel += (c > 1 ? " / " : "") + t.header[c];
    o << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 10)
      << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(t.header[0]) << "</text>\n";
    o << "<text x=\"16\" y=\"" << fixed(kTop + ph / 2) << "\" font-size=\"13\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << fixed(kTop + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";

    for (const auto& p : points)
        o << "<circle cx=\"" << fixed(sx(p.x)) << "\" cy=\"" << fixed(sy(p.y)) << "\" r=\"3\" fill=\""
          << kPalette[p.series % std::size(kPalette)] << "\"/>\n";

    std::vector<double> xs, ys;
    for (const auto& p : points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    const bool fit_possible =
        xs.size() >= 2 && std::any_of(xs.begin(), xs.end(), [&](double v) { return v != xs.front(); });
    if (fit_possible) {
        const LineFit fit = ols_fit(xs, ys);
        const double x0 = *std::min_element(xs.begin(), xs.end());
        const double x1 = *std::max_element(xs.begin(), xs.end());
        o << "<line x1=\"" << fixed(sx(x0)) << "\" y1=\"" << fixed(sy(fit(x0))) << "\" x2=\""
          << fixed(sx(x1)) << "\" y2=\"" << fixed(sy(fit(x1)))
          << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

Json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

Json to_json(const Architecture& arch) {
    return Json{{"input_dim", arch.input_dim},
                {"hidden", arch.hidden},
                {"class_count", arch.class_count},
                {"activation", "relu"}};
}

Json to_json(const TrainConfig& cfg) {
    return Json{{"loss", to_string(cfg.loss)},     {"epochs", cfg.epochs},
                {"batch", cfg.batch},              {"lr", cfg.lr},
                {"momentum", cfg.momentum},        {"at_eps", cfg.at_eps},
                {"at_iters", cfg.at_iters},        {"at_step", cfg.effective_at_step()},
                {"trades_beta", cfg.trades_beta},  {"seed", cfg.seed}};
}

Json to_json(const InversionConfig& cfg) {
    return Json{{"alpha", cfg.alpha},
                {"steps", cfg.steps},
                {"delta", cfg.delta},
                {"tap", cfg.tap ? Json(cfg.tap->to_string()) : Json("penultimate")},
                {"clamp", cfg.clamp},
                {"lambda", cfg.lambda},
                {"loss", to_string(cfg.loss)},
                {"controversial_target", cfg.controversial_target}};
}

Json to_json(const StirConfig& cfg) {
    return Json{{"k", cfg.k},
                {"n", cfg.n},
                {"rsm", to_string(cfg.rsm)},
                {"mode", to_string(cfg.mode)},
                {"seed", cfg.seed},
                {"controversial_delta", cfg.controversial_delta},
                {"threads", cfg.threads},
                {"inversion", to_json(cfg.inversion)}};
}

Json to_json(const StirReport& r) {
    return Json{{"direction", direction_label(r)},
                {"reference", r.direction.reference},
                {"target", r.direction.target},
                {"mode", to_string(r.config.mode)},
                {"stir_mean", json_number(r.stir_mean)},
                {"stir_stderr", json_number(r.stir_stderr)},
                {"per_run", r.per_run},
                {"failed_runs", r.failed_runs},
                {"cka", json_number(r.cka_baseline)},
                {"agreement", json_number(r.agreement)},
                {"delta", json_number(r.delta_mean)},
                {"delta_source", r.config.controversial_delta ? "controversial" : "iri_distance"},
                {"iri_distance", json_number(r.iri_distance)},
                {"rejected", json_number(r.rejected_fraction)},
                {"config", to_json(r.config)}};
}

Json to_json(const LineFit& fit) {
    return Json{{"slope", json_number(fit.slope)}, {"intercept", json_number(fit.intercept)}};
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir, const std::string& stem) {
    write_text(dir / (stem + ".json"), bundle.report.dump(2) + "\n");
    write_text(dir / (stem + ".csv"), bundle.csv.to_string());
    if (bundle.svg) write_text(dir / (stem + ".svg"), *bundle.svg);
}

}  // namespace stirkit
