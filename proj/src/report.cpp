#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scd/binary_io.hpp"
#include "scd/error.hpp"
#include "scd/evaluation.hpp"

namespace scd {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    binio::write_file(path, std::span<const char>(text.data(), text.size()));
}

std::string escape_xml(const std::string& s) {
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

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    if (report.rows.empty()) throw ValidationError("evaluation report has no rows");
    std::string out = "pair_id,split,k,f1\n";
    for (const auto& r : report.rows) {
        out += r.pair_id + "," + r.split + "," + std::to_string(r.k) + "," + format_value(r.f1) + "\n";
    }
    write_text(path, out);
}

void write_sweep_csv(const SweepCurve& curve, const std::filesystem::path& path) {
    if (curve.params.empty()) throw ValidationError("sweep curve is empty");
    const std::size_t D = direction_count(curve.mode);
    std::string out = "mode,param,f1_mean";
    for (std::size_t d = 0; d < D; ++d) out += ",f1_dir" + std::to_string(d + 1);
    out += "\n";
    for (std::size_t i = 0; i < curve.params.size(); ++i) {
        out += std::string(sweep_mode_name(curve.mode)) + "," + format_value(curve.params[i]) + "," +
               format_value(curve.mean[i]);
        for (double v : curve.per_direction[i]) out += "," + format_value(v);
        out += "\n";
    }
    write_text(path, out);
}

void write_ablation_csv(const AblationReport& report, const std::filesystem::path& path) {
    if (report.rows.empty() || report.splits.empty()) throw ValidationError("ablation report is empty");
    std::string out = "comparator";
    for (const auto& s : report.splits) out += "," + s;
    out += ",avg\n";
    for (const auto& row : report.rows) {
        out += std::string(comparator_name(row.kind));
        for (double v : row.split_means) out += "," + format_value(v);
        out += "," + format_value(row.avg) + "\n";
    }
    write_text(path, out);
}

std::string render_svg(const PlotSpec& spec, std::span<const PlotSeries> series) {
    bool any = false;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ValidationError("plot series '" + s.label + "' has mismatched x/y");
        any = any || !s.x.empty();
    }
    if (!any) throw ValidationError("nothing to plot");

    constexpr double kW = 640, kH = 400, kL = 70, kR = 150, kT = 40, kB = 60;
    double x0 = 0, x1 = 0;
    bool first = true;
    for (const auto& s : series)
        for (double x : s.x) {
            x0 = first ? x : std::min(x0, x);
            x1 = first ? x : std::max(x1, x);
            first = false;
        }
    if (x1 == x0) x1 = x0 + 1;
    const double y0 = 0.0, y1 = 1.0;
    auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
    auto py = [&](double y) { return kH - kB - (std::clamp(y, y0, y1) - y0) / (y1 - y0) * (kH - kT - kB); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << " " << kH << "\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" style=\"fill:#ffffff\"/>\n";
    o << "<text x=\"" << fixed(kW / 2) << "\" y=\"24\" style=\"font:16px sans-serif;text-anchor:middle\">"
      << escape_xml(spec.title) << "</text>\n";
    // axes
    o << "<line x1=\"" << fixed(kL) << "\" y1=\"" << fixed(kH - kB) << "\" x2=\"" << fixed(kW - kR) << "\" y2=\""
      << fixed(kH - kB) << "\" style=\"stroke:#000000\"/>\n";
    o << "<line x1=\"" << fixed(kL) << "\" y1=\"" << fixed(kT) << "\" x2=\"" << fixed(kL) << "\" y2=\""
      << fixed(kH - kB) << "\" style=\"stroke:#000000\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double y = i / 5.0;
        o << "<line x1=\"" << fixed(kL - 4) << "\" y1=\"" << fixed(py(y)) << "\" x2=\"" << fixed(kL) << "\" y2=\""
          << fixed(py(y)) << "\" style=\"stroke:#000000\"/>\n";
        o << "<text x=\"" << fixed(kL - 8) << "\" y=\"" << fixed(py(y) + 4)
          << "\" style=\"font:11px sans-serif;text-anchor:end\">" << format_value(y) << "</text>\n";
    }
    std::vector<std::pair<double, std::string>> ticks;
    if (!spec.x_ticks.empty()) {
        for (std::size_t i = 0; i < spec.x_ticks.size(); ++i) ticks.emplace_back(static_cast<double>(i), spec.x_ticks[i]);
    } else {
        for (int i = 0; i <= 5; ++i) {
            const double x = x0 + (x1 - x0) * i / 5.0;
            ticks.emplace_back(x, format_value(std::round(x * 100) / 100));
        }
    }
    for (const auto& [x, label] : ticks) {
        o << "<line x1=\"" << fixed(px(x)) << "\" y1=\"" << fixed(kH - kB) << "\" x2=\"" << fixed(px(x)) << "\" y2=\""
          << fixed(kH - kB + 4) << "\" style=\"stroke:#000000\"/>\n";
        o << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(kH - kB + 18)
          << "\" style=\"font:11px sans-serif;text-anchor:middle\">" << escape_xml(label) << "</text>\n";
    }
    o << "<text x=\"" << fixed((kL + kW - kR) / 2) << "\" y=\"" << fixed(kH - 16)
      << "\" style=\"font:13px sans-serif;text-anchor:middle\">" << escape_xml(spec.x_label) << "</text>\n";
    o << "<text x=\"18\" y=\"" << fixed((kT + kH - kB) / 2) << "\" transform=\"rotate(-90 18 "
      << fixed((kT + kH - kB) / 2) << ")\" style=\"font:13px sans-serif;text-anchor:middle\">"
      << escape_xml(spec.y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        o << "<polyline style=\"fill:none;stroke:" << color << ";stroke-width:2\" points=\"";
        for (std::size_t j = 0; j < s.x.size(); ++j) o << (j ? " " : "") << fixed(px(s.x[j])) << "," << fixed(py(s.y[j]));
        o << "\"/>\n";
        const double ly = kT + 10 + 18.0 * static_cast<double>(i);
        o << "<line x1=\"" << fixed(kW - kR + 12) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(kW - kR + 32)
          << "\" y2=\"" << fixed(ly) << "\" style=\"stroke:" << color << ";stroke-width:2\"/>\n";
        o << "<text x=\"" << fixed(kW - kR + 38) << "\" y=\"" << fixed(ly + 4) << "\" style=\"font:12px sans-serif\">"
          << escape_xml(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_svg(const PlotSpec& spec, std::span<const PlotSeries> series, const std::filesystem::path& path) {
    write_text(path, render_svg(spec, series));
}

void write_sweep_svg(std::span<const SweepCurve> curves, std::span<const std::string> labels,
                     const std::filesystem::path& path) {
    if (curves.empty() || curves.size() != labels.size()) throw ValidationError("sweep plot needs one label per curve");
    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].params.empty()) throw ValidationError("sweep curve is empty");
        series.push_back({labels[i], curves[i].params, curves[i].mean});
    }
    const bool translate = curves.front().mode == SweepMode::Translate;
    PlotSpec spec{translate ? "F1 under translation of t0" : "F1 under rotation of t0",
                  translate ? "offset (px)" : "angle (deg)", "mean F1", {}};
    write_svg(spec, series, path);
}

void write_ablation_svg(const AblationReport& report, const std::filesystem::path& path) {
    if (report.rows.empty() || report.splits.empty()) throw ValidationError("ablation report is empty");
    std::vector<PlotSeries> series;
    for (const auto& row : report.rows) {
        PlotSeries s{std::string(comparator_name(row.kind)), {}, row.split_means};
        for (std::size_t i = 0; i < row.split_means.size(); ++i) s.x.push_back(static_cast<double>(i));
        series.push_back(std::move(s));
    }
    PlotSpec spec{"Comparator ablation", "split", "mean F1", report.splits};
    write_svg(spec, series, path);
}

}  // namespace scd
