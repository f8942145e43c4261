#pragma once

// Report emitters (CSV, JSON, SVG heatmap) and the heads directory format.
//
// A heads directory holds, per head, "<stem>.json" with
//   {"name": ..., "classes": [row names], "avgpool": false,
//    "weights": "<stem>.weights.wsc", "bias": "<stem>.bias.wsc"}
// plus the two TensorFiles (C x D weights, [C] bias). A sidecar with "avgpool": true and no
// weights stands for an average-pooling layer and is replaced by the all-ones reference.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wsca/correlation.hpp"
#include "wsca/error.hpp"
#include "wsca/json_io.hpp"
#include "wsca/metrics.hpp"
#include "wsca/projection.hpp"
#include "wsca/tensor_io.hpp"
#include "wsca/trainer.hpp"

namespace wsca {

/// Text that parses back to the same double.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
    out << text;
}

// --- correlation -----------------------------------------------------------

inline std::string correlation_csv(const CorrelationReport& r) {
    std::ostringstream out;
    for (std::size_t j = 0; j < r.size(); ++j) out << ',' << r.label(j);
    out << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << r.label(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            out << ',' << format_real(r.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

/// Blue (-1) -> white (0) -> red (+1).
inline std::string diverging_color(double v) {
    const double t = std::clamp(v, -1.0, 1.0);
    const auto mix = [](double from, double to, double a) { return static_cast<int>(std::lround(from + (to - from) * a)); };
    int r = 255, g = 255, b = 255;
    if (t < 0) {
        r = mix(255, 33, -t);
        g = mix(255, 102, -t);
        b = mix(255, 172, -t);
    } else {
        r = mix(255, 178, t);
        g = mix(255, 24, t);
        b = mix(255, 43, t);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace detail

inline constexpr std::size_t kSvgAnnotateLimit = 20;

/// Heatmap over [-1, 1]; cells carry 2-decimal annotations up to 20 x 20.
inline std::string correlation_svg(const CorrelationReport& r) {
    const int cell = 36;
    const int margin = 160;
    const int n = static_cast<int>(r.size());
    const int side = margin + n * cell + 20;
    const bool annotate = r.size() <= kSvgAnnotateLimit;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side + 40
        << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    out << "<title>" << (r.absolute ? "|" : "") << to_string(r.mode) << (r.absolute ? "|" : "")
        << " correlation</title>\n";
    for (int i = 0; i < n; ++i) {
        const std::string label = detail::xml_escape(r.label(static_cast<std::size_t>(i)));
        out << "<text x=\"" << margin - 4 << "\" y=\"" << margin + i * cell + cell / 2 + 3
            << "\" text-anchor=\"end\">" << label << "</text>\n";
        out << "<text transform=\"translate(" << margin + i * cell + cell / 2 + 3 << ',' << margin - 4
            << ") rotate(-90)\">" << label << "</text>\n";
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double v = r.matrix(i, j);
            const int x = margin + j * cell;
            const int y = margin + i * cell;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
                << "\" fill=\"" << detail::diverging_color(v) << "\" data-value=\"" << format_real(v) << "\"/>\n";
            if (annotate) {
                char buf[16];
                std::snprintf(buf, sizeof buf, "%.2f", v);
                out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 3
                    << "\" text-anchor=\"middle\">" << buf << "</text>\n";
            }
        }
    }
    // color bar
    const int bar_y = margin + n * cell + 10;
    for (int s = 0; s <= 20; ++s) {
        const double v = -1.0 + 0.1 * s;
        out << "<rect x=\"" << margin + s * 8 << "\" y=\"" << bar_y << "\" width=\"8\" height=\"10\" fill=\""
            << detail::diverging_color(v) << "\"/>\n";
    }
    out << "<text x=\"" << margin << "\" y=\"" << bar_y + 22 << "\">-1</text>\n";
    out << "<text x=\"" << margin + 160 << "\" y=\"" << bar_y + 22 << "\" text-anchor=\"end\">1</text>\n";
    out << "</svg>\n";
    return out.str();
}

/// cross_head_score for every ordered pair of heads, keyed "a|b".
inline Json cross_head_scores(const CorrelationReport& r) {
    std::vector<std::string> heads;
    for (const auto& [head, cls] : r.row_labels) {
        if (std::find(heads.begin(), heads.end(), head) == heads.end()) heads.push_back(head);
    }
    Json out = Json::object();
    for (const auto& a : heads) {
        for (const auto& b : heads) {
            if (a != b) out[a + "|" + b] = cross_head_score(r, a, b);
        }
    }
    return out;
}

/// correlation.{csv,json}, correlation_abs.{csv,json}, optional correlation.svg and scores.json.
inline void write_correlation_reports(const std::filesystem::path& dir, const CorrelationReport& signed_report,
                                      bool svg, bool svg_absolute = false) {
    std::filesystem::create_directories(dir);
    const CorrelationReport abs_report = signed_report.absolute_values();
    write_text(dir / "correlation.csv", correlation_csv(signed_report));
    write_text(dir / "correlation_abs.csv", correlation_csv(abs_report));
    jsonio::write_json(dir / "correlation.json", signed_report);
    jsonio::write_json(dir / "correlation_abs.json", abs_report);
    jsonio::write_json(dir / "scores.json", cross_head_scores(signed_report));
    if (svg) write_text(dir / "correlation.svg", correlation_svg(svg_absolute ? abs_report : signed_report));
}

// --- metrics ---------------------------------------------------------------

inline constexpr const char* kMetricCsvHeader = "accuracy,precision,recall,f1,auroc";

inline std::string metric_csv_row(const MetricReport& r) {
    return format_real(r.accuracy) + ',' + format_real(r.precision_macro) + ',' + format_real(r.recall_macro) + ',' +
           format_real(r.f1_macro) + ',' + (r.auroc_macro ? format_real(*r.auroc_macro) : std::string("NA"));
}

/// Header plus one row in table column order.
inline std::string metric_csv(const MetricReport& r) {
    return std::string(kMetricCsvHeader) + '\n' + metric_csv_row(r) + '\n';
}

/// "95.8 ± 0.6": mean and sample standard deviation as percentages with one decimal.
inline std::string format_mean_std_percent(const std::vector<double>& values) {
    require(!values.empty(), ErrorKind::EmptyInput, "no values to aggregate");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f \xC2\xB1 %.1f", 100.0 * mean, 100.0 * sd);
    return buf;
}

// --- heads directory ----------------------------------------------------------

inline std::string head_file_stem(const std::string& name) {
    std::string stem;
    for (char c : name) {
        const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        stem += safe ? std::string(1, c) : std::string("__");
    }
    return stem;
}

inline void write_head(const std::filesystem::path& dir, const ClassifierHead& head, DType dtype = DType::Float64) {
    std::filesystem::create_directories(dir);
    const std::string stem = head_file_stem(head.name);
    std::vector<std::string> classes = head.class_names;
    for (std::size_t c = classes.size(); c < head.classes(); ++c) classes.push_back(std::to_string(c));
    write_tensor(dir / (stem + ".weights.wsc"), to_tensor(head.weights, dtype));
    write_tensor(dir / (stem + ".bias.wsc"), to_tensor(head.bias, dtype));
    jsonio::write_json(dir / (stem + ".json"), Json{{"name", head.name},
                                                    {"classes", classes},
                                                    {"avgpool", false},
                                                    {"weights", stem + ".weights.wsc"},
                                                    {"bias", stem + ".bias.wsc"}});
}

/// Marks an average-pooling output layer (no weights on disk).
inline void write_avgpool_marker(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    jsonio::write_json(dir / (head_file_stem(name) + ".json"),
                       Json{{"name", name}, {"classes", {"avgpool"}}, {"avgpool", true}});
}

struct HeadEntry {
    ClassifierHead head;
    bool avgpool = false;  // weights to be filled by avgpool_reference(D)
};

/// Heads in sidecar file-name order.
inline std::vector<HeadEntry> read_heads(const std::filesystem::path& dir) {
    require(std::filesystem::is_directory(dir), ErrorKind::InvalidInput, "'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> sidecars;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") sidecars.push_back(e.path());
    }
    std::sort(sidecars.begin(), sidecars.end());
    std::vector<HeadEntry> out;
    for (const auto& path : sidecars) {
        const Json j = jsonio::read_json(path);
        const std::string w = path.filename().string();
        jsonio::check_keys(j, {"name", "classes", "avgpool", "weights", "bias"}, w);
        HeadEntry entry;
        jsonio::get_to(j, "name", entry.head.name, w);
        jsonio::get_to(j, "classes", entry.head.class_names, w);
        jsonio::get_to(j, "avgpool", entry.avgpool, w);
        require(!entry.head.name.empty(), ErrorKind::Format, w + ": missing head name");
        if (!entry.avgpool) {
            require(j.contains("weights"), ErrorKind::Format, w + ": missing weights file");
            const Tensor wt = read_tensor(dir / j.at("weights").get<std::string>());
            require(wt.dims.size() == 2, ErrorKind::Format, w + ": head weights must be 2-D");
            entry.head.weights = to_matrix(wt);
            if (j.contains("bias")) {
                entry.head.bias = to_vector(read_tensor(dir / j.at("bias").get<std::string>()));
            } else {
                entry.head.bias = Vector::Zero(entry.head.weights.rows());
            }
            require(entry.head.bias.size() == entry.head.weights.rows(), ErrorKind::Format,
                    w + ": bias length does not match weight rows");
            require(entry.head.class_names.empty() || entry.head.class_names.size() == entry.head.classes(),
                    ErrorKind::Format, w + ": class list does not match weight rows");
        }
        out.push_back(std::move(entry));
    }
    require(!out.empty(), ErrorKind::InvalidInput, "no head sidecars in '" + dir.string() + "'");
    return out;
}

}  // namespace wsca
