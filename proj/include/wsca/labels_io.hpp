#pragma once

// Label and composition tables as CSV.
//
// Labels: header "sample_id,<attr1>,<attr2>,...", one row per sample. Cells hold category
// indices, or raw reals for attributes that come with a BinSpec. Empty or "NA" cells are
// missing; the sample is dropped for that attribute only.
//
// Composition: header "<primary>/<confounder>,<col class>,...", then
// "<row class>,<count>,..." per primary class.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"

namespace wsca {

namespace csv {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

/// Non-empty lines, split into cells.
inline std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split(line));
    }
    return rows;
}

inline bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "nan"; }

inline std::optional<long long> parse_int(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

inline std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace csv

/// How to interpret label columns.
struct LabelOptions {
    std::string primary;                               // defaults to the first attribute column
    std::map<std::string, BinSpec> bins;               // continuous columns; unfitted specs are fitted here
    std::map<std::string, std::size_t> cardinalities;  // declared, otherwise max index + 1
    std::map<std::string, std::vector<std::string>> class_names;
};

struct LabelLoadReport {
    std::map<std::string, std::size_t> missing;  // per attribute
    std::map<std::string, BinSpec> fitted_bins;
};

struct LoadedLabels {
    LabelTable table;
    LabelLoadReport report;
};

inline LoadedLabels read_labels(const std::filesystem::path& path, const LabelOptions& opts = {}) {
    const auto rows = csv::read_rows(path);
    require(!rows.empty(), ErrorKind::Format, path.string() + ": empty label file");
    const auto& header = rows.front();
    require(header.size() >= 2 && header[0] == "sample_id", ErrorKind::Format,
            path.string() + ": header must be 'sample_id,<attr>,...'");
    const std::size_t n_attr = header.size() - 1;
    for (const auto& [name, spec] : opts.bins) {
        require(std::find(header.begin() + 1, header.end(), name) != header.end(), ErrorKind::Key,
                "bin spec names unknown attribute '" + name + "'");
    }

    std::vector<std::string> ids;
    std::set<std::string> seen;
    std::vector<std::vector<std::string>> cells(n_attr);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        require(row.size() == header.size(), ErrorKind::Format,
                path.string() + ": line " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                    " cells, expected " + std::to_string(header.size()));
        require(!row[0].empty(), ErrorKind::Format, path.string() + ": empty sample_id on line " + std::to_string(r + 1));
        require(seen.insert(row[0]).second, ErrorKind::Format, path.string() + ": duplicate sample_id '" + row[0] + "'");
        ids.push_back(row[0]);
        for (std::size_t a = 0; a < n_attr; ++a) cells[a].push_back(row[a + 1]);
    }

    LabelLoadReport report;
    std::vector<Attribute> attrs;
    for (std::size_t a = 0; a < n_attr; ++a) {
        const std::string& name = header[a + 1];
        Attribute attr{name, std::vector<Category>(ids.size(), kMissing), 0, {}};
        std::size_t missing = 0;

        if (auto bin = opts.bins.find(name); bin != opts.bins.end()) {
            std::vector<double> values;
            std::vector<std::size_t> at;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (csv::is_missing(cells[a][i])) {
                    ++missing;
                    continue;
                }
                const auto v = csv::parse_real(cells[a][i]);
                require(v.has_value(), ErrorKind::Format,
                        path.string() + ": non-numeric value '" + cells[a][i] + "' in continuous column '" + name + "'");
                values.push_back(*v);
                at.push_back(i);
            }
            BinSpec spec = bin->second;
            spec.attribute = name;
            if (!spec.fitted()) spec = fit_bins(values, spec.k, spec.strategy, name);
            const auto idx = discretize(values, spec);
            for (std::size_t j = 0; j < at.size(); ++j) attr.values[at[j]] = idx[j];
            attr.cardinality = spec.k;
            report.fitted_bins[name] = spec;
        } else {
            long long max_idx = -1;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (csv::is_missing(cells[a][i])) {
                    ++missing;
                    continue;
                }
                const auto v = csv::parse_int(cells[a][i]);
                require(v.has_value() && *v >= 0 && *v < (1LL << 30), ErrorKind::Format,
                        path.string() + ": '" + cells[a][i] + "' in column '" + name +
                            "' is not a category index (declare a bin spec for continuous columns)");
                attr.values[i] = static_cast<Category>(*v);
                max_idx = std::max(max_idx, *v);
            }
            attr.cardinality = static_cast<std::size_t>(max_idx + 1);
            if (auto it = opts.cardinalities.find(name); it != opts.cardinalities.end()) {
                require(it->second >= attr.cardinality, ErrorKind::Format,
                        "declared cardinality " + std::to_string(it->second) + " of '" + name + "' below max index + 1");
                attr.cardinality = it->second;
            }
        }
        if (auto it = opts.class_names.find(name); it != opts.class_names.end()) {
            require(it->second.size() == attr.cardinality, ErrorKind::Format,
                    "class_names of '" + name + "' lists " + std::to_string(it->second.size()) + " names for " +
                        std::to_string(attr.cardinality) + " classes");
            attr.class_names = it->second;
        }
        report.missing[name] = missing;
        attrs.push_back(std::move(attr));
    }

    const std::string primary = opts.primary.empty() ? header[1] : opts.primary;
    return {LabelTable(std::move(ids), std::move(attrs), primary), std::move(report)};
}

inline void write_labels(const std::filesystem::path& path, const LabelTable& labels) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
    out << "sample_id";
    for (const auto& a : labels.attributes()) out << ',' << a.name;
    out << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels.ids()[i];
        for (const auto& a : labels.attributes()) {
            out << ',';
            if (a.values[i] != kMissing) out << a.values[i];
        }
        out << '\n';
    }
}

struct CompositionSpec {
    std::string primary;
    std::string confounder;
    CompositionTable table;
};

inline CompositionSpec read_composition(const std::filesystem::path& path) {
    const auto rows = csv::read_rows(path);
    require(rows.size() >= 2, ErrorKind::Format, path.string() + ": composition needs a header and rows");
    const auto& header = rows.front();
    const auto slash = header[0].find('/');
    require(header.size() >= 2 && slash != std::string::npos, ErrorKind::Format,
            path.string() + ": first header cell must be '<primary>/<confounder>'");
    CompositionSpec spec{header[0].substr(0, slash), header[0].substr(slash + 1), {}};
    spec.table.cols.assign(header.begin() + 1, header.end());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        require(rows[r].size() == header.size(), ErrorKind::Format,
                path.string() + ": line " + std::to_string(r + 1) + " has wrong cell count");
        spec.table.rows.push_back(rows[r][0]);
        for (std::size_t c = 1; c < rows[r].size(); ++c) {
            const auto v = csv::parse_int(rows[r][c]);
            require(v.has_value() && *v >= 0, ErrorKind::Format,
                    path.string() + ": '" + rows[r][c] + "' is not a non-negative count");
            spec.table.counts.push_back(static_cast<std::size_t>(*v));
        }
    }
    return spec;
}

inline void write_composition(const std::filesystem::path& path, const CompositionSpec& spec) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
    out << spec.primary << '/' << spec.confounder;
    for (const auto& c : spec.table.cols) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < spec.table.rows.size(); ++r) {
        out << spec.table.rows[r];
        for (std::size_t c = 0; c < spec.table.cols.size(); ++c) out << ',' << spec.table.at(r, c);
        out << '\n';
    }
}

}  // namespace wsca
