#pragma once

// Pairwise cosine (or Pearson) correlation between projected head rows.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"
#include "wsca/projection.hpp"
#include "wsca/trainer.hpp"

namespace wsca {

enum class CorrelationMode { Cosine, Pearson };

inline const char* to_string(CorrelationMode m) { return m == CorrelationMode::Cosine ? "cosine" : "pearson"; }

inline CorrelationMode parse_correlation_mode(const std::string& s) {
    if (s == "cosine") return CorrelationMode::Cosine;
    if (s == "pearson") return CorrelationMode::Pearson;
    fail(ErrorKind::InvalidInput, "unknown correlation mode '" + s + "'");
}

/// Weight rows of one head after projection.
struct ProjectedHead {
    std::string name;
    std::vector<std::string> class_names;
    Matrix rows;  // C x K
};

inline ProjectedHead project(const ClassifierHead& head, const ProjectionBasis& basis) {
    std::vector<std::string> names = head.class_names;
    for (std::size_t c = names.size(); c < head.classes(); ++c) names.push_back(std::to_string(c));
    return {head.name, std::move(names), project_head(head, basis)};
}

struct CorrelationReport {
    std::vector<std::pair<std::string, std::string>> row_labels;  // (head, class)
    Matrix matrix;                                                 // M x M
    CorrelationMode mode = CorrelationMode::Cosine;
    bool include_reference = false;
    bool absolute = false;
    std::vector<std::size_t> zero_rows;  // rows treated as zero vectors

    std::size_t size() const { return row_labels.size(); }
    std::string label(std::size_t i) const { return row_labels.at(i).first + ":" + row_labels.at(i).second; }

    std::vector<std::size_t> rows_of(const std::string& head) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < row_labels.size(); ++i) {
            if (row_labels[i].first == head) out.push_back(i);
        }
        return out;
    }

    /// Copy with every entry replaced by its magnitude.
    CorrelationReport absolute_values() const {
        CorrelationReport out = *this;
        out.matrix = matrix.cwiseAbs();
        out.absolute = true;
        return out;
    }
};

/// Entry (i, j) = cos(w_i, w_j); Pearson mode centers each vector over its coordinates first.
/// Zero vectors correlate 0 with everything and 1 with themselves and are listed in zero_rows.
inline CorrelationReport correlation_matrix(const std::vector<ProjectedHead>& heads,
                                            CorrelationMode mode = CorrelationMode::Cosine) {
    CorrelationReport report;
    report.mode = mode;
    Eigen::Index k = -1;
    std::size_t m = 0;
    for (const auto& h : heads) {
        if (k < 0) k = h.rows.cols();
        require(h.rows.cols() == k, ErrorKind::Shape,
                "head '" + h.name + "' has dim " + std::to_string(h.rows.cols()) + ", expected " + std::to_string(k));
        require(h.class_names.size() == static_cast<std::size_t>(h.rows.rows()), ErrorKind::Shape,
                "head '" + h.name + "' class name count mismatch");
        m += static_cast<std::size_t>(h.rows.rows());
        if (h.name == kAvgPoolReference) report.include_reference = true;
    }
    require(m >= 2, ErrorKind::InvalidInput, "need at least 2 weight rows to correlate");

    Matrix unit(static_cast<Eigen::Index>(m), k);
    std::vector<char> zero(m, 0);
    std::size_t r = 0;
    for (const auto& h : heads) {
        for (Eigen::Index c = 0; c < h.rows.rows(); ++c, ++r) {
            report.row_labels.emplace_back(h.name, h.class_names[static_cast<std::size_t>(c)]);
            Vector v = h.rows.row(c).transpose();
            const double raw_norm = v.norm();
            if (mode == CorrelationMode::Pearson) v.array() -= v.mean();
            const double norm = v.norm();
            if (raw_norm == 0.0 || norm <= 1e-14 * raw_norm) {
                zero[r] = 1;
                report.zero_rows.push_back(r);
                unit.row(static_cast<Eigen::Index>(r)).setZero();
            } else {
                unit.row(static_cast<Eigen::Index>(r)) = (v / norm).transpose();
            }
        }
    }

    report.matrix = unit * unit.transpose();
    for (Eigen::Index i = 0; i < report.matrix.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < report.matrix.cols(); ++j) {
            const double v = std::clamp(report.matrix(i, j), -1.0, 1.0);
            report.matrix(i, j) = v;
            report.matrix(j, i) = v;
        }
        report.matrix(i, i) = 1.0;
    }
    return report;
}

/// Mean |entry| over rows of head_a x rows of head_b.
inline double cross_head_score(const CorrelationReport& report, const std::string& head_a,
                               const std::string& head_b) {
    const auto a = report.rows_of(head_a);
    const auto b = report.rows_of(head_b);
    require(!a.empty(), ErrorKind::Key, "head '" + head_a + "' not in report");
    require(!b.empty(), ErrorKind::Key, "head '" + head_b + "' not in report");
    double sum = 0.0;
    for (std::size_t i : a) {
        for (std::size_t j : b) sum += std::abs(report.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    return sum / static_cast<double>(a.size() * b.size());
}

}  // namespace wsca
