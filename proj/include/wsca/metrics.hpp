#pragma once

// Accuracy, macro precision/recall/F1 and macro one-vs-rest AUROC.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"

namespace wsca {

/// C x C counts, entry (i, j) = samples with true class i predicted as j.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

inline ConfusionMatrix confusion_matrix(std::span<const Category> truth, std::span<const Category> pred,
                                        std::size_t classes) {
    require(truth.size() == pred.size(), ErrorKind::Shape,
            "true/pred length mismatch: " + std::to_string(truth.size()) + " vs " + std::to_string(pred.size()));
    ConfusionMatrix cm(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < classes && pred[i] >= 0 &&
                    static_cast<std::size_t>(pred[i]) < classes,
                ErrorKind::Shape, "category index outside [0, " + std::to_string(classes) + ")");
        ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
    }
    return cm;
}

struct ClassMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

struct MetricReport {
    double accuracy = 0.0;
    double precision_macro = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    std::optional<double> auroc_macro;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix confusion;
    // classes left out of each macro mean because the metric is undefined for them
    std::size_t precision_excluded = 0;
    std::size_t recall_excluded = 0;
    std::size_t f1_excluded = 0;
    std::size_t auroc_excluded = 0;
};

namespace detail {

inline double defined_mean(const std::vector<ClassMetrics>& per_class, std::optional<double> ClassMetrics::*field,
                           std::size_t& excluded) {
    double sum = 0.0;
    std::size_t n = 0;
    excluded = 0;
    for (const auto& m : per_class) {
        if (const auto& v = m.*field) {
            sum += *v;
            ++n;
        } else {
            ++excluded;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace detail

/// Everything except AUROC. Per-class values with a zero denominator are undefined and left out
/// of the macro mean; F1 = 2TP / (2TP + FP + FN).
inline MetricReport classification_metrics(const ConfusionMatrix& cm) {
    const std::size_t c = cm.size();
    std::size_t total = 0;
    std::size_t trace = 0;
    std::vector<std::size_t> row_sum(c, 0);
    std::vector<std::size_t> col_sum(c, 0);
    for (std::size_t i = 0; i < c; ++i) {
        require(cm[i].size() == c, ErrorKind::Shape, "confusion matrix must be square");
        for (std::size_t j = 0; j < c; ++j) {
            total += cm[i][j];
            row_sum[i] += cm[i][j];
            col_sum[j] += cm[i][j];
        }
        trace += cm[i][i];
    }
    require(total > 0, ErrorKind::EmptyInput, "confusion matrix holds no samples");

    MetricReport r;
    r.confusion = cm;
    r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    r.per_class.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        const auto tp = static_cast<double>(cm[k][k]);
        const auto fp = static_cast<double>(col_sum[k]) - tp;
        const auto fn = static_cast<double>(row_sum[k]) - tp;
        auto& m = r.per_class[k];
        if (tp + fp > 0) m.precision = tp / (tp + fp);
        if (tp + fn > 0) m.recall = tp / (tp + fn);
        if (2 * tp + fp + fn > 0) m.f1 = 2 * tp / (2 * tp + fp + fn);
    }
    r.precision_macro = detail::defined_mean(r.per_class, &ClassMetrics::precision, r.precision_excluded);
    r.recall_macro = detail::defined_mean(r.per_class, &ClassMetrics::recall, r.recall_excluded);
    r.f1_macro = detail::defined_mean(r.per_class, &ClassMetrics::f1, r.f1_excluded);
    return r;
}

/// Mann-Whitney AUROC of `scores` for the positive mask, ties counted one half via midranks.
/// Requires at least one positive and one negative.
inline double binary_auroc(std::span<const double> scores, const std::vector<char>& positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
        for (std::size_t t = i; t < j; ++t) {
            if (positive[order[t]]) {
                pos_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const auto np = static_cast<double>(n_pos);
    const auto nn = static_cast<double>(n - n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Macro one-vs-rest AUROC over classes with both positives and negatives.
inline double auroc_ovr_macro(const Matrix& scores, std::span<const Category> truth,
                              std::size_t* excluded = nullptr) {
    require(static_cast<Eigen::Index>(truth.size()) == scores.rows(), ErrorKind::Shape,
            "score rows " + std::to_string(scores.rows()) + " != labels " + std::to_string(truth.size()));
    require(scores.allFinite(), ErrorKind::InvalidInput, "scores contain NaN/Inf");
    double sum = 0.0;
    std::size_t eligible = 0;
    std::size_t skipped = 0;
    std::vector<double> column(truth.size());
    std::vector<char> positive(truth.size());
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            positive[i] = truth[i] == static_cast<Category>(c);
            n_pos += positive[i] ? 1 : 0;
            column[i] = scores(static_cast<Eigen::Index>(i), c);
        }
        if (n_pos == 0 || n_pos == truth.size()) {
            ++skipped;
            continue;
        }
        sum += binary_auroc(column, positive);
        ++eligible;
    }
    if (excluded) *excluded = skipped;
    require(eligible > 0, ErrorKind::UndefinedMetric, "no class has both positives and negatives");
    return sum / static_cast<double>(eligible);
}

/// Full report from predictions and per-class scores.
inline MetricReport evaluate_scores(const Matrix& scores, std::span<const Category> truth) {
    require(static_cast<Eigen::Index>(truth.size()) == scores.rows(), ErrorKind::Shape, "score/label count mismatch");
    std::vector<Category> pred(truth.size());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        scores.row(i).maxCoeff(&best);
        pred[static_cast<std::size_t>(i)] = static_cast<Category>(best);
    }
    MetricReport r = classification_metrics(confusion_matrix(truth, pred, static_cast<std::size_t>(scores.cols())));
    std::size_t skipped = 0;
    r.auroc_macro = auroc_ovr_macro(scores, truth, &skipped);
    r.auroc_excluded = skipped;
    return r;
}

}  // namespace wsca
