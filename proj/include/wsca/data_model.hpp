#pragma once

// Dataset containers, metadata binning and composition culling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wsca/error.hpp"

namespace wsca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Category index; negative values mark a missing label.
using Category = std::int32_t;
inline constexpr Category kMissing = -1;

/// N x D embedding matrix keyed by unique sample ids.
class EmbeddingSet {
public:
    EmbeddingSet(std::vector<std::string> sample_ids, Matrix data)
        : ids_(std::move(sample_ids)), data_(std::move(data)) {
        require(data_.rows() > 0, ErrorKind::EmptyInput, "embedding set has no samples");
        require(data_.cols() > 0, ErrorKind::Shape, "embedding dimension must be >= 1");
        require(static_cast<Eigen::Index>(ids_.size()) == data_.rows(), ErrorKind::Shape,
                "sample_ids length " + std::to_string(ids_.size()) + " != rows " +
                    std::to_string(data_.rows()));
        require(data_.allFinite(), ErrorKind::InvalidInput, "embedding contains NaN/Inf");
        std::unordered_set<std::string> seen;
        seen.reserve(ids_.size());
        for (const auto& id : ids_) {
            require(seen.insert(id).second, ErrorKind::InvalidInput, "duplicate sample_id '" + id + "'");
        }
    }

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
    const std::vector<std::string>& ids() const { return ids_; }
    const Matrix& data() const { return data_; }

    /// Rows at the given positions, in the given order.
    EmbeddingSet subset(std::span<const std::size_t> rows) const {
        std::vector<std::string> ids;
        ids.reserve(rows.size());
        Matrix out(static_cast<Eigen::Index>(rows.size()), data_.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ids.push_back(ids_.at(rows[i]));
            out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(rows[i]));
        }
        return EmbeddingSet(std::move(ids), std::move(out));
    }

private:
    std::vector<std::string> ids_;
    Matrix data_;
};

/// One categorical column of a LabelTable.
struct Attribute {
    std::string name;
    std::vector<Category> values;  // kMissing where absent
    std::size_t cardinality = 0;
    std::vector<std::string> class_names;  // size == cardinality
};

/// Per-sample categorical labels; exactly one attribute is the primary task.
class LabelTable {
public:
    LabelTable(std::vector<std::string> sample_ids, std::vector<Attribute> attributes, std::string primary)
        : ids_(std::move(sample_ids)), attrs_(std::move(attributes)), primary_(std::move(primary)) {
        std::set<std::string> names;
        for (auto& a : attrs_) {
            require(names.insert(a.name).second, ErrorKind::InvalidInput, "duplicate attribute '" + a.name + "'");
            require(a.values.size() == ids_.size(), ErrorKind::Shape,
                    "attribute '" + a.name + "' has " + std::to_string(a.values.size()) + " values for " +
                        std::to_string(ids_.size()) + " samples");
            for (Category v : a.values) {
                require(v == kMissing || (v >= 0 && static_cast<std::size_t>(v) < a.cardinality),
                        ErrorKind::InvalidInput,
                        "attribute '" + a.name + "' index " + std::to_string(v) + " outside [0, " +
                            std::to_string(a.cardinality) + ")");
            }
            if (a.class_names.empty()) {
                for (std::size_t c = 0; c < a.cardinality; ++c) a.class_names.push_back(std::to_string(c));
            }
            require(a.class_names.size() == a.cardinality, ErrorKind::Shape,
                    "attribute '" + a.name + "' class name count mismatch");
        }
        require(names.count(primary_) == 1, ErrorKind::Key, "primary attribute '" + primary_ + "' not present");
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& primary() const { return primary_; }
    const std::vector<Attribute>& attributes() const { return attrs_; }

    bool has(const std::string& name) const {
        return std::any_of(attrs_.begin(), attrs_.end(), [&](const Attribute& a) { return a.name == name; });
    }

    const Attribute& attribute(const std::string& name) const {
        for (const auto& a : attrs_) {
            if (a.name == name) return a;
        }
        fail(ErrorKind::Key, "unknown attribute '" + name + "'");
    }

    /// Row positions (ascending) where `name` is observed, restricted to `rows` when given.
    std::vector<std::size_t> observed(const std::string& name, std::span<const std::size_t> rows = {}) const {
        const auto& values = attribute(name).values;
        std::vector<std::size_t> out;
        if (rows.empty()) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (values[i] != kMissing) out.push_back(i);
            }
        } else {
            for (std::size_t i : rows) {
                if (values.at(i) != kMissing) out.push_back(i);
            }
        }
        return out;
    }

    LabelTable subset(std::span<const std::size_t> rows) const {
        std::vector<std::string> ids;
        ids.reserve(rows.size());
        for (std::size_t r : rows) ids.push_back(ids_.at(r));
        std::vector<Attribute> attrs;
        attrs.reserve(attrs_.size());
        for (const auto& src : attrs_) {
            Attribute a{src.name, {}, src.cardinality, src.class_names};
            a.values.reserve(rows.size());
            for (std::size_t r : rows) a.values.push_back(src.values.at(r));
            attrs.push_back(std::move(a));
        }
        return LabelTable(std::move(ids), std::move(attrs), primary_);
    }

private:
    std::vector<std::string> ids_;
    std::vector<Attribute> attrs_;
    std::string primary_;
};

// ---------------------------------------------------------------------------
// Binning of continuous metadata
// ---------------------------------------------------------------------------

enum class BinStrategy { EqualWidth, EqualFrequency };

inline const char* to_string(BinStrategy s) {
    return s == BinStrategy::EqualWidth ? "equal-width" : "equal-frequency";
}

inline BinStrategy parse_bin_strategy(const std::string& s) {
    if (s == "equal-width") return BinStrategy::EqualWidth;
    if (s == "equal-frequency") return BinStrategy::EqualFrequency;
    fail(ErrorKind::InvalidInput, "unknown bin strategy '" + s + "'");
}

struct BinSpec {
    std::string attribute;
    std::size_t k = 4;
    BinStrategy strategy = BinStrategy::EqualWidth;
    std::vector<double> edges;  // k + 1 strictly ascending values once fitted

    bool fitted() const { return edges.size() == k + 1; }
};

/// Linear-interpolation quantile of already sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline BinSpec fit_bins(std::span<const double> values, std::size_t k, BinStrategy strategy,
                        std::string attribute = {}) {
    require(k >= 2, ErrorKind::InvalidInput, "bin count k must be >= 2");
    require(values.size() >= k, ErrorKind::InvalidInput,
            "need at least k=" + std::to_string(k) + " values, got " + std::to_string(values.size()));
    for (double v : values) require(std::isfinite(v), ErrorKind::InvalidInput, "non-finite value in binning input");

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();

    BinSpec spec{std::move(attribute), k, strategy, {}};
    spec.edges.resize(k + 1);
    if (strategy == BinStrategy::EqualWidth) {
        require(hi > lo, ErrorKind::DegenerateBinning, "all values identical; cannot split range");
        for (std::size_t i = 0; i <= k; ++i) {
            spec.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k);
        }
        spec.edges[k] = hi;
    } else {
        std::size_t distinct = 1;
        for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] != sorted[i - 1];
        require(distinct >= k, ErrorKind::DegenerateBinning,
                std::to_string(distinct) + " distinct values for k=" + std::to_string(k) + " bins");
        for (std::size_t i = 0; i <= k; ++i) {
            spec.edges[i] = sorted_quantile(sorted, static_cast<double>(i) / static_cast<double>(k));
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        require(spec.edges[i] < spec.edges[i + 1], ErrorKind::DegenerateBinning,
                "bin edges not strictly ascending (tied quantiles)");
    }
    return spec;
}

/// Bin index per value: edges[b] <= v < edges[b+1], last bin right-closed, out-of-range clamps.
inline std::vector<Category> discretize(std::span<const double> values, const BinSpec& spec) {
    require(spec.fitted(), ErrorKind::InvalidInput, "bin spec '" + spec.attribute + "' is not fitted");
    const auto inner_begin = spec.edges.begin() + 1;
    const auto inner_end = spec.edges.end() - 1;
    std::vector<Category> out;
    out.reserve(values.size());
    for (double v : values) {
        require(std::isfinite(v), ErrorKind::InvalidInput, "non-finite value in discretize input");
        out.push_back(static_cast<Category>(std::upper_bound(inner_begin, inner_end, v) - inner_begin));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Composition culling
// ---------------------------------------------------------------------------

/// Target joint counts of (primary class) x (confounder class).
struct CompositionTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::size_t> counts;  // row-major, rows.size() * cols.size()

    std::size_t at(std::size_t r, std::size_t c) const { return counts.at(r * cols.size() + c); }
};

/// Maps table labels to category indices of `attr`: by class name, or by position when no
/// label matches any class name and the counts line up.
inline std::vector<Category> resolve_class_labels(const std::vector<std::string>& labels, const Attribute& attr) {
    std::vector<Category> out;
    std::size_t matched = 0;
    for (const auto& label : labels) {
        auto it = std::find(attr.class_names.begin(), attr.class_names.end(), label);
        if (it != attr.class_names.end()) {
            out.push_back(static_cast<Category>(it - attr.class_names.begin()));
            ++matched;
        } else {
            out.push_back(kMissing);
        }
    }
    if (matched == labels.size()) return out;
    if (matched == 0 && labels.size() == attr.cardinality) {
        for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<Category>(i);
        return out;
    }
    fail(ErrorKind::Key, "composition labels do not match classes of attribute '" + attr.name + "'");
}

/// Joint (primary x confounder) counts over observed rows, row-major.
inline std::vector<std::size_t> joint_counts(const LabelTable& labels, const std::string& primary,
                                             const std::string& confounder) {
    const auto& p = labels.attribute(primary);
    const auto& c = labels.attribute(confounder);
    std::vector<std::size_t> counts(p.cardinality * c.cardinality, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (p.values[i] == kMissing || c.values[i] == kMissing) continue;
        ++counts[static_cast<std::size_t>(p.values[i]) * c.cardinality + static_cast<std::size_t>(c.values[i])];
    }
    return counts;
}

/// Subsamples so the joint (primary x confounder) counts equal `target` exactly.
/// Classes absent from the table and rows missing either label are dropped.
inline std::pair<EmbeddingSet, LabelTable> cull_to_composition(const EmbeddingSet& emb, const LabelTable& labels,
                                                               const std::string& primary,
                                                               const std::string& confounder,
                                                               const CompositionTable& target, std::uint64_t seed) {
    require(emb.ids() == labels.ids(), ErrorKind::InvalidInput, "embedding and label sample ids differ");
    require(target.counts.size() == target.rows.size() * target.cols.size(), ErrorKind::Shape,
            "composition table count matrix has wrong size");
    const auto& pa = labels.attribute(primary);
    const auto& ca = labels.attribute(confounder);
    const auto row_idx = resolve_class_labels(target.rows, pa);
    const auto col_idx = resolve_class_labels(target.cols, ca);

    // cell id -> member rows in input order
    std::map<std::pair<Category, Category>, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (pa.values[i] == kMissing || ca.values[i] == kMissing) continue;
        members[{pa.values[i], ca.values[i]}].push_back(i);
    }

    std::mt19937_64 rng(seed);
    std::vector<char> keep(labels.size(), 0);
    for (std::size_t r = 0; r < target.rows.size(); ++r) {
        for (std::size_t c = 0; c < target.cols.size(); ++c) {
            const std::size_t want = target.at(r, c);
            auto it = members.find({row_idx[r], col_idx[c]});
            const std::size_t have = it == members.end() ? 0 : it->second.size();
            require(have >= want, ErrorKind::InfeasibleComposition,
                    "cell (" + target.rows[r] + ", " + target.cols[c] + ") has " + std::to_string(have) +
                        " samples, target " + std::to_string(want));
            if (want == 0) continue;
            std::vector<std::size_t> pool = it->second;
            if (want < have) {
                std::shuffle(pool.begin(), pool.end(), rng);
                pool.resize(want);
            }
            for (std::size_t i : pool) keep[i] = 1;
        }
    }

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) rows.push_back(i);
    }
    return {emb.subset(rows), labels.subset(rows)};
}

}  // namespace wsca
