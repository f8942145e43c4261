#pragma once

// JSON (de)serialization of configs and reports. Field names are snake_case; unknown keys
// are rejected so typos in manifests surface as format errors.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include "json.hpp"

#include "wsca/correlation.hpp"
#include "wsca/data_model.hpp"
#include "wsca/error.hpp"
#include "wsca/metrics.hpp"
#include "wsca/projection.hpp"
#include "wsca/synthgen.hpp"
#include "wsca/trainer.hpp"

namespace wsca {

using Json = nlohmann::ordered_json;

namespace jsonio {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
    require(j.is_object(), ErrorKind::Format, what + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        require(ok, ErrorKind::Format, what + ": unknown field '" + key + "'");
    }
}

template <typename T>
void get_to(const Json& j, const char* key, T& out, const std::string& what) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, what + "." + key + ": " + e.what());
    }
}

inline Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace jsonio

// --- synthgen --------------------------------------------------------------

inline void to_json(Json& j, const ContinuousAttr& a) { j = Json{{"name", a.name}, {"correlation", a.correlation}}; }

inline void from_json(const Json& j, ContinuousAttr& a) {
    jsonio::check_keys(j, {"name", "correlation"}, "continuous_attrs[]");
    jsonio::get_to(j, "name", a.name, "continuous_attrs[]");
    jsonio::get_to(j, "correlation", a.correlation, "continuous_attrs[]");
}

inline void to_json(Json& j, const GeneratorConfig& c) {
    j = Json{{"n_samples", c.n_samples},
             {"emb_dim", c.emb_dim},
             {"primary_classes", c.primary_classes},
             {"confounder_classes", c.confounder_classes},
             {"continuous_attrs", c.continuous_attrs},
             {"bias_rho", c.bias_rho},
             {"signal_scale_primary", c.signal_scale_primary},
             {"signal_scale_confounder", c.signal_scale_confounder},
             {"noise_sigma", c.noise_sigma},
             {"seed", c.seed}};
}

inline void from_json(const Json& j, GeneratorConfig& c) {
    const std::string w = "generator";
    jsonio::check_keys(j,
                       {"n_samples", "emb_dim", "primary_classes", "confounder_classes", "continuous_attrs",
                        "bias_rho", "signal_scale_primary", "signal_scale_confounder", "noise_sigma", "seed"},
                       w);
    jsonio::get_to(j, "n_samples", c.n_samples, w);
    jsonio::get_to(j, "emb_dim", c.emb_dim, w);
    jsonio::get_to(j, "primary_classes", c.primary_classes, w);
    jsonio::get_to(j, "confounder_classes", c.confounder_classes, w);
    jsonio::get_to(j, "continuous_attrs", c.continuous_attrs, w);
    jsonio::get_to(j, "bias_rho", c.bias_rho, w);
    jsonio::get_to(j, "signal_scale_primary", c.signal_scale_primary, w);
    jsonio::get_to(j, "signal_scale_confounder", c.signal_scale_confounder, w);
    jsonio::get_to(j, "noise_sigma", c.noise_sigma, w);
    jsonio::get_to(j, "seed", c.seed, w);
}

// --- trainer ---------------------------------------------------------------

inline void to_json(Json& j, const TrainConfig& c) {
    j = Json{{"learning_rate", c.learning_rate},
             {"max_epochs", c.max_epochs},
             {"l2_lambda", c.l2_lambda},
             {"early_stop_patience", c.early_stop_patience},
             {"tolerance", c.tolerance},
             {"seed", c.seed},
             {"task_loss_weights", c.task_loss_weights}};
}

inline void from_json(const Json& j, TrainConfig& c) {
    const std::string w = "train";
    jsonio::check_keys(j,
                       {"learning_rate", "max_epochs", "l2_lambda", "early_stop_patience", "tolerance", "seed",
                        "task_loss_weights"},
                       w);
    jsonio::get_to(j, "learning_rate", c.learning_rate, w);
    jsonio::get_to(j, "max_epochs", c.max_epochs, w);
    jsonio::get_to(j, "l2_lambda", c.l2_lambda, w);
    jsonio::get_to(j, "early_stop_patience", c.early_stop_patience, w);
    jsonio::get_to(j, "tolerance", c.tolerance, w);
    jsonio::get_to(j, "seed", c.seed, w);
    jsonio::get_to(j, "task_loss_weights", c.task_loss_weights, w);
}

inline void to_json(Json& j, const EncoderConfig& c) {
    j = Json{{"hidden", c.hidden}, {"emb_dim", c.emb_dim}, {"activation", to_string(c.activation)}};
}

inline void from_json(const Json& j, EncoderConfig& c) {
    const std::string w = "encoder";
    jsonio::check_keys(j, {"hidden", "emb_dim", "activation"}, w);
    jsonio::get_to(j, "hidden", c.hidden, w);
    jsonio::get_to(j, "emb_dim", c.emb_dim, w);
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
}

// --- data_model ------------------------------------------------------------

inline void to_json(Json& j, const BinSpec& b) {
    j = Json{{"k", b.k}, {"strategy", to_string(b.strategy)}};
    if (b.fitted()) j["edges"] = b.edges;
}

inline void from_json(const Json& j, BinSpec& b) {
    const std::string w = "bins";
    jsonio::check_keys(j, {"k", "strategy", "edges"}, w);
    jsonio::get_to(j, "k", b.k, w);
    if (j.contains("strategy")) b.strategy = parse_bin_strategy(j.at("strategy").get<std::string>());
    jsonio::get_to(j, "edges", b.edges, w);
    if (!b.edges.empty()) {
        require(b.edges.size() == b.k + 1, ErrorKind::Format, "bins: edges must hold k + 1 values");
        for (std::size_t i = 0; i + 1 < b.edges.size(); ++i) {
            require(b.edges[i] < b.edges[i + 1], ErrorKind::Format, "bins: edges must be strictly ascending");
        }
    }
}

inline void to_json(Json& j, const CompositionTable& t) {
    j = Json{{"rows", t.rows}, {"cols", t.cols}, {"counts", t.counts}};
}

inline void from_json(const Json& j, CompositionTable& t) {
    const std::string w = "composition";
    jsonio::check_keys(j, {"rows", "cols", "counts"}, w);
    jsonio::get_to(j, "rows", t.rows, w);
    jsonio::get_to(j, "cols", t.cols, w);
    jsonio::get_to(j, "counts", t.counts, w);
    require(t.counts.size() == t.rows.size() * t.cols.size(), ErrorKind::Format,
            "composition: counts must hold rows x cols values (row-major)");
}

// --- reports ---------------------------------------------------------------

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline void to_json(Json& j, const MetricReport& r) {
    Json per_class = Json::array();
    for (const auto& m : r.per_class) {
        per_class.push_back(
            {{"precision", optional_json(m.precision)}, {"recall", optional_json(m.recall)}, {"f1", optional_json(m.f1)}});
    }
    j = Json{{"accuracy", r.accuracy},
             {"precision", r.precision_macro},
             {"recall", r.recall_macro},
             {"f1", r.f1_macro},
             {"auroc", optional_json(r.auroc_macro)},
             {"excluded", {{"precision", r.precision_excluded},
                           {"recall", r.recall_excluded},
                           {"f1", r.f1_excluded},
                           {"auroc", r.auroc_excluded}}},
             {"per_class", per_class},
             {"confusion", r.confusion}};
}

inline void to_json(Json& j, const CorrelationReport& r) {
    Json labels = Json::array();
    for (std::size_t i = 0; i < r.size(); ++i) labels.push_back(r.label(i));
    Json flat = Json::array();
    for (Eigen::Index i = 0; i < r.matrix.rows(); ++i) {
        for (Eigen::Index k = 0; k < r.matrix.cols(); ++k) flat.push_back(r.matrix(i, k));
    }
    j = Json{{"mode", to_string(r.mode)},
             {"absolute", r.absolute},
             {"include_reference", r.include_reference},
             {"labels", labels},
             {"size", r.size()},
             {"matrix", flat},
             {"zero_rows", r.zero_rows}};
}

inline void to_json(Json& j, const ProjectionBasis& b) {
    double cumulative = 0.0;
    for (double v : b.explained_variance_ratio) cumulative += v;
    j = Json{{"k", b.k()},
             {"dim", b.dim()},
             {"rank", b.rank},
             {"threshold_components", b.threshold_components},
             {"cumulative_variance_ratio", cumulative},
             {"explained_variance_ratio", b.explained_variance_ratio}};
}

}  // namespace wsca
