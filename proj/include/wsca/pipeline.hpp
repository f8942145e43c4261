#pragma once

// Run manifests and the two experiment drivers: the per-seed audit (probe, evaluate, project,
// correlate) and the paired unbiased/biased validation built on top of it.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wsca/correlation.hpp"
#include "wsca/data_model.hpp"
#include "wsca/error.hpp"
#include "wsca/json_io.hpp"
#include "wsca/labels_io.hpp"
#include "wsca/metrics.hpp"
#include "wsca/projection.hpp"
#include "wsca/report_io.hpp"
#include "wsca/synthgen.hpp"
#include "wsca/tensor_io.hpp"
#include "wsca/trainer.hpp"

namespace wsca {

enum class Regime { Probe, Baseline, Multitask };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Probe: return "probe";
        case Regime::Baseline: return "baseline";
        case Regime::Multitask: return "multitask";
    }
    return "probe";
}

inline Regime parse_regime(const std::string& s) {
    if (s == "probe") return Regime::Probe;
    if (s == "baseline") return Regime::Baseline;
    if (s == "multitask") return Regime::Multitask;
    fail(ErrorKind::Format, "unknown regime '" + s + "'");
}

/// One arm of a bias validation: overrides applied to the base manifest.
struct ArmSpec {
    std::optional<double> bias_rho;                // generator sources only
    std::optional<CompositionTable> composition;   // cull to these joint counts
};

struct ValidationSpec {
    ArmSpec unbiased;
    ArmSpec biased;
};

struct RunManifest {
    std::string run_id = "run";
    // source: either a generator (regenerated per seed with seed = panel seed) or files
    std::optional<GeneratorConfig> generator;
    std::filesystem::path embeddings;
    std::filesystem::path labels;
    LabelOptions label_options;

    std::string primary;                   // empty: the label table's primary attribute
    std::string confounder;                // head compared against the primary in summaries
    std::vector<std::string> attributes;   // heads to train; empty: every attribute
    Regime regime = Regime::Probe;
    TrainConfig train;                                            // linear probes
    TrainConfig encoder_train = default_encoder_train_config();  // baseline / multitask regimes
    EncoderConfig encoder;
    double var_threshold = kDefaultVarThreshold;
    std::size_t component_floor = kDefaultComponentFloor;
    CorrelationMode mode = CorrelationMode::Cosine;
    bool include_reference = false;
    bool svg = false;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double holdout_fraction = 0.2;
    std::optional<CompositionTable> cull;  // applied after loading, seeded by the run seed
    std::optional<ValidationSpec> validation;
};

// --- manifest JSON ------------------------------------------------------------

inline void to_json(Json& j, const ArmSpec& a) {
    j = Json::object();
    if (a.bias_rho) j["bias_rho"] = *a.bias_rho;
    if (a.composition) j["composition"] = *a.composition;
}

inline ArmSpec parse_arm(const Json& j, const std::filesystem::path& base, const std::string& what) {
    jsonio::check_keys(j, {"bias_rho", "composition"}, what);
    ArmSpec arm;
    if (j.contains("bias_rho")) {
        double rho = 0.0;
        jsonio::get_to(j, "bias_rho", rho, what);
        arm.bias_rho = rho;
    }
    if (j.contains("composition")) {
        const Json& c = j.at("composition");
        if (c.is_string()) {
            arm.composition = read_composition(base / c.get<std::string>()).table;
        } else {
            arm.composition = c.get<CompositionTable>();
        }
    }
    return arm;
}

inline void to_json(Json& j, const RunManifest& m) {
    Json source;
    if (m.generator) {
        source["generator"] = *m.generator;
    } else {
        source["embeddings"] = m.embeddings.string();
        source["labels"] = m.labels.string();
    }
    j = Json{{"run_id", m.run_id}, {"source", source}};
    if (!m.primary.empty()) j["primary"] = m.primary;
    if (!m.confounder.empty()) j["confounder"] = m.confounder;
    j["attributes"] = m.attributes;
    if (!m.label_options.bins.empty()) j["bins"] = m.label_options.bins;
    if (!m.label_options.cardinalities.empty()) j["cardinalities"] = m.label_options.cardinalities;
    if (!m.label_options.class_names.empty()) j["class_names"] = m.label_options.class_names;
    j["regime"] = to_string(m.regime);
    j["train"] = m.train;
    j["encoder_train"] = m.encoder_train;
    j["encoder"] = m.encoder;
    j["projection"] = {{"var_threshold", m.var_threshold}, {"floor", m.component_floor}};
    j["correlation"] = {{"mode", to_string(m.mode)}, {"reference", m.include_reference}, {"svg", m.svg}};
    j["seeds"] = m.seeds;
    j["holdout_fraction"] = m.holdout_fraction;
    if (m.cull) j["cull"] = *m.cull;
    if (m.validation) j["validation"] = {{"unbiased", m.validation->unbiased}, {"biased", m.validation->biased}};
}

/// Parses a manifest; relative paths resolve against `base`.
inline RunManifest parse_manifest(const Json& j, const std::filesystem::path& base = {}) {
    const std::string w = "manifest";
    jsonio::check_keys(j,
                       {"run_id", "source", "primary", "confounder", "attributes", "bins", "cardinalities",
                        "class_names", "regime", "train", "encoder_train", "encoder", "projection", "correlation", "seeds",
                        "holdout_fraction", "cull", "validation"},
                       w);
    RunManifest m;
    jsonio::get_to(j, "run_id", m.run_id, w);
    if (j.contains("source")) {
        const Json& s = j.at("source");
        jsonio::check_keys(s, {"generator", "embeddings", "labels"}, "source");
        if (s.contains("generator")) {
            require(!s.contains("embeddings") && !s.contains("labels"), ErrorKind::Format,
                    "source: use either a generator or embeddings + labels");
            m.generator = s.at("generator").get<GeneratorConfig>();
        } else {
            require(s.contains("embeddings") && s.contains("labels"), ErrorKind::Format,
                    "source: embeddings and labels are both required");
            m.embeddings = base / s.at("embeddings").get<std::string>();
            m.labels = base / s.at("labels").get<std::string>();
        }
    }
    jsonio::get_to(j, "primary", m.primary, w);
    jsonio::get_to(j, "confounder", m.confounder, w);
    jsonio::get_to(j, "attributes", m.attributes, w);
    if (j.contains("bins")) {
        for (const auto& [name, spec] : j.at("bins").items()) {
            BinSpec b = spec.get<BinSpec>();
            b.attribute = name;
            m.label_options.bins[name] = b;
        }
    }
    jsonio::get_to(j, "cardinalities", m.label_options.cardinalities, w);
    jsonio::get_to(j, "class_names", m.label_options.class_names, w);
    if (j.contains("regime")) m.regime = parse_regime(j.at("regime").get<std::string>());
    if (j.contains("train")) m.train = j.at("train").get<TrainConfig>();
    if (j.contains("encoder_train")) {
        // unspecified fields keep the encoder defaults
        Json merged = default_encoder_train_config();
        merged.update(j.at("encoder_train"));
        m.encoder_train = merged.get<TrainConfig>();
    }
    if (j.contains("encoder")) m.encoder = j.at("encoder").get<EncoderConfig>();
    if (j.contains("projection")) {
        const Json& p = j.at("projection");
        jsonio::check_keys(p, {"var_threshold", "floor"}, "projection");
        jsonio::get_to(p, "var_threshold", m.var_threshold, "projection");
        jsonio::get_to(p, "floor", m.component_floor, "projection");
    }
    if (j.contains("correlation")) {
        const Json& c = j.at("correlation");
        jsonio::check_keys(c, {"mode", "reference", "svg"}, "correlation");
        if (c.contains("mode")) m.mode = parse_correlation_mode(c.at("mode").get<std::string>());
        jsonio::get_to(c, "reference", m.include_reference, "correlation");
        jsonio::get_to(c, "svg", m.svg, "correlation");
    }
    jsonio::get_to(j, "seeds", m.seeds, w);
    jsonio::get_to(j, "holdout_fraction", m.holdout_fraction, w);
    if (j.contains("cull")) m.cull = j.at("cull").get<CompositionTable>();
    if (j.contains("validation")) {
        const Json& v = j.at("validation");
        jsonio::check_keys(v, {"unbiased", "biased"}, "validation");
        ValidationSpec spec;
        if (v.contains("unbiased")) spec.unbiased = parse_arm(v.at("unbiased"), base, "validation.unbiased");
        if (v.contains("biased")) spec.biased = parse_arm(v.at("biased"), base, "validation.biased");
        m.validation = spec;
    }

    require(!m.seeds.empty(), ErrorKind::Format, "manifest: seed panel must not be empty");
    require(m.holdout_fraction > 0.0 && m.holdout_fraction < 1.0, ErrorKind::Format,
            "manifest: holdout_fraction must lie in (0, 1)");
    require(m.generator || !m.embeddings.empty(), ErrorKind::Format, "manifest: missing source");
    return m;
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
    try {
        return parse_manifest(jsonio::read_json(path), path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

// --- data loading -------------------------------------------------------------

struct Dataset {
    EmbeddingSet embeddings;
    LabelTable labels;
    LabelLoadReport load_report;
};

/// Loads the manifest's source for one run seed and applies any culling.
inline Dataset load_dataset(const RunManifest& m, std::uint64_t seed) {
    std::optional<Dataset> ds;
    if (m.generator) {
        GeneratorConfig cfg = *m.generator;
        cfg.seed = seed;
        SyntheticData data = generate(cfg);
        ds.emplace(Dataset{std::move(data.embeddings), std::move(data.labels), {}});
    } else {
        LabelOptions opts = m.label_options;
        if (!m.primary.empty()) opts.primary = m.primary;
        LoadedLabels loaded = read_labels(m.labels, opts);
        Matrix x = read_matrix(m.embeddings);
        require(x.rows() == static_cast<Eigen::Index>(loaded.table.size()), ErrorKind::Shape,
                "embeddings have " + std::to_string(x.rows()) + " rows, labels " +
                    std::to_string(loaded.table.size()));
        EmbeddingSet emb(loaded.table.ids(), std::move(x));
        ds.emplace(Dataset{std::move(emb), std::move(loaded.table), std::move(loaded.report)});
    }
    if (m.cull) {
        const std::string primary = m.primary.empty() ? ds->labels.primary() : m.primary;
        require(!m.confounder.empty(), ErrorKind::Format, "culling needs a confounder attribute");
        auto [emb, labels] = cull_to_composition(ds->embeddings, ds->labels, primary, m.confounder, *m.cull, seed);
        ds.emplace(Dataset{std::move(emb), std::move(labels), std::move(ds->load_report)});
    }
    return std::move(*ds);
}

/// Attributes receiving a head, primary first; throws KeyError on unknown names.
inline std::vector<std::string> resolve_attributes(const RunManifest& m, const LabelTable& labels) {
    const std::string primary = m.primary.empty() ? labels.primary() : m.primary;
    std::vector<std::string> out{primary};
    if (m.attributes.empty()) {
        for (const auto& a : labels.attributes()) {
            if (a.name != primary) out.push_back(a.name);
        }
    } else {
        for (const auto& a : m.attributes) {
            if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
        }
    }
    if (!m.confounder.empty() && std::find(out.begin(), out.end(), m.confounder) == out.end()) {
        out.push_back(m.confounder);
    }
    for (const auto& a : out) {
        require(labels.has(a), ErrorKind::Key, "manifest names unknown attribute '" + a + "'");
    }
    for (const auto& [name, w] : m.encoder_train.task_loss_weights) {
        require(labels.has(name), ErrorKind::Key, "task_loss_weights names unknown attribute '" + name + "'");
    }
    return out;
}

// --- helpers ----------------------------------------------------------------

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    std::mt19937_64 rng(seq);
    return rng();
}

inline constexpr std::uint64_t kSplitTag = 0x73706c6974;  // "split"

/// Seeded holdout split; both index lists ascending.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(std::size_t n, double fraction,
                                                                                      std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(derive_seed(seed, kSplitTag));
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    require(n_test >= 1 && n - n_test >= 2, ErrorKind::InvalidInput,
            "holdout split of " + std::to_string(n) + " samples leaves an empty side");
    std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(test)};
}

/// WSCA_THREADS caps parallelism; default one worker per task.
inline std::size_t worker_count(std::size_t tasks) {
    std::size_t n = std::max<std::size_t>(tasks, 1);
    if (const char* env = std::getenv("WSCA_THREADS")) {
        const auto v = csv::parse_int(env);
        if (v && *v >= 1) n = std::min(n, static_cast<std::size_t>(*v));
    }
    return n;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the lowest-index failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Re-raises library errors prefixed with the failing attribute.
template <typename Fn>
auto tagged(const std::string& attribute, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "attribute '" + attribute + "': " + e.detail());
    }
}

inline std::vector<Category> gather(const std::vector<Category>& values, const std::vector<std::size_t>& rows) {
    std::vector<Category> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(values[r]);
    return out;
}

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

// --- audit ------------------------------------------------------------------

struct SeedResult {
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::string> head_order;
    std::map<std::string, ClassifierHead> heads;
    std::map<std::string, MetricReport> metrics;
    std::optional<ShallowEncoder> encoder;
    ProjectionBasis basis;
    CorrelationReport correlation;
    std::optional<double> score;  // cross_head_score(primary, confounder)
};

struct AuditResult {
    std::string run_id;
    std::string primary;
    std::string confounder;
    std::vector<SeedResult> seeds;
    LabelLoadReport load_report;
};

/// Trains, evaluates and correlates all heads for one seed on an already loaded dataset.
inline SeedResult audit_seed(const RunManifest& m, const Dataset& ds, const std::vector<std::string>& attributes,
                             std::uint64_t seed) {
    const std::string& primary = attributes.front();
    SeedResult res;
    res.seed = seed;
    res.head_order = attributes;
    const auto [train_rows, test_rows] = train_test_split(ds.embeddings.size(), m.holdout_fraction, seed);
    res.n_train = train_rows.size();
    res.n_test = test_rows.size();

    TrainConfig cfg = m.train;
    cfg.seed = seed;

    // Frozen embeddings seen by the heads.
    Matrix features = ds.embeddings.data();
    std::vector<std::string> to_probe = attributes;
    if (m.regime != Regime::Probe) {
        TrainConfig mt_cfg = m.encoder_train;
        mt_cfg.seed = seed;
        if (m.regime == Regime::Baseline) {
            const auto it = mt_cfg.task_loss_weights.find(primary);
            mt_cfg.task_loss_weights = {{primary, it == mt_cfg.task_loss_weights.end() ? 1.0 : it->second}};
        } else if (mt_cfg.task_loss_weights.empty()) {
            for (const auto& a : attributes) mt_cfg.task_loss_weights[a] = 1.0;
        }
        MultitaskModel model = tagged(primary, [&] {
            return train_multitask(ds.embeddings.subset(train_rows), ds.labels.subset(train_rows), m.encoder, mt_cfg);
        });
        features = embed(model.encoder, features);
        res.encoder = model.encoder;
        for (auto& [name, head] : model.heads) {
            if (std::find(attributes.begin(), attributes.end(), name) != attributes.end()) {
                res.heads.emplace(name, std::move(head));
            }
        }
        std::erase_if(to_probe, [&](const std::string& a) { return res.heads.count(a) > 0; });
    }

    std::vector<ClassifierHead> probed(to_probe.size());
    parallel_for(to_probe.size(), worker_count(to_probe.size()), [&](std::size_t i) {
        const std::string& name = to_probe[i];
        probed[i] = tagged(name, [&] {
            const Attribute& attr = ds.labels.attribute(name);
            const auto rows = ds.labels.observed(name, train_rows);
            TrainConfig head_cfg = cfg;
            head_cfg.seed = derive_seed(seed, i + 1);
            ClassifierHead h = train_probe(gather_rows(features, rows), gather(attr.values, rows), attr.cardinality,
                                           head_cfg, name);
            h.class_names = attr.class_names;
            return h;
        });
    });
    for (auto& h : probed) res.heads.emplace(h.name, std::move(h));

    for (const auto& name : attributes) {
        res.metrics[name] = tagged(name, [&] {
            const Attribute& attr = ds.labels.attribute(name);
            const auto rows = ds.labels.observed(name, test_rows);
            require(!rows.empty(), ErrorKind::EmptyInput, "no labelled samples in the holdout split");
            return evaluate_scores(probabilities(res.heads.at(name), gather_rows(features, rows)),
                                   gather(attr.values, rows));
        });
    }

    res.basis = fit_projection(gather_rows(features, train_rows), m.var_threshold, m.component_floor);
    std::vector<ProjectedHead> projected;
    for (const auto& name : attributes) projected.push_back(project(res.heads.at(name), res.basis));
    if (m.include_reference) projected.push_back(project(avgpool_reference(static_cast<std::size_t>(features.cols())), res.basis));
    res.correlation = correlation_matrix(projected, m.mode);
    if (!m.confounder.empty() && m.confounder != primary) {
        res.score = cross_head_score(res.correlation, primary, m.confounder);
    }
    return res;
}

inline Json seed_summary(const SeedResult& r) {
    Json metrics = Json::object();
    for (const auto& name : r.head_order) metrics[name] = r.metrics.at(name);
    Json j{{"seed", r.seed}, {"n_train", r.n_train}, {"n_test", r.n_test}, {"basis", r.basis}, {"metrics", metrics}};
    j["cross_head_score"] = r.score ? Json(*r.score) : Json(nullptr);
    j["zero_rows"] = r.correlation.zero_rows;
    return j;
}

inline void write_seed_outputs(const std::filesystem::path& dir, const SeedResult& r, bool svg) {
    std::filesystem::create_directories(dir / "heads");
    for (const auto& name : r.head_order) write_head(dir / "heads", r.heads.at(name));
    if (r.correlation.include_reference) write_avgpool_marker(dir / "heads", kAvgPoolReference);
    if (r.encoder) {
        write_matrix(dir / "encoder.w1.wsc", r.encoder->w1);
        write_tensor(dir / "encoder.b1.wsc", to_tensor(r.encoder->b1));
        write_matrix(dir / "encoder.w2.wsc", r.encoder->w2);
        write_tensor(dir / "encoder.b2.wsc", to_tensor(r.encoder->b2));
    }
    std::string csv = std::string("target,") + kMetricCsvHeader + "\n";
    for (const auto& name : r.head_order) csv += name + "," + metric_csv_row(r.metrics.at(name)) + "\n";
    write_text(dir / "metrics.csv", csv);
    jsonio::write_json(dir / "summary.json", seed_summary(r));
    write_correlation_reports(dir, r.correlation, svg);
}

/// Mean ± std across seeds per target, in percent.
inline std::pair<std::string, Json> aggregate(const AuditResult& a) {
    std::string csv = std::string("target,") + kMetricCsvHeader + "\n";
    Json j = Json::object();
    for (const auto& name : a.seeds.front().head_order) {
        std::vector<double> acc, prec, rec, f1, auc;
        for (const auto& s : a.seeds) {
            const MetricReport& r = s.metrics.at(name);
            acc.push_back(r.accuracy);
            prec.push_back(r.precision_macro);
            rec.push_back(r.recall_macro);
            f1.push_back(r.f1_macro);
            if (r.auroc_macro) auc.push_back(*r.auroc_macro);
        }
        const std::string auc_text = auc.size() == a.seeds.size() ? format_mean_std_percent(auc) : "NA";
        csv += name + "," + format_mean_std_percent(acc) + "," + format_mean_std_percent(prec) + "," +
               format_mean_std_percent(rec) + "," + format_mean_std_percent(f1) + "," + auc_text + "\n";
        j[name] = {{"accuracy", format_mean_std_percent(acc)},
                   {"precision", format_mean_std_percent(prec)},
                   {"recall", format_mean_std_percent(rec)},
                   {"f1", format_mean_std_percent(f1)},
                   {"auroc", auc_text}};
    }
    std::vector<double> scores;
    for (const auto& s : a.seeds) {
        if (s.score) scores.push_back(*s.score);
    }
    Json out{{"run_id", a.run_id}, {"seeds", a.seeds.size()}, {"metrics", j}};
    if (!scores.empty()) {
        out["cross_head_score"] = {{"primary", a.primary}, {"confounder", a.confounder}, {"values", scores}};
    }
    return {csv, out};
}

inline void write_audit_outputs(const std::filesystem::path& out, const RunManifest& m, const AuditResult& a) {
    std::filesystem::create_directories(out);
    jsonio::write_json(out / "manifest.json", m);
    for (const auto& s : a.seeds) write_seed_outputs(out / ("seed_" + std::to_string(s.seed)), s, m.svg);
    const auto [csv, json] = aggregate(a);
    write_text(out / "aggregate.csv", csv);
    jsonio::write_json(out / "aggregate.json", json);
    if (!a.load_report.missing.empty()) {
        Json lr{{"missing", a.load_report.missing}, {"bins", a.load_report.fitted_bins}};
        jsonio::write_json(out / "load_report.json", lr);
    }
}

/// Full audit over the seed panel; writes the report bundle when `out` is non-empty.
inline AuditResult run_audit(const RunManifest& m, const std::filesystem::path& out = {}) {
    validate(m.train);
    if (m.regime != Regime::Probe) validate(m.encoder_train);
    AuditResult result;
    result.run_id = m.run_id;

    // Load once up front so unknown attributes fail before any training.
    std::optional<Dataset> first = load_dataset(m, m.seeds.front());
    const std::vector<std::string> attributes = resolve_attributes(m, first->labels);
    result.primary = attributes.front();
    result.confounder = m.confounder;
    result.load_report = first->load_report;

    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        const std::uint64_t seed = m.seeds[i];
        // file sources are seed independent unless culled
        if (i > 0 && (m.generator || m.cull)) first = load_dataset(m, seed);
        result.seeds.push_back(audit_seed(m, *first, attributes, seed));
    }
    if (!out.empty()) write_audit_outputs(out, m, result);
    return result;
}

// --- bias validation -----------------------------------------------------------

struct VerdictRow {
    std::uint64_t seed = 0;
    double unbiased = 0.0;
    double biased = 0.0;
};

struct ValidationResult {
    std::string primary;
    std::string confounder;
    std::vector<VerdictRow> rows;
    bool detected = false;
    double median_gap = 0.0;
    AuditResult unbiased;
    AuditResult biased;
};

inline RunManifest apply_arm(RunManifest m, const ArmSpec& arm, const std::string& label) {
    m.run_id += "/" + label;
    m.validation.reset();
    if (arm.bias_rho) {
        require(m.generator.has_value(), ErrorKind::Format, "validation." + label + ".bias_rho needs a generator source");
        m.generator->bias_rho = *arm.bias_rho;
    }
    if (arm.composition) m.cull = arm.composition;
    return m;
}

inline double median(std::vector<double> v) {
    require(!v.empty(), ErrorKind::EmptyInput, "median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Audits the unbiased and biased arms with matched seeds; detection means the biased
/// cross-head score is strictly higher for every seed.
inline ValidationResult run_bias_validation(const RunManifest& m, const std::filesystem::path& out = {}) {
    require(m.validation.has_value(), ErrorKind::Format, "manifest has no validation section");
    require(!m.confounder.empty(), ErrorKind::Format, "bias validation needs a confounder attribute");
    const RunManifest unbiased = apply_arm(m, m.validation->unbiased, "unbiased");
    const RunManifest biased = apply_arm(m, m.validation->biased, "biased");

    ValidationResult v;
    v.unbiased = run_audit(unbiased, out.empty() ? out : out / "unbiased");
    v.biased = run_audit(biased, out.empty() ? out : out / "biased");
    v.primary = v.unbiased.primary;
    v.confounder = m.confounder;

    std::vector<double> gaps;
    v.detected = true;
    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        VerdictRow row{m.seeds[i], *v.unbiased.seeds[i].score, *v.biased.seeds[i].score};
        v.detected = v.detected && row.biased > row.unbiased;
        gaps.push_back(row.biased - row.unbiased);
        v.rows.push_back(row);
    }
    v.median_gap = median(gaps);

    if (!out.empty()) {
        std::string csv = "seed,unbiased,biased,gap\n";
        Json rows = Json::array();
        for (const auto& r : v.rows) {
            csv += std::to_string(r.seed) + "," + format_real(r.unbiased) + "," + format_real(r.biased) + "," +
                   format_real(r.biased - r.unbiased) + "\n";
            rows.push_back({{"seed", r.seed}, {"unbiased", r.unbiased}, {"biased", r.biased}});
        }
        write_text(out / "verdict.csv", csv);
        jsonio::write_json(out / "verdict.json", Json{{"primary", v.primary},
                                                      {"confounder", v.confounder},
                                                      {"rows", rows},
                                                      {"median_gap", v.median_gap},
                                                      {"detected", v.detected}});
    }
    return v;
}

}  // namespace wsca
