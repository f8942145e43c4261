// wsca: command-line front end.
//
//   generate       synthetic dataset -> embeddings.wsc, labels.csv, directions.wsc
//   probe          manifest-driven audit over a seed panel
//   analyze        correlation reports for a directory of heads
//   validate-bias  paired unbiased / biased audit with a detection verdict
//   cull           subsample a dataset to a target joint composition

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "wsca/wsca.hpp"

namespace fs = std::filesystem;
using namespace wsca;

namespace {

void log_line(const std::string& msg) { std::fprintf(stderr, "wsca: %s\n", msg.c_str()); }

int cmd_generate(const fs::path& config, const fs::path& out) {
    const GeneratorConfig cfg = jsonio::read_json(config).get<GeneratorConfig>();
    const SyntheticData data = generate(cfg);
    fs::create_directories(out);
    write_matrix(out / "embeddings.wsc", data.embeddings.data());
    write_labels(out / "labels.csv", data.labels);
    write_matrix(out / "directions.wsc", data.directions.stacked_rows());
    jsonio::write_json(out / "config.json", cfg);
    log_line("generated " + std::to_string(data.embeddings.size()) + " x " + std::to_string(data.embeddings.dim()) +
             " embeddings in " + out.string());
    return 0;
}

int cmd_probe(const fs::path& embeddings, const fs::path& labels, const fs::path& manifest, const fs::path& out) {
    RunManifest m = read_manifest(manifest);
    if (!embeddings.empty() || !labels.empty()) {
        require(!embeddings.empty() && !labels.empty(), ErrorKind::InvalidInput,
                "--embeddings and --labels must be given together");
        m.generator.reset();
        m.embeddings = embeddings;
        m.labels = labels;
    }
    const AuditResult r = run_audit(m, out);
    log_line("audited " + std::to_string(r.seeds.size()) + " seeds; reports in " + out.string());
    return 0;
}

struct AnalyzeOptions {
    fs::path heads;
    fs::path embeddings;
    fs::path out;
    std::string mode = "cosine";
    bool absolute = false;
    bool svg = false;
    double var_threshold = kDefaultVarThreshold;
    std::size_t floor = kDefaultComponentFloor;
};

int cmd_analyze(const AnalyzeOptions& o) {
    const CorrelationMode mode = parse_correlation_mode(o.mode);
    const Matrix x = read_matrix(o.embeddings);
    const ProjectionBasis basis = fit_projection(x, o.var_threshold, o.floor);
    std::vector<ProjectedHead> projected;
    for (HeadEntry& e : read_heads(o.heads)) {
        if (e.avgpool) {
            const std::string name = e.head.name;
            e.head = avgpool_reference(basis.dim());
            e.head.name = name;
        }
        require(e.head.dim() == basis.dim(), ErrorKind::Shape,
                "head '" + e.head.name + "' has dimension " + std::to_string(e.head.dim()) + ", embeddings " +
                    std::to_string(basis.dim()));
        projected.push_back(project(e.head, basis));
    }
    const CorrelationReport report = correlation_matrix(projected, mode);
    write_correlation_reports(o.out, report, o.svg, o.absolute);
    jsonio::write_json(o.out / "basis.json", basis);
    log_line("correlated " + std::to_string(report.size()) + " head rows in " + std::to_string(basis.k()) +
             " components");
    return 0;
}

int cmd_validate(const fs::path& manifest, const fs::path& out) {
    const ValidationResult v = run_bias_validation(read_manifest(manifest), out);
    log_line(std::string("detected=") + (v.detected ? "true" : "false") + " median_gap=" + format_real(v.median_gap));
    return 0;
}

int cmd_cull(const fs::path& embeddings, const fs::path& labels, const fs::path& composition, std::uint64_t seed,
             const fs::path& out) {
    const CompositionSpec spec = read_composition(composition);
    LabelOptions opts;
    opts.primary = spec.primary;
    const LoadedLabels loaded = read_labels(labels, opts);
    Matrix x = read_matrix(embeddings);
    require(x.rows() == static_cast<Eigen::Index>(loaded.table.size()), ErrorKind::Shape,
            "embeddings have " + std::to_string(x.rows()) + " rows, labels " + std::to_string(loaded.table.size()));
    const EmbeddingSet emb(loaded.table.ids(), std::move(x));
    const auto [culled_emb, culled_labels] =
        cull_to_composition(emb, loaded.table, spec.primary, spec.confounder, spec.table, seed);
    fs::create_directories(out);
    write_matrix(out / "embeddings.wsc", culled_emb.data());
    write_labels(out / "labels.csv", culled_labels);
    log_line("kept " + std::to_string(culled_emb.size()) + " of " + std::to_string(emb.size()) + " samples");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weight space correlation analysis"};
    app.require_subcommand(1);

    fs::path config, out, embeddings, labels, manifest, composition;
    std::uint64_t seed = 0;
    AnalyzeOptions analyze;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic embedding dataset");
    gen->add_option("--config", config, "Generator config JSON")->required();
    gen->add_option("--out", out, "Output directory")->required();

    auto* probe = app.add_subcommand("probe", "Train probes and write metric and correlation reports");
    probe->add_option("--embeddings", embeddings, "TensorFile of embeddings (overrides the manifest source)");
    probe->add_option("--labels", labels, "Label CSV (overrides the manifest source)");
    probe->add_option("--manifest", manifest, "Run manifest JSON")->required();
    probe->add_option("--out", out, "Output directory")->required();

    auto* an = app.add_subcommand("analyze", "Weight space correlation of saved heads");
    an->add_option("--heads", analyze.heads, "Directory of head sidecars")->required();
    an->add_option("--embeddings", analyze.embeddings, "TensorFile the projection basis is fitted on")->required();
    an->add_option("--out", analyze.out, "Output directory")->required();
    an->add_option("--mode", analyze.mode, "cosine or pearson")->check(CLI::IsMember({"cosine", "pearson"}));
    an->add_flag("--abs", analyze.absolute, "Render the heatmap with absolute values");
    an->add_flag("--svg", analyze.svg, "Write correlation.svg");
    an->add_option("--var-threshold", analyze.var_threshold, "Cumulative explained variance to keep");
    an->add_option("--floor", analyze.floor, "Minimum number of components");

    auto* val = app.add_subcommand("validate-bias", "Paired unbiased / biased audit");
    val->add_option("--manifest", manifest, "Run manifest JSON with a validation section")->required();
    val->add_option("--out", out, "Output directory")->required();

    auto* cull = app.add_subcommand("cull", "Subsample to a target joint composition");
    cull->add_option("--embeddings", embeddings, "TensorFile of embeddings")->required();
    cull->add_option("--labels", labels, "Label CSV")->required();
    cull->add_option("--composition", composition, "Composition CSV")->required();
    cull->add_option("--seed", seed, "Sampling seed")->required();
    cull->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(config, out);
        if (probe->parsed()) return cmd_probe(embeddings, labels, manifest, out);
        if (an->parsed()) return cmd_analyze(analyze);
        if (val->parsed()) return cmd_validate(manifest, out);
        if (cull->parsed()) return cmd_cull(embeddings, labels, composition, seed, out);
    } catch (const Error& e) {
        std::fprintf(stderr, "wsca: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "wsca: FormatError: %s\n", e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "wsca: InvalidInput: %s\n", e.what());
        return 2;
    }
    return 2;
}
