#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "temp_dir.hpp"
#include "wsca/report_io.hpp"

using namespace wsca;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CorrelationReport sample_report(std::uint64_t seed, std::size_t heads) {
    std::mt19937_64 rng(seed);
    std::vector<ProjectedHead> ph;
    for (std::size_t h = 0; h < heads; ++h) {
        ph.push_back({"head/" + std::to_string(h), {"a", "b", "c"}, gaussian_matrix(3, 7, 1.0, rng)});
    }
    return correlation_matrix(ph);
}

std::vector<double> csv_values(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        while (std::getline(row, cell, ',')) out.push_back(std::stod(cell));
    }
    return out;
}

}  // namespace

TEST_CASE("CSV, JSON and SVG renderings agree", "[report_io]") {
    TempDir tmp("report");
    const CorrelationReport r = sample_report(1, 3);
    write_correlation_reports(tmp.path(), r, true);

    const auto from_csv = csv_values(slurp(tmp / "correlation.csv"));
    const Json j = jsonio::read_json(tmp / "correlation.json");
    const auto from_json = j.at("matrix").get<std::vector<double>>();
    REQUIRE(from_csv.size() == r.size() * r.size());
    REQUIRE(from_json.size() == from_csv.size());
    CHECK(j.at("labels").size() == r.size());
    CHECK(j.at("labels")[4] == "head/1:b");

    const std::string svg = slurp(tmp / "correlation.svg");
    const std::regex data_value("data-value=\"([^\"]+)\"");
    std::vector<double> from_svg;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), data_value); it != std::sregex_iterator(); ++it) {
        from_svg.push_back(std::stod((*it)[1]));
    }
    REQUIRE(from_svg.size() == from_csv.size());

    const std::regex annotation("text-anchor=\"middle\">(-?[0-9]+\\.[0-9]{2})<");
    std::vector<double> annotations;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), annotation); it != std::sregex_iterator(); ++it) {
        annotations.push_back(std::stod((*it)[1]));
    }
    REQUIRE(annotations.size() == from_csv.size());

    for (std::size_t i = 0; i < from_csv.size(); ++i) {
        const double truth = r.matrix(static_cast<Eigen::Index>(i / r.size()), static_cast<Eigen::Index>(i % r.size()));
        CHECK(from_csv[i] == truth);
        CHECK(std::abs(from_json[i] - from_csv[i]) < 1e-9);
        CHECK(from_svg[i] == from_csv[i]);
        CHECK(std::abs(annotations[i] - from_csv[i]) <= 0.005 + 1e-12);
    }

    const auto abs_csv = csv_values(slurp(tmp / "correlation_abs.csv"));
    for (std::size_t i = 0; i < abs_csv.size(); ++i) CHECK(abs_csv[i] == std::abs(from_csv[i]));
    CHECK(jsonio::read_json(tmp / "scores.json").contains("head/0|head/2"));
}

TEST_CASE("large reports skip cell annotations", "[report_io]") {
    const CorrelationReport r = sample_report(2, 8);  // 24 rows
    const std::string svg = correlation_svg(r);
    CHECK(svg.find("text-anchor=\"middle\"") == std::string::npos);
    CHECK(svg.find("data-value") != std::string::npos);
}

TEST_CASE("labels are escaped in SVG", "[report_io]") {
    const CorrelationReport r =
        correlation_matrix({ProjectedHead{"a<b", {"x&y", "z"}, Matrix::Identity(2, 2)}});
    const std::string svg = correlation_svg(r);
    CHECK(svg.find("a&lt;b:x&amp;y") != std::string::npos);
    CHECK(svg.find("a<b") == std::string::npos);
}

TEST_CASE("mean and spread formatting", "[report_io]") {
    CHECK(format_mean_std_percent({0.958}) == "95.8 \xC2\xB1 0.0");
    CHECK(format_mean_std_percent({0.95, 0.96, 0.97}) == "96.0 \xC2\xB1 1.0");
    CHECK_THROWS_AS(format_mean_std_percent({}), Error);
}

TEST_CASE("metric CSV columns", "[report_io]") {
    MetricReport m;
    m.accuracy = 0.5;
    m.precision_macro = 0.25;
    m.recall_macro = 1.0;
    m.f1_macro = 0.75;
    CHECK(metric_csv(m) == "accuracy,precision,recall,f1,auroc\n0.5,0.25,1,0.75,NA\n");
    m.auroc_macro = 0.125;
    CHECK(metric_csv_row(m) == "0.5,0.25,1,0.75,0.125");
}

TEST_CASE("heads directory round trip", "[report_io]") {
    TempDir tmp("heads");
    std::mt19937_64 rng(3);
    const ClassifierHead plane{"plane", gaussian_matrix(3, 5, 1.0, rng), Vector(gaussian_matrix(3, 1, 1.0, rng).col(0)), {"A", "B", "C"}};
    const ClassifierHead nested{"probe/scanner", gaussian_matrix(2, 5, 1.0, rng), Vector::Zero(2), {}};
    write_head(tmp.path(), plane);
    write_head(tmp.path(), nested);
    write_avgpool_marker(tmp.path(), "reference/avgpool");
    CHECK(head_file_stem("probe/scanner") == "probe__scanner");
    CHECK(head_file_stem("a b.c-d_e") == "a__b.c-d_e");

    const auto heads = read_heads(tmp.path());
    REQUIRE(heads.size() == 3);
    CHECK(heads[0].head.name == "plane");
    CHECK(heads[0].head.weights == plane.weights);
    CHECK(heads[0].head.bias == plane.bias);
    CHECK(heads[0].head.class_names == plane.class_names);
    CHECK(heads[1].head.name == "probe/scanner");
    CHECK(heads[1].head.class_names == std::vector<std::string>{"0", "1"});
    CHECK(heads[2].avgpool);
    CHECK(heads[2].head.name == "reference/avgpool");

    std::ofstream(tmp / "zz.json") << R"({"name": "x", "weights": "plane.weights.wsc", "extra": 1})";
    CHECK_THROWS_AS(read_heads(tmp.path()), Error);
    TempDir empty("heads_empty");
    CHECK_THROWS_AS(read_heads(empty.path()), Error);
}
