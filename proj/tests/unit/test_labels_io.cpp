#include <catch_amalgamated.hpp>

#include <fstream>

#include "temp_dir.hpp"
#include "wsca/labels_io.hpp"

using namespace wsca;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("binary attribute with inferred cardinality", "[labels_io]") {
    TempDir tmp("labels");
    write(tmp / "l.csv", "sample_id,sick\na,0\nb,1\nc,1\n");
    const LoadedLabels l = read_labels(tmp / "l.csv");
    CHECK(l.table.size() == 3);
    CHECK(l.table.primary() == "sick");
    CHECK(l.table.attribute("sick").cardinality == 2);
    CHECK(l.table.attribute("sick").values == std::vector<Category>{0, 1, 1});
}

TEST_CASE("continuous column is discretized with its bin spec", "[labels_io]") {
    TempDir tmp("labels_bins");
    write(tmp / "l.csv", "sample_id,plane,weight\na,0,1\nb,1,2\nc,2,3\nd,0,4\ne,1,5\nf,2,6\n");
    LabelOptions opts;
    opts.bins["weight"] = BinSpec{"weight", 3, BinStrategy::EqualWidth, {}};
    const LoadedLabels l = read_labels(tmp / "l.csv", opts);
    CHECK(l.table.attribute("weight").values == std::vector<Category>{0, 0, 1, 1, 2, 2});
    CHECK(l.table.attribute("weight").cardinality == 3);
    CHECK(l.report.fitted_bins.at("weight").edges.size() == 4);

    // pre-fitted edges are used as given, values outside clamp
    opts.bins["weight"].edges = {2.0, 3.0, 4.0, 5.0};
    CHECK(read_labels(tmp / "l.csv", opts).table.attribute("weight").values ==
          std::vector<Category>{0, 0, 1, 2, 2, 2});
}

TEST_CASE("missing cells drop the sample for that attribute only", "[labels_io]") {
    TempDir tmp("labels_missing");
    write(tmp / "l.csv", "sample_id,plane,scanner\na,0,1\nb,1,\nc,2,NA\nd,0,0\n");
    const LoadedLabels l = read_labels(tmp / "l.csv");
    CHECK(l.report.missing.at("scanner") == 2);
    CHECK(l.report.missing.at("plane") == 0);
    CHECK(l.table.observed("scanner") == std::vector<std::size_t>{0, 3});
    CHECK(l.table.observed("plane").size() == 4);
}

TEST_CASE("declared cardinalities, names and primary", "[labels_io]") {
    TempDir tmp("labels_decl");
    write(tmp / "l.csv", "sample_id,a,b\nx,0,1\ny,1,0\n");
    LabelOptions opts;
    opts.primary = "b";
    opts.cardinalities["a"] = 3;
    opts.class_names["a"] = {"low", "mid", "high"};
    const LoadedLabels l = read_labels(tmp / "l.csv", opts);
    CHECK(l.table.primary() == "b");
    CHECK(l.table.attribute("a").cardinality == 3);
    CHECK(l.table.attribute("a").class_names[2] == "high");
    opts.cardinalities["a"] = 1;
    CHECK(kind_of([&] { read_labels(tmp / "l.csv", opts); }) == ErrorKind::Format);
}

TEST_CASE("label file errors", "[labels_io]") {
    TempDir tmp("labels_err");
    write(tmp / "dup.csv", "sample_id,y\na,0\na,1\n");
    CHECK(kind_of([&] { read_labels(tmp / "dup.csv"); }) == ErrorKind::Format);

    write(tmp / "text.csv", "sample_id,y,w\na,0,1.5\nb,1,heavy\n");
    LabelOptions opts;
    opts.bins["w"] = BinSpec{"w", 2, BinStrategy::EqualWidth, {}};
    CHECK(kind_of([&] { read_labels(tmp / "text.csv", opts); }) == ErrorKind::Format);
    CHECK(kind_of([&] { read_labels(tmp / "text.csv"); }) == ErrorKind::Format);  // 1.5 is not an index

    write(tmp / "header.csv", "id,y\na,0\n");
    CHECK(kind_of([&] { read_labels(tmp / "header.csv"); }) == ErrorKind::Format);
    write(tmp / "ragged.csv", "sample_id,y\na,0,1\n");
    CHECK(kind_of([&] { read_labels(tmp / "ragged.csv"); }) == ErrorKind::Format);
    CHECK(kind_of([&] { read_labels(tmp / "nope.csv"); }) == ErrorKind::InvalidInput);

    opts.bins.clear();
    opts.bins["ghost"] = BinSpec{};
    CHECK(kind_of([&] { read_labels(tmp / "text.csv", opts); }) == ErrorKind::Key);
}

TEST_CASE("labels and compositions round trip", "[labels_io]") {
    TempDir tmp("labels_rt");
    const LabelTable t({"p", "q", "r"}, {{"y", {0, 1, 2}, 3, {}}, {"m", {1, kMissing, 0}, 2, {}}}, "y");
    write_labels(tmp / "l.csv", t);
    const LoadedLabels back = read_labels(tmp / "l.csv");
    CHECK(back.table.ids() == t.ids());
    CHECK(back.table.attribute("m").values == t.attribute("m").values);

    const CompositionSpec spec{"plane", "scanner", {{"Abdomen", "Head"}, {"S", "E10"}, {150, 658, 700, 150}}};
    write_composition(tmp / "c.csv", spec);
    const CompositionSpec c = read_composition(tmp / "c.csv");
    CHECK(c.primary == "plane");
    CHECK(c.confounder == "scanner");
    CHECK(c.table.rows == spec.table.rows);
    CHECK(c.table.cols == spec.table.cols);
    CHECK(c.table.counts == spec.table.counts);
    CHECK(c.table.at(1, 0) == 700);

    write(tmp / "neg.csv", "plane/scanner,S\nAbdomen,-1\n");
    CHECK(kind_of([&] { read_composition(tmp / "neg.csv"); }) == ErrorKind::Format);
    write(tmp / "noslash.csv", "plane,S\nAbdomen,1\n");
    CHECK(kind_of([&] { read_composition(tmp / "noslash.csv"); }) == ErrorKind::Format);
}
