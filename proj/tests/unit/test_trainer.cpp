#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "wsca/metrics.hpp"
#include "wsca/synthgen.hpp"
#include "wsca/trainer.hpp"

using namespace wsca;
using Catch::Approx;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
    return gaussian_matrix(r, c, sd, rng);
}

std::vector<Category> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
    std::uniform_int_distribution<Category> d(0, classes - 1);
    std::vector<Category> y(n);
    for (auto& v : y) v = d(rng);
    return y;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

TEST_CASE("zero head gives ln C", "[trainer]") {
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(10, 4, rng);
    const ClassifierHead h{"h", Matrix::Zero(3, 4), Vector::Zero(3), {}};
    const auto y = random_labels(10, 3, rng);
    CHECK(loss_and_grad(h, x, y, 0.3).loss == Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("saturated softmax drives the loss to zero", "[trainer]") {
    Matrix x(1, 1);
    x << 1.0;
    ClassifierHead h{"h", Matrix::Zero(2, 1), Vector::Zero(2), {}};
    const std::vector<Category> y{1};
    double prev = 1.0;
    for (double margin : {1.0, 10.0, 100.0, 800.0}) {
        h.weights(1, 0) = margin;
        const double loss = loss_and_grad(h, x, y, 0.0).loss;
        CHECK(loss <= prev);
        CHECK(std::isfinite(loss));
        prev = loss;
    }
    CHECK(prev < 1e-300);
}

TEST_CASE("linear head gradient matches central differences", "[trainer][gradient]") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        const Matrix x = random_matrix(8, 5, rng);
        const auto y = random_labels(8, 3, rng);
        ClassifierHead h{"h", random_matrix(3, 5, rng, 0.5), random_matrix(3, 1, rng, 0.5).col(0), {}};
        const double l2 = 0.1;
        const LossGrad g = loss_and_grad(h, x, y, l2);
        const Matrix fd_w = oracle::central_difference(h.weights, [&] { return loss_and_grad(h, x, y, l2).loss; });
        Matrix b = h.bias;
        const Matrix fd_b = oracle::central_difference(b, [&] {
            ClassifierHead hb = h;
            hb.bias = b.col(0);
            return loss_and_grad(hb, x, y, l2).loss;
        });
        CHECK(oracle::relative_error(g.grad_w, fd_w) < 1e-5);
        CHECK(oracle::relative_error(g.grad_b, fd_b) < 1e-5);
    }
}

TEST_CASE("loss_and_grad shape errors", "[trainer]") {
    const ClassifierHead h{"h", Matrix::Zero(3, 4), Vector::Zero(3), {}};
    const std::vector<Category> y{0, 1};
    CHECK_THROWS_AS(loss_and_grad(h, Matrix::Zero(2, 5), y, 0.0), Error);
    CHECK_THROWS_AS(loss_and_grad(h, Matrix::Zero(3, 4), y, 0.0), Error);
    const std::vector<Category> bad{0, 3};
    CHECK_THROWS_AS(loss_and_grad(h, Matrix::Zero(2, 4), bad, 0.0), Error);
}

TEST_CASE("separable clusters are fitted exactly", "[trainer]") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise(0.0, 0.01);
    Matrix x(200, 3);
    std::vector<Category> y(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = noise(rng);
        x(i, 0) += i % 2 ? 1.0 : -1.0;
    }
    const ClassifierHead h = train_probe(x, y, 2, TrainConfig{});
    CHECK(predict(h, x) == y);
}

TEST_CASE("train_probe rejects a single category", "[trainer]") {
    const std::vector<Category> y(10, 1);
    try {
        train_probe(Matrix::Ones(10, 2), y, 2, TrainConfig{}, "scanner");
        FAIL("expected DegenerateLabels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateLabels);
        CHECK(std::string(e.what()).find("scanner") != std::string::npos);
    }
}

TEST_CASE("small learning rate descends monotonically and does not touch the input", "[trainer]") {
    const SyntheticData d = generate(GeneratorConfig{});
    const Matrix before = d.embeddings.data();
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 200;
    TrainLog log;
    const auto& y = d.labels.attribute(kPrimaryName).values;
    train_probe(d.embeddings, y, 4, cfg, "primary", &log);
    REQUIRE(log.losses.size() > 100);
    for (std::size_t i = 1; i < log.losses.size(); ++i) REQUIRE(log.losses[i] <= log.losses[i - 1] + 1e-9);
    CHECK(d.embeddings.data() == before);
}

TEST_CASE("training is seeded and deterministic", "[trainer]") {
    std::mt19937_64 rng(5);
    const Matrix x = random_matrix(60, 6, rng);
    const auto y = random_labels(60, 3, rng);
    TrainConfig cfg;
    cfg.seed = 9;
    const ClassifierHead a = train_probe(x, y, 3, cfg);
    const ClassifierHead b = train_probe(x, y, 3, cfg);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
}

TEST_CASE("probe on shuffled labels performs at chance", "[trainer]") {
    GeneratorConfig g;
    g.seed = 8;
    const SyntheticData d = generate(g);
    auto y = d.labels.attribute(kPrimaryName).values;
    std::mt19937_64 rng(1);
    std::shuffle(y.begin(), y.end(), rng);
    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::Index n_train = n * 4 / 5;
    const Matrix x_train = d.embeddings.data().topRows(n_train);
    const Matrix x_test = d.embeddings.data().bottomRows(n - n_train);
    const std::vector<Category> y_train(y.begin(), y.begin() + n_train);
    const std::vector<Category> y_test(y.begin() + n_train, y.end());
    const ClassifierHead h = train_probe(x_train, y_train, 4, TrainConfig{});
    const auto m = classification_metrics(confusion_matrix(y_test, predict(h, x_test), 4));
    CHECK(std::abs(m.accuracy - 0.25) < 0.05);
}

TEST_CASE("encoder forward pass", "[trainer][encoder]") {
    ShallowEncoder id{Matrix::Identity(5, 3), Vector::Zero(5), Matrix::Identity(3, 5), Vector::Zero(3),
                      Activation::Relu};
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(7, 3, rng).cwiseAbs();
    CHECK(embed(id, x) == x);
    CHECK(embed(id, Matrix::Zero(4, 3)) == Matrix::Zero(4, 3));

    ShallowEncoder enc = init_encoder(3, EncoderConfig{8, 4, Activation::Tanh}, rng);
    const EmbeddingSet in({"a", "b"}, random_matrix(2, 3, rng));
    const EmbeddingSet o1 = embed(enc, in);
    const EmbeddingSet o2 = embed(enc, in);
    CHECK(o1.data() == o2.data());
    CHECK(o1.ids() == in.ids());
    CHECK_THROWS_AS(embed(enc, Matrix::Zero(2, 4)), Error);
}

TEST_CASE("multitask gradient matches central differences", "[trainer][gradient][encoder]") {
    for (auto act : {Activation::Tanh, Activation::Relu}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            std::mt19937_64 rng(seed);
            const Matrix x = random_matrix(9, 4, rng);
            ShallowEncoder enc = init_encoder(4, EncoderConfig{5, 3, act}, rng);
            enc.b1 = random_matrix(5, 1, rng, 0.1).col(0);
            std::vector<ClassifierHead> heads{{"a", random_matrix(2, 3, rng), Vector::Zero(2), {}},
                                              {"b", random_matrix(3, 3, rng), Vector::Ones(3), {}}};
            std::vector<TaskLabels> tasks{{"a", 2, iota(9), random_labels(9, 2, rng), 1.0},
                                          {"b", 3, {0, 2, 3, 5, 8}, random_labels(5, 3, rng), 0.5}};
            const double l2 = 0.05;
            const MultitaskGrad g = multitask_loss_and_grad(enc, heads, x, tasks, l2);
            auto loss = [&] { return multitask_loss_and_grad(enc, heads, x, tasks, l2).loss; };
            CHECK(oracle::relative_error(g.encoder.w1, oracle::central_difference(enc.w1, loss)) < 1e-5);
            CHECK(oracle::relative_error(g.encoder.w2, oracle::central_difference(enc.w2, loss)) < 1e-5);
            Matrix b1 = enc.b1;
            const Matrix fd_b1 = oracle::central_difference(b1, [&] {
                ShallowEncoder e2 = enc;
                e2.b1 = b1.col(0);
                return multitask_loss_and_grad(e2, heads, x, tasks, l2).loss;
            });
            CHECK(oracle::relative_error(g.encoder.b1, fd_b1) < 1e-5);
            CHECK(oracle::relative_error(g.heads[1].grad_w, oracle::central_difference(heads[1].weights, loss)) < 1e-5);
        }
    }
}

TEST_CASE("baseline regime fits separable data", "[trainer][encoder]") {
    GeneratorConfig g;
    g.n_samples = 600;
    g.emb_dim = 16;
    g.noise_sigma = 0.05;
    const SyntheticData d = generate(g);
    TrainConfig cfg = default_encoder_train_config();
    cfg.task_loss_weights = {{kPrimaryName, 1.0}};
    const MultitaskModel m = train_multitask(d.embeddings, d.labels, EncoderConfig{32, 8, Activation::Relu}, cfg);
    REQUIRE(m.heads.size() == 1);
    const Matrix e = embed(m.encoder, d.embeddings.data());
    const auto pred = predict(m.heads.at(kPrimaryName), e);
    const auto cm = confusion_matrix(d.labels.attribute(kPrimaryName).values, pred, 4);
    CHECK(classification_metrics(cm).accuracy >= 0.99);
}

TEST_CASE("multitask training lowers every head's loss", "[trainer][encoder]") {
    GeneratorConfig g;
    g.n_samples = 1500;
    g.continuous_attrs = {{"weight", 0.7}};
    const SyntheticData d = generate(g);
    TrainConfig cfg = default_encoder_train_config();
    cfg.max_epochs = 300;
    TrainLog log;
    const MultitaskModel m = train_multitask(d.embeddings, d.labels, EncoderConfig{}, cfg, &log);
    CHECK(m.heads.size() == 3);
    for (const auto& [name, init] : log.initial_head_losses) {
        INFO(name);
        CHECK(log.final_head_losses.at(name) <= init);
    }
    CHECK(log.losses.back() <= log.losses.front());
}

TEST_CASE("multitask rejects unknown task names", "[trainer][encoder]") {
    GeneratorConfig g;
    g.n_samples = 100;
    g.emb_dim = 8;
    const SyntheticData d = generate(g);
    TrainConfig cfg;
    cfg.task_loss_weights = {{"scanner", 1.0}};
    try {
        train_multitask(d.embeddings, d.labels, EncoderConfig{}, cfg);
        FAIL("expected KeyError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Key);
    }
}

TEST_CASE("train config validation", "[trainer]") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg = {};
    cfg.tolerance = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg = {};
    cfg.task_loss_weights = {{"a", -1.0}};
    CHECK_THROWS_AS(validate(cfg), Error);
}
