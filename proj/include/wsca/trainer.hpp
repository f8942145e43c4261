#pragma once

// Linear probing heads and a one-hidden-layer multi-task encoder, both trained by full-batch
// gradient descent on softmax cross-entropy.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"

namespace wsca {

/// One linear prediction head: logits = W x + b.
struct ClassifierHead {
    std::string name;
    Matrix weights;  // C x D
    Vector bias;     // C
    std::vector<std::string> class_names;

    std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
};

struct TrainConfig {
    double learning_rate = 1.0;
    std::size_t max_epochs = 2000;
    double l2_lambda = 1e-4;
    std::size_t early_stop_patience = 10;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    std::map<std::string, double> task_loss_weights;
};

/// Encoder training diverges at the probe step size; these defaults converge on the generator data.
inline TrainConfig default_encoder_train_config() {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 5000;
    return cfg;
}

inline void validate(const TrainConfig& cfg) {
    require(std::isfinite(cfg.learning_rate) && cfg.learning_rate > 0.0, ErrorKind::Config,
            "learning_rate must be finite and positive");
    require(std::isfinite(cfg.tolerance) && cfg.tolerance > 0.0, ErrorKind::Config,
            "tolerance must be finite and positive");
    require(std::isfinite(cfg.l2_lambda) && cfg.l2_lambda >= 0.0, ErrorKind::Config, "l2_lambda must be >= 0");
    for (const auto& [name, w] : cfg.task_loss_weights) {
        require(std::isfinite(w) && w > 0.0, ErrorKind::Config, "task weight for '" + name + "' must be > 0");
    }
}

/// Per-epoch trace of a training run.
struct TrainLog {
    std::vector<double> losses;  // objective before each update, epoch 0 = initialization
    std::size_t epochs = 0;
    bool early_stopped = false;
    std::map<std::string, double> initial_head_losses;
    std::map<std::string, double> final_head_losses;
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

inline Matrix logits(const ClassifierHead& head, const Matrix& x) {
    require(static_cast<std::size_t>(x.cols()) == head.dim(), ErrorKind::Shape,
            "head '" + head.name + "' expects dim " + std::to_string(head.dim()) + ", got " +
                std::to_string(x.cols()));
    Matrix z = x * head.weights.transpose();
    z.rowwise() += head.bias.transpose();
    return z;
}

/// Row-wise softmax, computed in place with the max-shift.
inline void softmax_rows(Matrix& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        z.row(i) /= z.row(i).sum();
    }
}

inline Matrix probabilities(const ClassifierHead& head, const Matrix& x) {
    Matrix z = logits(head, x);
    softmax_rows(z);
    return z;
}

/// Argmax class per row; ties resolve to the lowest index.
inline std::vector<Category> predict(const ClassifierHead& head, const Matrix& x) {
    const Matrix z = logits(head, x);
    std::vector<Category> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        z.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<Category>(best);
    }
    return out;
}

struct LossGrad {
    double loss = 0.0;
    Matrix grad_w;
    Vector grad_b;
};

namespace detail {

inline void check_labels(std::span<const Category> labels, std::size_t classes, Eigen::Index rows) {
    require(static_cast<Eigen::Index>(labels.size()) == rows, ErrorKind::Shape,
            "label count " + std::to_string(labels.size()) + " != sample count " + std::to_string(rows));
    for (Category y : labels) {
        require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::Shape,
                "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
}

/// Mean cross-entropy of logits `z` (overwritten with P - Y) without regularization.
inline double cross_entropy_residual(Matrix& z, std::span<const Category> labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        const double s = z.row(i).sum();
        total += std::log(s) - std::log(z(i, y));
        z.row(i) /= s;
        z(i, y) -= 1.0;
    }
    return total / static_cast<double>(z.rows());
}

}  // namespace detail

/// Mean softmax cross-entropy plus (l2/2)||W||_F^2 with exact gradients; the bias is not penalized.
inline LossGrad loss_and_grad(const ClassifierHead& head, const Matrix& x, std::span<const Category> labels,
                              double l2_lambda) {
    require(x.rows() > 0, ErrorKind::EmptyInput, "no samples");
    detail::check_labels(labels, head.classes(), x.rows());
    Matrix resid = logits(head, x);
    const double ce = detail::cross_entropy_residual(resid, labels);
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    LossGrad out;
    out.loss = ce + 0.5 * l2_lambda * head.weights.squaredNorm();
    out.grad_w = inv_n * resid.transpose() * x + l2_lambda * head.weights;
    out.grad_b = inv_n * resid.colwise().sum().transpose();
    return out;
}

inline LossGrad loss_and_grad(const ClassifierHead& head, const EmbeddingSet& emb, std::span<const Category> labels,
                              double l2_lambda) {
    return loss_and_grad(head, emb.data(), labels, l2_lambda);
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    }
    return m;
}

inline constexpr double kHeadInitStd = 0.01;

namespace detail {

inline void check_trainable(std::span<const Category> labels, std::size_t classes, const std::string& name) {
    require(classes >= 2, ErrorKind::DegenerateLabels, "head '" + name + "' needs at least 2 classes");
    require(labels.size() >= classes, ErrorKind::InvalidInput,
            "head '" + name + "' has " + std::to_string(labels.size()) + " samples for " + std::to_string(classes) +
                " classes");
    std::vector<char> present(classes, 0);
    std::size_t distinct = 0;
    for (Category y : labels) {
        require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::Shape,
                "head '" + name + "' label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
        if (!present[static_cast<std::size_t>(y)]) {
            present[static_cast<std::size_t>(y)] = 1;
            ++distinct;
        }
    }
    require(distinct >= 2, ErrorKind::DegenerateLabels, "head '" + name + "' sees a single category");
}

/// Early-stopping bookkeeping shared by both trainers.
class StopRule {
public:
    explicit StopRule(const TrainConfig& cfg) : cfg_(cfg) {}

    /// Records the objective; returns true when training should stop.
    bool update(double loss) {
        if (best_ - loss < cfg_.tolerance) {
            ++stall_;
        } else {
            stall_ = 0;
        }
        improved_ = loss < best_;
        if (improved_) best_ = loss;
        return stall_ >= cfg_.early_stop_patience;
    }

    bool improved() const { return improved_; }

private:
    const TrainConfig& cfg_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t stall_ = 0;
    bool improved_ = false;
};

}  // namespace detail

/// Fits a fresh linear head on frozen features; returns the lowest-objective iterate.
inline ClassifierHead train_probe(const Matrix& x, std::span<const Category> labels, std::size_t classes,
                                  const TrainConfig& cfg, std::string name = {}, TrainLog* log = nullptr) {
    validate(cfg);
    require(static_cast<Eigen::Index>(labels.size()) == x.rows(), ErrorKind::Shape, "label/sample count mismatch");
    detail::check_trainable(labels, classes, name);

    std::mt19937_64 rng(cfg.seed);
    const auto c = static_cast<Eigen::Index>(classes);
    ClassifierHead head{std::move(name), gaussian_matrix(c, x.cols(), kHeadInitStd, rng), Vector::Zero(c), {}};
    ClassifierHead best = head;

    detail::StopRule stop(cfg);
    TrainLog local;
    TrainLog& trace = log ? *log : local;
    trace = {};
    for (std::size_t epoch = 0;; ++epoch) {
        const LossGrad lg = loss_and_grad(head, x, labels, cfg.l2_lambda);
        trace.losses.push_back(lg.loss);
        const bool done = stop.update(lg.loss);
        if (stop.improved()) best = head;
        if (done) {
            trace.early_stopped = true;
            break;
        }
        if (epoch == cfg.max_epochs) break;
        head.weights -= cfg.learning_rate * lg.grad_w;
        head.bias -= cfg.learning_rate * lg.grad_b;
        trace.epochs = epoch + 1;
    }
    return best;
}

inline ClassifierHead train_probe(const EmbeddingSet& emb, std::span<const Category> labels, std::size_t classes,
                                  const TrainConfig& cfg, std::string name = {}, TrainLog* log = nullptr) {
    return train_probe(emb.data(), labels, classes, cfg, std::move(name), log);
}

// ---------------------------------------------------------------------------
// Shallow multi-task encoder
// ---------------------------------------------------------------------------

enum class Activation { Relu, Tanh };

inline const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    fail(ErrorKind::InvalidInput, "unknown activation '" + s + "'");
}

struct EncoderConfig {
    std::size_t hidden = 64;
    std::size_t emb_dim = 32;
    Activation activation = Activation::Relu;
};

/// emb = w2 * act(w1 * x + b1) + b2
struct ShallowEncoder {
    Matrix w1;  // H x D_in
    Vector b1;  // H
    Matrix w2;  // D_emb x H
    Vector b2;  // D_emb
    Activation activation = Activation::Relu;

    std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(w2.rows()); }
};

namespace detail {

struct EncoderPass {
    Matrix pre;     // N x H, before activation
    Matrix hidden;  // N x H
    Matrix out;     // N x D_emb
};

inline EncoderPass forward(const ShallowEncoder& enc, const Matrix& x) {
    require(static_cast<std::size_t>(x.cols()) == enc.input_dim(), ErrorKind::Shape,
            "encoder expects input dim " + std::to_string(enc.input_dim()) + ", got " + std::to_string(x.cols()));
    require(enc.w2.cols() == enc.w1.rows() && enc.b1.size() == enc.w1.rows() && enc.b2.size() == enc.w2.rows(),
            ErrorKind::Shape, "inconsistent encoder parameter shapes");
    EncoderPass p;
    p.pre = x * enc.w1.transpose();
    p.pre.rowwise() += enc.b1.transpose();
    p.hidden = enc.activation == Activation::Relu ? Matrix(p.pre.cwiseMax(0.0)) : Matrix(p.pre.array().tanh());
    p.out = p.hidden * enc.w2.transpose();
    p.out.rowwise() += enc.b2.transpose();
    return p;
}

}  // namespace detail

inline Matrix embed(const ShallowEncoder& enc, const Matrix& x) { return detail::forward(enc, x).out; }

inline EmbeddingSet embed(const ShallowEncoder& enc, const EmbeddingSet& input) {
    return EmbeddingSet(input.ids(), embed(enc, input.data()));
}

/// Labels of one task, restricted to the rows where it is observed.
struct TaskLabels {
    std::string name;
    std::size_t classes = 0;
    std::vector<std::size_t> rows;
    std::vector<Category> labels;
    double weight = 1.0;
};

struct MultitaskGrad {
    double loss = 0.0;
    std::vector<double> head_losses;  // unweighted cross-entropy per task
    ShallowEncoder encoder;           // gradient, same shapes as the parameters
    std::vector<LossGrad> heads;      // loss field unused
};

/// sum_a weight_a * CE_a + (l2/2)(||w1||^2 + ||w2||^2 + sum_a ||W_a||^2) and its exact gradient.
inline MultitaskGrad multitask_loss_and_grad(const ShallowEncoder& enc, const std::vector<ClassifierHead>& heads,
                                             const Matrix& x, const std::vector<TaskLabels>& tasks,
                                             double l2_lambda) {
    require(heads.size() == tasks.size(), ErrorKind::Shape, "head/task count mismatch");
    const detail::EncoderPass pass = detail::forward(enc, x);

    MultitaskGrad g;
    g.encoder = {Matrix::Zero(enc.w1.rows(), enc.w1.cols()), Vector::Zero(enc.b1.size()),
                 Matrix::Zero(enc.w2.rows(), enc.w2.cols()), Vector::Zero(enc.b2.size()), enc.activation};
    Matrix d_out = Matrix::Zero(pass.out.rows(), pass.out.cols());
    double reg = enc.w1.squaredNorm() + enc.w2.squaredNorm();

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& task = tasks[t];
        const auto& head = heads[t];
        require(!task.rows.empty(), ErrorKind::EmptyInput, "task '" + task.name + "' has no observed samples");
        require(head.dim() == enc.output_dim(), ErrorKind::Shape, "head '" + head.name + "' dim mismatch");
        detail::check_labels(task.labels, head.classes(), static_cast<Eigen::Index>(task.rows.size()));

        Matrix e(static_cast<Eigen::Index>(task.rows.size()), pass.out.cols());
        for (std::size_t r = 0; r < task.rows.size(); ++r) {
            e.row(static_cast<Eigen::Index>(r)) = pass.out.row(static_cast<Eigen::Index>(task.rows[r]));
        }
        Matrix resid = logits(head, e);
        const double ce = detail::cross_entropy_residual(resid, task.labels);
        g.head_losses.push_back(ce);
        g.loss += task.weight * ce;
        reg += head.weights.squaredNorm();

        const double scale = task.weight / static_cast<double>(task.rows.size());
        LossGrad hg;
        hg.grad_w = scale * resid.transpose() * e + l2_lambda * head.weights;
        hg.grad_b = scale * resid.colwise().sum().transpose();
        g.heads.push_back(std::move(hg));

        const Matrix de = scale * resid * head.weights;
        for (std::size_t r = 0; r < task.rows.size(); ++r) {
            d_out.row(static_cast<Eigen::Index>(task.rows[r])) += de.row(static_cast<Eigen::Index>(r));
        }
    }
    g.loss += 0.5 * l2_lambda * reg;

    g.encoder.w2 = d_out.transpose() * pass.hidden + l2_lambda * enc.w2;
    g.encoder.b2 = d_out.colwise().sum().transpose();
    Matrix d_pre = d_out * enc.w2;
    if (enc.activation == Activation::Relu) {
        d_pre.array() *= (pass.pre.array() > 0.0).cast<double>();
    } else {
        d_pre.array() *= 1.0 - pass.hidden.array().square();
    }
    g.encoder.w1 = d_pre.transpose() * x + l2_lambda * enc.w1;
    g.encoder.b1 = d_pre.colwise().sum().transpose();
    return g;
}

inline ShallowEncoder init_encoder(std::size_t input_dim, const EncoderConfig& cfg, std::mt19937_64& rng) {
    require(cfg.hidden >= 1, ErrorKind::Config, "encoder hidden width must be >= 1");
    require(cfg.emb_dim >= 2, ErrorKind::Config, "encoder embedding dim must be >= 2");
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    const auto d_in = static_cast<Eigen::Index>(input_dim);
    const auto d_out = static_cast<Eigen::Index>(cfg.emb_dim);
    const double gain = cfg.activation == Activation::Relu ? 2.0 : 1.0;
    ShallowEncoder enc;
    enc.w1 = gaussian_matrix(h, d_in, std::sqrt(gain / static_cast<double>(input_dim)), rng);
    enc.b1 = Vector::Zero(h);
    enc.w2 = gaussian_matrix(d_out, h, std::sqrt(1.0 / static_cast<double>(cfg.hidden)), rng);
    enc.b2 = Vector::Zero(d_out);
    enc.activation = cfg.activation;
    return enc;
}

struct MultitaskModel {
    ShallowEncoder encoder;
    std::map<std::string, ClassifierHead> heads;
};

/// Jointly trains the encoder and one head per entry of cfg.task_loss_weights (all labels'
/// attributes when empty). A single-entry weight map gives the baseline regime.
inline MultitaskModel train_multitask(const EmbeddingSet& input, const LabelTable& labels,
                                      const EncoderConfig& enc_cfg, const TrainConfig& cfg,
                                      TrainLog* log = nullptr) {
    validate(cfg);
    require(input.ids() == labels.ids(), ErrorKind::InvalidInput, "input and label sample ids differ");
    std::map<std::string, double> weights = cfg.task_loss_weights;
    if (weights.empty()) {
        for (const auto& a : labels.attributes()) weights[a.name] = 1.0;
    }
    for (const auto& [name, w] : weights) {
        require(labels.has(name), ErrorKind::Key, "task weight names unknown attribute '" + name + "'");
    }

    std::mt19937_64 rng(cfg.seed);
    MultitaskModel model;
    model.encoder = init_encoder(input.dim(), enc_cfg, rng);

    std::vector<TaskLabels> tasks;
    std::vector<ClassifierHead> heads;
    for (const auto& [name, w] : weights) {
        const Attribute& attr = labels.attribute(name);
        TaskLabels task{name, attr.cardinality, labels.observed(name), {}, w};
        for (std::size_t r : task.rows) task.labels.push_back(attr.values[r]);
        detail::check_trainable(task.labels, task.classes, name);
        const auto c = static_cast<Eigen::Index>(task.classes);
        heads.push_back({name, gaussian_matrix(c, static_cast<Eigen::Index>(enc_cfg.emb_dim), kHeadInitStd, rng),
                         Vector::Zero(c), attr.class_names});
        tasks.push_back(std::move(task));
    }

    ShallowEncoder enc = model.encoder;
    ShallowEncoder best_enc = enc;
    std::vector<ClassifierHead> best_heads = heads;
    std::vector<double> best_head_losses;

    detail::StopRule stop(cfg);
    TrainLog local;
    TrainLog& trace = log ? *log : local;
    trace = {};
    const double lr = cfg.learning_rate;
    for (std::size_t epoch = 0;; ++epoch) {
        const MultitaskGrad g = multitask_loss_and_grad(enc, heads, input.data(), tasks, cfg.l2_lambda);
        trace.losses.push_back(g.loss);
        if (epoch == 0) {
            for (std::size_t t = 0; t < tasks.size(); ++t) trace.initial_head_losses[tasks[t].name] = g.head_losses[t];
        }
        const bool done = stop.update(g.loss);
        if (stop.improved()) {
            best_enc = enc;
            best_heads = heads;
            best_head_losses = g.head_losses;
        }
        if (done) {
            trace.early_stopped = true;
            break;
        }
        if (epoch == cfg.max_epochs) break;
        enc.w1 -= lr * g.encoder.w1;
        enc.b1 -= lr * g.encoder.b1;
        enc.w2 -= lr * g.encoder.w2;
        enc.b2 -= lr * g.encoder.b2;
        for (std::size_t t = 0; t < heads.size(); ++t) {
            heads[t].weights -= lr * g.heads[t].grad_w;
            heads[t].bias -= lr * g.heads[t].grad_b;
        }
        trace.epochs = epoch + 1;
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) trace.final_head_losses[tasks[t].name] = best_head_losses[t];

    model.encoder = std::move(best_enc);
    for (auto& h : best_heads) model.heads.emplace(h.name, std::move(h));
    return model;
}

}  // namespace wsca
