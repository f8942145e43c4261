#pragma once

// Synthetic embeddings with a tunable coupling between a primary factor and a confounder.
//
// Each sample is
//   x = s_p * u[p] + s_c * v[c] + sum_a value_a * w_a + noise_sigma * n,   n ~ N(0, I)
// where u, v, w are orthonormal direction sets over disjoint subspaces. The confounder is
// copied from the primary (c = p mod C_c) with probability bias_rho, otherwise uniform.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"

namespace wsca {

struct ContinuousAttr {
    std::string name;
    double correlation = 0.0;  // with the standardized primary class score, in [-1, 1]
};

struct GeneratorConfig {
    std::size_t n_samples = 6000;
    std::size_t emb_dim = 64;
    std::size_t primary_classes = 4;
    std::size_t confounder_classes = 3;
    std::vector<ContinuousAttr> continuous_attrs;
    double bias_rho = 0.0;
    double signal_scale_primary = 1.0;
    double signal_scale_confounder = 1.0;
    double noise_sigma = 0.5;
    std::uint64_t seed = 0;
};

inline constexpr const char* kPrimaryName = "primary";
inline constexpr const char* kConfounderName = "confounder";

inline void validate(const GeneratorConfig& cfg) {
    require(cfg.n_samples >= 1, ErrorKind::Config, "n_samples must be >= 1");
    require(cfg.primary_classes >= 2, ErrorKind::Config, "primary_classes must be >= 2");
    require(cfg.confounder_classes >= 2, ErrorKind::Config, "confounder_classes must be >= 2");
    const std::size_t needed = cfg.primary_classes + cfg.confounder_classes + cfg.continuous_attrs.size();
    require(cfg.emb_dim >= needed, ErrorKind::Config,
            "emb_dim " + std::to_string(cfg.emb_dim) + " too small for " + std::to_string(needed) +
                " factor directions");
    require(cfg.bias_rho >= 0.0 && cfg.bias_rho <= 1.0, ErrorKind::Config, "bias_rho must lie in [0, 1]");
    require(std::isfinite(cfg.signal_scale_primary) && cfg.signal_scale_primary >= 0.0, ErrorKind::Config,
            "signal_scale_primary must be finite and non-negative");
    require(std::isfinite(cfg.signal_scale_confounder) && cfg.signal_scale_confounder >= 0.0, ErrorKind::Config,
            "signal_scale_confounder must be finite and non-negative");
    require(std::isfinite(cfg.noise_sigma) && cfg.noise_sigma >= 0.0, ErrorKind::Config,
            "noise_sigma must be finite and non-negative");
    for (const auto& a : cfg.continuous_attrs) {
        require(a.correlation >= -1.0 && a.correlation <= 1.0, ErrorKind::Config,
                "correlation of '" + a.name + "' outside [-1, 1]");
        require(a.name != kPrimaryName && a.name != kConfounderName && !a.name.empty(), ErrorKind::Config,
                "invalid continuous attribute name '" + a.name + "'");
    }
}

namespace detail {

// Independent generator per purpose so that, for a fixed seed, changing bias_rho leaves the
// directions, primary labels and noise untouched.
enum class Stream : std::uint32_t { Directions = 1, Labels = 2, Continuous = 3, Noise = 4 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

}  // namespace detail

/// Orthonormal generative directions, one column per factor class.
struct GenerativeDirections {
    Matrix primary;     // D x C_p
    Matrix confounder;  // D x C_c
    Matrix continuous;  // D x n_continuous

    /// All directions as rows: primary, then confounder, then continuous.
    Matrix stacked_rows() const {
        Matrix out(primary.cols() + confounder.cols() + continuous.cols(), primary.rows());
        out << primary.transpose(), confounder.transpose(), continuous.transpose();
        return out;
    }
};

inline GenerativeDirections generative_directions(const GeneratorConfig& cfg) {
    validate(cfg);
    const auto d = static_cast<Eigen::Index>(cfg.emb_dim);
    const auto cp = static_cast<Eigen::Index>(cfg.primary_classes);
    const auto cc = static_cast<Eigen::Index>(cfg.confounder_classes);
    const auto na = static_cast<Eigen::Index>(cfg.continuous_attrs.size());
    const Eigen::Index m = cp + cc + na;

    auto rng = detail::stream_rng(cfg.seed, detail::Stream::Directions);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix gauss(d, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) gauss(i, j) = normal(rng);
    }
    const Eigen::HouseholderQR<Matrix> qr(gauss);
    const Matrix q = qr.householderQ() * Matrix::Identity(d, m);

    return {q.leftCols(cp), q.middleCols(cp, cc), q.rightCols(na)};
}

/// Primary labels uniform over C_p; confounder = primary mod C_c with probability bias_rho,
/// otherwise uniform over C_c.
inline std::pair<std::vector<Category>, std::vector<Category>> sample_joint_labels(const GeneratorConfig& cfg) {
    require(cfg.bias_rho >= 0.0 && cfg.bias_rho <= 1.0, ErrorKind::Config, "bias_rho must lie in [0, 1]");
    auto rng = detail::stream_rng(cfg.seed, detail::Stream::Labels);
    std::uniform_int_distribution<Category> primary(0, static_cast<Category>(cfg.primary_classes) - 1);
    std::uniform_int_distribution<Category> confounder(0, static_cast<Category>(cfg.confounder_classes) - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<Category> p(cfg.n_samples);
    std::vector<Category> c(cfg.n_samples);
    const auto cc = static_cast<Category>(cfg.confounder_classes);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        p[i] = primary(rng);
        const double u = coin(rng);
        const Category free = confounder(rng);
        c[i] = u < cfg.bias_rho ? p[i] % cc : free;
    }
    return {std::move(p), std::move(c)};
}

struct SyntheticData {
    EmbeddingSet embeddings;
    LabelTable labels;
    GenerativeDirections directions;
};

inline std::string synthetic_sample_id(std::size_t i) {
    std::string digits = std::to_string(i);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    return "s" + digits;
}

inline SyntheticData generate(const GeneratorConfig& cfg) {
    validate(cfg);
    const auto n = static_cast<Eigen::Index>(cfg.n_samples);
    const auto d = static_cast<Eigen::Index>(cfg.emb_dim);
    GenerativeDirections dirs = generative_directions(cfg);
    auto [primary, confounder] = sample_joint_labels(cfg);

    Matrix x = Matrix::Zero(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = cfg.signal_scale_primary * dirs.primary.col(primary[static_cast<std::size_t>(i)]).transpose() +
                   cfg.signal_scale_confounder *
                       dirs.confounder.col(confounder[static_cast<std::size_t>(i)]).transpose();
    }

    // Continuous attributes share the standardized primary score as latent factor.
    const double cp = static_cast<double>(cfg.primary_classes);
    const double score_sd = std::sqrt((cp * cp - 1.0) / 12.0);
    auto cont_rng = detail::stream_rng(cfg.seed, detail::Stream::Continuous);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Attribute> attrs;
    attrs.push_back({kPrimaryName, primary, cfg.primary_classes, {}});
    attrs.push_back({kConfounderName, confounder, cfg.confounder_classes, {}});
    for (std::size_t a = 0; a < cfg.continuous_attrs.size(); ++a) {
        const double rho = cfg.continuous_attrs[a].correlation;
        const double resid = std::sqrt(std::max(0.0, 1.0 - rho * rho));
        std::vector<double> values(cfg.n_samples);
        for (std::size_t i = 0; i < cfg.n_samples; ++i) {
            const double score = (static_cast<double>(primary[i]) - (cp - 1.0) / 2.0) / score_sd;
            values[i] = rho * score + resid * normal(cont_rng);
            x.row(static_cast<Eigen::Index>(i)) += values[i] * dirs.continuous.col(static_cast<Eigen::Index>(a)).transpose();
        }
        const BinSpec spec = fit_bins(values, 4, BinStrategy::EqualWidth, cfg.continuous_attrs[a].name);
        attrs.push_back({cfg.continuous_attrs[a].name, discretize(values, spec), spec.k, {}});
    }

    if (cfg.noise_sigma > 0.0) {
        auto noise_rng = detail::stream_rng(cfg.seed, detail::Stream::Noise);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) x(i, j) += cfg.noise_sigma * normal(noise_rng);
        }
    }

    std::vector<std::string> ids(cfg.n_samples);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) ids[i] = synthetic_sample_id(i);

    return {EmbeddingSet(ids, std::move(x)), LabelTable(ids, std::move(attrs), kPrimaryName), std::move(dirs)};
}

}  // namespace wsca
