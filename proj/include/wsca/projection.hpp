#pragma once

// Principal-axis basis of training embeddings and projection of head weights into it.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"
#include "wsca/trainer.hpp"

namespace wsca {

/// K leading principal axes as orthonormal rows.
struct ProjectionBasis {
    Matrix components;                         // K x D
    std::vector<double> explained_variance;    // K eigenvalues of the sample covariance
    std::vector<double> explained_variance_ratio;  // K, non-increasing
    Vector mean;                               // D, centering used during fitting
    std::size_t threshold_components = 0;      // smallest count reaching var_threshold
    std::size_t rank = 0;                      // min(N - 1, D)

    std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(components.cols()); }
};

inline constexpr double kDefaultVarThreshold = 0.99;
inline constexpr std::size_t kDefaultComponentFloor = 50;

/// K = min(max(k_threshold, floor), min(N - 1, D)) leading axes of the centered data.
/// Each axis is signed so its largest-magnitude entry is positive; equal eigenvalues keep the
/// solver's axis order.
inline ProjectionBasis fit_projection(const Matrix& x, double var_threshold = kDefaultVarThreshold,
                                      std::size_t floor = kDefaultComponentFloor) {
    require(x.rows() > 0 && x.cols() > 0, ErrorKind::EmptyInput, "no embeddings to fit a basis on");
    require(var_threshold > 0.0 && var_threshold <= 1.0, ErrorKind::InvalidInput, "var_threshold must lie in (0, 1]");
    require(x.allFinite(), ErrorKind::InvalidInput, "embeddings contain NaN/Inf");
    require(x.rows() >= 2, ErrorKind::DegenerateManifold, "need at least 2 samples to estimate variance");

    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    ProjectionBasis basis;
    basis.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - basis.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const double total = cov.trace();
    require(std::isfinite(total) && total > 0.0 && total > 1e-20 * basis.mean.squaredNorm(),
            ErrorKind::DegenerateManifold, "embeddings have zero variance");

    const Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    require(solver.info() == Eigen::Success, ErrorKind::DegenerateManifold, "covariance eigendecomposition failed");
    const Vector& evals = solver.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return evals(a) > evals(b); });

    std::size_t k_threshold = static_cast<std::size_t>(d);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cumulative += std::max(0.0, evals(order[i])) / total;
        if (cumulative >= var_threshold) {
            k_threshold = i + 1;
            break;
        }
    }
    basis.threshold_components = k_threshold;
    basis.rank = static_cast<std::size_t>(std::min(n - 1, d));
    const std::size_t k = std::min(std::max(k_threshold, floor), basis.rank);

    basis.components.resize(static_cast<Eigen::Index>(k), d);
    for (std::size_t i = 0; i < k; ++i) {
        Vector axis = solver.eigenvectors().col(order[i]);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0.0) axis = -axis;
        basis.components.row(static_cast<Eigen::Index>(i)) = axis.transpose();
        const double var = std::max(0.0, evals(order[i]));
        basis.explained_variance.push_back(var);
        basis.explained_variance_ratio.push_back(var / total);
    }
    return basis;
}

inline ProjectionBasis fit_projection(const EmbeddingSet& emb, double var_threshold = kDefaultVarThreshold,
                                      std::size_t floor = kDefaultComponentFloor) {
    return fit_projection(emb.data(), var_threshold, floor);
}

/// W * P^T; the bias is ignored and weights are not centered.
inline Matrix project_weights(const Matrix& weights, const ProjectionBasis& basis) {
    require(static_cast<std::size_t>(weights.cols()) == basis.dim(), ErrorKind::Shape,
            "weight dim " + std::to_string(weights.cols()) + " != basis dim " + std::to_string(basis.dim()));
    return weights * basis.components.transpose();
}

inline Matrix project_head(const ClassifierHead& head, const ProjectionBasis& basis) {
    require(head.dim() == basis.dim(), ErrorKind::Shape,
            "head '" + head.name + "' dim " + std::to_string(head.dim()) + " != basis dim " +
                std::to_string(basis.dim()));
    return project_weights(head.weights, basis);
}

inline constexpr const char* kAvgPoolReference = "reference/avgpool";

/// All-ones single-row head standing in for an average-pooling output layer.
inline ClassifierHead avgpool_reference(std::size_t dim) {
    require(dim >= 1, ErrorKind::InvalidInput, "reference dimension must be >= 1");
    const auto d = static_cast<Eigen::Index>(dim);
    return {kAvgPoolReference, Matrix::Ones(1, d), Vector::Zero(1), {"avgpool"}};
}

}  // namespace wsca
