#pragma once

// Independent reference implementations used by the unit and acceptance tests. These use
// plain loops and std::vector only, so they share no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "wsca/data_model.hpp"

namespace oracle {

using wsca::Category;
using wsca::Matrix;

/// C = A * B^T by explicit per-entry dot products.
inline Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    }
    return c;
}

/// Eigenvalues of a symmetric matrix, descending, by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a, int sweeps = 100) {
    const std::size_t n = a.size();
    for (int s = 0; s < sweeps; ++s) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        }
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// Sample covariance (N - 1 denominator) with explicit loops.
inline std::vector<std::vector<double>> covariance(const Matrix& x) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) cov[a][b] += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
        }
    }
    for (auto& row : cov) {
        for (double& v : row) v /= static_cast<double>(n - 1);
    }
    return cov;
}

/// Binary AUROC by counting concordant positive/negative pairs (ties 0.5).
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    double concordant = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    return concordant / pairs;
}

/// Macro one-vs-rest AUROC over classes with both positives and negatives.
inline std::optional<double> pairwise_auroc_macro(const Matrix& scores, const std::vector<Category>& truth) {
    double sum = 0.0;
    int used = 0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        std::vector<double> col;
        std::vector<bool> pos;
        int np = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            col.push_back(scores(static_cast<Eigen::Index>(i), c));
            pos.push_back(truth[i] == c);
            np += truth[i] == c;
        }
        if (np == 0 || np == static_cast<int>(truth.size())) continue;
        sum += pairwise_auroc(col, pos);
        ++used;
    }
    if (used == 0) return std::nullopt;
    return sum / used;
}

struct NaiveMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Metric definitions evaluated directly from label pairs.
inline NaiveMetrics naive_metrics(const std::vector<Category>& truth, const std::vector<Category>& pred, int classes) {
    NaiveMetrics m;
    int correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    double p_sum = 0, r_sum = 0, f_sum = 0;
    int p_n = 0, r_n = 0, f_n = 0;
    for (int c = 0; c < classes; ++c) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (pred[i] == c && truth[i] == c) ++tp;
            if (pred[i] == c && truth[i] != c) ++fp;
            if (pred[i] != c && truth[i] == c) ++fn;
        }
        std::optional<double> p, r;
        if (tp + fp > 0) {
            p = static_cast<double>(tp) / (tp + fp);
            p_sum += *p;
            ++p_n;
        }
        if (tp + fn > 0) {
            r = static_cast<double>(tp) / (tp + fn);
            r_sum += *r;
            ++r_n;
        }
        if (tp + fp + fn > 0) {
            // harmonic mean; zero when either side is zero or undefined with tp = 0
            const double f = (p && r && *p + *r > 0) ? 2 * *p * *r / (*p + *r) : 0.0;
            f_sum += f;
            ++f_n;
        }
    }
    m.precision = p_n ? p_sum / p_n : 0.0;
    m.recall = r_n ? r_sum / r_n : 0.0;
    m.f1 = f_n ? f_sum / f_n : 0.0;
    return m;
}

/// i/k quantile by sorting and indexing (nearest rank), no interpolation.
inline double nearest_rank_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::llround(p * static_cast<double>(v.size() - 1)));
    return v[idx];
}

/// Central-difference derivative of f at every entry of m, in place.
inline Matrix central_difference(Matrix& m, const std::function<double()>& f, double h = 1e-5) {
    Matrix g(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double keep = m(i, j);
            m(i, j) = keep + h;
            const double up = f();
            m(i, j) = keep - h;
            const double down = f();
            m(i, j) = keep;
            g(i, j) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

/// Max-norm relative error with an absolute floor for near-zero gradients.
inline double relative_error(const Matrix& analytic, const Matrix& numeric) {
    const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-8});
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Plug-in mutual information (nats) of two label vectors.
inline double mutual_information(const std::vector<Category>& a, const std::vector<Category>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0 / n;
        pa[a[i]] += 1.0 / n;
        pb[b[i]] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
    return mi;
}

}  // namespace oracle
