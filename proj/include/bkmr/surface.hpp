#pragma once

#include "bkmr/sampler.hpp"

#include <memory>
#include <mutex>

namespace bkmr {

enum class SurfaceMode { conditional_mean, conditional_draw };

/// Evaluation points (q x L', in the model's kernel-input order) and the
/// covariate row c_bar (length P, intercept excluded).
struct SurfaceQuery {
    MatrixXd points;
    VectorXd c_bar;
    SurfaceMode mode = SurfaceMode::conditional_mean;
};

/// Predictions of h and E[Y] from a fitted model, one posterior draw at a time.
///
/// For draw j, h_new | y is Gaussian with mean lambda K_*n (I + lambda K)^-1 (y - C beta)
/// and covariance sigma2 lambda (K_** - lambda K_*n (I + lambda K)^-1 K_n*).
/// The weights (I + lambda K)^-1 (y - C beta) are computed once per draw and
/// cached; concurrent first use from several threads is safe.
class PosteriorSurface {
public:
    explicit PosteriorSurface(std::shared_ptr<const PosteriorDraws> draws);

    const PosteriorDraws& draws() const { return *draws_; }
    Index size() const { return draws_->size(); }
    Index kernel_dim() const { return draws_->kernel_x.cols(); }

    /// rng is required in conditional_draw mode and ignored otherwise.
    VectorXd h_at(const SurfaceQuery& query, Index j, Rng* rng = nullptr) const;
    /// h + [1, c_bar]' beta per point.
    VectorXd predict_mean_response(const SurfaceQuery& query, Index j, Rng* rng = nullptr) const;
    /// Diagonal of the conditional covariance of h at the query points.
    VectorXd predictive_variance(const MatrixXd& points, Index j) const;

    /// Linear covariate contribution [1, c_bar]' beta for draw j.
    double covariate_term(const VectorXd& c_bar, Index j) const;

private:
    const VectorXd& weights(Index j) const;
    void check(const MatrixXd& points, Index j) const;

    std::shared_ptr<const PosteriorDraws> draws_;
    mutable std::unique_ptr<std::once_flag[]> once_;
    mutable std::vector<VectorXd> weights_;
};

}  // namespace bkmr
