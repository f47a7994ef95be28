#include "bkmr/surface.hpp"

#include "bkmr/errors.hpp"

#include <cmath>

namespace bkmr {

PosteriorSurface::PosteriorSurface(std::shared_ptr<const PosteriorDraws> draws)
    : draws_(std::move(draws)),
      once_(std::make_unique<std::once_flag[]>(static_cast<std::size_t>(draws_->size()))),
      weights_(static_cast<std::size_t>(draws_->size())) {
    if (draws_->size() < 1) throw Error(ErrorCode::input, "posterior trace is empty");
}

void PosteriorSurface::check(const MatrixXd& points, Index j) const {
    if (j < 0 || j >= size()) throw Error(ErrorCode::input, "draw index out of range");
    if (points.rows() < 1) throw Error(ErrorCode::input, "surface query needs at least one point");
    if (points.cols() != kernel_dim()) throw Error(ErrorCode::input, "query point dimension differs from the model's kernel inputs");
    if (!points.allFinite()) throw Error(ErrorCode::input, "non-finite query point");
}

const VectorXd& PosteriorSurface::weights(Index j) const {
    const auto slot = static_cast<std::size_t>(j);
    std::call_once(once_[slot], [&] {
        const Draw& d = draws_->draws[slot];
        const MatrixXd k = kernel_matrix_serial(draws_->kernel_x, d.kernel);
        const auto factor = CovarianceFactor::compute(k, d.lambda);
        VectorXd resid = draws_->data->y();
        if (draws_->design.cols() > 0) resid -= draws_->design * d.beta;
        weights_[slot] = factor.solve(resid);
    });
    return weights_[slot];
}

double PosteriorSurface::covariate_term(const VectorXd& c_bar, Index j) const {
    const auto& spec = draws_->spec;
    const Index p = draws_->design.cols();
    const Index expected = p - (spec.intercept ? 1 : 0);
    if (c_bar.size() != expected) throw Error(ErrorCode::input, "c_bar length differs from the model's covariate count");
    const VectorXd& beta = draws_->draws[static_cast<std::size_t>(j)].beta;
    double v = 0.0;
    Index off = 0;
    if (spec.intercept) {
        v += beta(0);
        off = 1;
    }
    for (Index i = 0; i < c_bar.size(); ++i) v += c_bar(i) * beta(off + i);
    return v;
}

VectorXd PosteriorSurface::h_at(const SurfaceQuery& query, Index j, Rng* rng) const {
    check(query.points, j);
    const Draw& d = draws_->draws[static_cast<std::size_t>(j)];
    if (d.lambda == 0.0) return VectorXd::Zero(query.points.rows());
    const MatrixXd kq = cross_kernel_serial(query.points, draws_->kernel_x, d.kernel);
    VectorXd mean = d.lambda * (kq * weights(j));
    if (query.mode == SurfaceMode::conditional_mean) return mean;

    if (rng == nullptr) throw Error(ErrorCode::input, "conditional-draw mode needs a random generator");
    const Index q = query.points.rows();
    const MatrixXd kqq = kernel_matrix_serial(query.points, d.kernel);
    const MatrixXd k = kernel_matrix_serial(draws_->kernel_x, d.kernel);
    const auto factor = CovarianceFactor::compute(k, d.lambda);
    const MatrixXd w = factor.whiten(MatrixXd(kq.transpose()));
    MatrixXd cov = d.sigma2 * d.lambda * (kqq - d.lambda * w.transpose() * w);
    cov = 0.5 * (cov + cov.transpose());
    const auto chol = cholesky_with_jitter(cov);
    VectorXd xi(q);
    for (Index i = 0; i < q; ++i) xi(i) = std_normal(*rng);
    return mean + chol.llt.matrixL() * xi;
}

VectorXd PosteriorSurface::predict_mean_response(const SurfaceQuery& query, Index j, Rng* rng) const {
    VectorXd h = h_at(query, j, rng);
    h.array() += covariate_term(query.c_bar, j);
    return h;
}

VectorXd PosteriorSurface::predictive_variance(const MatrixXd& points, Index j) const {
    check(points, j);
    const Draw& d = draws_->draws[static_cast<std::size_t>(j)];
    if (d.lambda == 0.0) return VectorXd::Zero(points.rows());
    const MatrixXd kq = cross_kernel_serial(points, draws_->kernel_x, d.kernel);
    const MatrixXd k = kernel_matrix_serial(draws_->kernel_x, d.kernel);
    const auto factor = CovarianceFactor::compute(k, d.lambda);
    const MatrixXd w = factor.whiten(MatrixXd(kq.transpose()));
    VectorXd var = (d.sigma2 * d.lambda) * (VectorXd::Ones(points.rows()) - d.lambda * w.colwise().squaredNorm().transpose());
    return var;
}

}  // namespace bkmr
