#pragma once

// Independent reference computations. None of these call into the library's
// numerical code paths they are used to check.

#include "bkmr/parametric.hpp"
#include "bkmr/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double kernel_entry(const VectorXd& a, const VectorXd& b, const VectorXd& r) {
    double d = 0.0;
    for (Eigen::Index l = 0; l < a.size(); ++l) d += r(l) * (a(l) - b(l)) * (a(l) - b(l));
    return std::exp(-d);
}

inline MatrixXd kernel(const MatrixXd& x, const VectorXd& r) {
    MatrixXd k(x.rows(), x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.rows(); ++j) k(i, j) = kernel_entry(x.row(i).transpose(), x.row(j).transpose(), r);
    }
    return k;
}

/// log N(y; mu, S) for a 2-vector via the explicit 2x2 inverse and determinant.
inline double mvn2_logpdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& s) {
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    const double a = y(0) - mu(0), b = y(1) - mu(1);
    const double q = (s(1, 1) * a * a - (s(0, 1) + s(1, 0)) * a * b + s(0, 0) * b * b) / det;
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * q;
}

/// Conjugate normal / inverse-gamma posterior with a flat prior on beta and
/// 1/sigma2 ~ Gamma(a, b): exact marginal moments.
struct NigMoments {
    VectorXd beta_mean;
    VectorXd beta_var;
    double sigma2_mean = 0.0;
    double sigma2_var = 0.0;
};

inline NigMoments nig_posterior(const VectorXd& y, const MatrixXd& c, double a, double b) {
    const Eigen::Index n = y.size(), p = c.cols();
    const MatrixXd ctc_inv = (c.transpose() * c).inverse();
    const VectorXd bhat = ctc_inv * c.transpose() * y;
    const double rss = (y - c * bhat).squaredNorm();
    const double a_post = a + 0.5 * static_cast<double>(n - p);
    const double b_post = b + 0.5 * rss;
    NigMoments m;
    m.beta_mean = bhat;
    m.sigma2_mean = b_post / (a_post - 1.0);
    m.sigma2_var = b_post * b_post / ((a_post - 1.0) * (a_post - 1.0) * (a_post - 2.0));
    m.beta_var = m.sigma2_mean * ctc_inv.diagonal();
    return m;
}

/// Counterfactual effects of the linear mediator/outcome models by brute-force
/// simulation: draw M under each exposure arm with its residual noise, push the
/// draws through the outcome model with its own noise, and average.
struct McEffects {
    double nde = 0.0;
    double nie = 0.0;
    double te = 0.0;
    std::vector<double> cde;
};

inline McEffects linear_g_computation(const bkmr::LinearMediationFit& f, const VectorXd& z, const VectorXd& zs,
                                      const VectorXd& c, const std::vector<double>& m_values, long samples,
                                      std::uint64_t seed) {
    auto mediator = [&](const VectorXd& e) { return f.beta0 + f.beta1.dot(e) + f.beta2.dot(c); };
    auto outcome = [&](const VectorXd& e, double m) {
        return f.theta0 + f.theta1.dot(e) + f.theta2 * m + m * f.theta3.dot(e) + f.theta4.dot(c);
    };
    const double sm = std::sqrt(f.mediator_residual_var), sy = std::sqrt(f.outcome_residual_var);
    bkmr::Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    double y_z_mzs = 0, y_zs_mzs = 0, y_z_mz = 0;
    std::vector<double> cde(m_values.size(), 0.0);
    for (long s = 0; s < samples; ++s) {
        const double m_zs = mediator(zs) + sm * nd(rng);
        const double m_z = mediator(z) + sm * nd(rng);
        y_z_mzs += outcome(z, m_zs) + sy * nd(rng);
        y_zs_mzs += outcome(zs, m_zs) + sy * nd(rng);
        y_z_mz += outcome(z, m_z) + sy * nd(rng);
        for (std::size_t i = 0; i < m_values.size(); ++i) {
            cde[i] += (outcome(z, m_values[i]) + sy * nd(rng)) - (outcome(zs, m_values[i]) + sy * nd(rng));
        }
    }
    const double ns = static_cast<double>(samples);
    McEffects e;
    e.nde = (y_z_mzs - y_zs_mzs) / ns;
    e.nie = (y_z_mz - y_z_mzs) / ns;
    e.te = (y_z_mz - y_zs_mzs) / ns;
    for (double& v : cde) e.cde.push_back(v / ns);
    return e;
}

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
inline double batch_mcse(const std::vector<double>& x, int batches = 50) {
    const std::size_t len = x.size() / static_cast<std::size_t>(batches);
    std::vector<double> means;
    for (int b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += x[static_cast<std::size_t>(b) * len + i];
        means.push_back(s / static_cast<double>(len));
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= batches;
    double v = 0.0;
    for (double m : means) v += (m - grand) * (m - grand);
    v /= (batches - 1);
    return std::sqrt(v / batches);
}

inline double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

}  // namespace oracle
