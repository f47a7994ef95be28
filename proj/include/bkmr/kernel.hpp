#pragma once

#include "bkmr/dataset.hpp"

#include <Eigen/Cholesky>

#include <vector>

namespace bkmr {

enum class KernelMode { single_smoothness, component_weights };

/// Gaussian-kernel hyperparameters for one posterior draw.
///
/// single_smoothness: K(a, b) = exp(-(1/rho) * sum_l (a_l - b_l)^2)
/// component_weights: K(a, b) = exp(-sum_l r_l (a_l - b_l)^2), with
///   inclusion indicators delta_l and r_l == 0 exactly when delta_l == 0.
struct KernelState {
    KernelMode mode = KernelMode::component_weights;
    double rho = 1.0;
    Index dimension = 0;
    VectorXd r;
    std::vector<bool> delta;

    static KernelState smoothness(double rho, Index dimension);
    /// delta is derived from r (r_l > 0).
    static KernelState weights(VectorXd r);

    Index dim() const { return dimension; }
    /// Per-component distance weights: r, or 1/rho in every slot.
    VectorXd effective_weights() const;
    /// Throws invalid_state when r is negative, r/delta disagree or rho leaves (lower, upper).
    void validate(double rho_lower = 0.0, double rho_upper = 100.0) const;
};

double gaussian_kernel(const Eigen::Ref<const VectorXd>& zi, const Eigen::Ref<const VectorXd>& zj,
                       const KernelState& state);

/// n x n kernel matrix over the rows of x. Rows are split across OpenMP threads.
MatrixXd kernel_matrix(const MatrixXd& x, const KernelState& state);
/// Single-threaded reference; bit-identical to kernel_matrix.
MatrixXd kernel_matrix_serial(const MatrixXd& x, const KernelState& state);

/// q x n block with entry (i, j) = K(x_new_i, x_obs_j).
MatrixXd cross_kernel(const MatrixXd& x_new, const MatrixXd& x_obs, const KernelState& state);
MatrixXd cross_kernel_serial(const MatrixXd& x_new, const MatrixXd& x_obs, const KernelState& state);

/// Cholesky factor of a symmetric matrix, retried with diagonal jitter
/// 1e-10, 1e-9, ..., 1e-6 before giving up with a numerical error.
struct JitteredCholesky {
    Eigen::LLT<MatrixXd> llt;
    double jitter = 0.0;
};

JitteredCholesky cholesky_with_jitter(const MatrixXd& a);

}  // namespace bkmr
