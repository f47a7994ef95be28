#include "bkmr/kernel.hpp"

#include "bkmr/errors.hpp"

#include <cmath>

namespace bkmr {

KernelState KernelState::smoothness(double rho, Index dimension) {
    KernelState s;
    s.mode = KernelMode::single_smoothness;
    s.rho = rho;
    s.dimension = dimension;
    s.delta.assign(static_cast<std::size_t>(dimension), true);
    return s;
}

KernelState KernelState::weights(VectorXd r) {
    KernelState s;
    s.mode = KernelMode::component_weights;
    s.dimension = r.size();
    s.delta.resize(static_cast<std::size_t>(r.size()));
    for (Index l = 0; l < r.size(); ++l) s.delta[static_cast<std::size_t>(l)] = r(l) > 0.0;
    s.r = std::move(r);
    return s;
}

VectorXd KernelState::effective_weights() const {
    if (mode == KernelMode::single_smoothness) return VectorXd::Constant(dimension, 1.0 / rho);
    return r;
}

void KernelState::validate(double rho_lower, double rho_upper) const {
    if (static_cast<Index>(delta.size()) != dimension) {
        throw Error(ErrorCode::invalid_state, "inclusion indicator length differs from kernel dimension");
    }
    if (mode == KernelMode::single_smoothness) {
        if (!(rho > rho_lower && rho < rho_upper)) {
            throw Error(ErrorCode::invalid_state, "rho outside its support");
        }
        return;
    }
    if (r.size() != dimension) throw Error(ErrorCode::invalid_state, "r length differs from kernel dimension");
    for (Index l = 0; l < dimension; ++l) {
        if (!(r(l) >= 0.0) || !std::isfinite(r(l))) {
            throw Error(ErrorCode::invalid_state, "kernel weight r must be finite and nonnegative");
        }
        if ((r(l) == 0.0) == delta[static_cast<std::size_t>(l)]) {
            throw Error(ErrorCode::invalid_state, "r_l must be zero exactly when delta_l is zero");
        }
    }
}

namespace {

void check_weights(const VectorXd& w) {
    for (Index l = 0; l < w.size(); ++l) {
        if (!(w(l) >= 0.0)) throw Error(ErrorCode::invalid_state, "negative kernel weight");
    }
}

inline double weighted_sq_dist(const double* a, Index stride_a, const double* b, Index stride_b,
                               const double* w, Index dim) {
    double d = 0.0;
    for (Index l = 0; l < dim; ++l) {
        const double diff = a[l * stride_a] - b[l * stride_b];
        d += w[l] * diff * diff;
    }
    return d;
}

void check_inputs(const MatrixXd& x, const KernelState& state, const char* what) {
    if (x.cols() != state.dim()) {
        throw Error(ErrorCode::input, std::string(what) + ": column count differs from kernel dimension");
    }
    if (!x.allFinite()) throw Error(ErrorCode::input, std::string(what) + ": non-finite kernel input");
}

// Entry (i, j) of the kernel; shared by the parallel and serial paths so both
// produce identical bits.
inline double kernel_entry(const MatrixXd& a, Index i, const MatrixXd& b, Index j, const VectorXd& w) {
    return std::exp(-weighted_sq_dist(a.data() + i, a.rows(), b.data() + j, b.rows(), w.data(), w.size()));
}

}  // namespace

double gaussian_kernel(const Eigen::Ref<const VectorXd>& zi, const Eigen::Ref<const VectorXd>& zj,
                       const KernelState& state) {
    if (zi.size() != state.dim() || zj.size() != state.dim()) {
        throw Error(ErrorCode::input, "gaussian_kernel: dimension mismatch");
    }
    const VectorXd w = state.effective_weights();
    check_weights(w);
    double d = 0.0;
    for (Index l = 0; l < w.size(); ++l) {
        const double diff = zi(l) - zj(l);
        d += w(l) * diff * diff;
    }
    return std::exp(-d);
}

MatrixXd kernel_matrix(const MatrixXd& x, const KernelState& state) {
    check_inputs(x, state, "kernel_matrix");
    const VectorXd w = state.effective_weights();
    check_weights(w);
    const Index n = x.rows();
    MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
    for (Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double v = kernel_entry(x, i, x, j, w);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

MatrixXd kernel_matrix_serial(const MatrixXd& x, const KernelState& state) {
    check_inputs(x, state, "kernel_matrix");
    const VectorXd w = state.effective_weights();
    check_weights(w);
    const Index n = x.rows();
    MatrixXd k(n, n);
    for (Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double v = kernel_entry(x, i, x, j, w);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

MatrixXd cross_kernel(const MatrixXd& x_new, const MatrixXd& x_obs, const KernelState& state) {
    check_inputs(x_new, state, "cross_kernel");
    check_inputs(x_obs, state, "cross_kernel");
    const VectorXd w = state.effective_weights();
    check_weights(w);
    MatrixXd k(x_new.rows(), x_obs.rows());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < x_new.rows(); ++i) {
        for (Index j = 0; j < x_obs.rows(); ++j) k(i, j) = kernel_entry(x_new, i, x_obs, j, w);
    }
    return k;
}

MatrixXd cross_kernel_serial(const MatrixXd& x_new, const MatrixXd& x_obs, const KernelState& state) {
    check_inputs(x_new, state, "cross_kernel");
    check_inputs(x_obs, state, "cross_kernel");
    const VectorXd w = state.effective_weights();
    check_weights(w);
    MatrixXd k(x_new.rows(), x_obs.rows());
    for (Index i = 0; i < x_new.rows(); ++i) {
        for (Index j = 0; j < x_obs.rows(); ++j) k(i, j) = kernel_entry(x_new, i, x_obs, j, w);
    }
    return k;
}

JitteredCholesky cholesky_with_jitter(const MatrixXd& a) {
    JitteredCholesky out;
    out.llt.compute(a);
    if (out.llt.info() == Eigen::Success) return out;
    for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
        MatrixXd b = a;
        b.diagonal().array() += jitter;
        out.llt.compute(b);
        if (out.llt.info() == Eigen::Success) {
            out.jitter = jitter;
            return out;
        }
    }
    throw Error(ErrorCode::numerical, "Cholesky factorization failed after jitter up to 1e-6");
}

}  // namespace bkmr
