#include "bkmr/dataset.hpp"
#include "bkmr/errors.hpp"
#include "bkmr/kernel.hpp"
#include "bkmr/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

using namespace bkmr;

namespace {

MatrixXd random_matrix(Index rows, Index cols, Rng& rng) {
    MatrixXd x(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) x(i, j) = std_normal(rng);
    }
    return x;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode{};
}

}  // namespace

TEST(Dataset, ValidatesShapes) {
    VectorXd y = VectorXd::Ones(3);
    MatrixXd z = MatrixXd::Zero(3, 2);
    EXPECT_NO_THROW(Dataset(y, z));
    EXPECT_EQ(code_of([&] { Dataset(VectorXd::Ones(1), MatrixXd::Zero(1, 2)); }), ErrorCode::input);
    EXPECT_EQ(code_of([&] { Dataset(y, MatrixXd::Zero(3, 0)); }), ErrorCode::input);
    EXPECT_EQ(code_of([&] { Dataset(y, MatrixXd::Zero(4, 2)); }), ErrorCode::input);
    EXPECT_EQ(code_of([&] { Dataset(y, z, MatrixXd(), VectorXd::Ones(2)); }), ErrorCode::input);
    VectorXd bad = y;
    bad(1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(code_of([&] { Dataset(bad, z); }), ErrorCode::input);
}

TEST(Dataset, DefaultNamesAndMediatorAccess) {
    const Dataset d(VectorXd::Ones(3), MatrixXd::Zero(3, 2), MatrixXd::Ones(3, 1));
    EXPECT_EQ(d.names().exposures, (std::vector<std::string>{"z1", "z2"}));
    EXPECT_EQ(d.names().covariates, (std::vector<std::string>{"c1"}));
    EXPECT_FALSE(d.has_mediator());
    EXPECT_EQ(code_of([&] { (void)d.m(); }), ErrorCode::schema);
    EXPECT_EQ(d.num_covariates(), 1);
    EXPECT_EQ(d.num_modifiers(), 0);
}

TEST(Dataset, SubsetAndWithOutcome) {
    VectorXd y(3);
    y << 1, 2, 3;
    MatrixXd z(3, 1);
    z << 10, 20, 30;
    const Dataset d(y, z, MatrixXd(), VectorXd(y * 2));
    const std::vector<Index> rows = {2, 2, 0};
    const Dataset s = d.subset(rows);
    EXPECT_DOUBLE_EQ(s.y()(0), 3);
    EXPECT_DOUBLE_EQ(s.z()(1, 0), 30);
    EXPECT_DOUBLE_EQ(s.m()(2), 2);
    const Dataset w = d.with_outcome(d.m(), "m");
    EXPECT_DOUBLE_EQ(w.y()(2), 6);
    EXPECT_EQ(w.names().outcome, "m");
    EXPECT_FALSE(d.without_mediator().has_mediator());
}

TEST(GaussianKernel, SpecExamples) {
    VectorXd a(2), b(2);
    a << 0.3, -1.2;
    EXPECT_DOUBLE_EQ(gaussian_kernel(a, a, KernelState::weights(VectorXd::Constant(2, 3.0))), 1.0);
    EXPECT_DOUBLE_EQ(gaussian_kernel(a, a, KernelState::smoothness(0.7, 2)), 1.0);

    VectorXd one(1), zero(1);
    one << 1.0;
    zero << 0.0;
    EXPECT_NEAR(gaussian_kernel(one, zero, KernelState::weights(VectorXd::Ones(1))), 0.367879, 1e-6);
    EXPECT_DOUBLE_EQ(gaussian_kernel(one, zero, KernelState::weights(VectorXd::Ones(1))), std::exp(-1.0));

    a << 1, 2;
    b << 0, 0;
    VectorXd r(2);
    r << 0.5, 0.0;
    EXPECT_NEAR(gaussian_kernel(a, b, KernelState::weights(r)), 0.606531, 1e-6);
}

TEST(GaussianKernel, Errors) {
    VectorXd a = VectorXd::Zero(2), b = VectorXd::Zero(3);
    EXPECT_EQ(code_of([&] { gaussian_kernel(a, b, KernelState::weights(VectorXd::Ones(2))); }), ErrorCode::input);
    VectorXd r(2);
    r << -0.1, 1.0;
    KernelState s = KernelState::weights(r);
    EXPECT_EQ(code_of([&] { gaussian_kernel(a, a, s); }), ErrorCode::invalid_state);
    EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::invalid_state);
}

TEST(KernelState, DeltaTracksZeroWeights) {
    VectorXd r(3);
    r << 0.0, 0.2, 0.0;
    const KernelState s = KernelState::weights(r);
    EXPECT_EQ(s.delta, (std::vector<bool>{false, true, false}));
    EXPECT_NO_THROW(s.validate());
    KernelState bad = s;
    bad.delta[0] = true;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(KernelState::smoothness(150.0, 2).validate(), Error);
}

TEST(KernelMatrix, SpecExamples) {
    Rng rng = make_rng(1);
    const MatrixXd x1 = random_matrix(1, 3, rng);
    EXPECT_EQ(kernel_matrix(x1, KernelState::weights(VectorXd::Ones(3))), MatrixXd::Ones(1, 1));

    const MatrixXd x = random_matrix(5, 3, rng);
    EXPECT_EQ(kernel_matrix(x, KernelState::weights(VectorXd::Zero(3))), MatrixXd::Ones(5, 5));

    const MatrixXd x3 = random_matrix(3, 2, rng);
    const MatrixXd k = kernel_matrix(x3, KernelState::weights(VectorXd::Ones(2)));
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) {
            EXPECT_NEAR(k(i, j), oracle::kernel_entry(x3.row(i).transpose(), x3.row(j).transpose(), VectorXd::Ones(2)),
                        1e-15);
        }
    }
}

TEST(KernelMatrix, NonFiniteInputIsAnInputError) {
    MatrixXd x = MatrixXd::Zero(2, 2);
    x(1, 1) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { kernel_matrix(x, KernelState::weights(VectorXd::Ones(2))); }), ErrorCode::input);
}

TEST(KernelMatrix, PropertiesOnRandomInstances) {
    Rng rng = make_rng(2);
    for (int rep = 0; rep < 30; ++rep) {
        const Index n = 2 + rep % 20, d = 1 + rep % 6;
        const MatrixXd x = random_matrix(n, d, rng);
        VectorXd r(d);
        for (Index l = 0; l < d; ++l) r(l) = uniform01(rng) * 2.0;
        const KernelState s = KernelState::weights(r);
        const MatrixXd k = kernel_matrix(x, s);
        EXPECT_TRUE(k.isApprox(k.transpose(), 0.0));
        EXPECT_TRUE((k.diagonal().array() == 1.0).all());
        EXPECT_TRUE((k.array() > 0.0).all() && (k.array() <= 1.0).all());
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(k).eigenvalues().minCoeff(), -1e-8);
        EXPECT_LT((k - oracle::kernel(x, r)).cwiseAbs().maxCoeff(), 1e-14);

        // Row permutation permutes rows and columns identically.
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + n, rng);
        const MatrixXd kp = kernel_matrix(perm * x, s);
        EXPECT_LT((kp - perm * k * perm.transpose()).cwiseAbs().maxCoeff(), 1e-15);

        // Raising one weight never raises an off-diagonal entry.
        VectorXd r2 = r;
        r2(0) += 0.5;
        const MatrixXd k2 = kernel_matrix(x, KernelState::weights(r2));
        EXPECT_TRUE((k2.array() <= k.array()).all());
    }
}

TEST(KernelMatrix, SmoothnessEqualsUniformWeights) {
    Rng rng = make_rng(3);
    const MatrixXd x = random_matrix(12, 4, rng);
    const double rho = 2.7;
    const MatrixXd a = kernel_matrix(x, KernelState::smoothness(rho, 4));
    const MatrixXd b = kernel_matrix(x, KernelState::weights(VectorXd::Constant(4, 1.0 / rho)));
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KernelMatrix, ParallelMatchesSerialBitForBit) {
    Rng rng = make_rng(4);
    const MatrixXd x = random_matrix(97, 5, rng);
    const MatrixXd q = random_matrix(31, 5, rng);
    const KernelState s = KernelState::weights(VectorXd::LinSpaced(5, 0.1, 0.9));
    EXPECT_EQ(kernel_matrix(x, s), kernel_matrix_serial(x, s));
    EXPECT_EQ(cross_kernel(q, x, s), cross_kernel_serial(q, x, s));
}

TEST(CrossKernel, SpecExamples) {
    Rng rng = make_rng(5);
    const MatrixXd x = random_matrix(6, 2, rng);
    const KernelState s = KernelState::weights(VectorXd::Ones(2));
    EXPECT_EQ(cross_kernel(x, x, s), kernel_matrix(x, s));

    MatrixXd a(1, 2), b(1, 2);
    a << 0.5, -1.0;
    b << 1.5, 0.0;
    EXPECT_NEAR(cross_kernel(a, b, s)(0, 0), std::exp(-2.0), 1e-15);

    const MatrixXd q = random_matrix(3, 2, rng);
    EXPECT_EQ(cross_kernel(q, x, KernelState::weights(VectorXd::Zero(2))), MatrixXd::Ones(3, 6));
    EXPECT_EQ(code_of([&] { cross_kernel(MatrixXd::Zero(2, 3), x, s); }), ErrorCode::input);
}

TEST(Cholesky, JitterLadder) {
    const MatrixXd k = MatrixXd::Ones(2, 2);  // rank one
    const auto c = cholesky_with_jitter(k);
    EXPECT_DOUBLE_EQ(c.jitter, 1e-10);
    EXPECT_EQ(c.llt.info(), Eigen::Success);
    EXPECT_EQ(cholesky_with_jitter(MatrixXd::Identity(3, 3)).jitter, 0.0);
    MatrixXd neg = -MatrixXd::Identity(2, 2);
    EXPECT_EQ(code_of([&] { cholesky_with_jitter(neg); }), ErrorCode::numerical);
}

TEST(Rng, DerivedSeedsAreDistinctAndStable) {
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
}
