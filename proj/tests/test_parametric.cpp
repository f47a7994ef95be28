#include "bkmr/errors.hpp"
#include "bkmr/parametric.hpp"
#include "bkmr/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bkmr;

namespace {

struct Coefs {
    double b0;
    VectorXd b1, b2;
    double t0;
    VectorXd t1;
    double t2;
    VectorXd t3, t4;
};

Coefs random_coefs(Rng& rng, Index L, Index P) {
    Coefs c;
    c.b0 = std_normal(rng);
    c.b1 = VectorXd::NullaryExpr(L, [&] { return std_normal(rng); });
    c.b2 = VectorXd::NullaryExpr(P, [&] { return std_normal(rng); });
    c.t0 = std_normal(rng);
    c.t1 = VectorXd::NullaryExpr(L, [&] { return std_normal(rng); });
    c.t2 = std_normal(rng);
    c.t3 = VectorXd::NullaryExpr(L, [&] { return 0.5 * std_normal(rng); });
    c.t4 = VectorXd::NullaryExpr(P, [&] { return std_normal(rng); });
    return c;
}

// Data from the linear models. With noise == 0 the outcome is exact and the
// mediator noise is projected off the mediator design, so OLS recovers every
// coefficient exactly while M stays linearly independent of [1, Z, C].
Dataset linear_data(const Coefs& k, Index n, double noise, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const Index L = k.b1.size(), P = k.b2.size();
    MatrixXd z(n, L), c(n, P);
    VectorXd em(n), ey(n);
    for (Index i = 0; i < n; ++i) {
        for (Index l = 0; l < L; ++l) z(i, l) = std_normal(rng);
        for (Index p = 0; p < P; ++p) c(i, p) = std_normal(rng);
        em(i) = std_normal(rng);
        ey(i) = std_normal(rng);
    }
    if (noise == 0.0) {
        MatrixXd x(n, 1 + L + P);
        x << VectorXd::Ones(n), z, c;
        em -= x * x.colPivHouseholderQr().solve(em);
        ey.setZero();
    } else {
        em *= noise;
        ey *= noise;
    }
    VectorXd m(n), y(n);
    for (Index i = 0; i < n; ++i) {
        m(i) = k.b0 + k.b1.dot(z.row(i)) + k.b2.dot(c.row(i)) + em(i);
        y(i) = k.t0 + k.t1.dot(z.row(i)) + k.t2 * m(i) + k.t3.dot(z.row(i)) * m(i) + k.t4.dot(c.row(i)) + ey(i);
    }
    return Dataset(y, z, c, m);
}

LinearMediationFit hand_fit(const Coefs& k) {
    LinearMediationFit f;
    const Index L = k.b1.size();
    for (Index l = 0; l < L; ++l) f.exposure_names.push_back("z" + std::to_string(l + 1));
    for (Index p = 0; p < k.b2.size(); ++p) f.covariate_names.push_back("c" + std::to_string(p + 1));
    f.covariate_means = VectorXd::Zero(k.b2.size());
    f.beta0 = k.b0;
    f.beta1 = k.b1;
    f.beta2 = k.b2;
    f.theta0 = k.t0;
    f.theta1 = k.t1;
    f.theta2 = k.t2;
    f.theta3 = k.t3;
    f.theta4 = k.t4;
    f.extra_coef = VectorXd(0);
    f.mediator_residual_var = 1.0;
    f.outcome_residual_var = 1.0;
    return f;
}

}  // namespace

TEST(LinearFit, RecoversCoefficientsWithoutNoise) {
    Rng rng = make_rng(3);
    const Coefs k = random_coefs(rng, 3, 2);
    const auto f = fit_linear_mediation(linear_data(k, 60, 0.0, 4), LinearMode::interaction);
    EXPECT_NEAR(f.beta0, k.b0, 1e-8);
    EXPECT_LT((f.beta1 - k.b1).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((f.beta2 - k.b2).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(f.theta0, k.t0, 1e-8);
    EXPECT_LT((f.theta1 - k.t1).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(f.theta2, k.t2, 1e-8);
    EXPECT_LT((f.theta3 - k.t3).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((f.theta4 - k.t4).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(f.outcome_residual_var, 1e-20);
    ASSERT_EQ(f.outcome_terms.size(), 1u + 3u + 1u + 3u + 2u);
    EXPECT_EQ(f.outcome_terms[5], "z1:m");
}

TEST(LinearFit, TraditionalModeHasNoInteraction) {
    Rng rng = make_rng(5);
    Coefs k = random_coefs(rng, 3, 1);
    k.t3.setZero();
    const auto f = fit_linear_mediation(linear_data(k, 50, 0.0, 6), LinearMode::traditional);
    EXPECT_EQ(f.theta3, VectorXd::Zero(3));
    EXPECT_NEAR(f.theta2, k.t2, 1e-8);
    EXPECT_EQ(f.outcome_terms.size(), 1u + 3u + 1u + 1u);
}

TEST(LinearFit, StandardErrorsCoverTruth) {
    Rng rng = make_rng(7);
    const Coefs k = random_coefs(rng, 3, 0);
    const auto f = fit_linear_mediation(linear_data(k, 300, 1.0, 8), LinearMode::interaction);
    for (Index l = 0; l < 3; ++l) {
        EXPECT_LT(std::abs(f.beta1(l) - k.b1(l)), 4.0 * f.mediator_se(1 + l));
    }
    EXPECT_NEAR(f.mediator_residual_var, 1.0, 0.25);
}

TEST(LinearEffectsFormulas, HandComputedExamples) {
    Coefs k;
    k.b0 = 0.0;
    k.b1 = VectorXd::Unit(3, 0);
    k.b2 = VectorXd(0);
    k.t0 = 0.0;
    k.t1 = VectorXd::Unit(3, 0);
    k.t2 = 1.0;
    k.t3 = VectorXd::Zero(3);
    k.t4 = VectorXd(0);
    const auto f = hand_fit(k);
    const VectorXd zs = VectorXd::Constant(3, -0.674);
    const VectorXd z = VectorXd::Constant(3, 0.674);
    EXPECT_NEAR(linear_nde(f, z, zs), 1.348, 1e-12);
    EXPECT_NEAR(linear_nie(f, z, zs), 1.348, 1e-12);
    EXPECT_NEAR(linear_te(f, z, zs), 2.696, 1e-12);
    EXPECT_NEAR(linear_cde(f, z, zs, 5.0), 1.348, 1e-12);

    auto g = f;
    g.theta3 = VectorXd::Unit(3, 0);  // Y = z1 + M + z1 M
    // m* = -0.674: NDE = 1.348 + 1.348 * -0.674; NIE = (1 + 0.674) * 1.348.
    EXPECT_NEAR(linear_nde(g, z, zs), 1.348 - 1.348 * 0.674, 1e-12);
    EXPECT_NEAR(linear_nie(g, z, zs), 1.674 * 1.348, 1e-12);
    EXPECT_NEAR(linear_cde(g, z, zs, 2.0), 1.348 * 3.0, 1e-12);
}

TEST(LinearEffectsFormulas, ZeroContrastAndZeroPath) {
    Rng rng = make_rng(9);
    Coefs k = random_coefs(rng, 4, 2);
    auto f = hand_fit(k);
    const VectorXd z = VectorXd::NullaryExpr(4, [&] { return std_normal(rng); });
    EXPECT_EQ(linear_nde(f, z, z), 0.0);
    EXPECT_EQ(linear_nie(f, z, z), 0.0);
    EXPECT_EQ(linear_cde(f, z, z, 1.3), 0.0);
    f.beta1.setZero();
    const VectorXd zs = VectorXd::NullaryExpr(4, [&] { return std_normal(rng); });
    EXPECT_EQ(linear_nie(f, z, zs), 0.0);
}

TEST(LinearEffectsFormulas, AdditivityOverRandomCoefficients) {
    Rng rng = make_rng(11);
    for (int rep = 0; rep < 1000; ++rep) {
        const Coefs k = random_coefs(rng, 3, 2);
        const auto f = hand_fit(k);
        const VectorXd z = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
        const VectorXd zs = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
        const VectorXd c = VectorXd::NullaryExpr(2, [&] { return std_normal(rng); });
        const double sum = linear_nde(f, z, zs, c) + linear_nie(f, z, zs);
        const double te = linear_te(f, z, zs, c);
        ASSERT_NEAR(sum, te, 1e-12 * std::max(1.0, std::abs(te))) << "set " << rep;
    }
}

TEST(LinearEffectsFormulas, CdeMatchesOutcomeMeanDifference) {
    Rng rng = make_rng(13);
    const Coefs k = random_coefs(rng, 3, 2);
    const auto f = hand_fit(k);
    const VectorXd z = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
    const VectorXd zs = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
    const VectorXd c = VectorXd::NullaryExpr(2, [&] { return std_normal(rng); });
    for (double m : {-2.0, 0.0, 0.7, 3.0}) {
        EXPECT_NEAR(linear_cde(f, z, zs, m, c), f.outcome_mean(z, m, c) - f.outcome_mean(zs, m, c), 1e-12);
    }
}

TEST(LinearEffectsFormulas, WithoutInteractionCdeIsFlatAndLinearInContrast) {
    Rng rng = make_rng(15);
    Coefs k = random_coefs(rng, 3, 1);
    k.t3.setZero();
    const auto f = hand_fit(k);
    const VectorXd zs = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
    const VectorXd d = VectorXd::NullaryExpr(3, [&] { return std_normal(rng); });
    const double c0 = linear_cde(f, zs + d, zs, -1.0);
    EXPECT_NEAR(linear_cde(f, zs + d, zs, 4.0), c0, 1e-12);
    EXPECT_NEAR(linear_nde(f, zs + d, zs), c0, 1e-12);
    EXPECT_NEAR(linear_nde(f, zs + 2.0 * d, zs), 2.0 * linear_nde(f, zs + d, zs), 1e-12);
    EXPECT_NEAR(linear_nie(f, zs + 2.0 * d, zs), 2.0 * linear_nie(f, zs + d, zs), 1e-12);
}

TEST(LinearEffectsFormulas, AgreeWithSimulation) {
    Rng rng = make_rng(17);
    for (int rep = 0; rep < 3; ++rep) {
        const Coefs k = random_coefs(rng, 2, 1);
        const auto f = hand_fit(k);
        const VectorXd z = VectorXd::NullaryExpr(2, [&] { return std_normal(rng); });
        const VectorXd zs = VectorXd::NullaryExpr(2, [&] { return std_normal(rng); });
        const VectorXd c = VectorXd::Constant(1, 0.3);
        const std::vector<double> ms = {-1.0, 1.0};
        const auto mc = oracle::linear_g_computation(f, z, zs, c, ms, 200000, 100 + static_cast<unsigned>(rep));
        EXPECT_NEAR(linear_nde(f, z, zs, c), mc.nde, 0.03);
        EXPECT_NEAR(linear_nie(f, z, zs), mc.nie, 0.03);
        EXPECT_NEAR(linear_te(f, z, zs, c), mc.te, 0.03);
        for (std::size_t i = 0; i < ms.size(); ++i) EXPECT_NEAR(linear_cde(f, z, zs, ms[i], c), mc.cde[i], 0.03);
    }
}

TEST(TraditionalEffects, ProductMethod) {
    Rng rng = make_rng(19);
    Coefs k = random_coefs(rng, 3, 1);
    k.t3.setZero();
    const auto f = fit_linear_mediation(linear_data(k, 80, 0.0, 20), LinearMode::traditional);
    const VectorXd zs = VectorXd::Constant(3, -0.5), z = VectorXd::Constant(3, 0.5);
    const auto t = traditional_effects(f, z, zs);
    EXPECT_NEAR(t.nde, k.t1.sum(), 1e-8);
    EXPECT_NEAR(t.nie, k.t2 * k.b1.sum(), 1e-8);
    EXPECT_NEAR(t.nie, linear_nie(f, z, zs), 1e-10);
    EXPECT_EQ(traditional_effects(f, z, z).nde, 0.0);

    const auto e = linear_effects(f, z, zs, std::nullopt, {0.0, 1.0});
    EXPECT_EQ(e.te, e.nde + e.nie);
    EXPECT_NEAR(e.cde[0], e.nde, 1e-12);

    const auto inter = fit_linear_mediation(linear_data(k, 80, 0.0, 20), LinearMode::interaction);
    EXPECT_THROW(traditional_effects(inter, z, zs), Error);
}

TEST(LinearFit, SingularDesignNamesColumns) {
    Rng rng = make_rng(21);
    const Index n = 30;
    MatrixXd z(n, 2), c(n, 1);
    VectorXd m(n), y(n);
    for (Index i = 0; i < n; ++i) {
        z(i, 0) = std_normal(rng);
        z(i, 1) = std_normal(rng);
        c(i, 0) = 2.0 * z(i, 0);
        m(i) = std_normal(rng);
        y(i) = std_normal(rng);
    }
    ColumnNames names;
    names.exposures = {"Mn", "As"};
    names.covariates = {"dup"};
    try {
        fit_linear_mediation(Dataset(y, z, c, m, MatrixXd(), names), LinearMode::interaction);
        FAIL() << "expected a singular design error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::singular_design);
        const std::string msg = e.what();
        EXPECT_TRUE(msg.find("Mn") != std::string::npos || msg.find("dup") != std::string::npos) << msg;
    }
}

TEST(LinearFit, TooFewRowsIsAnInputError) {
    Rng rng = make_rng(23);
    const Index n = 5;
    MatrixXd z = MatrixXd::NullaryExpr(n, 3, [&] { return std_normal(rng); });
    VectorXd m = VectorXd::NullaryExpr(n, [&] { return std_normal(rng); });
    VectorXd y = VectorXd::NullaryExpr(n, [&] { return std_normal(rng); });
    try {
        fit_linear_mediation(Dataset(y, z, MatrixXd(), m), LinearMode::interaction);
        FAIL() << "expected an input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::input);
    }
}

TEST(ExtraTerms, ParseAndEnterEffects) {
    EXPECT_EQ(ExtraTerm::parse("age").kind, ExtraTerm::Kind::main);
    EXPECT_EQ(ExtraTerm::parse("age^2").kind, ExtraTerm::Kind::square);
    const auto p = ExtraTerm::parse("age*z1");
    EXPECT_EQ(p.kind, ExtraTerm::Kind::product);
    EXPECT_EQ(p.a, "age");
    EXPECT_EQ(p.b, "z1");
    EXPECT_EQ(p.name(), "age*z1");
    EXPECT_THROW(ExtraTerm::parse("*z1"), Error);

    // Y = z1 + M + 0.5 z1^2 exactly; the squared term must be recovered and enter the NDE.
    Rng rng = make_rng(25);
    const Index n = 60;
    MatrixXd z = MatrixXd::NullaryExpr(n, 2, [&] { return std_normal(rng); });
    VectorXd m(n), y(n);
    for (Index i = 0; i < n; ++i) {
        m(i) = z(i, 0) + 0.3 * std_normal(rng);
        y(i) = z(i, 0) + m(i) + 0.5 * z(i, 0) * z(i, 0);
    }
    ColumnNames names;
    names.exposures = {"z1", "z2"};
    const Dataset d(y, z, MatrixXd(), m, MatrixXd(), names);
    const auto f = fit_linear_mediation(d, LinearMode::traditional, {ExtraTerm::parse("z1^2")});
    ASSERT_EQ(f.extra_coef.size(), 1);
    EXPECT_NEAR(f.extra_coef(0), 0.5, 1e-8);
    VectorXd zs(2), zz(2);
    zs << -1.0, 0.0;
    zz << 2.0, 0.0;
    const auto e = linear_effects(f, zz, zs, std::nullopt, {0.0});
    EXPECT_NEAR(e.nde, 3.0 + 0.5 * (4.0 - 1.0), 1e-8);
    EXPECT_NEAR(e.cde[0], e.nde, 1e-10);
    EXPECT_THROW(fit_linear_mediation(d, LinearMode::traditional, {ExtraTerm::parse("nope")}), Error);
}

TEST(Bootstrap, DeterministicAndCentred) {
    Rng rng = make_rng(27);
    Coefs k = random_coefs(rng, 2, 1);
    const Dataset d = linear_data(k, 150, 1.0, 28);
    const VectorXd zs = VectorXd::Constant(2, -0.5), z = VectorXd::Constant(2, 0.5);
    const auto a = bootstrap_linear_effects(d, LinearMode::interaction, {}, z, zs, std::nullopt, {0.0}, 200, 5);
    const auto b = bootstrap_linear_effects(d, LinearMode::interaction, {}, z, zs, std::nullopt, {0.0}, 200, 5);
    ASSERT_EQ(a.resamples.size(), 200u);
    double s = 0.0;
    for (std::size_t i = 0; i < a.resamples.size(); ++i) {
        EXPECT_EQ(a.resamples[i].nde, b.resamples[i].nde);
        EXPECT_EQ(a.resamples[i].nie, b.resamples[i].nie);
        EXPECT_EQ(a.resamples[i].cde[0], b.resamples[i].cde[0]);
        s += a.resamples[i].te;
    }
    const auto f = fit_linear_mediation(d, LinearMode::interaction);
    const double te = linear_effects(f, z, zs, std::nullopt, {}).te;
    EXPECT_NEAR(s / 200.0, te, 0.1 * std::max(1.0, std::abs(te)));
    EXPECT_THROW(bootstrap_linear_effects(d, LinearMode::interaction, {}, z, zs, std::nullopt, {}, 0, 5), Error);
}
