#include "bkmr/errors.hpp"
#include "bkmr/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

using namespace bkmr;

namespace {

double s1(const std::string& fn, double x) { return surface(fn, std::array{x}); }
double s2(const std::string& fn, double x, double y) { return surface(fn, std::array{x, y}); }

ScenarioSpec small_scenario(int id, Index truth = 5000) {
    ScenarioSpec s = paper_scenario(id, 3);
    s.truth_size = truth;
    s.sample_size = 100;
    s.replicates = 3;
    return s;
}

}  // namespace

TEST(Surfaces, ClosedForms) {
    EXPECT_EQ(s1("h1_lin", 0.0), 0.0);
    EXPECT_EQ(s1("h1_lin", 1.7), 1.7);
    EXPECT_NEAR(s1("h1_log", 0.0), 0.0, 1e-15);
    for (double x : {0.1, 0.5, 2.0}) EXPECT_NEAR(s1("h1_log", x), -s1("h1_log", -x), 1e-14);
    EXPECT_NEAR(s1("h1_log", 50.0), 2.0, 1e-12);
    EXPECT_NEAR(s1("h1_quad", 2.0), 3.0, 1e-15);
    EXPECT_NEAR(s1("h1_quad", -1.0), 0.0, 1e-15);
    EXPECT_NEAR(s2("h2_lin", 1.0, 2.0), 4.0, 1e-15);
    EXPECT_NEAR(s2("h2_log", 0.0, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(s2("h2_quad", 1.0, 1.0), 0.5 + 1.0 + 0.5, 1e-15);
    // h1 of several inputs is the sum
    EXPECT_NEAR(surface("h1_quad", std::array{1.0, 2.0}), 1.0 + 3.0, 1e-15);
    EXPECT_THROW(s1("h2_lin", 1.0), Error);
    EXPECT_THROW(s1("nope", 1.0), Error);
}

TEST(Surfaces, InteractionCoefficientByFiniteDifference) {
    for (const char* fn : {"h2_lin", "h2_quad"}) {
        const double h = 1e-3, x = 0.3, y = -0.7;
        const double mixed =
            (s2(fn, x + h, y + h) - s2(fn, x + h, y - h) - s2(fn, x - h, y + h) + s2(fn, x - h, y - h)) / (4 * h * h);
        EXPECT_NEAR(mixed, surface_interaction_coefficient(parse_surface_fn(fn)), 1e-6) << fn;
    }
}

TEST(Surfaces, TermParsing) {
    const auto t = SurfaceTerm::parse("h2_quad(z1,m)");
    EXPECT_EQ(t.fn, SurfaceFn::h2_quad);
    ASSERT_EQ(t.inputs.size(), 2u);
    EXPECT_EQ(t.inputs[0], 0);
    EXPECT_EQ(t.inputs[1], SurfaceTerm::kMediatorInput);
    EXPECT_EQ(SurfaceTerm::parse(t.to_string()).inputs, t.inputs);
    const double z[3] = {1.0, 0.0, 0.0};
    EXPECT_NEAR(t(z, 1.0), 2.0, 1e-15);
    EXPECT_THROW(SurfaceTerm::parse("h2_quad(z1)"), Error);
    EXPECT_THROW(SurfaceTerm::parse("h1_lin(z0)"), Error);
    EXPECT_THROW(SurfaceTerm::parse("h1_lin(q)"), Error);
}

TEST(Sigma, Structure) {
    const MatrixXd s = build_sigma(10);
    EXPECT_EQ(s(0, 1), 0.34);
    EXPECT_EQ(s(0, 2), 0.25);
    EXPECT_EQ(s(1, 2), 0.29);
    EXPECT_EQ(s(2, 5), 0.3);
    EXPECT_EQ(s(7, 9), 0.3);
    EXPECT_EQ(s.diagonal(), VectorXd::Ones(10));
    EXPECT_EQ(s, s.transpose());
    EXPECT_EQ(build_sigma(4, SigmaSource::identity), MatrixXd::Identity(4, 4));
    MatrixXd block(2, 2);
    block << 1.0, -0.2, -0.2, 1.0;
    const MatrixXd u = build_sigma(5, SigmaSource::paper, block);
    EXPECT_EQ(u(0, 1), -0.2);
    EXPECT_EQ(u(0, 2), 0.3);
    EXPECT_EQ(build_sigma(2)(0, 1), 0.34);
    block << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(build_sigma(3, SigmaSource::paper, block), Error);
}

TEST(Scenarios, ValidationAndMemoryGuard) {
    EXPECT_NO_THROW(paper_scenario(4, 3).validate());
    EXPECT_THROW(paper_scenario(4, 2), Error);
    EXPECT_THROW(paper_scenario(5, 3), Error);
    auto s = paper_scenario(1, 3);
    s.max_truth_bytes = 1000;
    EXPECT_THROW(s.validate(), Error);
    s = paper_scenario(1, 3);
    s.sample_size = s.truth_size + 1;
    EXPECT_THROW(s.validate(), Error);
    apply_desk_scale(s);
    EXPECT_EQ(s.replicates, 50);
    EXPECT_EQ(s.sample_size, 200);
}

TEST(Population, ParallelMatchesSerialBitwise) {
    auto s = small_scenario(3, 40000);
    const auto a = generate_population(s);
    const auto b = generate_population_serial(s);
    EXPECT_TRUE((a.z.array() == b.z.array()).all());
    EXPECT_TRUE((a.m.array() == b.m.array()).all());
    EXPECT_TRUE((a.y.array() == b.y.array()).all());
    EXPECT_EQ(a.sigma_m, b.sigma_m);
    EXPECT_EQ(a.sigma_y, b.sigma_y);
}

TEST(Population, MomentsAndSignalFraction) {
    auto s = small_scenario(1, 200000);
    const auto p = generate_population(s);
    const MatrixXd centred = p.z.rowwise() - p.z.colwise().mean();
    const MatrixXd cov = centred.transpose() * centred / static_cast<double>(p.z.rows() - 1);
    EXPECT_LT((cov - s.sigma).cwiseAbs().maxCoeff(), 0.015);
    // mediator signal is z1 with unit variance, so the noise variance matches it
    EXPECT_NEAR(p.sigma_m * p.sigma_m, 1.0, 0.02);
    const VectorXd resid = p.m - p.z.col(0);
    EXPECT_NEAR(resid.squaredNorm() / static_cast<double>(resid.size()), p.sigma_m * p.sigma_m, 0.02);
}

TEST(Oracle, NoContrastNoEffect) {
    auto s = small_scenario(2);
    const VectorXd z = VectorXd::Constant(3, 0.4);
    const auto o = oracle_effects(s, 0.0, z, z, {0.0, 1.0}, 1000, 1);
    EXPECT_EQ(o.nde, 0.0);
    EXPECT_EQ(o.nie, 0.0);
    EXPECT_EQ(o.te, 0.0);
    EXPECT_EQ(o.cde, (std::vector<double>{0.0, 0.0}));
}

TEST(Oracle, LinearScenarioHasClosedForm) {
    auto s = small_scenario(1);
    const VectorXd zs = VectorXd::Constant(3, -0.674), z = VectorXd::Constant(3, 0.674);
    const auto o = oracle_effects(s, 1.0, zs, z, {-1.0, 0.0, 1.0}, 400000, 3);
    EXPECT_NEAR(o.nde, 1.348, 0.005);
    EXPECT_NEAR(o.nie, 1.348, 0.005);
    EXPECT_NEAR(o.te, 2.696, 0.01);
    for (double c : o.cde) EXPECT_NEAR(c, 1.348, 1e-12);
}

TEST(Oracle, ConvergesAcrossSizes) {
    auto s = small_scenario(4);
    const VectorXd zs = VectorXd::Constant(3, -0.6), z = VectorXd::Constant(3, 0.7);
    const auto a = oracle_effects(s, 0.8, zs, z, {0.0}, 200000, 5);
    const auto b = oracle_effects(s, 0.8, zs, z, {0.0}, 800000, 6);
    EXPECT_NEAR(a.nde, b.nde, 0.02);
    EXPECT_NEAR(a.nie, b.nie, 0.02);
    EXPECT_NEAR(a.te, b.te, 0.03);
    EXPECT_NEAR(b.nde + b.nie, b.te, 0.03);
    // h2_quad(z1, m) has cross term 0.5 z1 m, so the CDE at m = 0 is the z1-only part
    const double expect = (0.7 * 0.7 - 0.36) / 4 + (0.7 + 0.6) / 2;
    EXPECT_NEAR(b.cde[0], expect, 1e-12);
}

TEST(Truth, PopulationQuantiles) {
    auto s = small_scenario(1, 200000);
    const auto t = generate_truth(s);
    for (Index l = 0; l < 3; ++l) {
        EXPECT_NEAR(t.oracle.z_star(l), -0.674, 0.02);
        EXPECT_NEAR(t.oracle.z(l), 0.674, 0.02);
    }
    ASSERT_EQ(t.oracle.m_values.size(), 3u);
    EXPECT_LT(t.oracle.m_values[0], t.oracle.m_values[1]);
    EXPECT_LT(t.oracle.m_values[1], t.oracle.m_values[2]);
}

TEST(Replicates, DistinctRowsAndIndependentStreams) {
    const auto a = sample_replicate_rows(1000, 200, 9, 0);
    const auto b = sample_replicate_rows(1000, 200, 9, 1);
    ASSERT_EQ(a.size(), 200u);
    EXPECT_EQ(std::set<Index>(a.begin(), a.end()).size(), 200u);
    EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](Index i) { return i >= 0 && i < 1000; }));
    EXPECT_NE(a, b);
    EXPECT_EQ(a, sample_replicate_rows(1000, 200, 9, 0));
    const auto all = sample_replicate_rows(50, 50, 9, 2);
    EXPECT_EQ(all.size(), 50u);
    EXPECT_THROW(sample_replicate_rows(10, 11, 9, 0), Error);
}

TEST(Methods, Names) {
    for (Method m : {Method::bkmr_cma, Method::bkmr_cma_vs, Method::linear, Method::linear_noint, Method::traditional}) {
        EXPECT_EQ(parse_method(method_name(m)), m);
    }
    EXPECT_THROW(parse_method("bkmr"), Error);
}

TEST(Study, NoiselessOutcomeGivesExactCde) {
    // y is an exact linear function of (z1, m), so every CDE estimate equals the truth.
    auto s = small_scenario(1, 20000);
    s.sigma_y = 0.0;
    const auto t = generate_truth(s);
    StudyConfig cfg;
    cfg.methods = {Method::linear, Method::linear_noint, Method::traditional};
    const auto r = run_study(s, t, cfg);
    EXPECT_TRUE(r.failures.empty());
    for (Method m : cfg.methods) {
        for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(study_value(r, m, "CDE", "rmse", i), 1e-8) << method_name(m);
        EXPECT_EQ(study_value(r, m, "TE", "n"), 3.0);
    }
    EXPECT_THROW(study_value(r, Method::bkmr_cma, "TE", "rmse"), Error);
}

TEST(Study, RmseDecomposes) {
    auto s = small_scenario(2, 20000);
    s.replicates = 8;
    const auto t = generate_truth(s);
    StudyConfig cfg;
    cfg.methods = {Method::linear};
    const auto r = run_study(s, t, cfg);
    const double k = 8.0;
    for (const char* e : {"TE", "NDE", "NIE"}) {
        const double bias = study_value(r, Method::linear, e, "bias");
        const double sd = study_value(r, Method::linear, e, "sd");
        const double rmse = study_value(r, Method::linear, e, "rmse");
        EXPECT_NEAR(rmse * rmse, bias * bias + sd * sd * (k - 1) / k, 1e-10) << e;
    }
}

TEST(Study, LinearMethodsOnNoisyLinearScenario) {
    auto s = small_scenario(1, 50000);
    s.replicates = 20;
    s.sample_size = 200;
    const auto t = generate_truth(s);
    StudyConfig cfg;
    cfg.methods = {Method::linear, Method::traditional};
    const auto r = run_study(s, t, cfg);
    ASSERT_TRUE(r.failures.empty());
    for (Method m : cfg.methods) {
        for (const char* e : {"TE", "NDE", "NIE"}) {
            const double truth = study_value(r, m, e, "truth");
            EXPECT_NEAR(study_value(r, m, e, "median"), truth, 0.25) << method_name(m) << " " << e;
            EXPECT_LE(study_value(r, m, e, "lower"), study_value(r, m, e, "upper"));
        }
    }
    // same replicates, same data: repeat runs agree exactly
    const auto again = run_study(s, t, cfg);
    EXPECT_EQ(study_value(again, Method::linear, "NIE", "mean"), study_value(r, Method::linear, "NIE", "mean"));
}
