#pragma once

#include "bkmr/mediation.hpp"
#include "bkmr/parametric.hpp"
#include "bkmr/sampler.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bkmr {

/// Generating surfaces. h1_* applied to several inputs is the sum of the
/// one-dimensional form over them (additive, no interaction); h2_* take
/// exactly two inputs.
///   h1_lin(x)  = x
///   h1_log(x)  = 4 / (1 + exp(-4x)) - 2
///   h1_quad(x) = x^2/2 + x/2
///   h2_lin(x, y)  = x + y + 0.5xy
///   h2_log(x, y)  = 4 / (1 + exp(-2(x + y) - xy)) - 2
///   h2_quad(x, y) = (x^2 + y^2)/4 + x/2 + y/2 + 0.5xy
enum class SurfaceFn { h1_lin, h1_log, h1_quad, h2_lin, h2_log, h2_quad };

SurfaceFn parse_surface_fn(const std::string& name);
std::string surface_fn_name(SurfaceFn fn);
double surface(SurfaceFn fn, std::span<const double> inputs);
double surface(const std::string& name, std::span<const double> inputs);
/// Coefficient on the xy term of each two-input surface.
double surface_interaction_coefficient(SurfaceFn fn);

/// A surface applied to chosen inputs; input index k >= 0 is exposure k,
/// kMediatorInput is the mediator.
struct SurfaceTerm {
    static constexpr int kMediatorInput = -1;
    SurfaceFn fn = SurfaceFn::h1_lin;
    std::vector<int> inputs;

    double operator()(const double* z, double m) const;
    /// Parses "h2_quad(z1,m)" with 1-based exposure indices.
    static SurfaceTerm parse(const std::string& text);
    std::string to_string() const;
};

enum class SigmaSource { paper, identity };

/// L x L exposure covariance. The paper source places the 3 x 3 leading block
/// (default off-diagonals 0.34, 0.25, 0.29; override via leading_block) in the
/// upper left and fills everything else with 1 on the diagonal and 0.3 off it.
MatrixXd build_sigma(int num_exposures, SigmaSource source = SigmaSource::paper,
                     const std::optional<MatrixXd>& leading_block = std::nullopt);

struct ScenarioSpec {
    int id = 1;
    int num_exposures = 3;
    MatrixXd sigma;
    SurfaceTerm mediator_surface;
    SurfaceTerm outcome_surface;
    std::optional<double> sigma_m;  // empty: chosen so the mediator signal fraction is signal_fraction
    std::optional<double> sigma_y;
    double signal_fraction = 0.5;
    Index truth_size = 1'000'000;
    int replicates = 500;
    Index sample_size = 300;
    std::uint64_t seed = 2020;
    bool per_replicate_quantiles = false;
    std::size_t max_truth_bytes = std::size_t{2} << 30;

    void validate() const;
};

/// Scenarios 1-4 with Mn = z1, As = z2, Pb = z3 and BL the mediator.
ScenarioSpec paper_scenario(int id, int num_exposures);
/// 50 replicates of 200, truth population 2e5.
void apply_desk_scale(ScenarioSpec& spec);

struct TruthPopulation {
    MatrixXd z;
    VectorXd m;
    VectorXd y;
    double sigma_m = 0.0;
    double sigma_y = 0.0;
};

struct TruthOracle {
    VectorXd z_star;  // population 25th percentiles
    VectorXd z;       // population 75th percentiles
    std::vector<double> m_values;  // population mediator 25th, 50th, 75th percentiles
    double nde = 0.0;
    double nie = 0.0;
    double te = 0.0;
    std::vector<double> cde;
    Index draws = 0;
};

TruthPopulation generate_population(const ScenarioSpec& spec);
/// Single-threaded reference; bit-identical to generate_population.
TruthPopulation generate_population_serial(const ScenarioSpec& spec);

/// Brute-force effects for a contrast: natural effects by g-computation with
/// `draws` simulated mediators per arm (NDE and NIE share draws, TE uses its
/// own), CDEs by direct evaluation of the outcome surface.
TruthOracle oracle_effects(const ScenarioSpec& spec, double sigma_m, const VectorXd& z_star, const VectorXd& z,
                           const std::vector<double>& m_values, Index draws, std::uint64_t seed);

struct Truth {
    TruthPopulation population;
    TruthOracle oracle;
};

Truth generate_truth(const ScenarioSpec& spec);

enum class Method { bkmr_cma, bkmr_cma_vs, linear, linear_noint, traditional };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct StudyConfig {
    std::vector<Method> methods = {Method::bkmr_cma, Method::bkmr_cma_vs, Method::linear, Method::traditional};
    McmcConfig mcmc;
    PriorConfig priors;
    int k_inner = 100;
    bool parallel = true;
};

/// Desk-scale MCMC: 2000 iterations, 1000 burn-in.
StudyConfig desk_study_config();

/// Point estimates of every effect from one method on one dataset.
struct MethodEstimate {
    double nde = 0.0;
    double nie = 0.0;
    double te = 0.0;
    std::vector<double> cde;
};

/// BKMR-CMA point estimates are posterior means over retained draws.
MethodEstimate estimate_with_method(Method method, const Dataset& data, const VectorXd& z_star, const VectorXd& z,
                                    const std::vector<double>& m_values, const StudyConfig& config,
                                    std::uint64_t seed);

struct ReplicateEstimate {
    int replicate = 0;
    Method method = Method::linear;
    std::string effect;
    std::optional<double> m_value;
    double estimate = 0.0;
    double truth = 0.0;
};

struct StudyRow {
    int scenario = 0;
    int num_exposures = 0;
    std::string method;
    std::string effect;
    std::optional<double> m_value;
    std::string statistic;
    double value = 0.0;
};

struct StudyResults {
    std::vector<StudyRow> rows;
    std::vector<ReplicateEstimate> estimates;
    std::vector<std::string> failures;  // "replicate <r> <method>: <message>"
    std::vector<double> m_values;       // CDE levels, in row order
};

/// Draws n rows without replacement; replicate r uses its own generator.
std::vector<Index> sample_replicate_rows(Index population, Index n, std::uint64_t seed, int replicate);

StudyResults run_study(const ScenarioSpec& spec, const Truth& truth, const StudyConfig& config);

/// Looks up one aggregated statistic; throws when missing.
double study_value(const StudyResults& results, Method method, const std::string& effect,
                   const std::string& statistic, std::optional<std::size_t> m_index = std::nullopt);

}  // namespace bkmr
