#pragma once

#include "bkmr/summary.hpp"
#include "bkmr/surface.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bkmr {

/// The counterfactual question: move exposures from z_star to z, holding
/// covariates at c_bar and any kernel modifiers at their fixing values.
struct ContrastSpec {
    VectorXd z_star;
    VectorXd z;
    std::optional<VectorXd> c_bar;  // defaults to the covariate means of each model's training data
    std::map<std::string, double> modifier_values;
    int k_inner = 100;
    std::vector<double> m_values;  // mediator levels for controlled direct effects
};

struct MediationOptions {
    SurfaceMode surface_mode = SurfaceMode::conditional_mean;
    bool mediator_noise = true;  // false drops sigma_M N(0,1) from the simulated mediator
    /// Compute Y_z and Y_z* by pushing simulated mediators through the outcome
    /// model instead of reading them off the total-effect model.
    bool total_effect_from_mediation_models = false;
    bool parallel = true;
};

/// Posterior samples per retained draw. cde[i][j] is CDE(m_values[i]) at draw j.
struct EffectSamples {
    std::vector<double> nde;
    std::vector<double> nie;
    std::vector<double> te;
    std::vector<double> m_values;
    std::vector<std::vector<double>> cde;
    std::vector<std::string> warnings;

    std::size_t draws() const;
};

struct EffectRow {
    std::string effect;  // "TE", "NDE", "NIE" or "CDE"
    std::optional<double> m_value;
    EffectSummary summary;
};

std::vector<EffectRow> summarize_effects(const EffectSamples& samples);

/// NDE/NIE/TE (and CDEs when m_values is non-empty) by counterfactual
/// simulation over the posterior draws of the mediator, outcome and
/// total-effect models. Draw j uses its own generator derived from (seed, j),
/// so results do not depend on thread count or scheduling.
EffectSamples estimate_mediation(const PosteriorSurface& mediator, const PosteriorSurface& outcome,
                                 const PosteriorSurface& total, const ContrastSpec& spec, std::uint64_t seed,
                                 const MediationOptions& options = {});
EffectSamples estimate_mediation_serial(const PosteriorSurface& mediator, const PosteriorSurface& outcome,
                                        const PosteriorSurface& total, const ContrastSpec& spec,
                                        std::uint64_t seed, const MediationOptions& options = {});

/// Controlled direct effects only, from the outcome model.
EffectSamples estimate_cde(const PosteriorSurface& outcome, const ContrastSpec& spec, std::uint64_t seed,
                           const MediationOptions& options = {});

/// Untestable no-unmeasured-confounding assumptions behind the effects; echoed into output metadata.
std::vector<std::string> identification_assumptions();

}  // namespace bkmr
