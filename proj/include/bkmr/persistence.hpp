#pragma once

#include "bkmr/sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>

namespace bkmr {

using Json = nlohmann::json;

/// One row per retained draw: draw, coefficients, sigma2, lambda, then rho or
/// r_<name> (and delta_<name> under variable selection).
void write_trace_csv(const std::filesystem::path& path, const PosteriorDraws& draws);

Json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const Json& j);

/// Draws, model spec and the training data, enough to predict after reloading.
Json model_to_json(const PosteriorDraws& draws);
std::shared_ptr<const PosteriorDraws> model_from_json(const Json& j);

/// Acceptance rates, final step sizes, warnings and inclusion probabilities.
Json diagnostics_to_json(const PosteriorDraws& draws);

/// Pretty-printed with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const PosteriorDraws& draws);
std::shared_ptr<const PosteriorDraws> load_model(const std::filesystem::path& path);

}  // namespace bkmr
