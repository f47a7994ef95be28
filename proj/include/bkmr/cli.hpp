#pragma once

#include "bkmr/csv.hpp"
#include "bkmr/dataset.hpp"
#include "bkmr/persistence.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bkmr {

inline constexpr const char* kVersion = "0.1.0";

/// log, then centering by the (post-log) mean, then scaling by the sample sd.
struct ColumnTransform {
    std::string column;
    bool log = false;
    bool center = false;
    bool scale = false;
    double mean = 0.0;
    double sd = 1.0;

    double apply(double raw) const;
    double invert(double value) const;
    Json to_json() const;
};

/// Which CSV column plays which part. Roles must be disjoint.
struct ColumnRoles {
    std::string outcome;
    std::vector<std::string> exposures;
    std::string mediator;  // empty: no mediator
    std::vector<std::string> covariates;
    std::vector<std::string> modifiers;

    void validate(const CsvTable& table) const;
};

/// Column lists; the token "exposures" stands for every exposure column.
struct TransformFlags {
    std::vector<std::string> log;
    std::vector<std::string> center;
    std::vector<std::string> scale;
};

struct LoadedData {
    std::shared_ptr<const Dataset> data;
    std::vector<ColumnTransform> transforms;  // one per role column, in role order

    const ColumnTransform& transform(const std::string& column) const;
};

LoadedData load_dataset(const CsvTable& table, const ColumnRoles& roles, const TransformFlags& flags);

/// Exposure contrast given as raw values (transformed like the data) or as
/// quantiles of the transformed exposures; mediator levels likewise.
struct ContrastInput {
    std::vector<double> z_star_raw;
    std::vector<double> z_raw;
    double q_star = 0.25;
    double q = 0.75;
    std::vector<double> m_raw;
    std::vector<double> m_quantiles;
    std::map<std::string, double> modifiers_raw;  // default: modifier mean
};

struct ResolvedContrast {
    VectorXd z_star;
    VectorXd z;
    std::vector<double> m_values;      // model scale
    std::vector<double> m_values_raw;  // input scale
    std::map<std::string, double> modifier_values;
    Json to_json() const;
};

ResolvedContrast resolve_contrast(const LoadedData& loaded, const ContrastInput& input);

struct ReportCounts {
    std::size_t merged_rows = 0;
    std::size_t effects_ci_rows = 0;
    std::size_t effects_rmse_rows = 0;
    std::size_t cde_ci_rows = 0;
    std::size_t cde_rmse_rows = 0;
};

/// Merges simulate results.csv files and writes one CSV per figure:
/// results_merged.csv, fig_effects_ci.csv, fig_effects_rmse.csv,
/// fig_cde_ci.csv and fig_cde_rmse.csv.
ReportCounts write_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir);

/// Runs the command line; returns the process exit status (0, or an
/// ErrorCode value, or 1 for unexpected failures).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bkmr
