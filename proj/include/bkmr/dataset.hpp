#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bkmr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ColumnNames {
    std::string outcome = "y";
    std::vector<std::string> exposures;
    std::string mediator = "m";
    std::vector<std::string> covariates;
    std::vector<std::string> modifiers;
};

/// The observed sample: outcome y, exposures z (n x L), optional mediator m,
/// linear covariates c (n x P, possibly empty) and continuous effect
/// modifiers (n x Q, possibly empty) that may enter a kernel after the
/// exposures. Validated on construction and immutable afterwards.
class Dataset {
public:
    Dataset(VectorXd y, MatrixXd z, MatrixXd c = {}, std::optional<VectorXd> m = std::nullopt,
            MatrixXd modifiers = {}, ColumnNames names = {});

    Index n() const { return y_.size(); }
    Index num_exposures() const { return z_.cols(); }
    Index num_covariates() const { return c_.cols(); }
    Index num_modifiers() const { return modifiers_.cols(); }
    bool has_mediator() const { return m_.has_value(); }

    const VectorXd& y() const { return y_; }
    const MatrixXd& z() const { return z_; }
    const MatrixXd& c() const { return c_; }
    const VectorXd& m() const;
    const MatrixXd& modifiers() const { return modifiers_; }
    const ColumnNames& names() const { return names_; }

    /// Index of a modifier by name; throws a schema error when absent.
    Index modifier_index(const std::string& name) const;

    /// Column means of c (the default covariate fixing point).
    VectorXd covariate_means() const;

    /// Rows taken in the given order (duplicates allowed, e.g. bootstrap).
    Dataset subset(std::span<const Index> rows) const;

    /// Same data with y replaced, e.g. to fit the mediator model with m as outcome.
    Dataset with_outcome(VectorXd y, std::string name) const;
    Dataset without_mediator() const;

private:
    VectorXd y_;
    MatrixXd z_;
    MatrixXd c_;
    std::optional<VectorXd> m_;
    MatrixXd modifiers_;
    ColumnNames names_;
};

}  // namespace bkmr
