#include "bkmr/dataset.hpp"

#include "bkmr/errors.hpp"

#include <algorithm>

namespace bkmr {

namespace {

void normalize_empty(MatrixXd& x, Index n) {
    if (x.size() == 0) x.resize(n, 0);
}

void fill_names(std::vector<std::string>& names, Index count, const std::string& prefix) {
    if (names.empty()) {
        for (Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i + 1));
    }
    if (static_cast<Index>(names.size()) != count) {
        throw Error(ErrorCode::input, "expected " + std::to_string(count) + " names for " + prefix +
                                          " columns, got " + std::to_string(names.size()));
    }
}

}  // namespace

Dataset::Dataset(VectorXd y, MatrixXd z, MatrixXd c, std::optional<VectorXd> m, MatrixXd modifiers,
                 ColumnNames names)
    : y_(std::move(y)), z_(std::move(z)), c_(std::move(c)), m_(std::move(m)),
      modifiers_(std::move(modifiers)), names_(std::move(names)) {
    const Index n = y_.size();
    if (n < 2) throw Error(ErrorCode::input, "dataset needs at least 2 observations");
    if (z_.cols() < 1) throw Error(ErrorCode::input, "dataset needs at least one exposure");
    if (z_.rows() != n) throw Error(ErrorCode::input, "exposure matrix row count differs from outcome length");
    normalize_empty(c_, n);
    normalize_empty(modifiers_, n);
    if (c_.rows() != n) throw Error(ErrorCode::input, "covariate matrix row count differs from outcome length");
    if (modifiers_.rows() != n) throw Error(ErrorCode::input, "modifier matrix row count differs from outcome length");
    if (m_ && m_->size() != n) throw Error(ErrorCode::input, "mediator length differs from outcome length");

    if (!y_.allFinite() || !z_.allFinite() || !c_.allFinite() || !modifiers_.allFinite() ||
        (m_ && !m_->allFinite())) {
        throw Error(ErrorCode::input, "dataset contains non-finite values");
    }
    fill_names(names_.exposures, z_.cols(), "z");
    fill_names(names_.covariates, c_.cols(), "c");
    fill_names(names_.modifiers, modifiers_.cols(), "mod");
}

const VectorXd& Dataset::m() const {
    if (!m_) throw Error(ErrorCode::schema, "dataset has no mediator column");
    return *m_;
}

Index Dataset::modifier_index(const std::string& name) const {
    auto it = std::find(names_.modifiers.begin(), names_.modifiers.end(), name);
    if (it == names_.modifiers.end()) throw Error(ErrorCode::schema, "unknown modifier column '" + name + "'");
    return static_cast<Index>(it - names_.modifiers.begin());
}

VectorXd Dataset::covariate_means() const {
    if (c_.cols() == 0) return VectorXd(0);
    return c_.colwise().mean().transpose();
}

Dataset Dataset::subset(std::span<const Index> rows) const {
    const Index k = static_cast<Index>(rows.size());
    VectorXd y(k);
    MatrixXd z(k, z_.cols()), c(k, c_.cols()), mod(k, modifiers_.cols());
    std::optional<VectorXd> m;
    if (m_) m = VectorXd(k);
    for (Index i = 0; i < k; ++i) {
        const Index r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || r >= n()) throw Error(ErrorCode::input, "subset row out of range");
        y(i) = y_(r);
        z.row(i) = z_.row(r);
        c.row(i) = c_.row(r);
        mod.row(i) = modifiers_.row(r);
        if (m_) (*m)(i) = (*m_)(r);
    }
    return Dataset(std::move(y), std::move(z), std::move(c), std::move(m), std::move(mod), names_);
}

Dataset Dataset::with_outcome(VectorXd y, std::string name) const {
    ColumnNames names = names_;
    names.outcome = std::move(name);
    return Dataset(std::move(y), z_, c_, m_, modifiers_, std::move(names));
}

Dataset Dataset::without_mediator() const {
    return Dataset(y_, z_, c_, std::nullopt, modifiers_, names_);
}

}  // namespace bkmr
