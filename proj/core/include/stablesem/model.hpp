#pragma once

#include <string>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/graphs.hpp"

namespace stablesem {

enum class IndicatorKind { continuous, ordinal };

struct IndicatorType {
    IndicatorKind kind = IndicatorKind::continuous;
    int categories = 0;  // ordinal only, 2..7

    static IndicatorType continuous() { return {}; }
    static IndicatorType ordinal(int w) { return {IndicatorKind::ordinal, w}; }
    [[nodiscard]] bool is_ordinal() const noexcept { return kind == IndicatorKind::ordinal; }

    friend bool operator==(const IndicatorType&, const IndicatorType&) = default;
};

enum class NodeRole { latent, covariate };

/// Pure measurement model. Structural nodes are the latents followed by the covariates;
/// each covariate is its own single indicator with loading 1 and zero error.
struct MeasurementSpec {
    std::vector<std::string> latent_names;
    std::vector<std::string> covariate_names;
    std::vector<std::string> indicator_names;
    std::vector<int> indicator_node;  // structural node of each indicator
    std::vector<IndicatorType> indicator_types;

    [[nodiscard]] int latent_count() const noexcept { return static_cast<int>(latent_names.size()); }
    [[nodiscard]] int node_count() const noexcept {
        return static_cast<int>(latent_names.size() + covariate_names.size());
    }
    [[nodiscard]] int indicator_count() const noexcept { return static_cast<int>(indicator_names.size()); }

    [[nodiscard]] std::vector<std::string> node_names() const;
    [[nodiscard]] std::vector<NodeRole> node_roles() const;
    [[nodiscard]] std::vector<int> indicators_of(int node) const;

    void add_latent(const std::string& name, const std::vector<std::pair<std::string, IndicatorType>>& indicators);
    void add_covariate(const std::string& name, IndicatorType type = IndicatorType::continuous());

    /// Throws SpecError if an invariant is violated.
    void validate() const;
};

struct StructuralSpec {
    Dag graph;
    std::vector<NodeRole> roles;

    [[nodiscard]] int node_count() const noexcept { return graph.size(); }
};

/// Constraints from domain knowledge, over structural node indices.
struct PriorKnowledge {
    std::vector<Edge> forbidden;
    std::vector<int> exogenous_only;

    [[nodiscard]] bool allows(int from, int to) const;
    /// Throws SpecError when an index is outside [0, n).
    void validate(int n) const;
};

/// Exogenous (xi) / endogenous (eta) split and the y-then-x indicator layout.
struct SemLayout {
    std::vector<int> endogenous;    // structural node ids, eta order
    std::vector<int> exogenous;     // structural node ids, xi order
    std::vector<int> y_indicators;  // indicator ids loading on endogenous nodes
    std::vector<int> x_indicators;  // indicator ids loading on exogenous nodes

    /// Indicator ids in Sigma's block order (y block, then x block).
    [[nodiscard]] std::vector<int> block_order() const;
};

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SemParameters {
    SemLayout layout;
    Matrix B;             // m x m, B(i, j): eta_j -> eta_i
    Matrix Gamma;         // m x n, Gamma(i, j): xi_j -> eta_i
    Matrix Phi;           // n x n
    Matrix Psi;           // m x m, diagonal
    Matrix LambdaX;       // r x n
    Matrix LambdaY;       // q x m
    Matrix ThetaDelta;    // r x r, diagonal
    Matrix ThetaEpsilon;  // q x q, diagonal

    struct FreeMask {
        Mask B, Gamma, Phi, Psi, LambdaX, LambdaY, ThetaDelta, ThetaEpsilon;
    } free;
};

struct PatternOptions {
    /// Free off-diagonal entries of Phi. Off by default: structures are compared through
    /// their directed edges, and freely correlated exogenous latents would make the empty
    /// structure as good a fit as any other.
    bool free_exogenous_covariances = false;
};

/// How each structural node is scaled, plus the relation added for two-indicator latents.
struct IdentificationPlan {
    std::vector<int> reference_indicator;      // per structural node
    std::vector<int> zero_error_indicators;    // indicator ids with error fixed at 0
    std::vector<int> needs_relation;           // two-indicator latents
    std::vector<Edge> required_relations;      // chosen relation per entry of needs_relation
    std::vector<std::string> log;
};

struct IdentifiedModel {
    IdentificationPlan plan;
    StructuralSpec structure;  // possibly augmented
    SemParameters pattern;
};

/// Sigma(theta) in block order (SemLayout::block_order), assembled from the four blocks.
/// Throws DegenerateModelError when (I - B) is singular.
[[nodiscard]] Matrix implied_covariance(const SemParameters& params);

/// Reorders a block-ordered matrix into indicator id order.
[[nodiscard]] Matrix to_indicator_order(const SemLayout& layout, const Matrix& block_ordered);

/// Covariance of the structural nodes (latents and covariates) in node id order.
[[nodiscard]] Matrix latent_covariance(const SemParameters& params);

/// Loadings as an indicator x node matrix, both in id order.
[[nodiscard]] Matrix loading_matrix(const SemParameters& params);

/// Error variances in indicator id order.
[[nodiscard]] Vector error_variances(const SemParameters& params);

/// log|Sigma| + tr(S Sigma^-1) - log|S| - p. Throws NumericDomainError on non-PD input.
[[nodiscard]] double f_ml(const Matrix& sigma, const Matrix& sample);

/// Same, with S in indicator id order.
[[nodiscard]] double f_ml(const SemParameters& params, const Matrix& sample);

[[nodiscard]] double chi_square(double f_ml_value, long n_samples);

/// Number of directed structural relations.
[[nodiscard]] int complexity(const StructuralSpec& spec);

/// chi^2 + t ln N.
[[nodiscard]] double bic(double chi_square, int free_parameters, long n_samples);

[[nodiscard]] std::string bic_formula();

/// Identification plan only (reference loadings, zero errors, relation for two-indicator latents).
[[nodiscard]] IdentificationPlan plan_identification(const MeasurementSpec& measurement, Rng& rng);

/// Adds the planned relation for every two-indicator latent that has none. Relations that
/// would close a cycle are tried in the reverse direction; forbidden ones are skipped.
void enforce_required_relations(const IdentificationPlan& plan, Dag& g, const PriorKnowledge* prior = nullptr);

/// Free/fixed parameter pattern for one structure; free entries are zero, fixed loadings 1.
[[nodiscard]] SemParameters build_pattern(const MeasurementSpec& measurement, const IdentificationPlan& plan,
                                          const StructuralSpec& structure, const PatternOptions& options = {});

[[nodiscard]] IdentifiedModel apply_identification(const MeasurementSpec& measurement,
                                                   const StructuralSpec& structural, Rng& rng,
                                                   const PatternOptions& options = {});

/// Symmetric Phi counts its lower triangle only.
[[nodiscard]] int free_parameter_count(const SemParameters& pattern);

[[nodiscard]] SemLayout make_layout(const MeasurementSpec& measurement, const Dag& structure);

} // namespace stablesem
