#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/correlations.hpp"
#include "stablesem/model.hpp"
#include "stablesem/stability.hpp"

namespace stablesem {

struct SimScheme {
    std::string name = "C3-5";
    int n_latents = 4;
    int min_indicators = 3;
    int max_indicators = 5;
    IndicatorKind kind = IndicatorKind::continuous;
    std::vector<long> sample_sizes{400, 1000, 2000};
    int replicates = 20;

    /// "C3-5", "O1-4", ...: C continuous, O ordinal, then the indicator range.
    static SimScheme parse(const std::string& name, int n_latents = 4);
    /// Throws SpecError unless 1 <= min <= max <= 5 and n_latents >= 2.
    void validate() const;
};

struct SimulatedSem {
    MeasurementSpec measurement;
    StructuralSpec structure;
    IdentificationPlan plan;
    SemParameters params;
};

/// Random structure with edge probability 2 / (n - 1); loadings +-U[0.5, 1.5] (reference loadings 1),
/// structural coefficients +-U[0.3, 0.9], unit exogenous and disturbance variances, and error
/// variances giving each indicator a reliability in U[0.4, 0.8].
[[nodiscard]] SimulatedSem random_sem(int n, int min_indicators, int max_indicators, Rng& rng);

/// N rows drawn by propagating Gaussian exogenous terms, disturbances, and errors through the model.
[[nodiscard]] Dataset simulate(const MeasurementSpec& measurement, const SemParameters& params, long n, Rng& rng);

struct Discretized {
    Dataset data;
    /// Cumulative probabilities of the cut points, per column.
    std::vector<std::vector<double>> cut_probabilities;
};

/// Each column cut into 2..7 categories at empirical quantiles of sorted uniform probabilities,
/// every bin holding at least 5% of the mass.
[[nodiscard]] Discretized discretize(const Dataset& d, Rng& rng);

struct RocResult {
    std::vector<std::pair<double, double>> points;  // (FPR, TPR), from (0, 0) to (1, 1)
    double auc = 0.0;
    int positives = 0;
    int negatives = 0;
    /// False when the truth has no positive or no negative pairs; auc is NaN then.
    bool defined = true;
};

/// Per-pair score is the max stability over levels <= max_level (every level when unset).
[[nodiscard]] RocResult roc_auc(const StabilityGraph& stability, const Cpdag& truth,
                                std::optional<int> max_level = std::nullopt);

/// Trapezoidal AUC from (score, label) pairs; ties between classes count one half.
[[nodiscard]] RocResult roc_from_scores(const std::vector<std::pair<double, bool>>& scored);

} // namespace stablesem
