#pragma once

#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/correlations.hpp"
#include "stablesem/graphs.hpp"
#include "stablesem/model.hpp"

namespace stablesem {

struct FactorScoreModel {
    Matrix beta;      // latents x indicators
    Matrix cond_var;  // latents x latents
};

/// beta = Lambda' (Theta + Lambda Lambda')^-1, cond_var = I - beta Lambda.
/// Throws DegenerateMeasurementError when (Theta + Lambda Lambda') is singular.
[[nodiscard]] FactorScoreModel factor_projection(const Matrix& lambda, const Matrix& theta);

/// One draw per row of `x_rows` (rows x indicators) from N(beta x, cond_var).
[[nodiscard]] Matrix sample_factor_scores(const FactorScoreModel& model, const Matrix& x_rows, Rng& rng);

/// Standardized indicator matrix (rows x indicators, id order). Ordinal codes become the mean of
/// the standard normal over their threshold interval before standardizing.
[[nodiscard]] Matrix standardized_indicators(const Dataset& d);

/// Scores for every structural node (rows x nodes). Latents are projected one at a time from
/// their own indicators with unit-variance loadings; covariates keep their raw column values.
/// `data` columns are in indicator id order.
[[nodiscard]] Matrix structural_scores(const MeasurementSpec& measurement, const SemParameters& fitted,
                                       const Dataset& data, Rng& rng);

/// Possible effects of x on y: one regression coefficient per locally valid parent set of x.
/// `cov` is the covariance of the structural nodes.
[[nodiscard]] std::vector<double> ida_effects(const Cpdag& c, const Matrix& cov, int x, int y);

/// Same, from score rows (rows x nodes).
[[nodiscard]] std::vector<double> ida_effects_from_scores(const Cpdag& c, const Matrix& scores, int x, int y);

/// Median of the pooled estimates, times sigma_x / sigma_y when `standardize`.
/// Throws NoEstimateError when the pool is empty.
[[nodiscard]] double total_effect(const std::vector<std::vector<double>>& per_subset, double sigma_x, double sigma_y,
                                  bool standardize = true);

[[nodiscard]] Matrix sample_covariance(const Matrix& rows);

} // namespace stablesem
