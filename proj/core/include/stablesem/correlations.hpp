#pragma once

#include <span>
#include <string>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/model.hpp"

namespace stablesem {

struct Column {
    std::string name;
    IndicatorType type;
    std::vector<double> values;  // ordinal columns hold category codes 1..w
};

/// Complete observations, stored column-wise.
struct Dataset {
    std::vector<Column> columns;

    [[nodiscard]] std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().values.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return columns.size(); }
    [[nodiscard]] int find(const std::string& name) const;

    /// Dataset restricted to the given rows, in the given order.
    [[nodiscard]] Dataset select_rows(std::span<const std::size_t> rows) const;

    /// Throws InputError on NaN cells, ragged columns, or ordinal codes outside 1..w.
    void validate() const;
};

/// Strictly increasing cut points tau_1 < ... < tau_{w-1}; tau_0 = -inf and tau_w = +inf are implicit.
struct ThresholdVector {
    std::vector<double> tau;

    [[nodiscard]] int categories() const noexcept { return static_cast<int>(tau.size()) + 1; }
    /// Lower/upper bound of category k (1-based), with infinities at the ends.
    [[nodiscard]] double lower(int k) const;
    [[nodiscard]] double upper(int k) const;
};

/// Correlation estimate; at_boundary is set when the estimate was clamped to +-(1 - 1e-6).
struct CorrelationEstimate {
    double rho = 0.0;
    bool at_boundary = false;
};

inline constexpr double kRhoBound = 1.0 - 1e-6;

[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_quantile(double p);

/// P(X < h, Y < k) for a standard bivariate normal with correlation rho (infinite limits allowed).
[[nodiscard]] double bivariate_normal_cdf(double h, double k, double rho);

/// P(a1 <= X < b1, a2 <= Y < b2).
[[nodiscard]] double bivariate_normal_rectangle(double a1, double b1, double a2, double b2, double rho);

[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);

/// tau_j = Phi^-1(cumulative proportion of categories <= j); empty categories count 0.5.
[[nodiscard]] ThresholdVector estimate_thresholds(std::span<const double> codes, int categories);

/// Two-step estimate: thresholds from the marginals, then the 1-D likelihood maximised in rho.
[[nodiscard]] CorrelationEstimate polychoric(std::span<const double> x, int x_categories,
                                             std::span<const double> y, int y_categories);

[[nodiscard]] CorrelationEstimate polyserial(std::span<const double> continuous, std::span<const double> ordinal,
                                             int categories);

enum class MatrixKind { correlation, covariance };

struct CorrelationMatrixResult {
    Matrix S;
    MatrixKind kind = MatrixKind::correlation;
    bool repaired = false;             // eigenvalue clipping was applied
    std::vector<std::pair<int, int>> boundary_pairs;  // estimates clamped at +-(1 - 1e-6)
    double min_eigenvalue = 0.0;
};

struct CorrelationOptions {
    /// Only honoured when every column is continuous.
    bool prefer_covariance = false;
    double eigenvalue_floor = 1e-6;
};

/// Pairwise dispatch: Pearson, polychoric, or polyserial by column types.
[[nodiscard]] CorrelationMatrixResult mixed_correlation_matrix(const Dataset& d, const CorrelationOptions& options = {});

/// Eigenvalue clipping followed by rescaling to unit diagonal, repeated until the floor holds.
[[nodiscard]] Matrix nearest_correlation_pd(const Matrix& a, double floor);

} // namespace stablesem
