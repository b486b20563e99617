#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/model.hpp"

namespace stablesem {

enum class FitFlag { non_pd_encountered, boundary_hit, line_search_stalled };

[[nodiscard]] std::string to_string(FitFlag flag);

struct FitResult {
    SemParameters theta_hat;
    double f_ml = 0.0;
    double chi_square = 0.0;
    int t = 0;
    bool converged = false;
    int iterations = 0;
    std::set<FitFlag> condition_flags;
};

struct FitOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;
    double relative_tolerance = 1e-9;
    /// Central differences instead of the closed-form gradient (slower; kept for cross-checks).
    bool finite_difference_gradient = false;
    /// Variances below this are reported as boundary_hit.
    double boundary_variance = 1e-4;
};

/// Free loadings 1.0, structural coefficients 0.1, variances half the matching diagonal of S
/// (floor 0.05), exogenous covariances 0. S is in indicator id order.
[[nodiscard]] SemParameters start_values(const SemParameters& pattern, const Matrix& sample);

/// Maximum likelihood fit of the free entries of `pattern`. Variances are optimised on the log
/// scale. Non-convergence is reported through FitResult::converged, never thrown.
[[nodiscard]] FitResult fit(const SemParameters& pattern, const Matrix& sample, long n_samples,
                            const FitOptions& options = {});

/// Same, started from `start` (its fixed entries must agree with the pattern it came from).
[[nodiscard]] FitResult fit_from(const SemParameters& start, const Matrix& sample, long n_samples,
                                 const FitOptions& options = {});

struct GradientCheck {
    double step_disagreement = 0.0;  // max |g(h=1e-4) - g(h=1e-6)|
    double analytic_deviation = 0.0;  // max |g_analytic - g(h=1e-6)|
    double gradient_norm = 0.0;       // infinity norm of the analytic gradient

    [[nodiscard]] double max_deviation() const { return std::max(step_disagreement, analytic_deviation); }
};

/// Compares gradients of F_ML over the free parameters (log scale for variances) at `theta`.
[[nodiscard]] GradientCheck gradient_check(const SemParameters& theta, const Matrix& sample);

/// Packed free-parameter vector (log scale for variances) and its inverse.
[[nodiscard]] Vector pack_free_parameters(const SemParameters& theta);
[[nodiscard]] SemParameters unpack_free_parameters(const SemParameters& pattern, const Vector& packed);

/// F_ML through the generic (I - A)^-1 reticular form, with optional closed-form gradient with
/// respect to the packed parameters. Returns +inf when Sigma is not positive definite.
[[nodiscard]] double fml_packed(const SemParameters& pattern, const Vector& packed, const Matrix& sample,
                                Vector* gradient);

/// Concurrent fit memo keyed by (structural adjacency, subset index).
class FitCache {
public:
    struct Key {
        std::vector<std::uint8_t> adjacency;
        int subset = 0;
        friend bool operator==(const Key&, const Key&) = default;
    };

    [[nodiscard]] std::shared_ptr<const FitResult> find(const Key& key) const;
    /// Inserts unless present; returns the stored entry either way.
    std::shared_ptr<const FitResult> insert(const Key& key, FitResult value);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t hits() const { return hits_; }

private:
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    mutable std::shared_mutex mutex_;
    std::unordered_map<Key, std::shared_ptr<const FitResult>, KeyHash> entries_;
    mutable std::atomic<std::size_t> hits_{0};
};

} // namespace stablesem
