#include "stablesem/effects.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

FactorScoreModel factor_projection(const Matrix& lambda, const Matrix& theta)
{
    if (theta.rows() != lambda.rows() || theta.cols() != lambda.rows()) {
        throw DegenerateMeasurementError("factor_projection: Theta must be p x p for a p-row Lambda");
    }
    const Matrix total = theta + lambda * lambda.transpose();
    Eigen::FullPivLU<Matrix> lu(total);
    if (!lu.isInvertible()) throw DegenerateMeasurementError("(Theta + Lambda Lambda') is singular");
    FactorScoreModel out;
    out.beta = lu.solve(lambda).transpose();  // total is symmetric
    const auto k = lambda.cols();
    out.cond_var = Matrix::Identity(k, k) - out.beta * lambda;
    out.cond_var = 0.5 * (out.cond_var + out.cond_var.transpose());
    return out;
}

Matrix sample_factor_scores(const FactorScoreModel& model, const Matrix& x_rows, Rng& rng)
{
    if (x_rows.cols() != model.beta.cols()) throw SpecError("sample_factor_scores: row width does not match beta");
    const auto k = model.beta.rows();
    // symmetric square root tolerates a singular (or zero) conditional covariance
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.cond_var);
    const Vector root_values = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix root = eig.eigenvectors() * root_values.asDiagonal() * eig.eigenvectors().transpose();
    const bool deterministic = root_values.maxCoeff() == 0.0;

    Matrix out = x_rows * model.beta.transpose();
    if (deterministic) return out;
    std::normal_distribution<double> z;
    Vector draw(k);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index j = 0; j < k; ++j) draw[j] = z(rng);
        out.row(r) += (root * draw).transpose();
    }
    return out;
}

Matrix standardized_indicators(const Dataset& d)
{
    const auto n = static_cast<Eigen::Index>(d.rows());
    Matrix out(n, static_cast<Eigen::Index>(d.cols()));
    for (std::size_t c = 0; c < d.cols(); ++c) {
        const auto& col = d.columns[c];
        Vector v = Eigen::Map<const Vector>(col.values.data(), n);
        if (col.type.is_ordinal()) {
            const auto th = estimate_thresholds(col.values, col.type.categories);
            std::vector<double> level(static_cast<std::size_t>(col.type.categories));
            for (int k = 1; k <= col.type.categories; ++k) {
                const double a = th.lower(k);
                const double b = th.upper(k);
                const double pdf_a = std::isfinite(a) ? std::exp(-0.5 * a * a) : 0.0;
                const double pdf_b = std::isfinite(b) ? std::exp(-0.5 * b * b) : 0.0;
                const double mass = normal_cdf(b) - normal_cdf(a);
                level[k - 1] = (pdf_a - pdf_b) / std::sqrt(2.0 * M_PI) / mass;
            }
            for (Eigen::Index r = 0; r < n; ++r) v[r] = level[static_cast<std::size_t>(std::lround(v[r])) - 1];
        }
        const double mean = v.mean();
        const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
        if (!(sd > 0.0)) throw DegenerateColumnError(fmt::format("column '{}' is constant", col.name));
        out.col(static_cast<Eigen::Index>(c)) = (v.array() - mean) / sd;
    }
    return out;
}

Matrix structural_scores(const MeasurementSpec& measurement, const SemParameters& fitted, const Dataset& data,
                         Rng& rng)
{
    if (static_cast<int>(data.cols()) != measurement.indicator_count()) {
        throw SpecError("structural_scores: dataset columns do not match the indicators");
    }
    const Matrix lambda = loading_matrix(fitted);
    const Vector theta = error_variances(fitted);
    const Matrix cov = latent_covariance(fitted);
    const Matrix z = standardized_indicators(data);
    const auto rows = static_cast<Eigen::Index>(data.rows());
    Matrix scores(rows, measurement.node_count());

    for (int node = 0; node < measurement.node_count(); ++node) {
        const auto ind = measurement.indicators_of(node);
        if (node >= measurement.latent_count()) {
            const auto& col = data.columns[static_cast<std::size_t>(ind.front())];
            scores.col(node) = Eigen::Map<const Vector>(col.values.data(), rows);
            continue;
        }
        const auto p = static_cast<Eigen::Index>(ind.size());
        const double sd = std::sqrt(std::max(cov(node, node), 0.0));
        Matrix l(p, 1);
        Matrix t = Matrix::Zero(p, p);
        Matrix x(rows, p);
        for (Eigen::Index k = 0; k < p; ++k) {
            const int i = ind[static_cast<std::size_t>(k)];
            const double loading = lambda(i, node) * sd;
            const double var = loading * loading + theta[i];
            if (!(var > 0.0)) throw DegenerateMeasurementError(fmt::format("indicator {} has zero implied variance", i));
            l(k, 0) = loading / std::sqrt(var);
            t(k, k) = theta[i] / var;
            x.col(k) = z.col(i);
        }
        scores.col(node) = sample_factor_scores(factor_projection(l, t), x, rng).col(0);
    }
    return scores;
}

std::vector<double> ida_effects(const Cpdag& c, const Matrix& cov, int x, int y)
{
    const int n = c.size();
    if (x < 0 || y < 0 || x >= n || y >= n || x == y) throw SpecError("ida_effects: invalid node pair");
    std::vector<int> parents;
    std::vector<int> siblings;
    for (int v = 0; v < n; ++v) {
        if (c.is_directed(v, x)) parents.push_back(v);
        if (c.is_undirected(x, v)) siblings.push_back(v);
    }
    if (siblings.size() > 20) throw SpecError("ida_effects: too many undirected neighbours");

    std::vector<double> out;
    const std::uint32_t subsets = 1U << siblings.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        std::vector<int> chosen;
        for (std::size_t k = 0; k < siblings.size(); ++k) {
            if (mask & (1U << k)) chosen.push_back(siblings[k]);
        }
        std::vector<int> z = parents;
        z.insert(z.end(), chosen.begin(), chosen.end());
        // a chosen sibling non-adjacent to another member of pa(x) u S would form a new collider at x
        bool valid = true;
        for (int s : chosen) {
            for (int t : z) {
                if (t != s && !has_edge(c, s, t)) valid = false;
            }
        }
        if (!valid) continue;
        if (std::find(z.begin(), z.end(), y) != z.end()) {
            out.push_back(0.0);
            continue;
        }
        std::vector<int> regressors{x};
        regressors.insert(regressors.end(), z.begin(), z.end());
        const auto k = static_cast<Eigen::Index>(regressors.size());
        Matrix szz(k, k);
        Vector szy(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) szz(a, b) = cov(regressors[a], regressors[b]);
            szy[a] = cov(regressors[a], y);
        }
        const Vector coef = szz.ldlt().solve(szy);
        out.push_back(coef[0]);
    }
    return out;
}

Matrix sample_covariance(const Matrix& rows)
{
    const auto n = rows.rows();
    if (n < 2) throw InputError("sample covariance needs at least two rows");
    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

std::vector<double> ida_effects_from_scores(const Cpdag& c, const Matrix& scores, int x, int y)
{
    return ida_effects(c, sample_covariance(scores), x, y);
}

double total_effect(const std::vector<std::vector<double>>& per_subset, double sigma_x, double sigma_y,
                    bool standardize)
{
    std::vector<double> pool;
    for (const auto& s : per_subset) pool.insert(pool.end(), s.begin(), s.end());
    if (pool.empty()) throw NoEstimateError("no effect estimates to pool");
    std::sort(pool.begin(), pool.end());
    const auto n = pool.size();
    const double median = n % 2 == 1 ? pool[n / 2] : 0.5 * (pool[n / 2 - 1] + pool[n / 2]);
    if (!standardize) return median;
    if (!(sigma_y > 0.0)) throw NumericDomainError("total_effect: sigma_y must be positive");
    return median * sigma_x / sigma_y;
}

} // namespace stablesem
