#include "stablesem/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

SimScheme SimScheme::parse(const std::string& name, int n_latents)
{
    static const std::regex pattern(R"(^([COco])_?\{?(\d)-(\d)\}?$)");
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) {
        throw SpecError(fmt::format("unrecognised simulation scheme '{}' (expected e.g. C3-5 or O1-4)", name));
    }
    SimScheme s;
    s.kind = (m[1] == "C" || m[1] == "c") ? IndicatorKind::continuous : IndicatorKind::ordinal;
    s.min_indicators = std::stoi(m[2]);
    s.max_indicators = std::stoi(m[3]);
    s.n_latents = n_latents;
    s.name = fmt::format("{}{}-{}", s.kind == IndicatorKind::continuous ? 'C' : 'O', s.min_indicators,
                         s.max_indicators);
    s.validate();
    return s;
}

void SimScheme::validate() const
{
    if (n_latents < 2) throw SpecError("a simulation scheme needs at least 2 latents");
    if (min_indicators < 1 || max_indicators > 5 || min_indicators > max_indicators) {
        throw SpecError(fmt::format("indicator range {}-{} must satisfy 1 <= min <= max <= 5", min_indicators,
                                    max_indicators));
    }
    if (replicates < 1) throw SpecError("replicates must be positive");
}

namespace {

double signed_uniform(double lo, double hi, Rng& rng)
{
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution sign(0.5);
    const double v = mag(rng);
    return sign(rng) ? v : -v;
}

} // namespace

SimulatedSem random_sem(int n, int min_indicators, int max_indicators, Rng& rng)
{
    if (n < 2) throw SpecError("random_sem needs n >= 2");
    if (min_indicators < 1 || min_indicators > max_indicators) throw SpecError("invalid indicator range");

    SimulatedSem out;
    std::uniform_int_distribution<int> count(min_indicators, max_indicators);
    for (int j = 0; j < n; ++j) {
        const int k = count(rng);
        std::vector<std::pair<std::string, IndicatorType>> ind;
        for (int i = 1; i <= k; ++i) ind.emplace_back(fmt::format("L{}_{}", j + 1, i), IndicatorType::continuous());
        out.measurement.add_latent(fmt::format("L{}", j + 1), ind);
    }
    out.structure.graph = random_dag(n, default_edge_probability(n), rng);
    out.structure.roles = out.measurement.node_roles();
    out.plan = plan_identification(out.measurement, rng);
    enforce_required_relations(out.plan, out.structure.graph);
    auto p = build_pattern(out.measurement, out.plan, out.structure);

    for (Eigen::Index i = 0; i < p.B.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.B.cols(); ++j) {
            if (p.free.B(i, j)) p.B(i, j) = signed_uniform(0.3, 0.9, rng);
        }
        for (Eigen::Index j = 0; j < p.Gamma.cols(); ++j) {
            if (p.free.Gamma(i, j)) p.Gamma(i, j) = signed_uniform(0.3, 0.9, rng);
        }
    }
    p.Phi.diagonal().setOnes();
    p.Psi.diagonal().setOnes();
    for (Eigen::Index r = 0; r < p.LambdaY.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.LambdaY.cols(); ++c) {
            if (p.free.LambdaY(r, c)) p.LambdaY(r, c) = signed_uniform(0.5, 1.5, rng);
        }
    }
    for (Eigen::Index r = 0; r < p.LambdaX.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.LambdaX.cols(); ++c) {
            if (p.free.LambdaX(r, c)) p.LambdaX(r, c) = signed_uniform(0.5, 1.5, rng);
        }
    }

    const Matrix cov = latent_covariance(p);
    const Matrix lambda = loading_matrix(p);
    std::uniform_real_distribution<double> reliability(0.4, 0.8);
    auto error_variance = [&](int indicator) {
        const int node = out.measurement.indicator_node[indicator];
        const double common = lambda(indicator, node) * lambda(indicator, node) * cov(node, node);
        const double r = reliability(rng);
        return common * (1.0 - r) / r;
    };
    for (Eigen::Index r = 0; r < p.ThetaEpsilon.rows(); ++r) {
        if (p.free.ThetaEpsilon(r, r)) p.ThetaEpsilon(r, r) = error_variance(p.layout.y_indicators[r]);
    }
    for (Eigen::Index r = 0; r < p.ThetaDelta.rows(); ++r) {
        if (p.free.ThetaDelta(r, r)) p.ThetaDelta(r, r) = error_variance(p.layout.x_indicators[r]);
    }
    out.params = std::move(p);
    return out;
}

Dataset simulate(const MeasurementSpec& measurement, const SemParameters& params, long n, Rng& rng)
{
    if (n < 1) throw SpecError("simulate: N must be positive");
    const auto& lay = params.layout;
    const auto k = static_cast<Eigen::Index>(measurement.node_count());
    Matrix a = Matrix::Zero(k, k);
    for (std::size_t i = 0; i < lay.endogenous.size(); ++i) {
        for (std::size_t j = 0; j < lay.endogenous.size(); ++j) a(lay.endogenous[i], lay.endogenous[j]) = params.B(i, j);
        for (std::size_t j = 0; j < lay.exogenous.size(); ++j) a(lay.endogenous[i], lay.exogenous[j]) = params.Gamma(i, j);
    }
    Eigen::FullPivLU<Matrix> lu(Matrix::Identity(k, k) - a);
    if (!lu.isInvertible()) throw DegenerateModelError("(I - B) is singular");
    const Matrix t = lu.inverse();

    const auto nx = static_cast<Eigen::Index>(lay.exogenous.size());
    Matrix phi_root = Matrix::Zero(nx, nx);
    if (nx > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(params.Phi);
        if (eig.eigenvalues().minCoeff() < -1e-12) throw NumericDomainError("Phi is not positive semidefinite");
        phi_root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    const Matrix lambda = loading_matrix(params);
    const Vector error_sd = error_variances(params).cwiseMax(0.0).cwiseSqrt();
    const auto p = lambda.rows();

    std::normal_distribution<double> z;
    Matrix out(n, p);
    Vector xi(nx);
    Vector v(k);
    for (long row = 0; row < n; ++row) {
        v.setZero();
        for (Eigen::Index j = 0; j < nx; ++j) xi[j] = z(rng);
        const Vector xi_scaled = phi_root * xi;
        for (Eigen::Index j = 0; j < nx; ++j) v[lay.exogenous[j]] = xi_scaled[j];
        for (std::size_t i = 0; i < lay.endogenous.size(); ++i) {
            v[lay.endogenous[i]] = std::sqrt(std::max(params.Psi(i, i), 0.0)) * z(rng);
        }
        const Vector latent = t * v;
        Vector x = lambda * latent;
        for (Eigen::Index i = 0; i < p; ++i) x[i] += error_sd[i] * z(rng);
        out.row(row) = x.transpose();
    }

    Dataset d;
    for (Eigen::Index i = 0; i < p; ++i) {
        Column c{measurement.indicator_names[i], IndicatorType::continuous(), {}};
        c.values.assign(out.col(i).data(), out.col(i).data() + n);
        d.columns.push_back(std::move(c));
    }
    return d;
}

Discretized discretize(const Dataset& d, Rng& rng)
{
    Discretized out;
    std::uniform_int_distribution<int> categories(2, 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& col : d.columns) {
        if (col.type.is_ordinal()) throw SpecError(fmt::format("column '{}' is already ordinal", col.name));
        const int w = categories(rng);
        std::vector<double> probs(static_cast<std::size_t>(w - 1));
        for (;;) {
            for (auto& q : probs) q = unit(rng);
            std::sort(probs.begin(), probs.end());
            bool ok = probs.front() >= 0.05 && probs.back() <= 0.95;
            for (std::size_t i = 1; i < probs.size(); ++i) ok = ok && probs[i] - probs[i - 1] >= 0.05;
            if (ok) break;
        }
        std::vector<double> sorted = col.values;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> cuts;
        for (double q : probs) {
            // empirical quantile by linear interpolation between order statistics
            const double pos = q * static_cast<double>(sorted.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, sorted.size() - 1);
            cuts.push_back(sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
        }
        Column c{col.name, IndicatorType::ordinal(w), {}};
        c.values.reserve(col.values.size());
        for (double v : col.values) {
            const auto above = std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin();
            c.values.push_back(static_cast<double>(above + 1));
        }
        out.data.columns.push_back(std::move(c));
        out.cut_probabilities.push_back(std::move(probs));
    }
    return out;
}

RocResult roc_from_scores(const std::vector<std::pair<double, bool>>& scored)
{
    RocResult r;
    for (const auto& [score, label] : scored) (label ? r.positives : r.negatives) += 1;
    if (r.positives == 0 || r.negatives == 0) {
        r.defined = false;
        r.auc = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    auto sorted = scored;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    r.points.emplace_back(0.0, 0.0);
    int tp = 0;
    int fp = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double threshold = sorted[i].first;
        for (; i < sorted.size() && sorted[i].first == threshold; ++i) (sorted[i].second ? tp : fp) += 1;
        r.points.emplace_back(static_cast<double>(fp) / r.negatives, static_cast<double>(tp) / r.positives);
    }
    double area = 0.0;
    for (std::size_t i = 1; i < r.points.size(); ++i) {
        const auto [x0, y0] = r.points[i - 1];
        const auto [x1, y1] = r.points[i];
        area += (x1 - x0) * 0.5 * (y0 + y1);
    }
    r.auc = area;
    return r;
}

RocResult roc_auc(const StabilityGraph& stability, const Cpdag& truth, std::optional<int> max_level)
{
    if (stability.nodes() != truth.size()) throw SpecError("roc_auc: node counts differ");
    const int n = truth.size();
    const int cap = max_level.value_or(-1);
    std::vector<std::pair<double, bool>> scored;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (stability.kind() == StabilityKind::edge) {
                if (b < a) continue;
                scored.emplace_back(stability.max_up_to(a, b, cap), has_edge(truth, a, b));
            } else {
                scored.emplace_back(stability.max_up_to(a, b, cap), has_directed_path(truth, a, b));
            }
        }
    }
    return roc_from_scores(scored);
}

} // namespace stablesem
