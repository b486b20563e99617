#include "stablesem/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

std::vector<std::string> MeasurementSpec::node_names() const
{
    std::vector<std::string> names = latent_names;
    names.insert(names.end(), covariate_names.begin(), covariate_names.end());
    return names;
}

std::vector<NodeRole> MeasurementSpec::node_roles() const
{
    std::vector<NodeRole> roles(latent_names.size(), NodeRole::latent);
    roles.resize(node_count(), NodeRole::covariate);
    return roles;
}

std::vector<int> MeasurementSpec::indicators_of(int node) const
{
    std::vector<int> out;
    for (int i = 0; i < indicator_count(); ++i) {
        if (indicator_node[i] == node) out.push_back(i);
    }
    return out;
}

void MeasurementSpec::add_latent(const std::string& name,
                                 const std::vector<std::pair<std::string, IndicatorType>>& indicators)
{
    if (!covariate_names.empty()) {
        throw SpecError("latents must be declared before covariates");
    }
    const int node = latent_count();
    latent_names.push_back(name);
    for (const auto& [indicator, type] : indicators) {
        indicator_names.push_back(indicator);
        indicator_node.push_back(node);
        indicator_types.push_back(type);
    }
}

void MeasurementSpec::add_covariate(const std::string& name, IndicatorType type)
{
    const int node = node_count();
    covariate_names.push_back(name);
    indicator_names.push_back(name);
    indicator_node.push_back(node);
    indicator_types.push_back(type);
}

void MeasurementSpec::validate() const
{
    const auto n_ind = indicator_names.size();
    if (indicator_node.size() != n_ind || indicator_types.size() != n_ind) {
        throw SpecError("indicator name, node and type lists differ in length");
    }
    std::set<std::string> seen;
    for (const auto& name : node_names()) {
        if (name.empty()) throw SpecError("empty node name");
        if (!seen.insert(name).second) throw SpecError(fmt::format("duplicate node name '{}'", name));
    }
    std::set<std::string> seen_ind;
    for (int i = 0; i < indicator_count(); ++i) {
        const int node = indicator_node[i];
        if (node < 0 || node >= node_count()) {
            throw SpecError(fmt::format("indicator '{}' maps to no node", indicator_names[i]));
        }
        // covariates double as their own indicator, so only latent indicators must be unique names
        if (node < latent_count() && (seen.contains(indicator_names[i]) || !seen_ind.insert(indicator_names[i]).second)) {
            throw SpecError(fmt::format("duplicate indicator name '{}'", indicator_names[i]));
        }
        const auto& type = indicator_types[i];
        if (type.is_ordinal() && (type.categories < 2 || type.categories > 7)) {
            throw SpecError(fmt::format("indicator '{}' declares {} categories; expected 2..7", indicator_names[i],
                                        type.categories));
        }
    }
    for (int node = 0; node < node_count(); ++node) {
        const auto count = indicators_of(node).size();
        if (node < latent_count() && count == 0) {
            throw SpecError(fmt::format("latent '{}' has no indicators", latent_names[node]));
        }
        if (node >= latent_count() && count != 1) {
            throw SpecError(fmt::format("covariate '{}' must be its own single indicator",
                                        covariate_names[node - latent_count()]));
        }
    }
}

bool PriorKnowledge::allows(int from, int to) const
{
    if (std::find(exogenous_only.begin(), exogenous_only.end(), to) != exogenous_only.end()) return false;
    return std::find(forbidden.begin(), forbidden.end(), Edge{from, to}) == forbidden.end();
}

void PriorKnowledge::validate(int n) const
{
    auto check = [n](int v) {
        if (v < 0 || v >= n) throw SpecError(fmt::format("prior knowledge refers to unknown node {}", v));
    };
    for (const auto& [from, to] : forbidden) {
        check(from);
        check(to);
    }
    for (int v : exogenous_only) check(v);
}

std::vector<int> SemLayout::block_order() const
{
    std::vector<int> order = y_indicators;
    order.insert(order.end(), x_indicators.begin(), x_indicators.end());
    return order;
}

SemLayout make_layout(const MeasurementSpec& measurement, const Dag& structure)
{
    SemLayout layout;
    std::vector<int> position(measurement.node_count(), -1);
    std::vector<bool> is_endogenous(measurement.node_count(), false);
    for (int v = 0; v < measurement.node_count(); ++v) {
        is_endogenous[v] = !structure.parents(v).empty();
        auto& group = is_endogenous[v] ? layout.endogenous : layout.exogenous;
        position[v] = static_cast<int>(group.size());
        group.push_back(v);
    }
    for (int i = 0; i < measurement.indicator_count(); ++i) {
        (is_endogenous[measurement.indicator_node[i]] ? layout.y_indicators : layout.x_indicators).push_back(i);
    }
    return layout;
}

Matrix implied_covariance(const SemParameters& p)
{
    const auto m = p.B.rows();
    const Matrix i_minus_b = Matrix::Identity(m, m) - p.B;
    Matrix t = Matrix::Zero(m, m);
    if (m > 0) {
        Eigen::FullPivLU<Matrix> lu(i_minus_b);
        if (!lu.isInvertible()) throw DegenerateModelError("(I - B) is singular");
        t = lu.inverse();
    }
    const Matrix lambda_y_t = p.LambdaY * t;
    const Matrix syy =
        lambda_y_t * (p.Gamma * p.Phi * p.Gamma.transpose() + p.Psi) * lambda_y_t.transpose() + p.ThetaEpsilon;
    const Matrix sxy = p.LambdaX * p.Phi * p.Gamma.transpose() * lambda_y_t.transpose();
    const Matrix sxx = p.LambdaX * p.Phi * p.LambdaX.transpose() + p.ThetaDelta;

    const auto q = syy.rows();
    const auto r = sxx.rows();
    Matrix sigma(q + r, q + r);
    sigma.topLeftCorner(q, q) = syy;
    sigma.bottomLeftCorner(r, q) = sxy;
    sigma.topRightCorner(q, r) = sxy.transpose();
    sigma.bottomRightCorner(r, r) = sxx;
    return 0.5 * (sigma + sigma.transpose());
}

Matrix to_indicator_order(const SemLayout& layout, const Matrix& block_ordered)
{
    const auto order = layout.block_order();
    const auto p = static_cast<Eigen::Index>(order.size());
    Matrix out(p, p);
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) out(order[a], order[b]) = block_ordered(a, b);
    }
    return out;
}

Matrix latent_covariance(const SemParameters& p)
{
    const auto& lay = p.layout;
    const auto m = p.B.rows();
    Matrix t = Matrix::Zero(m, m);
    if (m > 0) {
        Eigen::FullPivLU<Matrix> lu(Matrix::Identity(m, m) - p.B);
        if (!lu.isInvertible()) throw DegenerateModelError("(I - B) is singular");
        t = lu.inverse();
    }
    const Matrix eta = t * (p.Gamma * p.Phi * p.Gamma.transpose() + p.Psi) * t.transpose();
    const Matrix eta_xi = t * p.Gamma * p.Phi;
    const auto k = static_cast<Eigen::Index>(lay.endogenous.size() + lay.exogenous.size());
    Matrix out(k, k);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) out(lay.endogenous[a], lay.endogenous[b]) = eta(a, b);
        for (Eigen::Index b = 0; b < p.Phi.rows(); ++b) {
            out(lay.endogenous[a], lay.exogenous[b]) = eta_xi(a, b);
            out(lay.exogenous[b], lay.endogenous[a]) = eta_xi(a, b);
        }
    }
    for (Eigen::Index a = 0; a < p.Phi.rows(); ++a) {
        for (Eigen::Index b = 0; b < p.Phi.rows(); ++b) out(lay.exogenous[a], lay.exogenous[b]) = p.Phi(a, b);
    }
    return out;
}

Matrix loading_matrix(const SemParameters& p)
{
    const auto& lay = p.layout;
    const auto k = static_cast<Eigen::Index>(lay.endogenous.size() + lay.exogenous.size());
    const auto n_ind = static_cast<Eigen::Index>(lay.y_indicators.size() + lay.x_indicators.size());
    Matrix out = Matrix::Zero(n_ind, k);
    for (Eigen::Index r = 0; r < p.LambdaY.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.LambdaY.cols(); ++c) out(lay.y_indicators[r], lay.endogenous[c]) = p.LambdaY(r, c);
    }
    for (Eigen::Index r = 0; r < p.LambdaX.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.LambdaX.cols(); ++c) out(lay.x_indicators[r], lay.exogenous[c]) = p.LambdaX(r, c);
    }
    return out;
}

Vector error_variances(const SemParameters& p)
{
    const auto& lay = p.layout;
    Vector out(static_cast<Eigen::Index>(lay.y_indicators.size() + lay.x_indicators.size()));
    for (Eigen::Index r = 0; r < p.ThetaEpsilon.rows(); ++r) out[lay.y_indicators[r]] = p.ThetaEpsilon(r, r);
    for (Eigen::Index r = 0; r < p.ThetaDelta.rows(); ++r) out[lay.x_indicators[r]] = p.ThetaDelta(r, r);
    return out;
}

double f_ml(const Matrix& sigma, const Matrix& sample)
{
    if (sigma.rows() != sample.rows() || sigma.cols() != sample.cols() || sigma.rows() != sigma.cols()) {
        throw NumericDomainError("f_ml: dimension mismatch between Sigma and S");
    }
    Eigen::LLT<Matrix> sigma_llt(sigma);
    if (sigma_llt.info() != Eigen::Success) throw NumericDomainError("f_ml: Sigma(theta) is not positive definite");
    Eigen::LLT<Matrix> sample_llt(sample);
    if (sample_llt.info() != Eigen::Success) throw NumericDomainError("f_ml: S is not positive definite");

    const double logdet_sigma = 2.0 * sigma_llt.matrixLLT().diagonal().array().log().sum();
    const double logdet_sample = 2.0 * sample_llt.matrixLLT().diagonal().array().log().sum();
    const double trace = sigma_llt.solve(sample).trace();
    const double value = logdet_sigma + trace - logdet_sample - static_cast<double>(sigma.rows());
    // rounding can leave a tiny negative at a perfect fit
    return std::max(0.0, value);
}

double f_ml(const SemParameters& params, const Matrix& sample)
{
    return f_ml(to_indicator_order(params.layout, implied_covariance(params)), sample);
}

double chi_square(double f_ml_value, long n_samples)
{
    return static_cast<double>(n_samples - 1) * f_ml_value;
}

int complexity(const StructuralSpec& spec)
{
    return static_cast<int>(spec.graph.edge_count());
}

double bic(double chi_square, int free_parameters, long n_samples)
{
    return chi_square + free_parameters * std::log(static_cast<double>(n_samples));
}

std::string bic_formula()
{
    return "chi_square + t * ln(N)";
}

IdentificationPlan plan_identification(const MeasurementSpec& measurement, Rng& rng)
{
    measurement.validate();
    if (measurement.latent_count() == 0) throw SpecError("model has no latent variables");

    IdentificationPlan plan;
    plan.reference_indicator.assign(measurement.node_count(), -1);
    const auto names = measurement.node_names();
    for (int node = 0; node < measurement.node_count(); ++node) {
        const auto indicators = measurement.indicators_of(node);
        plan.reference_indicator[node] = indicators.front();
        if (indicators.size() == 1) {
            plan.zero_error_indicators.push_back(indicators.front());
            continue;
        }
        if (indicators.size() != 2) continue;

        std::vector<int> candidates;
        for (int other = 0; other < measurement.latent_count(); ++other) {
            if (other != node) candidates.push_back(other);
        }
        if (candidates.empty()) {
            for (int other = measurement.latent_count(); other < measurement.node_count(); ++other) {
                candidates.push_back(other);
            }
        }
        if (candidates.empty()) {
            plan.log.push_back(fmt::format("latent '{}' has two indicators and no other node to relate to",
                                           names[node]));
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const int other = candidates[pick(rng)];
        std::bernoulli_distribution coin(0.5);
        const bool is_cause = coin(rng);
        const Edge relation = is_cause ? Edge{node, other} : Edge{other, node};
        plan.needs_relation.push_back(node);
        plan.required_relations.push_back(relation);
        plan.log.push_back(fmt::format("latent '{}' has two indicators; relation {} -> {}", names[node],
                                       names[relation.first], names[relation.second]));
    }
    return plan;
}

void enforce_required_relations(const IdentificationPlan& plan, Dag& g, const PriorKnowledge* prior)
{
    for (std::size_t k = 0; k < plan.needs_relation.size(); ++k) {
        const int node = plan.needs_relation[k];
        bool related = false;
        for (int v = 0; v < g.size() && !related; ++v) related = g.adjacent(node, v);
        if (related) continue;
        const auto [from, to] = plan.required_relations[k];
        const bool forward_ok = prior == nullptr || prior->allows(from, to);
        const bool reverse_ok = prior == nullptr || prior->allows(to, from);
        if (forward_ok && g.try_add(from, to)) continue;
        if (reverse_ok) g.try_add(to, from);
    }
}

SemParameters build_pattern(const MeasurementSpec& measurement, const IdentificationPlan& plan,
                            const StructuralSpec& structure, const PatternOptions& options)
{
    SemParameters p;
    p.layout = make_layout(measurement, structure.graph);
    const auto& lay = p.layout;
    const auto m = static_cast<Eigen::Index>(lay.endogenous.size());
    const auto n = static_cast<Eigen::Index>(lay.exogenous.size());
    const auto q = static_cast<Eigen::Index>(lay.y_indicators.size());
    const auto r = static_cast<Eigen::Index>(lay.x_indicators.size());

    p.B = Matrix::Zero(m, m);
    p.Gamma = Matrix::Zero(m, n);
    p.Phi = Matrix::Zero(n, n);
    p.Psi = Matrix::Zero(m, m);
    p.LambdaX = Matrix::Zero(r, n);
    p.LambdaY = Matrix::Zero(q, m);
    p.ThetaDelta = Matrix::Zero(r, r);
    p.ThetaEpsilon = Matrix::Zero(q, q);

    auto& f = p.free;
    f.B = Mask::Constant(m, m, false);
    f.Gamma = Mask::Constant(m, n, false);
    f.Phi = Mask::Constant(n, n, false);
    f.Psi = Mask::Constant(m, m, false);
    f.LambdaX = Mask::Constant(r, n, false);
    f.LambdaY = Mask::Constant(q, m, false);
    f.ThetaDelta = Mask::Constant(r, r, false);
    f.ThetaEpsilon = Mask::Constant(q, q, false);

    const auto& g = structure.graph;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) f.B(i, j) = g.has_edge(lay.endogenous[j], lay.endogenous[i]);
        for (Eigen::Index j = 0; j < n; ++j) f.Gamma(i, j) = g.has_edge(lay.exogenous[j], lay.endogenous[i]);
        f.Psi(i, i) = true;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const bool free = i == j || options.free_exogenous_covariances;
            f.Phi(i, j) = free;
            f.Phi(j, i) = free;
        }
    }

    auto is_zero_error = [&](int indicator) {
        return std::find(plan.zero_error_indicators.begin(), plan.zero_error_indicators.end(), indicator) !=
               plan.zero_error_indicators.end();
    };
    auto fill_loadings = [&](const std::vector<int>& indicators, const std::vector<int>& nodes, Matrix& lambda,
                             Mask& lambda_free, Mask& theta_free) {
        for (std::size_t row = 0; row < indicators.size(); ++row) {
            const int ind = indicators[row];
            const auto col = std::distance(nodes.begin(),
                                           std::find(nodes.begin(), nodes.end(), measurement.indicator_node[ind]));
            const auto rr = static_cast<Eigen::Index>(row);
            if (plan.reference_indicator[measurement.indicator_node[ind]] == ind) {
                lambda(rr, col) = 1.0;
            } else {
                lambda_free(rr, col) = true;
            }
            theta_free(rr, rr) = !is_zero_error(ind);
        }
    };
    fill_loadings(lay.y_indicators, lay.endogenous, p.LambdaY, f.LambdaY, f.ThetaEpsilon);
    fill_loadings(lay.x_indicators, lay.exogenous, p.LambdaX, f.LambdaX, f.ThetaDelta);
    return p;
}

IdentifiedModel apply_identification(const MeasurementSpec& measurement, const StructuralSpec& structural, Rng& rng,
                                     const PatternOptions& options)
{
    if (structural.node_count() != measurement.node_count()) {
        throw SpecError(fmt::format("structural model has {} nodes, measurement model {}", structural.node_count(),
                                    measurement.node_count()));
    }
    IdentifiedModel out;
    out.plan = plan_identification(measurement, rng);
    out.structure = structural;
    enforce_required_relations(out.plan, out.structure.graph);
    out.pattern = build_pattern(measurement, out.plan, out.structure, options);
    return out;
}

int free_parameter_count(const SemParameters& pattern)
{
    const auto& f = pattern.free;
    int count = static_cast<int>(f.B.count() + f.Gamma.count() + f.Psi.count() + f.LambdaX.count() +
                                 f.LambdaY.count() + f.ThetaDelta.count() + f.ThetaEpsilon.count());
    for (Eigen::Index i = 0; i < f.Phi.rows(); ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) count += f.Phi(i, j) ? 1 : 0;
    }
    return count;
}

} // namespace stablesem
