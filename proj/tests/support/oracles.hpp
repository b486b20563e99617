#pragma once

// Slow, obviously-correct reference implementations the unit and acceptance tests compare against.

#include <map>
#include <set>
#include <vector>

#include <stablesem/graphs.hpp>
#include <stablesem/moea.hpp>

namespace oracle {

using stablesem::Cpdag;
using stablesem::Dag;
using stablesem::Matrix;

/// Every DAG on n labelled nodes (each pair absent, forward, or backward; cyclic ones dropped).
std::vector<Dag> all_dags(int n);

/// Markov equivalence classes grouped by (skeleton, v-structures).
std::vector<std::vector<Dag>> equivalence_classes(const std::vector<Dag>& dags);

/// Edge directed where every member agrees, undirected otherwise.
Cpdag union_of_orientations(const std::vector<Dag>& members);

/// Fronts by repeatedly peeling off the members no remaining member dominates.
std::vector<std::vector<int>> peel_fronts(const std::vector<stablesem::Objectives>& objectives);

/// Textbook crowding: sort by each objective, add normalised neighbour gaps.
std::vector<double> crowding(const std::vector<stablesem::Objectives>& objectives, const std::vector<int>& front);

/// P(score_pos > score_neg) + 0.5 P(tie) over all positive/negative pairs.
double mann_whitney_auc(const std::vector<std::pair<double, bool>>& scored);

/// Covariance of a linear Gaussian SEM on g with coefficient w(i, j) for i -> j and unit noise.
Matrix dag_covariance(const Dag& g, const Matrix& w);

/// Causal effect of x on y in a DAG with covariance cov: coefficient of x when regressing y on
/// x and its parents (0 when y is a parent of x).
double adjustment_effect(const Dag& g, const Matrix& cov, int x, int y);

/// One effect per DAG in the class.
std::vector<double> exhaustive_ida(const std::vector<Dag>& members, const Matrix& cov, int x, int y);

/// Equal as sets: every value of each side lies within tol of some value of the other.
bool same_value_set(const std::vector<double>& a, const std::vector<double>& b, double tol);

/// Standard bivariate normal CDF by adaptive quadrature of phi(x) Phi((k - rho x) / sqrt(1 - rho^2)).
double bvn_cdf_quadrature(double h, double k, double rho);

} // namespace oracle
