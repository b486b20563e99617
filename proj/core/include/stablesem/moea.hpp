#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/estimator.hpp"
#include "stablesem/graphs.hpp"
#include "stablesem/model.hpp"

namespace stablesem {

/// Chi-square assigned to structures whose fit did not converge.
inline constexpr double kFailedFitChiSquare = 1e12;

struct SearchParams {
    int population = 50;
    int iterations = 30;
    double crossover = 0.45;
    double mutation = 0.01;
    std::uint64_t seed = 1;

    /// Throws SpecError unless P is even and positive and C, M lie in [0, 1].
    void validate() const;
};

/// Both objectives are minimised: (chi_square, complexity).
using Objectives = std::array<double, 2>;

[[nodiscard]] bool dominates(const Objectives& a, const Objectives& b);

/// One gene per ordered pair (i, j), i != j.
using Genome = std::vector<std::uint8_t>;

[[nodiscard]] std::size_t genome_length(int nodes);
[[nodiscard]] std::size_t gene_index(int nodes, int from, int to);
[[nodiscard]] Genome encode(const Dag& g);
/// Throws SpecError if the genome has a cycle.
[[nodiscard]] Dag decode(const Genome& genome, int nodes);

struct Individual {
    Genome genome;
    Objectives fitness{kFailedFitChiSquare, 0.0};
    int rank = 0;
    double crowding = 0.0;
};

/// Deb's fast nondominated sort; fronts hold indices into `objectives`, best front first,
/// each front in ascending index order.
[[nodiscard]] std::vector<std::vector<int>> fast_nondominated_sort(const std::vector<Objectives>& objectives);

/// Crowding distance of each member of one front (same order as `front`).
[[nodiscard]] std::vector<double> crowding_distance(const std::vector<Objectives>& objectives,
                                                    const std::vector<int>& front);

/// Uniform crossover applied with probability `c`; clones otherwise.
[[nodiscard]] std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, double c, Rng& rng);

/// Independent bit flips with probability `m`.
[[nodiscard]] Individual mutate(const Individual& ind, double m, Rng& rng);

/// Drops forbidden genes, breaks cycles by deleting a random edge of a detected cycle until
/// acyclic, then adds relations required by `plan` (when given).
[[nodiscard]] Individual repair(const Individual& ind, int nodes, const PriorKnowledge& prior, Rng& rng,
                                const IdentificationPlan* plan = nullptr);

struct EvaluatedModel {
    Dag structure;
    double chi_square = kFailedFitChiSquare;
    int complexity = 0;
    double bic = 0.0;
    std::shared_ptr<const FitResult> fit;  // null when the fit threw
};

struct ParetoFront {
    /// Nondominated over every structure evaluated in the run, ordered by complexity.
    std::vector<EvaluatedModel> nondominated;
    /// Lowest chi-square structure seen at each complexity level.
    std::map<int, EvaluatedModel> best_per_complexity;
    /// Lowest chi-square structure per level, restricted to levels on the nondominated set.
    [[nodiscard]] std::map<int, const EvaluatedModel*> front_levels() const;
    /// Best chi-square per complexity after each generation (index 0 is the initial population).
    std::vector<std::map<int, double>> history;
    int evaluations = 0;
    int unique_structures = 0;
};

/// Everything the search needs besides the sample matrix.
struct SearchProblem {
    MeasurementSpec measurement;
    IdentificationPlan plan;
    PriorKnowledge prior;
    PatternOptions pattern_options;
    FitOptions fit_options;
};

struct EvolveOptions {
    bool parallel = true;
    /// Shared memo across calls; keyed with `subset`.
    FitCache* cache = nullptr;
    int subset = 0;
};

/// Evaluates one structure: identified pattern, ML fit, BIC. Non-converged fits get the sentinel.
[[nodiscard]] EvaluatedModel evaluate_structure(const SearchProblem& problem, const Dag& g, const Matrix& sample,
                                                long n_samples);

/// Elitist NSGA-II over structures. Throws NumericDomainError only if every evaluation in a
/// generation throws.
[[nodiscard]] ParetoFront evolve(const Matrix& sample, long n_samples, const SearchProblem& problem,
                                 const SearchParams& params, const EvolveOptions& options = {});

} // namespace stablesem
