#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stablesem/common.hpp"
#include "stablesem/correlations.hpp"
#include "stablesem/graphs.hpp"
#include "stablesem/moea.hpp"

namespace stablesem {

/// Row index lists of `count` subsets, each floor(fraction * n) rows drawn without replacement.
/// Indices within a subset are sorted. Throws InputError when n < 10.
[[nodiscard]] std::vector<std::vector<std::size_t>> subsample_indices(std::size_t n, int count, Rng& rng,
                                                                      double fraction = 0.5);

[[nodiscard]] std::vector<Dataset> subsample(const Dataset& d, int count, Rng& rng, double fraction = 0.5);

struct BagEntry {
    Cpdag cpdag;
    int complexity = 0;
    int subset = 0;
};

using Bag = std::vector<BagEntry>;

/// One CPDAG per subset per complexity level on that subset's nondominated set.
[[nodiscard]] Bag accumulate(const std::vector<ParetoFront>& fronts);

enum class StabilityKind { edge, causal_path };

[[nodiscard]] std::string to_string(StabilityKind kind);

class StabilityGraph {
public:
    StabilityGraph() = default;
    StabilityGraph(StabilityKind kind, int nodes, int max_level);

    [[nodiscard]] StabilityKind kind() const noexcept { return kind_; }
    [[nodiscard]] int nodes() const noexcept { return nodes_; }
    [[nodiscard]] int max_level() const noexcept { return static_cast<int>(counts_.size()) - 1; }

    /// Number of models at a level; 0 means the level is absent.
    [[nodiscard]] int models_at(int level) const { return counts_.at(static_cast<std::size_t>(level)); }
    /// Probability for (a, b) at a level, or nullopt when the level is absent. Edge graphs are symmetric.
    [[nodiscard]] std::optional<double> at(int a, int b, int level) const;
    /// Max over present levels <= cap (all levels when cap < 0); 0 when none.
    [[nodiscard]] double max_up_to(int a, int b, int cap = -1) const;

    void set_counts(std::vector<int> counts);
    void set(int a, int b, int level, double p);

private:
    StabilityKind kind_ = StabilityKind::edge;
    int nodes_ = 0;
    std::vector<int> counts_;
    std::vector<double> values_;  // level-major, then a * nodes + b
};

/// Highest complexity any model on n nodes can have.
[[nodiscard]] int max_complexity(int nodes);

[[nodiscard]] StabilityGraph edge_stability(const Bag& bag, int nodes);
[[nodiscard]] StabilityGraph causal_path_stability(const Bag& bag, int nodes);

struct PiBic {
    int level = 0;
    int contributing = 0;  // subsets with a model at `level`
    bool warning = false;  // fewer than ceil(S / 2) subsets contributed
    std::vector<std::pair<int, double>> median_by_level;
};

/// Level minimising the median BIC over the subsets that have it; ties go to the smaller level.
/// Throws InputError when no front has any level.
[[nodiscard]] PiBic pi_bic(const std::vector<ParetoFront>& fronts);

/// Same, from per-subset (level -> BIC) maps.
[[nodiscard]] PiBic pi_bic(const std::vector<std::vector<std::pair<int, double>>>& bic_by_subset);

enum class Direction { directed, undirected };

struct RelevantStructure {
    int from = 0;  // for undirected entries, from < to
    int to = 0;
    StabilityKind kind = StabilityKind::edge;
    Direction direction = Direction::undirected;
    double reliability = 0.0;
};

/// Directed entries come from causal paths reaching pi_sel at some level <= pi_bic; pairs that
/// reach it only through edge stability are undirected. Sorted by (from, to).
[[nodiscard]] std::vector<RelevantStructure> relevant_structures(const StabilityGraph& edge,
                                                                 const StabilityGraph& path, double pi_sel,
                                                                 int pi_bic_level);

} // namespace stablesem
