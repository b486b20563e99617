#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stablesem/correlations.hpp"
#include "stablesem/io.hpp"
#include "stablesem/moea.hpp"
#include "stablesem/stability.hpp"

namespace stablesem {

struct RunConfig {
    std::filesystem::path data_path;
    std::filesystem::path spec_path;
    std::filesystem::path out_dir = "runs";
    int subsets = 25;
    int iterations = 30;
    int population = 50;
    double crossover = 0.45;
    double mutation = 0.01;
    double pi_sel = 0.6;
    std::uint64_t seed = 1;
    int workers = 0;  // 0: available parallelism
    double subsample_fraction = 0.5;
    bool prefer_covariance = false;
    bool free_exogenous_covariances = false;
    bool plots = true;
    /// Fraction of subsets that must finish for the run to count.
    double min_completed_fraction = 0.8;

    /// Merges keys from a JSON config object; unknown keys raise SpecError.
    void merge(const Json& j);
    [[nodiscard]] Json to_json() const;
    void validate() const;
};

struct SubsetOutcome {
    int index = 0;
    bool completed = false;
    std::string error;
    std::vector<std::size_t> rows;
    CorrelationMatrixResult sample;
    ParetoFront front;
};

struct PairEffect {
    int from = 0;
    int to = 0;
    std::vector<std::vector<double>> per_subset;
    double sigma_from = 1.0;
    double sigma_to = 1.0;
    bool standardized = false;
    std::optional<double> total;  // unset when no subset produced an estimate
};

struct SearchOutcome {
    std::vector<std::string> node_names;
    IdentificationPlan plan;
    std::vector<SubsetOutcome> subsets;
    Bag bag;
    StabilityGraph edge;
    StabilityGraph path;
    PiBic threshold;
    std::vector<RelevantStructure> relevant;
    std::vector<PairEffect> effects;
    int completed = 0;
};

struct ProgressEvent {
    int subset = 0;
    int total = 0;
    bool completed = false;
    std::string message;
};

using ProgressCallback = std::function<void(const ProgressEvent&)>;

/// Subsampling, per-subset correlation matrix and search, stability graphs, pi_bic, relevant
/// structures, and effects. `data` must already be bound to the measurement model. Throws
/// PartialRunError when fewer than min_completed_fraction of the subsets finish.
[[nodiscard]] SearchOutcome run_search(const Dataset& data, const SemSpec& spec, const RunConfig& config,
                                       const ProgressCallback& progress = {});

/// Effects of every directed relevant structure, computed on the pi_bic models.
[[nodiscard]] std::vector<PairEffect> estimate_effects(const Dataset& data, const SemSpec& spec,
                                                       const SearchOutcome& outcome, std::uint64_t seed);

[[nodiscard]] Json relevant_to_json(const SearchOutcome& outcome, double pi_sel);
[[nodiscard]] Json effects_to_json(const SearchOutcome& outcome);
[[nodiscard]] std::string relevant_to_text(const SearchOutcome& outcome, double pi_sel);
[[nodiscard]] std::string stability_csv(const SearchOutcome& outcome);

/// Creates `<out_dir>/<UTC timestamp>_seed<seed>` (suffixing -2, -3, ... if taken) and writes every
/// artifact of the run. Returns the directory.
std::filesystem::path write_run(const SearchOutcome& outcome, const RunConfig& config, const SemSpec& spec,
                                const Json& extra_meta = {});

} // namespace stablesem
