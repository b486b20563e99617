#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stablesem/correlations.hpp"
#include "stablesem/estimator.hpp"
#include "stablesem/graphs.hpp"
#include "stablesem/model.hpp"
#include "stablesem/simgen.hpp"
#include "stablesem/stability.hpp"

namespace stablesem {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::json;

/// Model description read from JSON: measurement model, prior knowledge, and an optional
/// structure (used by `fit`).
struct SemSpec {
    MeasurementSpec measurement;
    PriorKnowledge prior;
    std::optional<Dag> structure;
};

/// Throws SpecError on unknown names, duplicate names, or malformed entries.
[[nodiscard]] SemSpec sem_spec_from_json(const Json& j);
[[nodiscard]] Json to_json(const SemSpec& spec);
[[nodiscard]] SemSpec read_sem_spec(const std::filesystem::path& path);

/// Header row of names, numeric cells. Empty, NA, and NaN cells are missing; any missing cell
/// raises InputError listing the affected rows. Columns are typed continuous.
[[nodiscard]] Dataset read_csv(std::istream& in, const std::string& source = "<stream>");
[[nodiscard]] Dataset read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Dataset& d);

/// Columns reordered to indicator id order and typed by the measurement model.
[[nodiscard]] Dataset bind_dataset(const Dataset& raw, const MeasurementSpec& measurement);

[[nodiscard]] Json to_json(const Dag& g, const std::vector<std::string>& names);
[[nodiscard]] Dag dag_from_json(const Json& j, const std::vector<std::string>& names);
[[nodiscard]] Json to_json(const Cpdag& c, const std::vector<std::string>& names);
/// Node names are read from the document into `names`.
[[nodiscard]] Cpdag cpdag_from_json(const Json& j, std::vector<std::string>& names);

[[nodiscard]] Json to_json(const SemParameters& p);
[[nodiscard]] Json to_json(const FitResult& fit, long n_samples);
[[nodiscard]] Json to_json(const RocResult& roc);

/// Long format: pair,kind,complexity,probability,n_models. Edge pairs are written "A--B" (first
/// name earlier in node order), causal paths "A->B". Absent levels carry NA.
void write_stability_csv(std::ostream& out, const StabilityGraph& edge, const StabilityGraph& path,
                         const std::vector<std::string>& names);
/// Inverse of write_stability_csv; `names` fixes the node order.
[[nodiscard]] std::pair<StabilityGraph, StabilityGraph> read_stability_csv(std::istream& in,
                                                                           const std::vector<std::string>& names);

[[nodiscard]] Json to_json(const StabilityGraph& g, const std::vector<std::string>& names);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest representation that round-trips.
[[nodiscard]] std::string format_number(double v);

} // namespace stablesem
