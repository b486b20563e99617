#include "stablesem/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

std::vector<std::vector<std::size_t>> subsample_indices(std::size_t n, int count, Rng& rng, double fraction)
{
    if (n < 10) throw InputError(fmt::format("subsampling needs at least 10 rows (got {})", n));
    if (!(fraction > 0.0 && fraction <= 1.0)) throw SpecError("subsample fraction must lie in (0, 1]");
    const auto size = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    std::vector<std::vector<std::size_t>> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    std::vector<std::size_t> all(n);
    for (int s = 0; s < count; ++s) {
        std::iota(all.begin(), all.end(), std::size_t{0});
        // partial Fisher-Yates
        for (std::size_t i = 0; i < size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        std::vector<std::size_t> chosen(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
        std::sort(chosen.begin(), chosen.end());
        out.push_back(std::move(chosen));
    }
    return out;
}

std::vector<Dataset> subsample(const Dataset& d, int count, Rng& rng, double fraction)
{
    std::vector<Dataset> out;
    for (const auto& idx : subsample_indices(d.rows(), count, rng, fraction)) out.push_back(d.select_rows(idx));
    return out;
}

Bag accumulate(const std::vector<ParetoFront>& fronts)
{
    Bag bag;
    for (std::size_t s = 0; s < fronts.size(); ++s) {
        for (const auto& [level, model] : fronts[s].front_levels()) {
            bag.push_back({dag_to_cpdag(model->structure), level, static_cast<int>(s)});
        }
    }
    return bag;
}

std::string to_string(StabilityKind kind)
{
    return kind == StabilityKind::edge ? "edge" : "causal_path";
}

StabilityGraph::StabilityGraph(StabilityKind kind, int nodes, int max_level)
    : kind_(kind),
      nodes_(nodes),
      counts_(static_cast<std::size_t>(max_level + 1), 0),
      values_(static_cast<std::size_t>(max_level + 1) * nodes * nodes, 0.0)
{
}

std::optional<double> StabilityGraph::at(int a, int b, int level) const
{
    if (level < 0 || level > max_level() || counts_[level] == 0) return std::nullopt;
    return values_[(static_cast<std::size_t>(level) * nodes_ + a) * nodes_ + b];
}

double StabilityGraph::max_up_to(int a, int b, int cap) const
{
    const int top = cap < 0 ? max_level() : std::min(cap, max_level());
    double best = 0.0;
    for (int c = 0; c <= top; ++c) {
        if (auto v = at(a, b, c)) best = std::max(best, *v);
    }
    return best;
}

void StabilityGraph::set_counts(std::vector<int> counts)
{
    counts_ = std::move(counts);
    values_.assign(counts_.size() * nodes_ * nodes_, 0.0);
}

void StabilityGraph::set(int a, int b, int level, double p)
{
    values_[(static_cast<std::size_t>(level) * nodes_ + a) * nodes_ + b] = p;
}

int max_complexity(int nodes)
{
    return nodes * (nodes - 1) / 2;
}

namespace {

template <typename Predicate>
StabilityGraph tabulate(const Bag& bag, int nodes, StabilityKind kind, Predicate&& holds)
{
    int top = max_complexity(nodes);
    for (const auto& e : bag) top = std::max(top, e.complexity);
    StabilityGraph g(kind, nodes, top);
    std::vector<int> counts(static_cast<std::size_t>(top + 1), 0);
    std::vector<std::vector<int>> hits(static_cast<std::size_t>(top + 1), std::vector<int>(nodes * nodes, 0));
    for (const auto& e : bag) {
        if (e.cpdag.size() != nodes) throw SpecError("bag entry has the wrong node count");
        ++counts[e.complexity];
        for (int a = 0; a < nodes; ++a) {
            for (int b = 0; b < nodes; ++b) {
                if (a != b && holds(e.cpdag, a, b)) ++hits[e.complexity][a * nodes + b];
            }
        }
    }
    g.set_counts(counts);
    for (int c = 0; c <= top; ++c) {
        if (counts[c] == 0) continue;
        for (int a = 0; a < nodes; ++a) {
            for (int b = 0; b < nodes; ++b) {
                g.set(a, b, c, static_cast<double>(hits[c][a * nodes + b]) / counts[c]);
            }
        }
    }
    return g;
}

} // namespace

StabilityGraph edge_stability(const Bag& bag, int nodes)
{
    return tabulate(bag, nodes, StabilityKind::edge,
                    [](const Cpdag& c, int a, int b) { return has_edge(c, a, b); });
}

StabilityGraph causal_path_stability(const Bag& bag, int nodes)
{
    return tabulate(bag, nodes, StabilityKind::causal_path,
                    [](const Cpdag& c, int a, int b) { return has_directed_path(c, a, b); });
}

PiBic pi_bic(const std::vector<std::vector<std::pair<int, double>>>& bic_by_subset)
{
    std::map<int, std::vector<double>> by_level;
    for (const auto& subset : bic_by_subset) {
        for (const auto& [level, value] : subset) by_level[level].push_back(value);
    }
    if (by_level.empty()) throw InputError("pi_bic: no complexity level has a model");
    PiBic out;
    double best = std::numeric_limits<double>::infinity();
    bool first = true;
    for (auto& [level, values] : by_level) {
        std::sort(values.begin(), values.end());
        const auto n = values.size();
        const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
        out.median_by_level.emplace_back(level, median);
        if (first || median < best) {
            best = median;
            out.level = level;
            out.contributing = static_cast<int>(n);
            first = false;
        }
    }
    const auto needed = (bic_by_subset.size() + 1) / 2;
    out.warning = static_cast<std::size_t>(out.contributing) < needed;
    return out;
}

PiBic pi_bic(const std::vector<ParetoFront>& fronts)
{
    std::vector<std::vector<std::pair<int, double>>> table;
    table.reserve(fronts.size());
    for (const auto& f : fronts) {
        std::vector<std::pair<int, double>> row;
        for (const auto& [level, model] : f.front_levels()) row.emplace_back(level, model->bic);
        table.push_back(std::move(row));
    }
    return pi_bic(table);
}

std::vector<RelevantStructure> relevant_structures(const StabilityGraph& edge, const StabilityGraph& path,
                                                   double pi_sel, int pi_bic_level)
{
    if (!(pi_sel > 0.0 && pi_sel <= 1.0)) throw SpecError("pi_sel must lie in (0, 1]");
    if (edge.nodes() != path.nodes()) throw SpecError("stability graphs have different node counts");
    const int n = edge.nodes();
    std::vector<RelevantStructure> out;
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const double ab = path.max_up_to(a, b, pi_bic_level);
            const double ba = path.max_up_to(b, a, pi_bic_level);
            bool directed = false;
            if (ab >= pi_sel) {
                out.push_back({a, b, StabilityKind::causal_path, Direction::directed, ab});
                directed = true;
            }
            if (ba >= pi_sel) {
                out.push_back({b, a, StabilityKind::causal_path, Direction::directed, ba});
                directed = true;
            }
            const double e = edge.max_up_to(a, b, pi_bic_level);
            if (!directed && e >= pi_sel) out.push_back({a, b, StabilityKind::edge, Direction::undirected, e});
        }
    }
    std::sort(out.begin(), out.end(), [](const RelevantStructure& x, const RelevantStructure& y) {
        return std::pair(x.from, x.to) < std::pair(y.from, y.to);
    });
    return out;
}

} // namespace stablesem
