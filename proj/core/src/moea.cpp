#include "stablesem/moea.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "stablesem/errors.hpp"

namespace stablesem {

void SearchParams::validate() const
{
    if (population <= 0 || population % 2 != 0) {
        throw SpecError(fmt::format("population must be even and positive (got {})", population));
    }
    if (iterations < 0) throw SpecError("iterations must be non-negative");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw SpecError("crossover probability must lie in [0, 1]");
    if (!(mutation >= 0.0 && mutation <= 1.0)) throw SpecError("mutation probability must lie in [0, 1]");
}

bool dominates(const Objectives& a, const Objectives& b)
{
    return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

std::size_t genome_length(int nodes)
{
    return nodes < 2 ? 0 : static_cast<std::size_t>(nodes) * static_cast<std::size_t>(nodes - 1);
}

std::size_t gene_index(int nodes, int from, int to)
{
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(nodes - 1) +
           static_cast<std::size_t>(to < from ? to : to - 1);
}

Genome encode(const Dag& g)
{
    const int n = g.size();
    Genome genome(genome_length(n), 0);
    for (const auto& [from, to] : g.edges()) genome[gene_index(n, from, to)] = 1;
    return genome;
}

namespace {

AdjacencyMatrix to_adjacency(const Genome& genome, int n)
{
    AdjacencyMatrix adj(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && genome[gene_index(n, i, j)] != 0) adj.set(i, j);
        }
    }
    return adj;
}

} // namespace

Dag decode(const Genome& genome, int nodes)
{
    if (genome.size() != genome_length(nodes)) throw SpecError("genome length does not match node count");
    return Dag(to_adjacency(genome, nodes));
}

std::vector<std::vector<int>> fast_nondominated_sort(const std::vector<Objectives>& objectives)
{
    const int n = static_cast<int>(objectives.size());
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> dominators(n, 0);
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(objectives[p], objectives[q])) {
                dominated[p].push_back(q);
            } else if (dominates(objectives[q], objectives[p])) {
                ++dominators[p];
            }
        }
        if (dominators[p] == 0) current.push_back(p);
    }
    while (!current.empty()) {
        std::vector<int> next;
        for (int p : current) {
            for (int q : dominated[p]) {
                if (--dominators[q] == 0) next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<Objectives>& objectives, const std::vector<int>& front)
{
    const auto size = front.size();
    std::vector<double> distance(size, 0.0);
    if (size <= 2) {
        std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
        return distance;
    }
    std::vector<std::size_t> order(size);
    for (std::size_t k = 0; k < 2; ++k) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return objectives[front[a]][k] < objectives[front[b]][k];
        });
        const double lo = objectives[front[order.front()]][k];
        const double hi = objectives[front[order.back()]][k];
        distance[order.front()] = std::numeric_limits<double>::infinity();
        distance[order.back()] = std::numeric_limits<double>::infinity();
        if (hi <= lo) continue;
        for (std::size_t r = 1; r + 1 < size; ++r) {
            const double gap = objectives[front[order[r + 1]]][k] - objectives[front[order[r - 1]]][k];
            distance[order[r]] += gap / (hi - lo);
        }
    }
    return distance;
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, double c, Rng& rng)
{
    if (a.genome.size() != b.genome.size()) throw SpecError("crossover: genome lengths differ");
    Individual x{a.genome, {}, 0, 0.0};
    Individual y{b.genome, {}, 0, 0.0};
    std::bernoulli_distribution apply(c);
    if (!apply(rng)) return {x, y};
    std::bernoulli_distribution swap(0.5);
    for (std::size_t g = 0; g < x.genome.size(); ++g) {
        if (swap(rng)) std::swap(x.genome[g], y.genome[g]);
    }
    return {x, y};
}

Individual mutate(const Individual& ind, double m, Rng& rng)
{
    Individual out{ind.genome, {}, 0, 0.0};
    std::bernoulli_distribution flip(m);
    for (auto& gene : out.genome) {
        if (flip(rng)) gene = gene != 0 ? 0 : 1;
    }
    return out;
}

Individual repair(const Individual& ind, int nodes, const PriorKnowledge& prior, Rng& rng,
                  const IdentificationPlan* plan)
{
    AdjacencyMatrix adj = to_adjacency(ind.genome, nodes);
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            if (adj(i, j) && !prior.allows(i, j)) adj.set(i, j, false);
        }
    }
    for (auto cycle = find_cycle(adj); !cycle.empty(); cycle = find_cycle(adj)) {
        std::uniform_int_distribution<std::size_t> pick(0, cycle.size() - 1);
        const auto [from, to] = cycle[pick(rng)];
        adj.set(from, to, false);
    }
    Dag g(std::move(adj));
    if (plan != nullptr) enforce_required_relations(*plan, g, &prior);
    Individual out = ind;
    out.genome = encode(g);
    return out;
}

std::map<int, const EvaluatedModel*> ParetoFront::front_levels() const
{
    std::map<int, const EvaluatedModel*> out;
    for (const auto& m : nondominated) {
        auto [it, inserted] = out.emplace(m.complexity, &m);
        if (!inserted && m.chi_square < it->second->chi_square) it->second = &m;
    }
    return out;
}

namespace {

EvaluatedModel summarise(const Dag& g, std::shared_ptr<const FitResult> fit, long n_samples)
{
    EvaluatedModel m;
    m.structure = g;
    m.complexity = static_cast<int>(g.edge_count());
    m.fit = std::move(fit);
    m.chi_square = m.fit->converged && std::isfinite(m.fit->chi_square) ? m.fit->chi_square : kFailedFitChiSquare;
    m.bic = bic(m.chi_square, m.fit->t, n_samples);
    return m;
}

FitResult fit_structure(const SearchProblem& problem, const Dag& g, const Matrix& sample, long n_samples)
{
    StructuralSpec structure{g, problem.measurement.node_roles()};
    const auto pattern = build_pattern(problem.measurement, problem.plan, structure, problem.pattern_options);
    return fit(pattern, sample, n_samples, problem.fit_options);
}

struct Archive {
    std::map<Genome, EvaluatedModel> models;
    int evaluations = 0;
};

// Fits every genome not yet in the archive, then scores the individuals. Returns the number of
// individuals whose evaluation threw.
int evaluate_population(std::vector<Individual>& pop, Archive& archive, const Matrix& sample, long n_samples,
                        const SearchProblem& problem, const EvolveOptions& options, int nodes)
{
    std::vector<Genome> pending;
    for (const auto& ind : pop) {
        if (archive.models.count(ind.genome) == 0 &&
            std::find(pending.begin(), pending.end(), ind.genome) == pending.end()) {
            pending.push_back(ind.genome);
        }
    }

    std::vector<std::optional<EvaluatedModel>> results(pending.size());
    auto work = [&](std::size_t k) {
        const Dag g = decode(pending[k], nodes);
        try {
            std::shared_ptr<const FitResult> fit;
            FitCache::Key key{g.adjacency().bits(), options.subset};
            if (options.cache != nullptr) fit = options.cache->find(key);
            if (!fit) {
                auto result = fit_structure(problem, g, sample, n_samples);
                fit = options.cache != nullptr ? options.cache->insert(key, std::move(result))
                                               : std::make_shared<const FitResult>(std::move(result));
            }
            results[k] = summarise(g, std::move(fit), n_samples);
        } catch (const Error&) {
            EvaluatedModel failed;
            failed.structure = g;
            failed.complexity = static_cast<int>(g.edge_count());
            failed.bic = std::numeric_limits<double>::infinity();
            results[k] = std::move(failed);
        }
    };
    if (options.parallel && pending.size() > 1) {
        tbb::parallel_for(std::size_t{0}, pending.size(), work);
    } else {
        for (std::size_t k = 0; k < pending.size(); ++k) work(k);
    }
    for (std::size_t k = 0; k < pending.size(); ++k) archive.models.emplace(pending[k], std::move(*results[k]));
    archive.evaluations += static_cast<int>(pop.size());

    int failures = 0;
    for (auto& ind : pop) {
        const auto& m = archive.models.at(ind.genome);
        if (!m.fit) ++failures;
        ind.fitness = {m.chi_square, static_cast<double>(m.complexity)};
    }
    return failures;
}

void assign_rank_and_crowding(std::vector<Individual>& pop)
{
    std::vector<Objectives> obj;
    obj.reserve(pop.size());
    for (const auto& ind : pop) obj.push_back(ind.fitness);
    const auto fronts = fast_nondominated_sort(obj);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        const auto crowd = crowding_distance(obj, fronts[r]);
        for (std::size_t k = 0; k < fronts[r].size(); ++k) {
            pop[fronts[r][k]].rank = static_cast<int>(r);
            pop[fronts[r][k]].crowding = crowd[k];
        }
    }
}

bool better(const Individual& a, const Individual& b)
{
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.crowding > b.crowding;
}

std::vector<Individual> environmental_selection(std::vector<Individual> combined, std::size_t size)
{
    std::vector<Objectives> obj;
    obj.reserve(combined.size());
    for (const auto& ind : combined) obj.push_back(ind.fitness);
    const auto fronts = fast_nondominated_sort(obj);
    std::vector<Individual> next;
    next.reserve(size);
    for (std::size_t r = 0; r < fronts.size() && next.size() < size; ++r) {
        const auto crowd = crowding_distance(obj, fronts[r]);
        std::vector<std::size_t> order(fronts[r].size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (next.size() + fronts[r].size() > size) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return crowd[a] > crowd[b]; });
        }
        for (std::size_t k : order) {
            if (next.size() == size) break;
            auto ind = combined[fronts[r][k]];
            ind.rank = static_cast<int>(r);
            ind.crowding = crowd[k];
            next.push_back(std::move(ind));
        }
    }
    return next;
}

std::map<int, double> best_chi_square(const Archive& archive)
{
    std::map<int, double> out;
    for (const auto& [genome, m] : archive.models) {
        auto [it, inserted] = out.emplace(m.complexity, m.chi_square);
        if (!inserted) it->second = std::min(it->second, m.chi_square);
    }
    return out;
}

} // namespace

EvaluatedModel evaluate_structure(const SearchProblem& problem, const Dag& g, const Matrix& sample, long n_samples)
{
    return summarise(g, std::make_shared<const FitResult>(fit_structure(problem, g, sample, n_samples)), n_samples);
}

ParetoFront evolve(const Matrix& sample, long n_samples, const SearchProblem& problem, const SearchParams& params,
                   const EvolveOptions& options)
{
    params.validate();
    const int n = problem.measurement.node_count();
    problem.prior.validate(n);
    Rng rng(params.seed);
    Archive archive;
    ParetoFront front;

    auto check_generation = [&](int failures, std::size_t size, int generation) {
        if (size > 0 && failures == static_cast<int>(size)) {
            throw NumericDomainError(fmt::format("every structure in generation {} failed to evaluate", generation));
        }
    };

    const auto p = static_cast<std::size_t>(params.population);
    std::bernoulli_distribution seed_gene(default_edge_probability(n));
    std::vector<Individual> pop(p);
    for (auto& ind : pop) {
        ind.genome.assign(genome_length(n), 0);
        for (auto& gene : ind.genome) gene = seed_gene(rng) ? 1 : 0;
        ind = repair(ind, n, problem.prior, rng, &problem.plan);
    }
    check_generation(evaluate_population(pop, archive, sample, n_samples, problem, options, n), pop.size(), 0);
    assign_rank_and_crowding(pop);
    front.history.push_back(best_chi_square(archive));

    std::uniform_int_distribution<std::size_t> pick(0, p - 1);
    auto tournament = [&]() -> const Individual& {
        const auto i = pick(rng);
        const auto j = pick(rng);
        return better(pop[j], pop[i]) ? pop[j] : pop[i];
    };

    for (int gen = 1; gen <= params.iterations; ++gen) {
        std::vector<Individual> offspring;
        offspring.reserve(p);
        while (offspring.size() < p) {
            const auto& a = tournament();
            const auto& b = tournament();
            auto [c1, c2] = crossover(a, b, params.crossover, rng);
            offspring.push_back(repair(mutate(c1, params.mutation, rng), n, problem.prior, rng, &problem.plan));
            offspring.push_back(repair(mutate(c2, params.mutation, rng), n, problem.prior, rng, &problem.plan));
        }
        check_generation(evaluate_population(offspring, archive, sample, n_samples, problem, options, n),
                         offspring.size(), gen);
        std::vector<Individual> combined = pop;
        combined.insert(combined.end(), offspring.begin(), offspring.end());
        pop = environmental_selection(std::move(combined), p);
        front.history.push_back(best_chi_square(archive));
    }

    std::vector<const EvaluatedModel*> usable;
    std::vector<Objectives> obj;
    for (const auto& [genome, m] : archive.models) {
        if (m.chi_square >= kFailedFitChiSquare) continue;
        usable.push_back(&m);
        obj.push_back({m.chi_square, static_cast<double>(m.complexity)});
        auto [it, inserted] = front.best_per_complexity.emplace(m.complexity, m);
        if (!inserted && m.chi_square < it->second.chi_square) it->second = m;
    }
    if (!obj.empty()) {
        const auto fronts = fast_nondominated_sort(obj);
        for (int idx : fronts.front()) front.nondominated.push_back(*usable[idx]);
    }
    std::stable_sort(front.nondominated.begin(), front.nondominated.end(),
                     [](const EvaluatedModel& a, const EvaluatedModel& b) { return a.complexity < b.complexity; });
    front.evaluations = archive.evaluations;
    front.unique_structures = static_cast<int>(archive.models.size());
    return front;
}

} // namespace stablesem
