#include "stablesem/graphs.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

std::size_t AdjacencyMatrix::count() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<int> topological_order(const AdjacencyMatrix& adjacency)
{
    const int n = adjacency.size();
    std::vector<int> indegree(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (adjacency(i, j)) ++indegree[j];
        }
    }
    std::vector<int> order;
    order.reserve(n);
    std::vector<int> ready;
    for (int i = n - 1; i >= 0; --i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    while (!ready.empty()) {
        const int v = ready.back();
        ready.pop_back();
        order.push_back(v);
        for (int j = n - 1; j >= 0; --j) {
            if (adjacency(v, j) && --indegree[j] == 0) ready.push_back(j);
        }
    }
    if (static_cast<int>(order.size()) != n) return {};
    return order;
}

bool is_acyclic(const AdjacencyMatrix& adjacency)
{
    return adjacency.size() == 0 || !topological_order(adjacency).empty();
}

std::vector<Edge> find_cycle(const AdjacencyMatrix& adjacency)
{
    const int n = adjacency.size();
    enum : std::uint8_t { white, grey, black };
    std::vector<std::uint8_t> colour(n, white);
    std::vector<int> parent(n, -1);

    // iterative DFS; on a back edge u -> v, walk parents from u up to v
    for (int root = 0; root < n; ++root) {
        if (colour[root] != white) continue;
        std::vector<std::pair<int, int>> stack{{root, 0}};
        colour[root] = grey;
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            if (next == n) {
                colour[u] = black;
                stack.pop_back();
                continue;
            }
            const int v = next++;
            if (!adjacency(u, v)) continue;
            if (colour[v] == grey) {
                std::vector<Edge> cycle{{u, v}};
                for (int w = u; w != v; w = parent[w]) cycle.emplace_back(parent[w], w);
                std::reverse(cycle.begin(), cycle.end());
                return cycle;
            }
            if (colour[v] == white) {
                colour[v] = grey;
                parent[v] = u;
                stack.emplace_back(v, 0);
            }
        }
    }
    return {};
}

Dag::Dag(AdjacencyMatrix adjacency) : adj_(std::move(adjacency))
{
    for (int i = 0; i < adj_.size(); ++i) {
        if (adj_(i, i)) throw SpecError(fmt::format("self-loop on node {}", i));
    }
    if (!is_acyclic(adj_)) throw SpecError("structural adjacency contains a directed cycle");
}

Dag Dag::from_edges(int n, std::span<const Edge> edges)
{
    AdjacencyMatrix adj(n);
    for (const auto& [from, to] : edges) {
        if (from < 0 || to < 0 || from >= n || to >= n) {
            throw SpecError(fmt::format("edge ({}, {}) out of range for {} nodes", from, to, n));
        }
        adj.set(from, to);
    }
    return Dag(std::move(adj));
}

std::vector<Edge> Dag::edges() const
{
    std::vector<Edge> out;
    for (int i = 0; i < size(); ++i) {
        for (int j = 0; j < size(); ++j) {
            if (adj_(i, j)) out.emplace_back(i, j);
        }
    }
    return out;
}

std::vector<int> Dag::parents(int node) const
{
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
        if (adj_(i, node)) out.push_back(i);
    }
    return out;
}

bool Dag::try_add(int from, int to)
{
    if (from == to || adj_(from, to)) return from != to;
    // adding from -> to closes a cycle iff `from` is reachable from `to`
    std::vector<std::uint8_t> seen(size(), 0);
    std::vector<int> stack{to};
    seen[to] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (u == from) return false;
        for (int v = 0; v < size(); ++v) {
            if (adj_(u, v) && !seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        }
    }
    adj_.set(from, to);
    return true;
}

void Cpdag::set_directed(int from, int to)
{
    undirected_.set(from, to, false);
    undirected_.set(to, from, false);
    directed_.set(to, from, false);
    directed_.set(from, to);
}

void Cpdag::set_undirected(int a, int b)
{
    directed_.set(a, b, false);
    directed_.set(b, a, false);
    undirected_.set(a, b);
    undirected_.set(b, a);
}

std::vector<Edge> Cpdag::directed_edges() const
{
    std::vector<Edge> out;
    for (int i = 0; i < size(); ++i) {
        for (int j = 0; j < size(); ++j) {
            if (directed_(i, j)) out.emplace_back(i, j);
        }
    }
    return out;
}

std::vector<Edge> Cpdag::undirected_edges() const
{
    std::vector<Edge> out;
    for (int i = 0; i < size(); ++i) {
        for (int j = i + 1; j < size(); ++j) {
            if (undirected_(i, j)) out.emplace_back(i, j);
        }
    }
    return out;
}

std::size_t Cpdag::edge_count() const
{
    return directed_.count() + undirected_.count() / 2;
}

namespace {

bool adjacent(const Cpdag& c, int a, int b)
{
    return c.is_directed(a, b) || c.is_directed(b, a) || c.is_undirected(a, b);
}

// One sweep of Meek rules R1-R4 over every undirected edge; true if anything was oriented.
bool apply_meek_rules(Cpdag& c)
{
    const int n = c.size();
    bool changed = false;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b || !c.is_undirected(a, b)) continue;
            bool orient = false;
            // R1: c -> a, a - b, c and b nonadjacent
            for (int k = 0; k < n && !orient; ++k) {
                orient = c.is_directed(k, a) && !adjacent(c, k, b) && k != b;
            }
            // R2: a -> k -> b with a - b
            for (int k = 0; k < n && !orient; ++k) {
                orient = c.is_directed(a, k) && c.is_directed(k, b);
            }
            // R3: a - k1 -> b, a - k2 -> b, k1 and k2 nonadjacent
            for (int k1 = 0; k1 < n && !orient; ++k1) {
                if (!c.is_undirected(a, k1) || !c.is_directed(k1, b)) continue;
                for (int k2 = k1 + 1; k2 < n && !orient; ++k2) {
                    orient = c.is_undirected(a, k2) && c.is_directed(k2, b) && !adjacent(c, k1, k2);
                }
            }
            // R4: a - k1 (or a adj k1), k1 -> k2 -> b, a adj k2, k1 and b nonadjacent
            for (int k1 = 0; k1 < n && !orient; ++k1) {
                if (k1 == b || !c.is_undirected(a, k1)) continue;
                for (int k2 = 0; k2 < n && !orient; ++k2) {
                    orient = k2 != a && c.is_directed(k1, k2) && c.is_directed(k2, b) &&
                             adjacent(c, a, k2) && !adjacent(c, k1, b);
                }
            }
            if (orient) {
                c.set_directed(a, b);
                changed = true;
            }
        }
    }
    return changed;
}

} // namespace

Cpdag dag_to_cpdag(const Dag& g)
{
    const int n = g.size();
    Cpdag c(n);
    for (const auto& [from, to] : g.edges()) c.set_undirected(from, to);

    for (int child = 0; child < n; ++child) {
        const auto pa = g.parents(child);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            for (std::size_t j = i + 1; j < pa.size(); ++j) {
                if (!g.adjacent(pa[i], pa[j])) {
                    c.set_directed(pa[i], child);
                    c.set_directed(pa[j], child);
                }
            }
        }
    }
    while (apply_meek_rules(c)) {
    }
    return c;
}

bool has_edge(const Cpdag& c, int a, int b)
{
    return adjacent(c, a, b);
}

bool has_directed_path(const Cpdag& c, int a, int b)
{
    const int n = c.size();
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<int> stack;
    for (int v = 0; v < n; ++v) {
        if (c.is_directed(a, v)) {
            seen[v] = 1;
            stack.push_back(v);
        }
    }
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (u == b) return true;
        for (int v = 0; v < n; ++v) {
            if (c.is_directed(u, v) && !seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        }
    }
    return false;
}

Dag random_dag(int n, double s, Rng& rng)
{
    if (n < 0) throw SpecError("random_dag: negative node count");
    if (!(s >= 0.0 && s <= 1.0)) throw SpecError("random_dag: edge probability outside [0, 1]");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(s);
    AdjacencyMatrix adj(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (coin(rng)) adj.set(order[i], order[j]);
        }
    }
    return Dag(std::move(adj));
}

double default_edge_probability(int n)
{
    if (n < 2) return 0.0;
    return std::min(1.0, 2.0 / (n - 1));
}

} // namespace stablesem
