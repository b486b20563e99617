#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stablesem/common.hpp"

namespace stablesem {

/// Dense square 0/1 matrix; entry (i, j) set means i -> j.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(int n) : n_(n), bits_(static_cast<std::size_t>(n) * n, 0) {}

    [[nodiscard]] int size() const noexcept { return n_; }
    [[nodiscard]] bool operator()(int i, int j) const { return bits_[index(i, j)] != 0; }
    void set(int i, int j, bool value = true) { bits_[index(i, j)] = value ? 1 : 0; }

    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) = default;

private:
    [[nodiscard]] std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// True iff the directed graph has no directed cycle (self-loops count as cycles).
[[nodiscard]] bool is_acyclic(const AdjacencyMatrix& adjacency);

/// Node order in which every edge points forward, or empty when cyclic.
[[nodiscard]] std::vector<int> topological_order(const AdjacencyMatrix& adjacency);

/// Nodes on some directed cycle reachable from a cycle detection pass, as (from, to) edges.
/// Empty when the graph is acyclic.
[[nodiscard]] std::vector<Edge> find_cycle(const AdjacencyMatrix& adjacency);

/// Directed acyclic graph over dense node indices.
class Dag {
public:
    Dag() = default;
    explicit Dag(int n) : adj_(n) {}

    /// Throws SpecError on a cycle or self-loop.
    explicit Dag(AdjacencyMatrix adjacency);
    static Dag from_edges(int n, std::span<const Edge> edges);

    [[nodiscard]] int size() const noexcept { return adj_.size(); }
    [[nodiscard]] bool has_edge(int from, int to) const { return adj_(from, to); }
    [[nodiscard]] bool adjacent(int a, int b) const { return adj_(a, b) || adj_(b, a); }
    [[nodiscard]] std::size_t edge_count() const { return adj_.count(); }
    [[nodiscard]] std::vector<Edge> edges() const;
    [[nodiscard]] std::vector<int> parents(int node) const;
    [[nodiscard]] const AdjacencyMatrix& adjacency() const noexcept { return adj_; }

    /// Adds from -> to; returns false (leaving the graph untouched) if that would close a cycle.
    bool try_add(int from, int to);
    void remove(int from, int to) { adj_.set(from, to, false); }

    friend bool operator==(const Dag&, const Dag&) = default;

private:
    AdjacencyMatrix adj_;
};

/// Completed partially directed acyclic graph: the Markov equivalence class of a DAG.
class Cpdag {
public:
    Cpdag() = default;
    explicit Cpdag(int n) : directed_(n), undirected_(n) {}

    [[nodiscard]] int size() const noexcept { return directed_.size(); }
    [[nodiscard]] bool is_directed(int from, int to) const { return directed_(from, to); }
    [[nodiscard]] bool is_undirected(int a, int b) const { return undirected_(a, b); }

    void set_directed(int from, int to);
    void set_undirected(int a, int b);

    [[nodiscard]] std::vector<Edge> directed_edges() const;
    /// Unordered pairs reported with first < second.
    [[nodiscard]] std::vector<Edge> undirected_edges() const;
    [[nodiscard]] std::size_t edge_count() const;

    [[nodiscard]] const AdjacencyMatrix& directed() const noexcept { return directed_; }
    [[nodiscard]] const AdjacencyMatrix& undirected() const noexcept { return undirected_; }

    friend bool operator==(const Cpdag&, const Cpdag&) = default;

private:
    AdjacencyMatrix directed_;
    AdjacencyMatrix undirected_;  // kept symmetric
};

/// Skeleton plus v-structures, closed under Meek's orientation rules.
[[nodiscard]] Cpdag dag_to_cpdag(const Dag& g);

[[nodiscard]] bool has_edge(const Cpdag& c, int a, int b);

/// Reachability through directed edges only; paths have length >= 1.
[[nodiscard]] bool has_directed_path(const Cpdag& c, int a, int b);

/// Uniform node ordering, then each forward pair included with probability s.
[[nodiscard]] Dag random_dag(int n, double s, Rng& rng);

/// Edge probability 2 / (n - 1) used for random structures, capped at 1.
[[nodiscard]] double default_edge_probability(int n);

} // namespace stablesem
