#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gcnstab {

// Undirected edge in canonical form (u < v). Orientation never matters
// downstream because an edge only enters through the rank-one term a a^T,
// so it is fixed structurally at construction.
struct Edge {
    int u = 0;
    int v = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(int a, int b) {
    if (a < 0 || b < 0)
        throw std::invalid_argument("make_edge: negative node index");
    if (a == b) throw std::invalid_argument("make_edge: self-loop");
    return a < b ? Edge{a, b} : Edge{b, a};
}

// Undirected, unweighted graph with an optional per-node community label.
// Immutable after construction; edges are stored sorted and canonical.
class Graph {
public:
    Graph() = default;

    Graph(int n, std::vector<Edge> edges,
          std::optional<std::vector<int>> community = std::nullopt)
        : n_(n), edges_(std::move(edges)), community_(std::move(community)) {
        if (n_ < 1) throw std::invalid_argument("Graph: node count must be >= 1");
        for (auto& e : edges_) e = make_edge(e.u, e.v);
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw std::invalid_argument("Graph: duplicate edge");
        for (const auto& e : edges_)
            if (e.v >= n_)
                throw std::invalid_argument("Graph: edge endpoint out of range");
        if (community_ && static_cast<int>(community_->size()) != n_)
            throw std::invalid_argument(
                "Graph: community labels must cover every node");
    }

    int node_count() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::optional<std::vector<int>>& community() const {
        return community_;
    }

    bool has_edge(Edge e) const {
        e = make_edge(e.u, e.v);
        return std::binary_search(edges_.begin(), edges_.end(), e);
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_ &&
               a.community_ == b.community_;
    }

private:
    int n_ = 1;
    std::vector<Edge> edges_;
    std::optional<std::vector<int>> community_;
};

// Signed edge change: +1 inserts an absent edge, -1 deletes a present one.
struct SignedEdge {
    Edge edge;
    int sign = -1;
};

// A set of edge insertions/deletions. Consistency with a base graph
// (deletions present, insertions absent) is checked by validate_against.
class EdgePerturbation {
public:
    EdgePerturbation() = default;

    explicit EdgePerturbation(std::vector<SignedEdge> items)
        : items_(std::move(items)) {
        std::vector<Edge> seen;
        seen.reserve(items_.size());
        for (auto& it : items_) {
            it.edge = make_edge(it.edge.u, it.edge.v);
            if (it.sign != 1 && it.sign != -1)
                throw std::invalid_argument(
                    "EdgePerturbation: sign must be +1 or -1");
            seen.push_back(it.edge);
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
            throw std::invalid_argument("EdgePerturbation: edge listed twice");
    }

    const std::vector<SignedEdge>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    int insertion_count() const {
        int k = 0;
        for (const auto& it : items_) k += (it.sign > 0);
        return k;
    }

private:
    std::vector<SignedEdge> items_;
};

inline void validate_against(const Graph& g, const EdgePerturbation& p) {
    for (const auto& it : p.items()) {
        if (it.edge.v >= g.node_count())
            throw std::invalid_argument(
                "perturbation: edge endpoint out of range");
        const bool present = g.has_edge(it.edge);
        if (it.sign < 0 && !present)
            throw std::invalid_argument(
                "perturbation: cannot delete an absent edge");
        if (it.sign > 0 && present)
            throw std::invalid_argument(
                "perturbation: cannot insert an existing edge");
    }
}

// Combinatorial Laplacian L = D - A.
inline Eigen::MatrixXd laplacian(const Graph& g) {
    const int n = g.node_count();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges()) {
        L(e.u, e.u) += 1.0;
        L(e.v, e.v) += 1.0;
        L(e.u, e.v) -= 1.0;
        L(e.v, e.u) -= 1.0;
    }
    return L;
}

// Edge-difference vector: +1 at one endpoint, -1 at the other, zero elsewhere.
inline Eigen::VectorXd edge_vector(Edge e, int n) {
    e = make_edge(e.u, e.v);
    if (e.v >= n)
        throw std::invalid_argument("edge_vector: endpoint out of range");
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a(e.u) = 1.0;
    a(e.v) = -1.0;
    return a;
}

// Perturbation matrix: the signed sum of rank-one edge terms.
inline Eigen::MatrixXd delta_laplacian(const EdgePerturbation& p, int n) {
    Eigen::MatrixXd dL = Eigen::MatrixXd::Zero(n, n);
    for (const auto& it : p.items()) {
        if (it.edge.v >= n)
            throw std::invalid_argument(
                "delta_laplacian: endpoint out of range");
        const double s = static_cast<double>(it.sign);
        dL(it.edge.u, it.edge.u) += s;
        dL(it.edge.v, it.edge.v) += s;
        dL(it.edge.u, it.edge.v) -= s;
        dL(it.edge.v, it.edge.u) -= s;
    }
    return dL;
}

inline Graph apply_perturbation(const Graph& g, const EdgePerturbation& p) {
    validate_against(g, p);
    std::vector<Edge> edges = g.edges();
    for (const auto& it : p.items()) {
        if (it.sign < 0) {
            edges.erase(std::find(edges.begin(), edges.end(), it.edge));
        } else {
            edges.push_back(it.edge);
        }
    }
    return Graph(g.node_count(), std::move(edges), g.community());
}

inline bool is_connected(const Graph& g) {
    const int n = g.node_count();
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : g.edges()) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int visited = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == n;
}

// All node pairs not present as edges; the insertion candidate pool.
inline std::vector<Edge> absent_edges(const Graph& g) {
    std::vector<Edge> out;
    for (int u = 0; u < g.node_count(); ++u)
        for (int v = u + 1; v < g.node_count(); ++v)
            if (!g.has_edge({u, v})) out.push_back({u, v});
    return out;
}

// JSON format: {"n": int, "edges": [[s,t],...], "community": [int,...]|null}
inline nlohmann::json graph_to_json(const Graph& g) {
    nlohmann::json j;
    j["n"] = g.node_count();
    auto& je = j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges()) je.push_back({e.u, e.v});
    if (g.community())
        j["community"] = *g.community();
    else
        j["community"] = nullptr;
    return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("n") || !j.contains("edges"))
        throw std::invalid_argument(
            "graph json: expected object with \"n\" and \"edges\"");
    const int n = j.at("n").get<int>();
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
        if (!je.is_array() || je.size() != 2)
            throw std::invalid_argument("graph json: edge must be a pair");
        edges.push_back({je.at(0).get<int>(), je.at(1).get<int>()});
    }
    std::optional<std::vector<int>> community;
    if (j.contains("community") && !j.at("community").is_null())
        community = j.at("community").get<std::vector<int>>();
    return Graph(n, std::move(edges), std::move(community));
}

inline Graph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    nlohmann::json j;
    in >> j;
    return graph_from_json(j);
}

inline void save_graph_file(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write graph file: " + path);
    out << graph_to_json(g).dump(2) << "\n";
}

}  // namespace gcnstab
