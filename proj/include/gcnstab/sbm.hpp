#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnstab/graph.hpp"
#include "gcnstab/rng.hpp"

namespace gcnstab {

inline constexpr int kSbmConnectRetries = 100;
inline constexpr int kPerturbationConnectRetries = 1000;

struct SbmParams {
    std::vector<int> communities{15, 15};
    double p_intra = 0.7;
    double p_inter = 0.08;
    std::uint64_t seed = 0;
    bool require_connected = true;
};

struct PerturbationPolicy {
    enum class Mode { fixed_count_delete, bernoulli_all_edges, cluster_mix };

    Mode mode = Mode::fixed_count_delete;
    int count = 0;
    double prob = 0.0;
    double intra_fraction = 0.0;
    // bernoulli mode only: also offer every absent edge as an insertion
    // candidate with the same probability.
    bool include_insertions = false;
    bool require_connected = false;
};

inline const char* policy_mode_name(PerturbationPolicy::Mode m) {
    switch (m) {
        case PerturbationPolicy::Mode::fixed_count_delete:
            return "fixed-count-delete";
        case PerturbationPolicy::Mode::bernoulli_all_edges:
            return "bernoulli-all-edges";
        case PerturbationPolicy::Mode::cluster_mix:
            return "cluster-mix";
    }
    return "fixed-count-delete";
}

inline PerturbationPolicy::Mode policy_mode_from_name(const std::string& s) {
    if (s == "fixed-count-delete")
        return PerturbationPolicy::Mode::fixed_count_delete;
    if (s == "bernoulli-all-edges")
        return PerturbationPolicy::Mode::bernoulli_all_edges;
    if (s == "cluster-mix") return PerturbationPolicy::Mode::cluster_mix;
    throw std::invalid_argument("unknown perturbation mode: " + s);
}

namespace detail {

inline void validate_sbm_params(const SbmParams& params) {
    if (params.communities.empty())
        throw std::invalid_argument("SbmParams: need at least one community");
    for (int size : params.communities)
        if (size < 1)
            throw std::invalid_argument("SbmParams: community sizes must be >= 1");
    if (params.p_intra < 0.0 || params.p_intra > 1.0 || params.p_inter < 0.0 ||
        params.p_inter > 1.0)
        throw std::invalid_argument("SbmParams: probabilities must be in [0, 1]");
}

inline Graph sample_sbm_once(const SbmParams& params, Rng& rng) {
    std::vector<int> community;
    for (int c = 0; c < static_cast<int>(params.communities.size()); ++c)
        for (int k = 0; k < params.communities[c]; ++k) community.push_back(c);
    const int n = static_cast<int>(community.size());

    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p =
                community[i] == community[j] ? params.p_intra : params.p_inter;
            if (rng.bernoulli(p)) edges.push_back(Edge{i, j});
        }
    }
    return Graph(n, std::move(edges), std::move(community));
}

}  // namespace detail

// Each intra-community pair becomes an edge with p_intra, each cross pair
// with p_inter. With require_connected, disconnected samples are thrown away
// and redrawn, up to kSbmConnectRetries.
inline Graph generate_sbm(const SbmParams& params) {
    detail::validate_sbm_params(params);
    Rng rng(params.seed);
    for (int attempt = 0; attempt < kSbmConnectRetries; ++attempt) {
        Graph g = detail::sample_sbm_once(params, rng);
        if (!params.require_connected || is_connected(g)) return g;
    }
    throw std::runtime_error(
        "generate_sbm: no connected sample in 100 attempts");
}

inline bool is_intra_edge(const Graph& g, Edge e) {
    const auto& community = g.community();
    if (!community)
        throw std::invalid_argument("is_intra_edge: graph has no communities");
    return (*community)[e.u] == (*community)[e.v];
}

// Existing edges split by community side; requires labels.
inline std::vector<Edge> intra_edges(const Graph& g) {
    std::vector<Edge> out;
    for (const Edge& e : g.edges())
        if (is_intra_edge(g, e)) out.push_back(e);
    return out;
}

inline std::vector<Edge> inter_edges(const Graph& g) {
    std::vector<Edge> out;
    for (const Edge& e : g.edges())
        if (!is_intra_edge(g, e)) out.push_back(e);
    return out;
}

namespace detail {

inline std::vector<SignedEdge> pick_deletions(const std::vector<Edge>& pool,
                                              int count, Rng& rng,
                                              const char* what) {
    if (count > static_cast<int>(pool.size()))
        throw std::invalid_argument(std::string("sample_perturbation: ") + what +
                                    " count exceeds pool size");
    std::vector<SignedEdge> out;
    for (std::size_t idx :
         rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(count)))
        out.push_back(SignedEdge{pool[idx], -1});
    return out;
}

inline EdgePerturbation sample_perturbation_once(const Graph& g,
                                                 const PerturbationPolicy& policy,
                                                 Rng& rng) {
    std::vector<SignedEdge> items;
    switch (policy.mode) {
        case PerturbationPolicy::Mode::fixed_count_delete: {
            items = pick_deletions(g.edges(), policy.count, rng, "deletion");
            break;
        }
        case PerturbationPolicy::Mode::bernoulli_all_edges: {
            for (const Edge& e : g.edges())
                if (rng.bernoulli(policy.prob)) items.push_back(SignedEdge{e, -1});
            if (policy.include_insertions)
                for (const Edge& e : absent_edges(g))
                    if (rng.bernoulli(policy.prob))
                        items.push_back(SignedEdge{e, +1});
            break;
        }
        case PerturbationPolicy::Mode::cluster_mix: {
            const int intra_count =
                static_cast<int>(std::lround(policy.intra_fraction * policy.count));
            const int inter_count = policy.count - intra_count;
            items = pick_deletions(intra_edges(g), intra_count, rng, "intra");
            for (SignedEdge& se :
                 pick_deletions(inter_edges(g), inter_count, rng, "inter"))
                items.push_back(se);
            break;
        }
    }
    return EdgePerturbation(std::move(items));
}

}  // namespace detail

// Draws one perturbation under the policy. Connectivity, when required, is
// enforced by redrawing the whole perturbation (kPerturbationConnectRetries
// attempts), which keeps per-edge marginals close to nominal.
inline EdgePerturbation sample_perturbation(const Graph& g,
                                            const PerturbationPolicy& policy,
                                            std::uint64_t seed) {
    if (policy.mode == PerturbationPolicy::Mode::cluster_mix) {
        if (!g.community())
            throw std::invalid_argument(
                "sample_perturbation: cluster-mix needs community labels");
        if (policy.intra_fraction < 0.0 || policy.intra_fraction > 1.0)
            throw std::invalid_argument(
                "sample_perturbation: intra_fraction must be in [0, 1]");
    }
    if (policy.mode == PerturbationPolicy::Mode::bernoulli_all_edges &&
        (policy.prob < 0.0 || policy.prob > 1.0))
        throw std::invalid_argument(
            "sample_perturbation: probability must be in [0, 1]");
    if (policy.count < 0)
        throw std::invalid_argument("sample_perturbation: negative count");

    Rng rng(seed);
    for (int attempt = 0; attempt < kPerturbationConnectRetries; ++attempt) {
        EdgePerturbation p = detail::sample_perturbation_once(g, policy, rng);
        if (!policy.require_connected || is_connected(apply_perturbation(g, p)))
            return p;
    }
    throw std::runtime_error(
        "sample_perturbation: no connectivity-preserving sample in 1000 "
        "attempts");
}

// Number of edges whose endpoints lie in different communities.
inline int cut_size(const Graph& g) {
    if (!g.community())
        throw std::invalid_argument("cut_size: graph has no communities");
    int cut = 0;
    for (const Edge& e : g.edges())
        if (!is_intra_edge(g, e)) ++cut;
    return cut;
}

// i.i.d. standard normal node features; callers derive labels from the raw
// values and normalize before feeding the GCN.
inline Eigen::VectorXd sample_raw_features(int n, Rng& rng) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.normal();
    return x;
}

}  // namespace gcnstab
