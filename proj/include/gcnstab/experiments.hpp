#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcnstab/bounds.hpp"
#include "gcnstab/config.hpp"
#include "gcnstab/gcn.hpp"
#include "gcnstab/graph.hpp"
#include "gcnstab/manifest.hpp"
#include "gcnstab/parallel.hpp"
#include "gcnstab/rng.hpp"
#include "gcnstab/sbm.hpp"
#include "gcnstab/spectral.hpp"
#include "gcnstab/training.hpp"

namespace gcnstab {

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string to_csv() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            out += columns[i];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += detail::format_double(row[i]);
            }
            out += '\n';
        }
        return out;
    }

    bool operator==(const ResultTable&) const = default;
};

struct RunResult {
    ResultTable table;
    nlohmann::json report;
    // Extra artifacts written next to results.csv, keyed by file name.
    std::map<std::string, std::string> extra_files;
};

namespace detail {

struct MeanStats {
    double mean = 0.0;
    double se = 0.0;
    int n = 0;
};

inline MeanStats mean_stats(const std::vector<double>& v) {
    MeanStats s;
    s.n = static_cast<int>(v.size());
    if (s.n == 0) return s;
    s.mean = pairwise_sum(v) / s.n;
    if (s.n < 2) return s;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - s.mean;
        sq[i] = d * d;
    }
    s.se = std::sqrt(pairwise_sum(sq) / (s.n - 1) / s.n);
    return s;
}

inline int edge_index(const std::vector<Edge>& sorted_edges, Edge e) {
    const auto it =
        std::lower_bound(sorted_edges.begin(), sorted_edges.end(), e);
    if (it == sorted_edges.end() || !(*it == e))
        throw std::logic_error("edge_index: edge not in list");
    return static_cast<int>(it - sorted_edges.begin());
}

// One SBM graph with its decomposition, a node classifier trained on its own
// feature realization, and per-edge bound terms for every candidate edge.
struct PreparedGraph {
    Graph graph{1, {}};
    Eigen::MatrixXd L;
    SpectralDecomposition sd;
    GcnLayer layer;
    double C_L = 0.0;
    double C = 0.0;
    double final_loss = 0.0;
    std::uint64_t graph_seed = 0;
    std::vector<PerEdgeTerms> del_ap;
    std::vector<PerEdgeTerms> del_gw;
    std::vector<Edge> absent;
    std::vector<PerEdgeTerms> ins_ap;
    std::vector<PerEdgeTerms> ins_gw;
    bool have_gw = true;
};

inline PreparedGraph prepare_trained_graph(const ExperimentConfig& cfg, int g,
                                           bool with_insertions) {
    PreparedGraph pg;
    pg.graph_seed = derive_seed(cfg.seed, streams::kGraph, g);

    SbmParams params;
    params.communities = cfg.graph.communities;
    params.p_intra = cfg.graph.p_intra;
    params.p_inter = cfg.graph.p_inter;
    params.seed = pg.graph_seed;
    params.require_connected = true;
    pg.graph = generate_sbm(params);
    pg.L = laplacian(pg.graph);
    pg.sd = eigendecompose(pg.L);

    Rng feature_rng(derive_seed(cfg.seed, streams::kTrainFeatures, g));
    const LabeledNodeTask task = make_node_task(
        pg.graph, sample_raw_features(pg.graph.node_count(), feature_rng));
    TrainConfig tc;
    tc.learning_rate = cfg.train.learning_rate;
    tc.epochs = cfg.train.epochs;
    tc.filter_degree = cfg.model.degree;
    tc.nonlinearity = Nonlinearity::from_name(cfg.model.nonlinearity);
    TrainResult tr = train_node_classifier(task, tc);
    pg.layer = tr.layer;
    pg.final_loss = tr.losses.back();

    if (with_insertions) pg.absent = absent_edges(pg.graph);
    pg.C_L = lipschitz_constant(pg.layer.filter, pg.sd.lambda_max(),
                                static_cast<int>(pg.absent.size()));
    pg.C = pg.layer.nonlinearity.lipschitz * pg.C_L;

    for (const Edge& e : pg.graph.edges())
        pg.del_ap.push_back(
            per_edge_terms(pg.sd, e, -1, BoundVariant::as_printed));
    for (const Edge& e : pg.absent)
        pg.ins_ap.push_back(
            per_edge_terms(pg.sd, e, +1, BoundVariant::as_printed));
    try {
        for (const Edge& e : pg.graph.edges())
            pg.del_gw.push_back(per_edge_terms(
                pg.sd, e, -1, BoundVariant::gap_weighted, cfg.gap_tol));
        for (const Edge& e : pg.absent)
            pg.ins_gw.push_back(per_edge_terms(
                pg.sd, e, +1, BoundVariant::gap_weighted, cfg.gap_tol));
    } catch (const DegenerateSpectrumError&) {
        pg.have_gw = false;
        pg.del_gw.clear();
        pg.ins_gw.clear();
    }
    return pg;
}

// Sum of per-edge contributions C * (lambda_term + N * vector_term) for a
// realized perturbation, by table lookup.
inline double bound_from_terms(const PreparedGraph& pg,
                               const EdgePerturbation& p,
                               const std::vector<PerEdgeTerms>& del_terms,
                               const std::vector<PerEdgeTerms>& ins_terms) {
    const int N = pg.graph.node_count();
    double total = 0.0;
    for (const SignedEdge& se : p.items()) {
        const PerEdgeTerms& t =
            se.sign < 0
                ? del_terms[edge_index(pg.graph.edges(), se.edge)]
                : ins_terms[edge_index(pg.absent, se.edge)];
        total += pg.C * (t.lambda_term + N * t.vector_term);
    }
    return total;
}

inline nlohmann::json prepared_graph_json(const PreparedGraph& pg) {
    return nlohmann::json{{"seed", pg.graph_seed},
                          {"nodes", pg.graph.node_count()},
                          {"edges", pg.graph.edge_count()},
                          {"lambda_max", pg.sd.lambda_max()},
                          {"C_L", pg.C_L},
                          {"C", pg.C},
                          {"final_loss", pg.final_loss},
                          {"coeffs", pg.layer.filter.coeffs},
                          {"have_gap_weighted", pg.have_gw}};
}

}  // namespace detail

// Deletion sweep: for k = 1..max_edges, exact output distances of trained
// node classifiers against the Theorem 1 bound computed from unperturbed
// spectra only, plus the labeled naive baseline.
inline RunResult run_fig1(const ExperimentConfig& cfg) {
    const int G = cfg.fig1.graphs;
    const int T = cfg.fig1.trials;
    const int Kmax = cfg.fig1.max_edges;
    const bool active_gw = cfg.bound_variant == BoundVariant::gap_weighted;

    RunResult out;
    out.table.columns = {"k",          "trials",     "mean_distance",
                         "se_distance", "mean_bound", "se_bound",
                         "mean_bound_alt", "mean_baseline", "violations",
                         "degenerate_skips"};

    std::vector<detail::PreparedGraph> graphs(G);
    parallel_for(G, [&](int g) {
        graphs[g] = detail::prepare_trained_graph(cfg, g, false);
    });

    struct Trial {
        double dist = 0.0;
        double bound = 0.0;
        double bound_alt = 0.0;
        double baseline = 0.0;
        bool have_alt = false;
        bool skipped = false;
    };

    int tight_k1_count = 0;
    int tight_k1_total = 0;

    if (Kmax == 0) {
        out.table.rows.push_back(std::vector<double>(10, 0.0));
    } else {
        const int per_k = G * T;
        std::vector<Trial> slots(static_cast<std::size_t>(Kmax) * per_k);
        parallel_for(Kmax * per_k, [&](int idx) {
            const int k = idx / per_k + 1;
            const int rem = idx % per_k;
            const int g = rem / T;
            const int t = rem % T;
            const detail::PreparedGraph& pg = graphs[g];
            Trial& s = slots[idx];
            if ((active_gw && !pg.have_gw) || k > pg.graph.edge_count()) {
                s.skipped = true;
                return;
            }
            PerturbationPolicy policy;
            policy.mode = PerturbationPolicy::Mode::fixed_count_delete;
            policy.count = k;
            const EdgePerturbation p = sample_perturbation(
                pg.graph, policy,
                derive_seed(cfg.seed, streams::kPerturbation, g, k, t));

            Rng xrng(derive_seed(cfg.seed, streams::kFeatures, g, k, t));
            const Eigen::VectorXd x =
                sample_raw_features(pg.graph.node_count(), xrng);
            const Eigen::MatrixXd Lt = laplacian(apply_perturbation(pg.graph, p));
            s.dist = output_distance(pg.layer, pg.L, Lt, x);

            const double ap =
                detail::bound_from_terms(pg, p, pg.del_ap, pg.ins_ap);
            double gw = 0.0;
            if (pg.have_gw)
                gw = detail::bound_from_terms(pg, p, pg.del_gw, pg.ins_gw);
            s.bound = active_gw ? gw : ap;
            s.bound_alt = active_gw ? ap : gw;
            s.have_alt = active_gw || pg.have_gw;
            s.baseline = naive_baseline_bound(
                delta_laplacian(p, pg.graph.node_count()), pg.C_L,
                pg.layer.nonlinearity.lipschitz);
        });

        for (int k = 1; k <= Kmax; ++k) {
            std::vector<double> dist, bound, bound_alt, baseline;
            int violations = 0;
            int skipped = 0;
            for (int i = 0; i < per_k; ++i) {
                const Trial& s = slots[static_cast<std::size_t>(k - 1) * per_k + i];
                if (s.skipped) {
                    ++skipped;
                    continue;
                }
                dist.push_back(s.dist);
                bound.push_back(s.bound);
                baseline.push_back(s.baseline);
                if (s.have_alt) bound_alt.push_back(s.bound_alt);
                if (s.dist > s.bound) ++violations;
                if (k == 1) {
                    ++tight_k1_total;
                    if (s.bound <= s.baseline) ++tight_k1_count;
                }
            }
            const auto d = detail::mean_stats(dist);
            const auto b = detail::mean_stats(bound);
            const auto alt = detail::mean_stats(bound_alt);
            const auto base = detail::mean_stats(baseline);
            out.table.rows.push_back({static_cast<double>(k),
                                      static_cast<double>(d.n), d.mean, d.se,
                                      b.mean, b.se, alt.mean, base.mean,
                                      static_cast<double>(violations),
                                      static_cast<double>(skipped)});
        }
    }

    nlohmann::json graph_info = nlohmann::json::array();
    int gw_missing = 0;
    for (const auto& pg : graphs) {
        graph_info.push_back(detail::prepared_graph_json(pg));
        if (!pg.have_gw) ++gw_missing;
    }
    out.report = {
        {"experiment", "fig1"},
        {"bound_variant", bound_variant_name(cfg.bound_variant)},
        {"alt_variant", bound_variant_name(active_gw ? BoundVariant::as_printed
                                                     : BoundVariant::gap_weighted)},
        {"baseline_label", kBaselineLabel},
        {"graphs", std::move(graph_info)},
        {"gap_weighted_unavailable_graphs", gw_missing},
        {"tightness_vs_baseline_k1",
         {{"count", tight_k1_count},
          {"total", tight_k1_total},
          {"fraction", tight_k1_total == 0
                           ? 0.0
                           : static_cast<double>(tight_k1_count) /
                                 tight_k1_total}}}};
    return out;
}

// Probability sweep: Monte Carlo distances under Bernoulli edge perturbation
// (connectivity preserved) against the closed-form expected bound.
inline RunResult run_fig2(const ExperimentConfig& cfg) {
    const int G = cfg.fig2.graphs;
    const int T = cfg.fig2.trials;
    const auto& probs = cfg.fig2.probabilities;
    const int P = static_cast<int>(probs.size());
    const bool insertions = cfg.fig2.include_insertions;
    const bool active_gw = cfg.bound_variant == BoundVariant::gap_weighted;

    RunResult out;
    out.table.columns = {"p", "trials", "mean_distance", "se_distance",
                         "expected_bound", "expected_bound_alt",
                         "mean_trial_bound", "mean_baseline", "violations",
                         "degenerate_skips", "realized_deletion_rate"};

    std::vector<detail::PreparedGraph> graphs(G);
    parallel_for(G, [&](int g) {
        graphs[g] = detail::prepare_trained_graph(cfg, g, insertions);
    });

    // Closed-form expected bound per graph: sum over the candidate set of
    // p * C * (lambda_term + N * vector_term).
    const auto closed_form = [&](const detail::PreparedGraph& pg, double p,
                                 bool gw) {
        const auto& del = gw ? pg.del_gw : pg.del_ap;
        const auto& ins = gw ? pg.ins_gw : pg.ins_ap;
        const int N = pg.graph.node_count();
        double total = 0.0;
        for (const PerEdgeTerms& t : del)
            total += pg.C * (t.lambda_term + N * t.vector_term);
        for (const PerEdgeTerms& t : ins)
            total += pg.C * (t.lambda_term + N * t.vector_term);
        return p * total;
    };

    struct Trial {
        double dist = 0.0;
        double bound = 0.0;
        double baseline = 0.0;
        int deleted = 0;
        int candidates = 0;
        bool skipped = false;
    };

    const int per_p = G * T;
    std::vector<Trial> slots(static_cast<std::size_t>(P) * per_p);
    parallel_for(P * per_p, [&](int idx) {
        const int pi = idx / per_p;
        const int rem = idx % per_p;
        const int g = rem / T;
        const int t = rem % T;
        const detail::PreparedGraph& pg = graphs[g];
        Trial& s = slots[idx];
        if (active_gw && !pg.have_gw) {
            s.skipped = true;
            return;
        }
        PerturbationPolicy policy;
        policy.mode = PerturbationPolicy::Mode::bernoulli_all_edges;
        policy.prob = probs[pi];
        policy.include_insertions = insertions;
        policy.require_connected = true;
        const EdgePerturbation p = sample_perturbation(
            pg.graph, policy,
            derive_seed(cfg.seed, streams::kPerturbation, g, pi, t));

        Rng xrng(derive_seed(cfg.seed, streams::kFeatures, g, pi, t));
        const Eigen::VectorXd x =
            sample_raw_features(pg.graph.node_count(), xrng);
        const Eigen::MatrixXd Lt = laplacian(apply_perturbation(pg.graph, p));
        s.dist = output_distance(pg.layer, pg.L, Lt, x);
        s.bound = active_gw
                      ? detail::bound_from_terms(pg, p, pg.del_gw, pg.ins_gw)
                      : detail::bound_from_terms(pg, p, pg.del_ap, pg.ins_ap);
        s.baseline = naive_baseline_bound(
            delta_laplacian(p, pg.graph.node_count()), pg.C_L,
            pg.layer.nonlinearity.lipschitz);
        for (const SignedEdge& se : p.items())
            if (se.sign < 0) ++s.deleted;
        s.candidates = pg.graph.edge_count() +
                       static_cast<int>(pg.absent.size());
    });

    for (int pi = 0; pi < P; ++pi) {
        std::vector<double> dist, bound, baseline;
        long long deleted = 0;
        long long candidates = 0;
        int violations = 0;
        int skipped = 0;
        for (int i = 0; i < per_p; ++i) {
            const Trial& s = slots[static_cast<std::size_t>(pi) * per_p + i];
            if (s.skipped) {
                ++skipped;
                continue;
            }
            dist.push_back(s.dist);
            bound.push_back(s.bound);
            baseline.push_back(s.baseline);
            deleted += s.deleted;
            candidates += s.candidates;
            if (s.dist > s.bound) ++violations;
        }
        std::vector<double> expected, expected_alt;
        for (const auto& pg : graphs) {
            if (active_gw) {
                if (pg.have_gw) expected.push_back(closed_form(pg, probs[pi], true));
                expected_alt.push_back(closed_form(pg, probs[pi], false));
            } else {
                expected.push_back(closed_form(pg, probs[pi], false));
                if (pg.have_gw)
                    expected_alt.push_back(closed_form(pg, probs[pi], true));
            }
        }
        const auto d = detail::mean_stats(dist);
        const auto tb = detail::mean_stats(bound);
        const auto base = detail::mean_stats(baseline);
        const auto eb = detail::mean_stats(expected);
        const auto eba = detail::mean_stats(expected_alt);
        out.table.rows.push_back(
            {probs[pi], static_cast<double>(d.n), d.mean, d.se, eb.mean,
             eba.mean, tb.mean, base.mean, static_cast<double>(violations),
             static_cast<double>(skipped),
             candidates == 0 ? 0.0
                             : static_cast<double>(deleted) / candidates});
    }

    nlohmann::json graph_info = nlohmann::json::array();
    int gw_missing = 0;
    for (const auto& pg : graphs) {
        graph_info.push_back(detail::prepared_graph_json(pg));
        if (!pg.have_gw) ++gw_missing;
    }
    out.report = {
        {"experiment", "fig2"},
        {"bound_variant", bound_variant_name(cfg.bound_variant)},
        {"alt_variant", bound_variant_name(active_gw ? BoundVariant::as_printed
                                                     : BoundVariant::gap_weighted)},
        {"baseline_label", kBaselineLabel},
        {"include_insertions", insertions},
        {"graphs", std::move(graph_info)},
        {"gap_weighted_unavailable_graphs", gw_missing},
        {"note",
         "realized deletion rates sit slightly below nominal p because "
         "disconnecting perturbations are redrawn"}};
    return out;
}

// Tail check at one policy: B is the closed-form expected bound of graph 0,
// the empirical exceedance P(distance > B + t) is measured over fresh
// Bernoulli perturbations and feature draws.
struct TailPoint {
    double t = 0.0;
    double threshold = 0.0;
    int exceed = 0;
    double empirical = 0.0;
    double se3 = 0.0;
    bool pass = false;
};

struct TailCheck {
    double prob = 0.0;
    int trials = 0;
    double B = 0.0;
    TailPoint at_B;
    TailPoint at_2B;
};

inline TailCheck run_tail_check(const ExperimentConfig& cfg, double prob,
                                int trials) {
    TailCheck out;
    out.prob = prob;
    out.trials = trials;

    const detail::PreparedGraph pg = detail::prepare_trained_graph(cfg, 0, false);
    const int N = pg.graph.node_count();
    double total = 0.0;
    for (const PerEdgeTerms& t : pg.del_ap)
        total += pg.C * (t.lambda_term + N * t.vector_term);
    out.B = prob * total;

    std::vector<double> dist(trials);
    parallel_for(trials, [&](int t) {
        PerturbationPolicy policy;
        policy.mode = PerturbationPolicy::Mode::bernoulli_all_edges;
        policy.prob = prob;
        policy.require_connected = true;
        const EdgePerturbation p = sample_perturbation(
            pg.graph, policy, derive_seed(cfg.seed, streams::kTail, 0, t));
        Rng xrng(derive_seed(cfg.seed, streams::kTail, 1, t));
        const Eigen::VectorXd x = sample_raw_features(N, xrng);
        dist[t] =
            output_distance(pg.layer, pg.L,
                            laplacian(apply_perturbation(pg.graph, p)), x);
    });

    const auto point = [&](double t_offset) {
        TailPoint pt;
        pt.t = t_offset;
        pt.threshold = hoeffding_tail(out.B, t_offset);
        for (double d : dist)
            if (d > out.B + t_offset) ++pt.exceed;
        pt.empirical = static_cast<double>(pt.exceed) / trials;
        pt.se3 = 3.0 * std::sqrt(pt.threshold * (1.0 - pt.threshold) / trials);
        pt.pass = pt.empirical <= pt.threshold + pt.se3;
        return pt;
    };
    out.at_B = point(out.B);
    out.at_2B = point(2.0 * out.B);
    return out;
}

inline nlohmann::json tail_check_to_json(const TailCheck& tc) {
    const auto point_json = [](const TailPoint& p) {
        return nlohmann::json{{"t", p.t},         {"threshold", p.threshold},
                              {"exceed", p.exceed}, {"empirical", p.empirical},
                              {"three_se", p.se3},  {"pass", p.pass}};
    };
    return nlohmann::json{{"prob", tc.prob},
                          {"trials", tc.trials},
                          {"B", tc.B},
                          {"at_B", point_json(tc.at_B)},
                          {"at_2B", point_json(tc.at_2B)}};
}

// Node features for one graph under a fig3 feature scheme. Graph-derived
// schemes (degree, fiedler) are recomputed from whatever graph is being
// evaluated; fixed-gaussian takes the dataset-shared vector.
inline Eigen::VectorXd scheme_features(const std::string& scheme,
                                       const Graph& g,
                                       const Eigen::VectorXd& shared) {
    const int n = g.node_count();
    if (scheme == "constant")
        return Eigen::VectorXd::Constant(
            n, 1.0 / std::sqrt(static_cast<double>(n)));
    if (scheme == "fixed-gaussian") {
        if (shared.size() != n)
            throw std::invalid_argument(
                "scheme_features: shared vector length mismatch");
        return shared;
    }
    if (scheme == "degree") {
        Eigen::VectorXd deg = laplacian(g).diagonal();
        const double norm = deg.norm();
        if (norm == 0.0)
            return Eigen::VectorXd::Constant(
                n, 1.0 / std::sqrt(static_cast<double>(n)));
        return deg / norm;
    }
    if (scheme == "fiedler") {
        if (n < 2)
            throw std::invalid_argument(
                "scheme_features: fiedler needs at least two nodes");
        return eigendecompose(laplacian(g)).eigenvectors.col(1);
    }
    throw std::invalid_argument("scheme_features: unknown scheme " + scheme);
}

// Cut-size classification dataset: SBM graphs labeled by whether their cut
// exceeds the dataset median, indexed split, features per the config scheme.
struct Fig3Dataset {
    LabeledGraphTask task;
    double median_cut = 0.0;
    nlohmann::json meta;
};

inline Fig3Dataset build_cut_dataset(const ExperimentConfig& cfg) {
    const int total = cfg.fig3.train_graphs + cfg.fig3.test_graphs;
    Fig3Dataset ds;
    ds.task.instances.resize(total);
    std::vector<std::uint64_t> seeds(total);

    parallel_for(total, [&](int d) {
        SbmParams params;
        params.communities = cfg.graph.communities;
        params.p_intra = cfg.graph.p_intra;
        params.p_inter = cfg.graph.p_inter;
        params.seed = derive_seed(cfg.seed, streams::kDataset, d);
        params.require_connected = true;
        seeds[d] = params.seed;
        Graph g = generate_sbm(params);
        GraphInstance& inst = ds.task.instances[d];
        inst.cut = cut_size(g);
        inst.graph = std::move(g);
    });

    std::vector<double> cuts;
    for (const auto& inst : ds.task.instances)
        cuts.push_back(static_cast<double>(inst.cut));
    std::vector<double> sorted = cuts;
    std::sort(sorted.begin(), sorted.end());
    ds.median_cut = total % 2 == 1
                        ? sorted[total / 2]
                        : 0.5 * (sorted[total / 2 - 1] + sorted[total / 2]);

    const int n = ds.task.instances.front().graph.node_count();
    Eigen::VectorXd shared;
    if (cfg.fig3.feature_scheme == "fixed-gaussian") {
        Rng rng(derive_seed(cfg.seed, streams::kFeatures, 0));
        shared = sample_raw_features(n, rng);
        shared /= shared.norm();
    }
    for (auto& inst : ds.task.instances) {
        inst.label = inst.cut > ds.median_cut ? 1 : 0;
        inst.features =
            scheme_features(cfg.fig3.feature_scheme, inst.graph, shared);
    }
    for (int d = 0; d < cfg.fig3.train_graphs; ++d)
        ds.task.train_idx.push_back(d);
    for (int d = cfg.fig3.train_graphs; d < total; ++d)
        ds.task.test_idx.push_back(d);

    int positives = 0;
    nlohmann::json instances = nlohmann::json::array();
    for (int d = 0; d < total; ++d) {
        const auto& inst = ds.task.instances[d];
        positives += inst.label;
        instances.push_back({{"seed", seeds[d]},
                             {"cut", inst.cut},
                             {"label", inst.label},
                             {"split", d < cfg.fig3.train_graphs ? "train"
                                                                 : "test"}});
    }
    ds.meta = {{"median_cut", ds.median_cut},
               {"positives", positives},
               {"total", total},
               {"feature_scheme", cfg.fig3.feature_scheme},
               {"instances", std::move(instances)}};
    return ds;
}

// Accuracy-under-perturbation curves for the four cluster-mix policies, with
// per-policy mean bounds computed from unperturbed test spectra.
inline RunResult run_fig3(const ExperimentConfig& cfg) {
    const bool active_gw = cfg.bound_variant == BoundVariant::gap_weighted;
    Fig3Dataset ds = build_cut_dataset(cfg);

    TrainConfig tc;
    tc.learning_rate = cfg.train.learning_rate;
    tc.epochs = cfg.train.epochs;
    tc.filter_degree = cfg.model.degree;
    tc.nonlinearity = Nonlinearity::from_name(cfg.model.nonlinearity);
    tc.readout = readout_from_name(cfg.fig3.readout);
    TrainResult tr = train_graph_classifier(ds.task, tc);

    const AccuracyReport unperturbed =
        evaluate_accuracy(tr.layer, ds.task, nullptr, 1, 0, tc.readout, tr.bias);
    int train_hits = 0;
    for (int idx : ds.task.train_idx) {
        const GraphInstance& inst = ds.task.instances[idx];
        if (predict_graph_label(tr.layer, laplacian(inst.graph), inst.features,
                                tc.readout, tr.bias) == inst.label)
            ++train_hits;
    }
    const double train_accuracy =
        static_cast<double>(train_hits) / ds.task.train_idx.size();

    struct TestCtx {
        const GraphInstance* inst = nullptr;
        Eigen::MatrixXd L;
        SpectralDecomposition sd;
        double C = 0.0;
        std::vector<PerEdgeTerms> ap;
        std::vector<PerEdgeTerms> gw;
        bool have_gw = true;
        std::vector<Edge> intra;
        std::vector<Edge> inter;
    };
    const int TG = static_cast<int>(ds.task.test_idx.size());
    std::vector<TestCtx> ctx(TG);
    parallel_for(TG, [&](int j) {
        TestCtx& c = ctx[j];
        c.inst = &ds.task.instances[ds.task.test_idx[j]];
        c.L = laplacian(c.inst->graph);
        c.sd = eigendecompose(c.L);
        const double C_L =
            lipschitz_constant(tr.layer.filter, c.sd.lambda_max(), 0);
        c.C = tr.layer.nonlinearity.lipschitz * C_L;
        for (const Edge& e : c.inst->graph.edges())
            c.ap.push_back(per_edge_terms(c.sd, e, -1, BoundVariant::as_printed));
        try {
            for (const Edge& e : c.inst->graph.edges())
                c.gw.push_back(per_edge_terms(
                    c.sd, e, -1, BoundVariant::gap_weighted, cfg.gap_tol));
        } catch (const DegenerateSpectrumError&) {
            c.have_gw = false;
            c.gw.clear();
        }
        c.intra = intra_edges(c.inst->graph);
        c.inter = inter_edges(c.inst->graph);
    });

    struct PolicyDef {
        const char* name;
        double intra_fraction;
    };
    const PolicyDef policies[] = {{"intra-only", 1.0},
                                  {"mixed-2-3", 2.0 / 3.0},
                                  {"mixed-1-3", 1.0 / 3.0},
                                  {"inter-only", 0.0}};
    const int NP = 4;
    const int Kmax = cfg.fig3.max_edges;

    RunResult out;
    out.table.columns = {"k",        "intra_fraction", "trials",
                         "accuracy", "wilson_low",     "wilson_high",
                         "mean_bound", "mean_bound_alt", "skipped"};

    struct Row {
        int done = 0;
        int hits = 0;
        int skipped = 0;
        std::vector<double> bound;
        std::vector<double> bound_alt;
    };
    const int n_rows = NP * (Kmax + 1);
    std::vector<Row> rows(n_rows);
    parallel_for(n_rows, [&](int r) {
        const int pi = r / (Kmax + 1);
        const int k = r % (Kmax + 1);
        const double frac = policies[pi].intra_fraction;
        const int rounds = k == 0 ? 1 : cfg.fig3.trials;
        Row& row = rows[r];
        for (int t = 0; t < rounds; ++t) {
            for (int j = 0; j < TG; ++j) {
                const TestCtx& c = ctx[j];
                const int want_intra =
                    static_cast<int>(std::lround(frac * k));
                const int want_inter = k - want_intra;
                if (want_intra > static_cast<int>(c.intra.size()) ||
                    want_inter > static_cast<int>(c.inter.size()) ||
                    (active_gw && !c.have_gw)) {
                    ++row.skipped;
                    continue;
                }
                PerturbationPolicy policy;
                policy.mode = PerturbationPolicy::Mode::cluster_mix;
                policy.count = k;
                policy.intra_fraction = frac;
                const EdgePerturbation p = sample_perturbation(
                    c.inst->graph, policy,
                    derive_seed(cfg.seed, streams::kEvalPerturbation,
                                static_cast<std::uint64_t>(pi), k,
                                static_cast<std::uint64_t>(t) * 1000003ULL + j));
                const Graph gt = apply_perturbation(c.inst->graph, p);
                const Eigen::MatrixXd Lt = laplacian(gt);
                const int pred = predict_graph_label(
                    tr.layer, Lt,
                    scheme_features(cfg.fig3.feature_scheme, gt,
                                    c.inst->features),
                    tc.readout, tr.bias);
                ++row.done;
                if (pred == c.inst->label) ++row.hits;

                const int N = c.inst->graph.node_count();
                double ap = 0.0, gw = 0.0;
                for (const SignedEdge& se : p.items()) {
                    const int ei =
                        detail::edge_index(c.inst->graph.edges(), se.edge);
                    ap += c.C * (c.ap[ei].lambda_term + N * c.ap[ei].vector_term);
                    if (c.have_gw)
                        gw += c.C *
                              (c.gw[ei].lambda_term + N * c.gw[ei].vector_term);
                }
                row.bound.push_back(active_gw ? gw : ap);
                if (active_gw || c.have_gw)
                    row.bound_alt.push_back(active_gw ? ap : gw);
            }
        }
    });

    for (int r = 0; r < n_rows; ++r) {
        const int pi = r / (Kmax + 1);
        const int k = r % (Kmax + 1);
        const Row& row = rows[r];
        double acc = 0.0;
        Wilson ci{0.0, 1.0};
        if (row.done > 0) {
            acc = static_cast<double>(row.hits) / row.done;
            ci = wilson_interval(row.hits, row.done);
        }
        out.table.rows.push_back({static_cast<double>(k),
                                  policies[pi].intra_fraction,
                                  static_cast<double>(row.done), acc, ci.low,
                                  ci.high, detail::mean_stats(row.bound).mean,
                                  detail::mean_stats(row.bound_alt).mean,
                                  static_cast<double>(row.skipped)});
    }

    std::string log = "epoch,loss\n";
    for (std::size_t e = 0; e < tr.losses.size(); ++e)
        log += std::to_string(e) + "," + detail::format_double(tr.losses[e]) +
               "\n";
    out.extra_files["dataset.json"] = ds.meta.dump(2) + "\n";
    nlohmann::json model = layer_to_json(tr.layer);
    model["bias"] = tr.bias;
    out.extra_files["model.json"] = model.dump(2) + "\n";
    out.extra_files["training_log.csv"] = log;

    nlohmann::json policy_json = nlohmann::json::array();
    for (const auto& p : policies)
        policy_json.push_back(
            {{"name", p.name}, {"intra_fraction", p.intra_fraction}});
    out.report = {{"experiment", "fig3"},
                  {"bound_variant", bound_variant_name(cfg.bound_variant)},
                  {"baseline_label", kBaselineLabel},
                  {"readout", cfg.fig3.readout},
                  {"feature_scheme", cfg.fig3.feature_scheme},
                  {"median_cut", ds.median_cut},
                  {"policies", std::move(policy_json)},
                  {"unperturbed_accuracy", unperturbed.accuracy},
                  {"unperturbed_ci",
                   {{"low", unperturbed.ci.low}, {"high", unperturbed.ci.high}}},
                  {"train_accuracy", train_accuracy},
                  {"final_loss", tr.losses.back()},
                  {"coeffs", tr.layer.filter.coeffs},
                  {"bias", tr.bias}};
    return out;
}

// Per-edge criticality: every existing edge ranked by the squared variation
// of the Fiedler eigenvector across it, summed over the whole eigenvalue
// cluster at lambda_2 so degenerate spectra rank basis-independently. The
// per-edge bound terms and the single-edge deterministic bound ride along in
// the output, annotated intra/inter when community labels exist.
inline RunResult run_edge_criticality(const ExperimentConfig& cfg) {
    const bool active_gw = cfg.bound_variant == BoundVariant::gap_weighted;
    std::vector<Graph> graph_list;
    std::vector<std::uint64_t> seeds;
    if (!cfg.edges.graph_file.empty()) {
        graph_list.push_back(load_graph_file(cfg.edges.graph_file));
        seeds.push_back(0);
    } else {
        for (int g = 0; g < cfg.edges.graphs; ++g) {
            SbmParams params;
            params.communities = cfg.graph.communities;
            params.p_intra = cfg.graph.p_intra;
            params.p_inter = cfg.graph.p_inter;
            params.seed = derive_seed(cfg.seed, streams::kGraph, g);
            params.require_connected = true;
            seeds.push_back(params.seed);
            graph_list.push_back(generate_sbm(params));
        }
    }

    const FilterSpec filter(cfg.model.coeffs);
    const Nonlinearity nonlin = Nonlinearity::from_name(cfg.model.nonlinearity);

    RunResult out;
    out.table.columns = {"graph",       "rank",        "u",
                         "v",           "is_inter",    "criticality",
                         "lambda_term", "vector_term", "bound",
                         "bound_alt"};

    std::vector<double> intra_scores, inter_scores;
    std::vector<double> intra_bounds, inter_bounds;
    nlohmann::json per_graph = nlohmann::json::array();
    for (std::size_t gi = 0; gi < graph_list.size(); ++gi) {
        const Graph& g = graph_list[gi];
        const SpectralDecomposition sd = eigendecompose(laplacian(g));
        const double C_L = lipschitz_constant(filter, sd.lambda_max(), 0);
        const double C = nonlin.lipschitz * C_L;
        const int N = g.node_count();
        const bool labeled = g.community().has_value();

        // Eigenvalue cluster holding lambda_2, grown across sub-tolerance
        // gaps in both directions.
        int lo = 1, hi = 1;
        if (N >= 2) {
            while (lo > 0 &&
                   sd.eigenvalues(lo) - sd.eigenvalues(lo - 1) < cfg.gap_tol)
                --lo;
            while (hi + 1 < N &&
                   sd.eigenvalues(hi + 1) - sd.eigenvalues(hi) < cfg.gap_tol)
                ++hi;
        }

        struct Ranked {
            Edge edge;
            PerEdgeTerms ap;
            PerEdgeTerms gw;
            bool have_gw = true;
            double criticality = 0.0;
            double bound = 0.0;
            double bound_alt = 0.0;
            bool is_inter = false;
        };
        std::vector<Ranked> ranked;
        for (const Edge& e : g.edges()) {
            Ranked r;
            r.edge = e;
            for (int j = lo; j <= hi; ++j) {
                const double d =
                    sd.eigenvectors(e.u, j) - sd.eigenvectors(e.v, j);
                r.criticality += d * d;
            }
            r.ap = per_edge_terms(sd, e, -1, BoundVariant::as_printed);
            try {
                r.gw = per_edge_terms(sd, e, -1, BoundVariant::gap_weighted,
                                      cfg.gap_tol);
            } catch (const DegenerateSpectrumError&) {
                r.have_gw = false;
            }
            const double ap_bound =
                C * (r.ap.lambda_term + N * r.ap.vector_term);
            const double gw_bound =
                r.have_gw ? C * (r.gw.lambda_term + N * r.gw.vector_term) : 0.0;
            r.bound = active_gw ? gw_bound : ap_bound;
            r.bound_alt = active_gw ? ap_bound : gw_bound;
            r.is_inter = labeled && !is_intra_edge(g, e);
            ranked.push_back(std::move(r));
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const Ranked& a, const Ranked& b) {
                             return a.criticality > b.criticality;
                         });

        bool all_tied = true;
        for (const Ranked& r : ranked)
            if (std::abs(r.criticality - ranked.front().criticality) > 1e-9)
                all_tied = false;

        nlohmann::json edges_json = nlohmann::json::array();
        for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
            const Ranked& r = ranked[rank];
            const auto& active_terms = active_gw ? r.gw : r.ap;
            out.table.rows.push_back(
                {static_cast<double>(gi), static_cast<double>(rank + 1),
                 static_cast<double>(r.edge.u), static_cast<double>(r.edge.v),
                 labeled ? (r.is_inter ? 1.0 : 0.0) : -1.0, r.criticality,
                 active_terms.lambda_term, active_terms.vector_term, r.bound,
                 r.bound_alt});
            edges_json.push_back({{"edge", {r.edge.u, r.edge.v}},
                                  {"rank", rank + 1},
                                  {"is_inter", labeled ? nlohmann::json(r.is_inter)
                                                       : nlohmann::json()},
                                  {"criticality", r.criticality},
                                  {"lambda_term", active_terms.lambda_term},
                                  {"vector_term", active_terms.vector_term},
                                  {"bound", r.bound}});
            if (labeled) {
                if (r.is_inter) {
                    inter_scores.push_back(r.criticality);
                    inter_bounds.push_back(r.bound);
                } else {
                    intra_scores.push_back(r.criticality);
                    intra_bounds.push_back(r.bound);
                }
            }
        }
        per_graph.push_back({{"seed", seeds[gi]},
                             {"nodes", g.node_count()},
                             {"edges", g.edge_count()},
                             {"C", C},
                             {"all_tied", all_tied},
                             {"ranked", std::move(edges_json)}});
    }

    const auto intra = detail::mean_stats(intra_scores);
    const auto inter = detail::mean_stats(inter_scores);
    const auto intra_b = detail::mean_stats(intra_bounds);
    const auto inter_b = detail::mean_stats(inter_bounds);
    out.report = {{"experiment", "edge-criticality"},
                  {"bound_variant", bound_variant_name(cfg.bound_variant)},
                  {"model", {{"coeffs", cfg.model.coeffs},
                             {"nonlinearity", cfg.model.nonlinearity}}},
                  {"graphs", std::move(per_graph)},
                  {"mean_intra_criticality", intra.mean},
                  {"mean_inter_criticality", inter.mean},
                  {"mean_intra_bound", intra_b.mean},
                  {"mean_inter_bound", inter_b.mean},
                  {"inter_above_intra",
                   intra.n > 0 && inter.n > 0 && inter.mean > intra.mean}};
    return out;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.id) {
        case ExperimentId::fig1: return run_fig1(cfg);
        case ExperimentId::fig2: return run_fig2(cfg);
        case ExperimentId::fig3: return run_fig3(cfg);
        case ExperimentId::edge_criticality: return run_edge_criticality(cfg);
    }
    throw std::logic_error("run_experiment: unknown experiment id");
}

// Cheap deterministic sub-run used by manifest verification: one graph, one
// trial, shortened training.
inline ExperimentConfig slice_config(const ExperimentConfig& cfg) {
    ExperimentConfig s = cfg;
    s.train.epochs = std::min(cfg.train.epochs, 50);
    s.fig1.graphs = 1;
    s.fig1.trials = 1;
    s.fig1.max_edges = std::min(cfg.fig1.max_edges, 3);
    s.fig2.graphs = 1;
    s.fig2.trials = 1;
    s.fig2.probabilities = {cfg.fig2.probabilities.front()};
    s.fig3.train_graphs = std::min(cfg.fig3.train_graphs, 2);
    s.fig3.test_graphs = std::min(cfg.fig3.test_graphs, 1);
    s.fig3.trials = 1;
    s.fig3.max_edges = std::min(cfg.fig3.max_edges, 2);
    s.edges.graphs = 1;
    return s;
}

inline void write_run_outputs(const std::string& dir,
                              const ExperimentConfig& cfg,
                              const RunResult& result) {
    std::filesystem::create_directories(dir);
    const std::string csv = result.table.to_csv();
    const std::string report = result.report.dump(2) + "\n";
    write_text_file((std::filesystem::path(dir) / "results.csv").string(), csv);
    write_text_file((std::filesystem::path(dir) / "report.json").string(),
                    report);

    RunManifest m;
    m.config_text = write_config(cfg);
    m.base_seed = cfg.seed;
    m.seed_streams = seed_stream_table();
    m.created = utc_timestamp();
    m.file_hashes["results.csv"] = fnv1a64_hex(csv);
    m.file_hashes["report.json"] = fnv1a64_hex(report);
    for (const auto& [name, content] : result.extra_files) {
        write_text_file((std::filesystem::path(dir) / name).string(), content);
        m.file_hashes[name] = fnv1a64_hex(content);
    }
    const ExperimentConfig sc = slice_config(cfg);
    m.slice_config_text = write_config(sc);
    m.slice_hash = fnv1a64_hex(run_experiment(sc).table.to_csv());
    write_manifest_file(dir, m);
}

struct VerifyOutcome {
    bool ok = true;
    std::vector<std::string> mismatches;
};

// Re-hashes the emitted files and replays the manifest's slice config.
// Throws ManifestAbsentError when there is no manifest at all.
inline VerifyOutcome verify_run(const std::string& dir) {
    const RunManifest m = read_manifest_file(dir);
    VerifyOutcome out;
    for (const auto& [name, expected] : m.file_hashes) {
        const auto path = std::filesystem::path(dir) / name;
        if (!std::filesystem::exists(path)) {
            out.ok = false;
            out.mismatches.push_back(name + ": file missing");
            continue;
        }
        if (fnv1a64_hex(read_text_file(path.string())) != expected) {
            out.ok = false;
            out.mismatches.push_back(name + ": content hash mismatch");
        }
    }
    const ExperimentConfig sc = parse_config_text(m.slice_config_text);
    if (fnv1a64_hex(run_experiment(sc).table.to_csv()) != m.slice_hash) {
        out.ok = false;
        out.mismatches.push_back("slice replay: results differ");
    }
    return out;
}

}  // namespace gcnstab
