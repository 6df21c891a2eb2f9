#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnstab/gcn.hpp"
#include "gcnstab/graph.hpp"
#include "gcnstab/rng.hpp"
#include "gcnstab/sbm.hpp"

namespace gcnstab {

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 500;
    std::uint64_t seed = 0;

    enum class Loss { binary_cross_entropy };
    enum class Readout { none, mean_pool, sum_pool };

    Loss loss = Loss::binary_cross_entropy;
    Readout readout = Readout::none;
    int filter_degree = 3;
    Nonlinearity nonlinearity{Nonlinearity::Kind::relu};
};

inline const char* readout_name(TrainConfig::Readout r) {
    switch (r) {
        case TrainConfig::Readout::none: return "none";
        case TrainConfig::Readout::mean_pool: return "mean-pool";
        case TrainConfig::Readout::sum_pool: return "sum-pool";
    }
    return "none";
}

inline TrainConfig::Readout readout_from_name(const std::string& s) {
    if (s == "none") return TrainConfig::Readout::none;
    if (s == "mean-pool") return TrainConfig::Readout::mean_pool;
    if (s == "sum-pool") return TrainConfig::Readout::sum_pool;
    throw std::invalid_argument("unknown readout: " + s);
}

// Node classification instance: normalized features plus labels taken from
// the raw feature signs before normalization.
struct LabeledNodeTask {
    Graph graph;
    Eigen::VectorXd features;
    std::vector<int> labels;
};

inline LabeledNodeTask make_node_task(Graph g, const Eigen::VectorXd& raw) {
    if (raw.size() != g.node_count())
        throw std::invalid_argument("make_node_task: feature length mismatch");
    const double norm = raw.norm();
    if (norm == 0.0)
        throw std::invalid_argument("make_node_task: zero feature vector");
    std::vector<int> labels(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i)
        labels[i] = raw(i) > 0.0 ? 1 : 0;
    return LabeledNodeTask{std::move(g), raw / norm, std::move(labels)};
}

struct GraphInstance {
    Graph graph;
    Eigen::VectorXd features;
    int label = 0;
    int cut = 0;
};

struct LabeledGraphTask {
    std::vector<GraphInstance> instances;
    std::vector<int> train_idx;
    std::vector<int> test_idx;
};

struct TrainResult {
    GcnLayer layer;
    // Intercept of the graph-level head; stays 0 for the node task.
    double bias = 0.0;
    // losses[e] is the full-batch loss at the parameters entering epoch e, so
    // the vector has exactly `epochs` entries.
    std::vector<double> losses;
};

struct Wilson {
    double low = 0.0;
    double high = 1.0;
};

// Wilson 95% score interval for a binomial proportion.
inline Wilson wilson_interval(int successes, int total) {
    if (total <= 0) throw std::invalid_argument("wilson_interval: empty sample");
    const double z = 1.959963984540054;
    const double n = total;
    const double phat = successes / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return Wilson{std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct AccuracyReport {
    double accuracy = 0.0;
    Wilson ci;
    int successes = 0;
    int total = 0;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double bce(double p, int target) {
    const double eps = 1e-12;
    const double q = std::min(1.0 - eps, std::max(eps, p));
    return target == 1 ? -std::log(q) : -std::log(1.0 - q);
}

// Krylov matrix V with column k = L^k x, so H(L)x = V h and the loss
// gradient in h is V^T applied to the per-node error weights.
inline Eigen::MatrixXd krylov_columns(const Eigen::MatrixXd& L,
                                      const Eigen::VectorXd& x, int degree) {
    Eigen::MatrixXd V(x.size(), degree + 1);
    V.col(0) = x;
    for (int k = 1; k <= degree; ++k) V.col(k) = L * V.col(k - 1);
    return V;
}

inline void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (cfg.epochs < 1)
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (cfg.filter_degree < 0 || cfg.filter_degree > kMaxFilterDegree)
        throw std::invalid_argument("TrainConfig: filter_degree out of range");
}

[[noreturn]] inline void divergence_error(double loss) {
    throw std::runtime_error(
        "training diverged (loss = " + std::to_string(loss) +
        "); try a smaller learning_rate");
}

inline double pool_scale(TrainConfig::Readout r, int n) {
    return r == TrainConfig::Readout::mean_pool ? 1.0 / n : 1.0;
}

}  // namespace detail

// Full-batch gradient descent on mean binary cross-entropy of
// sigmoid(gcn_forward) per node. Coefficients start at zero, gradients are
// analytic through the polynomial filter, and the run is deterministic.
inline TrainResult train_node_classifier(const LabeledNodeTask& task,
                                         const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    const int n = task.graph.node_count();
    if (static_cast<int>(task.labels.size()) != n ||
        task.features.size() != n)
        throw std::invalid_argument("train_node_classifier: size mismatch");

    const Eigen::MatrixXd V =
        detail::krylov_columns(laplacian(task.graph), task.features,
                               cfg.filter_degree);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.filter_degree + 1);
    const Nonlinearity& nl = cfg.nonlinearity;

    TrainResult result;
    result.losses.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Eigen::VectorXd z = V * h;
        Eigen::VectorXd w(n);
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double y = nl.apply(z(i));
            const double p = detail::sigmoid(y);
            loss += detail::bce(p, task.labels[i]);
            w(i) = (p - task.labels[i]) * nl.derivative(z(i)) / n;
        }
        loss /= n;
        if (!std::isfinite(loss)) detail::divergence_error(loss);
        result.losses.push_back(loss);
        h -= cfg.learning_rate * (V.transpose() * w);
    }
    result.layer =
        GcnLayer{FilterSpec(std::vector<double>(h.data(), h.data() + h.size())),
                 nl};
    return result;
}

// Same optimizer for the graph task: pooled layer output plus an intercept
// through a sigmoid, binary cross-entropy over the training split.
inline TrainResult train_graph_classifier(const LabeledGraphTask& task,
                                          const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    if (cfg.readout == TrainConfig::Readout::none)
        throw std::invalid_argument(
            "train_graph_classifier: needs a pooling readout");
    if (task.train_idx.empty())
        throw std::invalid_argument("train_graph_classifier: empty train split");

    struct Prepared {
        Eigen::MatrixXd V;
        int label;
        double scale;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(task.train_idx.size());
    for (int idx : task.train_idx) {
        const GraphInstance& inst = task.instances.at(idx);
        prepared.push_back(
            {detail::krylov_columns(laplacian(inst.graph), inst.features,
                                    cfg.filter_degree),
             inst.label,
             detail::pool_scale(cfg.readout, inst.graph.node_count())});
    }

    const int m = static_cast<int>(prepared.size());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.filter_degree + 1);
    double b = 0.0;
    const Nonlinearity& nl = cfg.nonlinearity;

    TrainResult result;
    result.losses.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(h.size());
        double grad_b = 0.0;
        for (const Prepared& pg : prepared) {
            const Eigen::VectorXd z = pg.V * h;
            double pooled = 0.0;
            for (Eigen::Index i = 0; i < z.size(); ++i)
                pooled += nl.apply(z(i));
            pooled *= pg.scale;
            const double p = detail::sigmoid(pooled + b);
            loss += detail::bce(p, pg.label);

            Eigen::VectorXd w(z.size());
            const double coeff = (p - pg.label) * pg.scale;
            for (Eigen::Index i = 0; i < z.size(); ++i)
                w(i) = coeff * nl.derivative(z(i));
            grad += pg.V.transpose() * w;
            grad_b += p - pg.label;
        }
        loss /= m;
        grad /= m;
        grad_b /= m;
        if (!std::isfinite(loss)) detail::divergence_error(loss);
        result.losses.push_back(loss);
        h -= cfg.learning_rate * grad;
        b -= cfg.learning_rate * grad_b;
    }
    result.layer =
        GcnLayer{FilterSpec(std::vector<double>(h.data(), h.data() + h.size())),
                 nl};
    result.bias = b;
    return result;
}

// Class probability of one graph under the trained layer.
inline double graph_probability(const GcnLayer& layer, const Eigen::MatrixXd& L,
                                const Eigen::VectorXd& x,
                                TrainConfig::Readout readout,
                                double bias = 0.0) {
    if (readout == TrainConfig::Readout::none)
        throw std::invalid_argument("graph_probability: needs a pooling readout");
    const Eigen::VectorXd y = gcn_forward(layer, L, x);
    double pooled = y.sum();
    if (readout == TrainConfig::Readout::mean_pool) pooled /= y.size();
    return detail::sigmoid(pooled + bias);
}

inline int predict_graph_label(const GcnLayer& layer, const Eigen::MatrixXd& L,
                               const Eigen::VectorXd& x,
                               TrainConfig::Readout readout,
                               double bias = 0.0) {
    return graph_probability(layer, L, x, readout, bias) > 0.5 ? 1 : 0;
}

// Share of nodes whose thresholded probability matches the label.
inline double node_accuracy(const GcnLayer& layer, const LabeledNodeTask& task) {
    const Eigen::VectorXd y =
        gcn_forward(layer, laplacian(task.graph), task.features);
    int hits = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const int pred = detail::sigmoid(y(i)) > 0.5 ? 1 : 0;
        if (pred == task.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / y.size();
}

// Test-split accuracy, averaged over `trials` perturbations sampled per test
// graph and applied at inference time. Pass policy = nullptr for the
// unperturbed accuracy (trials is then ignored).
inline AccuracyReport evaluate_accuracy(
    const GcnLayer& layer, const LabeledGraphTask& task,
    const PerturbationPolicy* policy, int trials, std::uint64_t seed,
    TrainConfig::Readout readout = TrainConfig::Readout::mean_pool,
    double bias = 0.0) {
    if (task.test_idx.empty())
        throw std::invalid_argument("evaluate_accuracy: empty test split");
    if (policy != nullptr && trials < 1)
        throw std::invalid_argument("evaluate_accuracy: trials must be >= 1");

    AccuracyReport report;
    const int rounds = policy == nullptr ? 1 : trials;
    for (int t = 0; t < rounds; ++t) {
        for (std::size_t j = 0; j < task.test_idx.size(); ++j) {
            const GraphInstance& inst = task.instances.at(task.test_idx[j]);
            Eigen::MatrixXd L;
            if (policy == nullptr) {
                L = laplacian(inst.graph);
            } else {
                const EdgePerturbation p = sample_perturbation(
                    inst.graph, *policy,
                    derive_seed(seed, streams::kEvalPerturbation, t, j));
                L = laplacian(apply_perturbation(inst.graph, p));
            }
            const int pred =
                predict_graph_label(layer, L, inst.features, readout, bias);
            report.total += 1;
            if (pred == inst.label) report.successes += 1;
        }
    }
    report.accuracy = static_cast<double>(report.successes) / report.total;
    report.ci = wilson_interval(report.successes, report.total);
    return report;
}

}  // namespace gcnstab
