#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gcnstab {

// Highest polynomial degree the Lipschitz grid is sized for; see
// lipschitz_constant.
inline constexpr int kMaxFilterDegree = 16;

// Polynomial filter h_0 + h_1 L + ... + h_K L^K, stored as coeffs[k] = h_k.
struct FilterSpec {
    std::vector<double> coeffs;

    FilterSpec() : coeffs{0.0} {}
    explicit FilterSpec(std::vector<double> h) : coeffs(std::move(h)) {
        if (coeffs.empty())
            throw std::invalid_argument("FilterSpec: need at least h_0");
        if (static_cast<int>(coeffs.size()) - 1 > kMaxFilterDegree)
            throw std::invalid_argument("FilterSpec: degree above 16");
        for (double h : coeffs)
            if (!std::isfinite(h))
                throw std::invalid_argument("FilterSpec: non-finite coefficient");
    }

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
};

// Pointwise nonlinearity together with its Lipschitz constant C_sigma.
struct Nonlinearity {
    enum class Kind { relu, tanh, sigmoid, identity };

    Kind kind = Kind::relu;
    double lipschitz = 1.0;

    Nonlinearity() = default;
    explicit Nonlinearity(Kind k) : kind(k) {
        switch (k) {
            case Kind::relu:
            case Kind::tanh:
            case Kind::identity:
                lipschitz = 1.0;
                break;
            case Kind::sigmoid:
                lipschitz = 0.25;
                break;
        }
    }

    static Nonlinearity from_name(const std::string& name) {
        if (name == "relu") return Nonlinearity(Kind::relu);
        if (name == "tanh") return Nonlinearity(Kind::tanh);
        if (name == "sigmoid") return Nonlinearity(Kind::sigmoid);
        if (name == "identity") return Nonlinearity(Kind::identity);
        throw std::invalid_argument("unknown nonlinearity: " + name);
    }

    std::string name() const {
        switch (kind) {
            case Kind::relu: return "relu";
            case Kind::tanh: return "tanh";
            case Kind::sigmoid: return "sigmoid";
            case Kind::identity: return "identity";
        }
        return "relu";
    }

    double apply(double z) const {
        switch (kind) {
            case Kind::relu: return z > 0.0 ? z : 0.0;
            case Kind::tanh: return std::tanh(z);
            case Kind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
            case Kind::identity: return z;
        }
        return z;
    }

    // Subgradient convention at the relu kink: derivative(0) = 1.
    double derivative(double z) const {
        switch (kind) {
            case Kind::relu: return z >= 0.0 ? 1.0 : 0.0;
            case Kind::tanh: {
                const double t = std::tanh(z);
                return 1.0 - t * t;
            }
            case Kind::sigmoid: {
                const double s = 1.0 / (1.0 + std::exp(-z));
                return s * (1.0 - s);
            }
            case Kind::identity: return 1.0;
        }
        return 1.0;
    }
};

struct GcnLayer {
    FilterSpec filter;
    Nonlinearity nonlinearity;
};

// H(L)x by Horner iteration on vectors: K matrix-vector products, powers of
// L are never formed.
inline Eigen::VectorXd filter_apply(const FilterSpec& f,
                                    const Eigen::MatrixXd& L,
                                    const Eigen::VectorXd& x) {
    if (L.rows() != L.cols() || L.rows() != x.size())
        throw std::invalid_argument("filter_apply: dimension mismatch");
    const auto& h = f.coeffs;
    Eigen::VectorXd acc = h.back() * x;
    for (int k = static_cast<int>(h.size()) - 2; k >= 0; --k)
        acc = L * acc + h[k] * x;
    return acc;
}

inline double frequency_response(const FilterSpec& f, double lambda) {
    const auto& h = f.coeffs;
    double acc = h.back();
    for (int k = static_cast<int>(h.size()) - 2; k >= 0; --k)
        acc = acc * lambda + h[k];
    return acc;
}

inline double frequency_response_derivative(const FilterSpec& f,
                                            double lambda) {
    const auto& h = f.coeffs;
    const int K = f.degree();
    if (K == 0) return 0.0;
    double acc = K * h[K];
    for (int k = K - 1; k >= 1; --k) acc = acc * lambda + k * h[k];
    return acc;
}

// C_L = max |h'(lambda)| over [0, lambda_max + 2 * inserted_edges]. The
// interval is widened only for insertions: a deleted edge cannot raise any
// eigenvalue, while each inserted edge raises them by at most 2. A 10,001
// point grid (then locally refined) pins down the maximum of a polynomial of
// degree at most 16.
inline double lipschitz_constant(const FilterSpec& f, double lambda_max,
                                 int inserted_edges = 0) {
    if (!(lambda_max > 0.0))
        throw std::invalid_argument("lipschitz_constant: lambda_max must be > 0");
    if (inserted_edges < 0)
        throw std::invalid_argument("lipschitz_constant: negative edge count");
    if (f.degree() == 0) return 0.0;

    const double hi = lambda_max + 2.0 * inserted_edges;
    const int grid = 10001;
    const double step = hi / (grid - 1);
    double best = 0.0;
    double arg = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double lam = i * step;
        const double d = std::abs(frequency_response_derivative(f, lam));
        if (d > best) {
            best = d;
            arg = lam;
        }
    }
    double lo = std::max(0.0, arg - step);
    double up = std::min(hi, arg + step);
    for (int round = 0; round < 3; ++round) {
        const double h = (up - lo) / 100.0;
        for (int i = 0; i <= 100; ++i) {
            const double lam = lo + i * h;
            const double d = std::abs(frequency_response_derivative(f, lam));
            if (d > best) {
                best = d;
                arg = lam;
            }
        }
        lo = std::max(0.0, arg - h);
        up = std::min(hi, arg + h);
    }
    return best;
}

inline Eigen::VectorXd gcn_forward(const GcnLayer& layer,
                                   const Eigen::MatrixXd& L,
                                   const Eigen::VectorXd& x) {
    Eigen::VectorXd z = filter_apply(layer.filter, L, x);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) = layer.nonlinearity.apply(z(i));
    return z;
}

// l2 distance between the layer outputs under L and Lt, with the input
// normalized to unit norm first.
inline double output_distance(const GcnLayer& layer, const Eigen::MatrixXd& L,
                              const Eigen::MatrixXd& Lt,
                              const Eigen::VectorXd& x) {
    const double norm = x.norm();
    if (norm == 0.0)
        throw std::invalid_argument("output_distance: zero input vector");
    const Eigen::VectorXd xn = x / norm;
    return (gcn_forward(layer, L, xn) - gcn_forward(layer, Lt, xn)).norm();
}

inline nlohmann::json layer_to_json(const GcnLayer& layer) {
    return nlohmann::json{{"coeffs", layer.filter.coeffs},
                          {"nonlinearity", layer.nonlinearity.name()}};
}

inline GcnLayer layer_from_json(const nlohmann::json& j) {
    GcnLayer layer;
    layer.filter = FilterSpec(j.at("coeffs").get<std::vector<double>>());
    layer.nonlinearity =
        Nonlinearity::from_name(j.at("nonlinearity").get<std::string>());
    return layer;
}

inline GcnLayer load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    return layer_from_json(j);
}

inline void save_model_file(const std::string& path, const GcnLayer& layer) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << layer_to_json(layer).dump(2) << '\n';
}

}  // namespace gcnstab
