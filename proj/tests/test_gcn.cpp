#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gcnstab/gcn.hpp"
#include "gcnstab/graph.hpp"
#include "gcnstab/rng.hpp"
#include "gcnstab/spectral.hpp"

using namespace gcnstab;

namespace {

Eigen::VectorXd naive_filter_apply(const FilterSpec& f, const Eigen::MatrixXd& L,
                                   const Eigen::VectorXd& x) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(L.rows(), L.cols());
    for (std::size_t k = 0; k < f.coeffs.size(); ++k) {
        acc += f.coeffs[k] * (power * x);
        power = L * power;
    }
    return acc;
}

Graph ring6() {
    return Graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}});
}

}  // namespace

TEST_CASE("filter spec validation") {
    CHECK_THROWS_AS(FilterSpec(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(FilterSpec(std::vector<double>(18, 1.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(FilterSpec({1.0, std::nan("")}), std::invalid_argument);
    CHECK(FilterSpec({1.0, 2.0, 3.0}).degree() == 2);
    CHECK(FilterSpec().degree() == 0);
}

TEST_CASE("nonlinearity table") {
    CHECK(Nonlinearity::from_name("relu").lipschitz == 1.0);
    CHECK(Nonlinearity::from_name("tanh").lipschitz == 1.0);
    CHECK(Nonlinearity::from_name("identity").lipschitz == 1.0);
    CHECK(Nonlinearity::from_name("sigmoid").lipschitz == 0.25);
    CHECK_THROWS_AS(Nonlinearity::from_name("swish"), std::invalid_argument);

    const Nonlinearity relu = Nonlinearity::from_name("relu");
    CHECK(relu.apply(-2.0) == 0.0);
    CHECK(relu.apply(3.0) == 3.0);
    CHECK(relu.derivative(0.0) == 1.0);
    CHECK(relu.derivative(-1e-9) == 0.0);

    const Nonlinearity sig = Nonlinearity::from_name("sigmoid");
    CHECK(sig.apply(0.0) == Catch::Approx(0.5));
    CHECK(sig.derivative(0.0) == Catch::Approx(0.25));
}

TEST_CASE("horner application matches the naive polynomial") {
    const Eigen::MatrixXd L = laplacian(ring6());
    const FilterSpec f({0.3, -1.2, 0.5, 0.07});
    Rng rng(11);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.normal();
    CHECK((filter_apply(f, L, x) - naive_filter_apply(f, L, x))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("filter application is the spectral-domain response") {
    const Eigen::MatrixXd L = laplacian(ring6());
    const SpectralDecomposition sd = eigendecompose(L);
    const FilterSpec f({0.1, 0.8, -0.3});
    Rng rng(17);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.normal();

    Eigen::VectorXd response(6);
    for (int i = 0; i < 6; ++i)
        response(i) = frequency_response(f, sd.eigenvalues(i));
    const Eigen::VectorXd spectral = sd.eigenvectors *
                                     response.asDiagonal() *
                                     sd.eigenvectors.transpose() * x;
    CHECK((filter_apply(f, L, x) - spectral).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("frequency response derivative") {
    const FilterSpec f({1.0, -2.0, 0.5});
    CHECK(frequency_response(f, 2.0) == Catch::Approx(1.0 - 4.0 + 2.0));
    CHECK(frequency_response_derivative(f, 2.0) == Catch::Approx(-2.0 + 2.0));
    CHECK(frequency_response_derivative(FilterSpec({5.0}), 1.0) == 0.0);
}

TEST_CASE("filter lipschitz constants on reference polynomials") {
    CHECK(lipschitz_constant(FilterSpec({0.0, 1.0}), 3.0) ==
          Catch::Approx(1.0).margin(1e-12));
    CHECK(lipschitz_constant(FilterSpec({7.0}), 3.0) == 0.0);
    CHECK(lipschitz_constant(FilterSpec({0.0, 0.0, 1.0}), 3.0) ==
          Catch::Approx(6.0).margin(1e-9));
    // One planned insertion widens the sweep to lambda_max + 2.
    CHECK(lipschitz_constant(FilterSpec({0.0, 0.0, 1.0}), 3.0, 1) ==
          Catch::Approx(10.0).margin(1e-9));
    CHECK_THROWS_AS(lipschitz_constant(FilterSpec({0.0, 1.0}), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(lipschitz_constant(FilterSpec({0.0, 1.0}), 3.0, -1),
                    std::invalid_argument);
}

TEST_CASE("lipschitz certificate holds on random pairs") {
    const FilterSpec f({0.2, -1.0, 0.4, 0.3, -0.05});
    const double lambda_max = 7.3;
    const double C = lipschitz_constant(f, lambda_max);
    Rng rng(2718);
    for (int i = 0; i < 1000; ++i) {
        const double a = lambda_max * rng.uniform();
        const double b = lambda_max * rng.uniform();
        const double lhs = std::abs(frequency_response(f, a) -
                                    frequency_response(f, b));
        CHECK(lhs <= C * std::abs(a - b) + 1e-12);
    }
}

TEST_CASE("forward pass applies the nonlinearity pointwise") {
    const Eigen::MatrixXd L = laplacian(ring6());
    GcnLayer layer;
    layer.filter = FilterSpec({0.0, 1.0});
    layer.nonlinearity = Nonlinearity::from_name("relu");
    Eigen::VectorXd x(6);
    x << 1, -1, 2, -2, 0.5, 0;
    const Eigen::VectorXd filtered = filter_apply(layer.filter, L, x);
    const Eigen::VectorXd y = gcn_forward(layer, L, x);
    for (int i = 0; i < 6; ++i)
        CHECK(y(i) == std::max(filtered(i), 0.0));
}

TEST_CASE("output distance") {
    const Graph g = ring6();
    const Eigen::MatrixXd L = laplacian(g);
    GcnLayer layer;
    layer.filter = FilterSpec({0.0, 1.0});
    layer.nonlinearity = Nonlinearity::from_name("identity");
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1.0, 1.5);
    CHECK(output_distance(layer, L, L, x) == 0.0);

    const Eigen::MatrixXd Lt =
        laplacian(apply_perturbation(g, EdgePerturbation({{{0, 1}, -1}})));
    CHECK(output_distance(layer, L, Lt, x) > 0.0);
    // The input is normalized internally, so scale does not matter.
    CHECK(output_distance(layer, L, Lt, 10.0 * x) ==
          Catch::Approx(output_distance(layer, L, Lt, x)).margin(1e-12));
    CHECK_THROWS_AS(output_distance(layer, L, Lt, Eigen::VectorXd::Zero(6)),
                    std::invalid_argument);
}

TEST_CASE("model json and file round trip") {
    GcnLayer layer;
    layer.filter = FilterSpec({0.25, -0.5, 1.0});
    layer.nonlinearity = Nonlinearity::from_name("tanh");
    const GcnLayer back = layer_from_json(layer_to_json(layer));
    CHECK(back.filter.coeffs == layer.filter.coeffs);
    CHECK(back.nonlinearity.kind == layer.nonlinearity.kind);

    const std::string path =
        (std::filesystem::temp_directory_path() / "gcnstab_model_rt.json")
            .string();
    save_model_file(path, layer);
    const GcnLayer loaded = load_model_file(path);
    CHECK(loaded.filter.coeffs == layer.filter.coeffs);
    CHECK(loaded.nonlinearity.kind == layer.nonlinearity.kind);
    std::remove(path.c_str());
}
