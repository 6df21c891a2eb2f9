#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "gcnstab/graph.hpp"
#include "gcnstab/sbm.hpp"
#include "gcnstab/spectral.hpp"

using namespace gcnstab;

namespace {

Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }
Graph triangle() { return Graph(3, {{0, 1}, {0, 2}, {1, 2}}); }

Eigen::VectorXd sorted(Eigen::VectorXd v) {
    std::sort(v.data(), v.data() + v.size());
    return v;
}

}  // namespace

TEST_CASE("3-path and triangle spectra") {
    const SpectralDecomposition p = eigendecompose(laplacian(path3()));
    Eigen::Vector3d expected_p(0.0, 1.0, 3.0);
    CHECK((p.eigenvalues - expected_p).cwiseAbs().maxCoeff() < 1e-12);

    const SpectralDecomposition t = eigendecompose(laplacian(triangle()));
    Eigen::Vector3d expected_t(0.0, 3.0, 3.0);
    CHECK((t.eigenvalues - expected_t).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.lambda_max() == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("eigendecompose output is orthonormal with small residual") {
    const Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}});
    const Eigen::MatrixXd L = laplacian(g);
    const SpectralDecomposition sd = eigendecompose(L);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
    CHECK((sd.eigenvectors.transpose() * sd.eigenvectors - I)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK((L * sd.eigenvectors -
           sd.eigenvectors * sd.eigenvalues.asDiagonal().toDenseMatrix())
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    for (int i = 0; i + 1 < sd.size(); ++i)
        CHECK(sd.eigenvalues(i) <= sd.eigenvalues(i + 1));
}

TEST_CASE("sign convention: largest-magnitude entry positive, deterministic") {
    const Graph g(7, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {0, 3}});
    const SpectralDecomposition a = eigendecompose(laplacian(g));
    const SpectralDecomposition b = eigendecompose(laplacian(g));
    CHECK((a.eigenvectors - b.eigenvectors).norm() == 0.0);
    for (int i = 0; i < a.size(); ++i) {
        int arg = 0;
        double best = 0.0;
        for (int r = 0; r < a.size(); ++r)
            if (std::abs(a.eigenvectors(r, i)) > best) {
                best = std::abs(a.eigenvectors(r, i));
                arg = r;
            }
        CHECK(a.eigenvectors(arg, i) > 0.0);
    }
}

TEST_CASE("eigendecompose rejects bad input") {
    CHECK_THROWS_AS(eigendecompose(Eigen::MatrixXd::Zero(2, 3)),
                    std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 0.0, 1.0, 0.5, 0.0;
    CHECK_THROWS_AS(eigendecompose(asym), std::invalid_argument);
}

TEST_CASE("single node graph") {
    const SpectralDecomposition sd = eigendecompose(laplacian(Graph(1, {})));
    CHECK(sd.size() == 1);
    CHECK(sd.eigenvalues(0) == 0.0);
    const EigengapReport rep = eigengap_report(sd);
    CHECK(std::isinf(rep.min_gap));
    CHECK_FALSE(rep.degenerate);
}

TEST_CASE("inserting the closing edge of the 3-path reproduces the triangle") {
    const Graph g = path3();
    const EdgePerturbation p({{{0, 2}, +1}});
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    const ApproxSpectrum approx =
        perturbed_spectrum_approx(sd, delta_laplacian(p, 3));
    const SpectralDecomposition exact = exact_perturbed_spectrum(g, p);
    Eigen::Vector3d expected(0.0, 3.0, 3.0);
    CHECK((sorted(approx.eigenvalues) - expected).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK((sorted(approx.eigenvalues) - sorted(exact.eigenvalues))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("eigenvalue shifts are signed squared vertex differences") {
    SbmParams params;
    params.communities = {5, 5};
    params.seed = 0;
    const Graph g = generate_sbm(params);
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    const Edge e = g.edges()[2];
    for (int sign : {-1, +1}) {
        const Eigen::MatrixXd dL =
            sign * edge_vector(e, g.node_count()) *
            edge_vector(e, g.node_count()).transpose();
        const EigenPerturbation ep = first_order_perturbation(sd, dL);
        for (int i = 0; i < sd.size(); ++i) {
            const double d =
                sd.eigenvectors(e.u, i) - sd.eigenvectors(e.v, i);
            CHECK(ep.delta_lambda(i) == Catch::Approx(sign * d * d).margin(1e-12));
        }
    }
}

TEST_CASE("shift of the zero eigenvalue vanishes on connected graphs") {
    SbmParams params;
    params.communities = {6, 6};
    params.seed = 8;
    params.require_connected = true;
    const Graph g = generate_sbm(params);
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    const EdgePerturbation p({{g.edges()[0], -1}});
    const EigenPerturbation ep =
        first_order_perturbation(sd, delta_laplacian(p, g.node_count()));
    CHECK(std::abs(ep.delta_lambda(0)) < 1e-12);
}

TEST_CASE("shift sum matches the perturbation trace") {
    SbmParams params;
    params.communities = {5, 5};
    params.seed = 3;
    params.require_connected = true;
    const Graph g = generate_sbm(params);
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    std::vector<SignedEdge> items = {{g.edges()[0], -1}, {g.edges()[3], -1}};
    const auto absent = absent_edges(g);
    if (!absent.empty()) items.push_back({absent[0], +1});
    const EdgePerturbation p(items);
    const Eigen::MatrixXd dL = delta_laplacian(p, g.node_count());
    const EigenPerturbation ep = first_order_perturbation(sd, dL);
    CHECK(ep.delta_lambda.sum() == Catch::Approx(dL.trace()).margin(1e-10));
}

TEST_CASE("eigenvector corrections are orthogonal to their eigenvectors") {
    SbmParams params;
    params.communities = {5, 5};
    params.seed = 2;
    params.require_connected = true;
    const Graph g = generate_sbm(params);
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    const EdgePerturbation p({{g.edges()[1], -1}});
    const EigenPerturbation ep =
        first_order_perturbation(sd, delta_laplacian(p, g.node_count()));
    for (int i = 0; i < sd.size(); ++i)
        CHECK(std::abs(ep.delta_u.col(i).dot(sd.eigenvectors.col(i))) < 1e-10);
}

TEST_CASE("approximation error shrinks quadratically in the step size") {
    const Graph g(4, {{0, 1}, {1, 2}, {2, 3}});
    const Eigen::MatrixXd L = laplacian(g);
    const SpectralDecomposition sd = eigendecompose(L);
    const Eigen::VectorXd a = edge_vector({1, 2}, 4);
    const Eigen::MatrixXd dir = -(a * a.transpose());

    const auto err = [&](double eps) {
        const EigenPerturbation ep = first_order_perturbation(sd, eps * dir);
        const Eigen::VectorXd approx =
            sorted(sd.eigenvalues + ep.delta_lambda);
        const Eigen::VectorXd exact =
            sorted(eigendecompose(L + eps * dir).eigenvalues);
        return (approx - exact).norm();
    };
    const double ratio = err(0.1) / err(0.05);
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
}

TEST_CASE("coupled degenerate pairs are refused, uncoupled ones pass") {
    SpectralDecomposition sd;
    sd.eigenvalues = Eigen::Vector2d(1.0, 1.0);
    sd.eigenvectors = Eigen::Matrix2d::Identity();

    Eigen::Matrix2d coupled;
    coupled << 0.0, 0.5, 0.5, 0.0;
    CHECK_THROWS_AS(first_order_perturbation(sd, coupled),
                    DegenerateSpectrumError);

    Eigen::Matrix2d uncoupled;
    uncoupled << 0.3, 0.0, 0.0, -0.2;
    const EigenPerturbation ep = first_order_perturbation(sd, uncoupled);
    CHECK(ep.delta_lambda(0) == Catch::Approx(0.3));
    CHECK(ep.delta_lambda(1) == Catch::Approx(-0.2));
    CHECK(ep.delta_u.norm() == 0.0);
}

TEST_CASE("eigengap report flags near-degenerate spectra") {
    const EigengapReport tri =
        eigengap_report(eigendecompose(laplacian(triangle())));
    CHECK(tri.degenerate);
    CHECK(tri.min_gap < 1e-10);

    const EigengapReport path =
        eigengap_report(eigendecompose(laplacian(path3())));
    CHECK_FALSE(path.degenerate);
    CHECK(path.min_gap == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("single deletion on a 10-node block graph stays first-order accurate") {
    SbmParams params;
    params.communities = {5, 5};
    params.seed = 0;
    params.require_connected = true;
    const Graph g = generate_sbm(params);
    const SpectralDecomposition sd = eigendecompose(laplacian(g));
    int checked = 0;
    for (const Edge& e : g.edges()) {
        const EdgePerturbation p({{e, -1}});
        const Eigen::MatrixXd dL = delta_laplacian(p, g.node_count());
        Eigen::VectorXd approx;
        try {
            approx = sorted(perturbed_spectrum_approx(sd, dL).eigenvalues);
        } catch (const DegenerateSpectrumError&) {
            continue;
        }
        const Eigen::VectorXd exact =
            sorted(exact_perturbed_spectrum(g, p).eigenvalues);
        CHECK((approx - exact).norm() <= 0.5 * dL.norm());
        ++checked;
    }
    CHECK(checked > 0);
}
