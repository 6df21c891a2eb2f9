#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gcnstab/graph.hpp"

namespace gcnstab {

// Below this gap, an eigenvalue pair counts as degenerate and the eigenvector
// correction formula is only trusted when the pair is uncoupled.
inline constexpr double kDefaultGapTol = 1e-6;

// Couplings below this are treated as exactly zero, so a degenerate but
// uncoupled pair contributes nothing instead of failing.
inline constexpr double kCouplingTol = 1e-12;

// Raised when a near-degenerate eigenvalue pair has non-negligible coupling
// under the given perturbation; the first-order eigenvector formula is
// invalid there and callers are expected to skip or abort the trial.
class DegenerateSpectrumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Eigenvalues ascending, eigenvector i in column i. Columns are orthonormal
// and carry a fixed sign convention, so the decomposition is reproducible.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    double lambda_max() const { return eigenvalues(eigenvalues.size() - 1); }
};

// First-order eigenpair shifts: delta_lambda(i) and column i of delta_u.
struct EigenPerturbation {
    Eigen::VectorXd delta_lambda;
    Eigen::MatrixXd delta_u;
};

// First-order perturbed eigenpairs. Deliberately a distinct type: the
// eigenvectors are not re-normalized and no decomposition invariants hold.
struct ApproxSpectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

struct EigengapReport {
    double min_gap = std::numeric_limits<double>::infinity();
    bool degenerate = false;
};

namespace detail {

// Sign convention: the largest-magnitude entry of each eigenvector is made
// positive, ties broken by lowest index.
inline void fix_eigenvector_signs(Eigen::MatrixXd& U) {
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = std::abs(U(0, j));
        for (Eigen::Index i = 1; i < U.rows(); ++i) {
            const double m = std::abs(U(i, j));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        if (U(arg, j) < 0.0) U.col(j) = -U.col(j);
    }
}

}  // namespace detail

// Dense symmetric eigendecomposition (errors if the input is not symmetric
// to 1e-12). Backed by Eigen's self-adjoint solver; the accuracy contract is
// checked here: orthonormal columns to 1e-10 and residual ||L u - lambda u||
// within 1e-8 * max(1, lambda_max).
inline SpectralDecomposition eigendecompose(const Eigen::MatrixXd& L) {
    if (L.rows() != L.cols())
        throw std::invalid_argument("eigendecompose: matrix must be square");
    const double asym = (L - L.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw std::invalid_argument("eigendecompose: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecompose: solver failed to converge");

    SpectralDecomposition sd{solver.eigenvalues(), solver.eigenvectors()};
    detail::fix_eigenvector_signs(sd.eigenvectors);

    const int n = sd.size();
    const double ortho =
        (sd.eigenvectors.transpose() * sd.eigenvectors -
         Eigen::MatrixXd::Identity(n, n))
            .cwiseAbs()
            .maxCoeff();
    if (ortho > 1e-10)
        throw std::runtime_error("eigendecompose: eigenvectors not orthonormal");
    const double scale = std::max(1.0, sd.eigenvalues.cwiseAbs().maxCoeff());
    const double resid =
        (L * sd.eigenvectors -
         sd.eigenvectors * sd.eigenvalues.asDiagonal())
            .cwiseAbs()
            .maxCoeff();
    if (resid > 1e-8 * scale)
        throw std::runtime_error("eigendecompose: residual too large");
    return sd;
}

// First-order shifts of every eigenpair under the symmetric perturbation dL:
//   delta_lambda(i) = u_i' dL u_i
//   delta_u col i   = sum over j != i of (u_j' dL u_i) / (lambda_i - lambda_j) u_j
// A pair with |lambda_i - lambda_j| < gap_tol is allowed only when its
// coupling u_j' dL u_i is negligible; otherwise the formula is invalid and a
// DegenerateSpectrumError is raised.
inline EigenPerturbation first_order_perturbation(
    const SpectralDecomposition& sd, const Eigen::MatrixXd& dL,
    double gap_tol = kDefaultGapTol) {
    const int n = sd.size();
    if (dL.rows() != n || dL.cols() != n)
        throw std::invalid_argument(
            "first_order_perturbation: dimension mismatch");
    if ((dL - dL.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument(
            "first_order_perturbation: perturbation is not symmetric");

    // Couplings in the eigenbasis: M(j, i) = u_j' dL u_i.
    const Eigen::MatrixXd M =
        sd.eigenvectors.transpose() * dL * sd.eigenvectors;

    EigenPerturbation out;
    out.delta_lambda = M.diagonal();
    Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double coupling = M(j, i);
            const double gap = sd.eigenvalues(i) - sd.eigenvalues(j);
            if (std::abs(gap) < gap_tol) {
                if (std::abs(coupling) <= kCouplingTol) continue;
                throw DegenerateSpectrumError(
                    "first_order_perturbation: coupled eigenvalue pair with "
                    "gap below tolerance");
            }
            coeff(j, i) = coupling / gap;
        }
    }
    out.delta_u = sd.eigenvectors * coeff;
    return out;
}

inline ApproxSpectrum perturbed_spectrum_approx(
    const SpectralDecomposition& sd, const Eigen::MatrixXd& dL,
    double gap_tol = kDefaultGapTol) {
    const EigenPerturbation ep = first_order_perturbation(sd, dL, gap_tol);
    return ApproxSpectrum{sd.eigenvalues + ep.delta_lambda,
                          sd.eigenvectors + ep.delta_u};
}

// Oracle for the approximation above: decompose the perturbed Laplacian
// directly instead of using the first-order formulas.
inline SpectralDecomposition exact_perturbed_spectrum(
    const Graph& g, const EdgePerturbation& p) {
    return eigendecompose(laplacian(apply_perturbation(g, p)));
}

inline EigengapReport eigengap_report(const SpectralDecomposition& sd,
                                      double gap_tol = kDefaultGapTol) {
    EigengapReport rep;
    // Eigenvalues are sorted, so the minimum over all pairs is adjacent.
    for (int i = 0; i + 1 < sd.size(); ++i)
        rep.min_gap = std::min(rep.min_gap,
                               sd.eigenvalues(i + 1) - sd.eigenvalues(i));
    rep.degenerate = rep.min_gap < gap_tol;
    return rep;
}

}  // namespace gcnstab
