/** @file linalg.hpp
    @brief Sparse/dense linear algebra substrate: symmetric sparse matrices,
           direct factorization, dense symmetric generalized eigensolver, and
           PCG with a Lanczos condition number estimate.
*/

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "common.hpp"

namespace biharm::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Symmetric sparse matrix assembled from triplets. Duplicates are summed,
/// explicit zeros pruned, and the stored pattern is validated to be symmetric
/// (a[i,j] = a[j,i] within 1e-12 relative).
class SparseSym {
public:
    SparseSym() = default;

    explicit SparseSym(int n) : n_(n) {}

    void add(int i, int j, double v) { triplets_.emplace_back(i, j, v); }

    int size() const { return n_; }

    /// Builds compressed storage and checks symmetry.
    void compress()
    {
        mat_.resize(n_, n_);
        mat_.setFromTriplets(triplets_.begin(), triplets_.end());
        triplets_.clear();
        triplets_.shrink_to_fit();
        mat_.prune([](int, int, double v) { return v != 0.0; });
        mat_.makeCompressed();
        double scale = 0.0;
        for (int k = 0; k < mat_.outerSize(); ++k)
            for (Sparse::InnerIterator it(mat_, k); it; ++it)
                scale = std::max(scale, std::abs(it.value()));
        Sparse diff = Sparse(mat_.transpose()) - mat_;
        for (int k = 0; k < diff.outerSize(); ++k)
            for (Sparse::InnerIterator it(diff, k); it; ++it)
                if (std::abs(it.value()) > 1e-12 * std::max(scale, 1.0))
                    throw SolverError("SparseSym: matrix is not symmetric");
        compressed_ = true;
    }

    const Sparse& matrix() const
    {
        if (!compressed_) const_cast<SparseSym*>(this)->compress();
        return mat_;
    }

    Vector apply(const Vector& x) const { return matrix() * x; }

private:
    int n_ = 0;
    std::vector<Triplet> triplets_;
    Sparse mat_;
    bool compressed_ = false;
};

enum class FactorKind { Spd, Indefinite };

/// Direct factorization handle (sparse LDL^T). Immutable after construction;
/// solves are const and thread-safe.
class Factorization {
public:
    Factorization() = default;

    Factorization(const Sparse& a, FactorKind kind = FactorKind::Spd)
        : n_(static_cast<int>(a.rows())), kind_(kind)
    {
        ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Sparse>>();
        ldlt_->compute(a);
        if (ldlt_->info() != Eigen::Success)
            throw SingularMatrix("factorize: decomposition failed");
        double max_diag = 0.0;
        for (int i = 0; i < n_; ++i) max_diag = std::max(max_diag, std::abs(a.coeff(i, i)));
        const Vector& d = ldlt_->vectorD();
        for (int i = 0; i < d.size(); ++i) {
            if (std::abs(d[i]) < 1e-14 * std::max(max_diag, 1.0))
                throw SingularMatrix("factorize: pivot below threshold");
            if (kind_ == FactorKind::Spd && d[i] <= 0.0)
                throw SingularMatrix("factorize: nonpositive pivot in SPD factorization");
        }
    }

    int size() const { return n_; }

    Vector solve(const Vector& b) const { return ldlt_->solve(b); }

    Matrix solve(const Matrix& b) const { return ldlt_->solve(b); }

private:
    int n_ = 0;
    FactorKind kind_ = FactorKind::Spd;
    std::shared_ptr<Eigen::SimplicialLDLT<Sparse>> ldlt_;
};

inline Factorization factorize(const SparseSym& a, FactorKind kind = FactorKind::Spd)
{
    return Factorization(a.matrix(), kind);
}

/// Conjugate gradient run record. kappa_estimate is the extreme eigenvalue
/// ratio of the Lanczos tridiagonal built from the CG coefficients.
struct CgReport {
    int iterations = 0;
    std::vector<double> residual_history;
    double kappa_estimate = 1.0;
    bool converged = false;
};

using LinOp = std::function<Vector(const Vector&)>;

namespace detail {

/// Extreme eigenvalue ratio of the symmetric tridiagonal with given
/// diagonal/off-diagonal entries.
inline double tridiag_cond(const std::vector<double>& diag, const std::vector<double>& off)
{
    const int m = static_cast<int>(diag.size());
    if (m == 0) return 1.0;
    Matrix t = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = diag[i];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = off[i];
    Eigen::SelfAdjointEigenSolver<Matrix> es(t, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(hi / lo, 1.0);
}

} // namespace detail

/// Preconditioned conjugate gradients for F x = b. Convergence is measured in
/// the unpreconditioned l2 residual, |b - F x| <= tol |b|, matching a
/// reduction of the initial residual for the zero start vector used here.
/// Set `preconditioned_residual` to test in the M-weighted norm instead.
inline std::pair<Vector, CgReport> pcg(const LinOp& apply_f, const LinOp& apply_m,
                                       const Vector& b, double tol = 1e-6, int max_iter = 500,
                                       bool preconditioned_residual = false)
{
    const int n = static_cast<int>(b.size());
    Vector x = Vector::Zero(n);
    CgReport report;

    Vector r = b;
    double rnorm = r.norm();
    if (rnorm == 0.0) {
        report.converged = true;
        return {x, report};
    }
    Vector z = apply_m(r);
    Vector p = z;
    double rz = r.dot(z);
    const double target = tol * (preconditioned_residual ? std::sqrt(std::max(rz, 0.0)) : rnorm);

    std::vector<double> alphas, betas, diag, off;
    report.residual_history.push_back(rnorm);

    for (int it = 0; it < max_iter; ++it) {
        Vector q = apply_f(p);
        double pq = p.dot(q);
        if (pq <= 0.0)
            throw IndefiniteOperator("pcg: nonpositive curvature p^T F p");
        double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        rnorm = r.norm();
        report.residual_history.push_back(rnorm);
        ++report.iterations;

        z = apply_m(r);
        double rz_next = r.dot(z);
        double beta = rz_next / rz;

        // Lanczos recurrence from the Hestenes-Stiefel coefficients.
        if (alphas.empty())
            diag.push_back(1.0 / alpha);
        else
            diag.push_back(1.0 / alpha + betas.back() / alphas.back());
        if (!alphas.empty()) off.push_back(std::sqrt(betas.back()) / alphas.back());
        alphas.push_back(alpha);
        betas.push_back(beta);

        double measure = preconditioned_residual ? std::sqrt(std::max(rz_next, 0.0)) : rnorm;
        if (measure <= target) {
            report.converged = true;
            break;
        }
        rz = rz_next;
        p = z + beta * p;
    }

    report.kappa_estimate = detail::tridiag_cond(diag, off);
    return {x, report};
}

/// Solves the symmetric-definite pencil D phi = lambda^2 M phi. Returns pairs
/// (lambda^2, phi) with eigenvalues ascending and M-orthonormal eigenvectors.
inline std::vector<std::pair<double, Vector>> sym_generalized_eig(const Matrix& d, const Matrix& m)
{
    if (d.rows() != m.rows() || d.rows() != d.cols() || m.rows() != m.cols())
        throw NotSpd("sym_generalized_eig: dimension mismatch");
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
        throw NotSpd("sym_generalized_eig: mass matrix is not SPD");
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(d, m);
    if (es.info() != Eigen::Success)
        throw NotSpd("sym_generalized_eig: eigendecomposition failed");
    std::vector<std::pair<double, Vector>> out;
    out.reserve(d.rows());
    for (int i = 0; i < d.rows(); ++i) out.emplace_back(es.eigenvalues()[i], es.eigenvectors().col(i));
    return out;
}

} // namespace biharm::linalg
