/** @file splines.hpp
    @brief 1D B-spline spaces over p-open knot vectors, the boundary
           interpolating transformed basis, tensor-product bases, and per-span
           Gauss quadrature.

    The transformed basis replaces the two outermost B-splines at each end so
    that the first/last function interpolates the boundary value and the
    second/second-to-last the boundary derivative:

        psi_1 = phi_1 + phi_2,          psi_2     = p^-1 xi_{p+1} phi_2,
        psi_N = phi_N + phi_{N-1},      psi_{N-1} = p^-1 (1 - xi_{N-1}) phi_{N-1},

    all other psi_i = phi_i. Derivatives are stored with respect to +x; the
    interface logic converts to inward/outward directions where needed.
*/

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "common.hpp"

namespace biharm::splines {

/// Values (and derivatives) of the basis functions active at one point.
/// row d of `values` holds the d-th derivatives of functions
/// first, first+1, ..., first+count-1.
struct BasisWindow {
    int first = 0;
    int count = 0;
    Eigen::MatrixXd values; // (max_deriv+1) x count
};

namespace detail {

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
            }
            dp = n * (t * p0 - p1) / (t * t - 1.0);
            double dt = -p0 / dp;
            t += dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[n - 1 - i] = t;
        x[i] = -t;
        double wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = w[n - 1 - i] = wi;
    }
}

} // namespace detail

/// Index s with knots[s] <= x < knots[s+1]; x past the last interior knot
/// resolves to the last nonempty span (left limit).
inline int find_span(int degree, const std::vector<double>& knots, double x)
{
    const int n = static_cast<int>(knots.size()) - degree - 1;
    if (x >= knots[n]) {
        int s = n - 1;
        while (s > degree && knots[s + 1] <= knots[s]) --s;
        return s;
    }
    if (x <= knots[degree]) return degree;
    auto it = std::upper_bound(knots.begin() + degree, knots.begin() + n + 1, x);
    return static_cast<int>(it - knots.begin()) - 1;
}

/// Cox-de Boor evaluation of the degree+1 B-splines active at x together with
/// their derivatives up to max_deriv.
inline BasisWindow eval_bspline_all(int degree, const std::vector<double>& knots, double x,
                                    int max_deriv)
{
    const int p = degree;
    const int span = find_span(p, knots, x);
    BasisWindow out;
    out.first = span - p;
    out.count = p + 1;
    out.values.setZero(max_deriv + 1, p + 1);

    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) out.values(0, j) = ndu(j, p);

    const int nd = std::min(max_deriv, p);
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            int j1 = (rk >= -1) ? 1 : -rk;
            int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out.values(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j) out.values(k, j) *= factor;
        factor *= (p - k);
    }
    return out;
}

/// p-open knot vector on [0,1].
class KnotVector {
public:
    KnotVector() = default;

    KnotVector(int degree, std::vector<double> knots, bool allow_coarse = false)
        : p_(degree), knots_(std::move(knots))
    {
        if (p_ < 2) throw SolverError("KnotVector: degree must be >= 2");
        n_ = static_cast<int>(knots_.size()) - p_ - 1;
        if (n_ < 4) throw SolverError("KnotVector: at least 4 basis functions required");
        for (std::size_t i = 1; i < knots_.size(); ++i)
            if (knots_[i] < knots_[i - 1]) throw SolverError("KnotVector: knots must be nondecreasing");
        for (int i = 0; i <= p_; ++i)
            if (knots_[i] != 0.0 || knots_[n_ + i] != 1.0)
                throw SolverError("KnotVector: p-open on [0,1] required");
        if (knots_[p_ + 1] <= 0.0 || knots_[n_ - 1] >= 1.0)
            throw SolverError("KnotVector: end knots have multiplicity > p+1");
        int mult = 1;
        for (int i = p_ + 2; i < n_; ++i) {
            mult = (knots_[i] == knots_[i - 1]) ? mult + 1 : 1;
            if (mult > p_ - 1) throw SolverError("KnotVector: interior multiplicity exceeds p-1");
        }
        if (!allow_coarse && max_span() > 0.25 + 1e-14)
            std::fprintf(stderr, "warning: knot vector with max span %.4g > 1/4 used for solving\n",
                         max_span());
    }

    /// Uniform maximally smooth knots with 2^r - 1 interior knots.
    static KnotVector uniform(int degree, int refinement, bool allow_coarse = false)
    {
        int spans = 1 << refinement;
        std::vector<double> knots(degree + 1, 0.0);
        for (int j = 1; j < spans; ++j) knots.push_back(static_cast<double>(j) / spans);
        knots.insert(knots.end(), degree + 1, 1.0);
        return KnotVector(degree, std::move(knots), allow_coarse);
    }

    int degree() const { return p_; }
    int size() const { return n_; } // number of basis functions N
    const std::vector<double>& knots() const { return knots_; }

    double max_span() const
    {
        double h = 0.0;
        for (int i = p_; i < n_; ++i) h = std::max(h, knots_[i + 1] - knots_[i]);
        return h;
    }

    double min_span() const
    {
        double h = 1.0;
        for (int i = p_; i < n_; ++i)
            if (knots_[i + 1] > knots_[i]) h = std::min(h, knots_[i + 1] - knots_[i]);
        return h;
    }

    double quasi_uniformity() const { return min_span() / max_span(); }

    int find_span(double x) const { return splines::find_span(p_, knots_, x); }

    BasisWindow eval_all(double x, int max_deriv) const
    {
        return eval_bspline_all(p_, knots_, x, max_deriv);
    }

private:
    int p_ = 0;
    int n_ = 0;
    std::vector<double> knots_;
};

/// Boundary-interpolating transformed basis over a p-open knot vector.
class TransformedBasis1D {
public:
    TransformedBasis1D() = default;

    explicit TransformedBasis1D(KnotVector kv) : kv_(std::move(kv))
    {
        const int p = kv_.degree();
        const int n = kv_.size();
        scale_left_ = kv_.knots()[p + 1] / p;
        scale_right_ = (1.0 - kv_.knots()[n - 1]) / p;
    }

    const KnotVector& knots() const { return kv_; }
    int size() const { return kv_.size(); }
    double scale_left() const { return scale_left_; }
    double scale_right() const { return scale_right_; }

    BasisWindow eval_all(double x, int max_deriv) const
    {
        const int n = kv_.size();
        BasisWindow phi = kv_.eval_all(x, max_deriv);
        BasisWindow out;
        out.first = (phi.first <= 1) ? 0 : phi.first;
        int last = (phi.first + kv_.degree() >= n - 2) ? n - 1 : phi.first + kv_.degree();
        out.count = last - out.first + 1;
        out.values.setZero(max_deriv + 1, out.count);
        for (int c = 0; c < phi.count; ++c) {
            const int j = phi.first + c;
            auto col = [&](int idx) { return idx - out.first; };
            for (int d = 0; d <= max_deriv; ++d) {
                const double v = phi.values(d, c);
                if (j == 0) {
                    out.values(d, col(0)) += v;
                } else if (j == 1) {
                    out.values(d, col(0)) += v;
                    out.values(d, col(1)) += scale_left_ * v;
                } else if (j == n - 2) {
                    out.values(d, col(n - 2)) += scale_right_ * v;
                    out.values(d, col(n - 1)) += v;
                } else if (j == n - 1) {
                    out.values(d, col(n - 1)) += v;
                } else {
                    out.values(d, col(j)) += v;
                }
            }
        }
        return out;
    }

    /// Dense change of basis T with Psi = Phi * T (psi_j = sum_i phi_i T_ij).
    Eigen::MatrixXd transform_matrix() const
    {
        const int n = kv_.size();
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) t(i, i) = 1.0;
        t(1, 0) = 1.0;
        t(1, 1) = scale_left_;
        t(n - 2, n - 2) = scale_right_;
        t(n - 2, n - 1) = 1.0;
        return t;
    }

private:
    KnotVector kv_;
    double scale_left_ = 0.0;
    double scale_right_ = 0.0;
};

/// Tensor product of two transformed bases; dof index = ix + Nx * iy.
struct TensorBasis2D {
    TransformedBasis1D basis_x;
    TransformedBasis1D basis_y;

    int nx() const { return basis_x.size(); }
    int ny() const { return basis_y.size(); }
    int size() const { return nx() * ny(); }
    int index(int ix, int iy) const { return ix + nx() * iy; }
};

/// Per-span Gauss rule on (0,1). Nodes/weights are stored flat; span s covers
/// [offsets[s], offsets[s+1]).
struct Quadrature1D {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<std::pair<double, double>> spans;
    std::vector<int> offsets;
};

inline Quadrature1D greville_and_quadrature(const KnotVector& kv, int order)
{
    if (order < 1) throw SolverError("quadrature order must be >= 1");
    std::vector<double> gx, gw;
    detail::gauss_legendre(order, gx, gw);
    Quadrature1D q;
    q.offsets.push_back(0);
    const auto& knots = kv.knots();
    for (int s = kv.degree(); s < kv.size(); ++s) {
        double a = knots[s], b = knots[s + 1];
        if (b <= a) continue;
        q.spans.emplace_back(a, b);
        for (int i = 0; i < order; ++i) {
            q.nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * gx[i]);
            q.weights.push_back(0.5 * (b - a) * gw[i]);
        }
        q.offsets.push_back(static_cast<int>(q.nodes.size()));
    }
    return q;
}

/// Greville abscissae of the untransformed basis.
inline std::vector<double> greville(const KnotVector& kv)
{
    std::vector<double> g(kv.size());
    for (int i = 0; i < kv.size(); ++i) {
        double s = 0.0;
        for (int j = 1; j <= kv.degree(); ++j) s += kv.knots()[i + j];
        g[i] = s / kv.degree();
    }
    return g;
}

} // namespace biharm::splines
