/** @file extension.hpp
    @brief Numerical realization of the discrete biharmonic extension
           machinery: the trace-space eigendecomposition, the dyadic bucket
           decomposition, the explicit two-term truncated-power extension
           splines psi_{alpha,l}, the assembled extension operators E_alpha,
           and an empirical verification of their boundedness.

    The trace space W is the span of the transformed basis functions with
    indices 3..N-2 (1-based) on Gamma = {0} x [0,1]; these vanish with their
    first derivative at both endpoints. Extensions act in the perpendicular
    direction x:

        (E_alpha w)(x, y) = sum_l psi_{alpha,l}(x) w_l(y),

    where w = sum_l w_l is the eigenbucket decomposition.
*/

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "common.hpp"
#include "linalg.hpp"
#include "splines.hpp"

namespace biharm::extension {

using linalg::Matrix;
using linalg::Vector;

/// Restricted 1D trace space with mass and second-derivative Grams and the
/// generalized eigendecomposition D phi = lambda^2 M phi.
struct TraceSpace {
    splines::TransformedBasis1D basis;
    int offset = 2; // first retained 0-based basis index
    Matrix mass;
    Matrix second;
    std::vector<double> lambda; // ascending, all positive
    Matrix phi;                 // columns are M-orthonormal eigenvectors

    int dim() const { return static_cast<int>(lambda.size()); }

    /// Value (or derivative) of a trace function at y from restricted coeffs.
    double eval(const Vector& coeffs, double y, int deriv = 0) const
    {
        splines::BasisWindow w = basis.eval_all(y, deriv);
        double out = 0.0;
        for (int c = 0; c < w.count; ++c) {
            int i = w.first + c - offset;
            if (i >= 0 && i < dim()) out += coeffs[i] * w.values(deriv, c);
        }
        return out;
    }
};

inline TraceSpace make_trace_space(const splines::KnotVector& kv)
{
    TraceSpace ts;
    ts.basis = splines::TransformedBasis1D(kv);
    const int n = kv.size() - 4;
    if (n < 1) throw SolverError("trace space is empty");
    auto quad = splines::greville_and_quadrature(kv, kv.degree() + 1);
    ts.mass = Matrix::Zero(n, n);
    ts.second = Matrix::Zero(n, n);
    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
        splines::BasisWindow w = ts.basis.eval_all(quad.nodes[q], 2);
        for (int a = 0; a < w.count; ++a) {
            int i = w.first + a - ts.offset;
            if (i < 0 || i >= n) continue;
            for (int b = 0; b < w.count; ++b) {
                int j = w.first + b - ts.offset;
                if (j < 0 || j >= n) continue;
                ts.mass(i, j) += quad.weights[q] * w.values(0, a) * w.values(0, b);
                ts.second(i, j) += quad.weights[q] * w.values(2, a) * w.values(2, b);
            }
        }
    }
    auto pairs = linalg::sym_generalized_eig(ts.second, ts.mass);
    ts.phi = Matrix(n, n);
    ts.lambda.resize(n);
    for (int i = 0; i < n; ++i) {
        ts.lambda[i] = std::sqrt(std::max(pairs[i].first, 0.0));
        ts.phi.col(i) = pairs[i].second;
    }
    if (ts.lambda.front() <= 0.0)
        throw SolverError("trace space second-derivative Gram is singular");
    return ts;
}

/// Dyadic levels l = 1..L with mu_l = p 2^l and the knot marks xi_l, eta_l of
/// the perpendicular knot vector, plus the eigenvalue buckets.
struct BucketPlan {
    int degree = 0;
    int levels = 0;                        // L
    std::vector<double> mu, xi, eta;       // index l-1
    std::vector<std::vector<int>> buckets; // Lambda_l, index l-1
};

inline BucketPlan make_bucket_plan(const splines::KnotVector& kv_perp, const TraceSpace& trace)
{
    BucketPlan plan;
    plan.degree = kv_perp.degree();
    const double h = kv_perp.max_span();
    plan.levels = static_cast<int>(std::floor(std::log2(1.0 / h) + 1e-12)) - 1;
    if (plan.levels < 1)
        throw SolverError("bucket plan requires max knot span <= 1/4");

    const auto& knots = kv_perp.knots();
    auto last_below = [&](double bound) {
        double best = 0.0;
        for (double k : knots)
            if (k <= bound + 1e-14) best = std::max(best, k);
        return best;
    };
    for (int l = 1; l <= plan.levels; ++l) {
        plan.mu.push_back(plan.degree * std::pow(2.0, l));
        plan.xi.push_back(last_below(std::pow(2.0, -l)));
        plan.eta.push_back(last_below(std::pow(2.0, -l + 1)));
    }

    plan.buckets.assign(plan.levels, {});
    for (int i = 0; i < trace.dim(); ++i) {
        const double lam = trace.lambda[i];
        int l = 0; // bucket index (0-based)
        while (l + 1 < plan.levels && lam >= std::sqrt(plan.mu[l] * plan.mu[l + 1])) ++l;
        plan.buckets[l].push_back(i);
    }
    return plan;
}

/// Two-term truncated-power extension spline of level l (1-based) and its
/// derivatives; psi_0 interpolates the value at 0, psi_1 the derivative
/// ((d/dx) psi_1(0) = -1, i.e. outward-normal derivative +1 on {0}).
inline double psi_alpha_ell(int alpha, int l, const BucketPlan& plan, double x, int deriv = 0)
{
    const double xi = plan.xi[l - 1], eta = plan.eta[l - 1];
    const int p = plan.degree;
    auto trunc = [&](double t) -> double {
        double s = 1.0 - x / t;
        if (s <= 0.0) return 0.0;
        switch (deriv) {
        case 0: return std::pow(s, p);
        case 1: return -p / t * std::pow(s, p - 1);
        default: return p * (p - 1.0) / (t * t) * std::pow(s, p - 2);
        }
    };
    if (alpha == 0)
        return -xi / (eta - xi) * trunc(xi) + eta / (eta - xi) * trunc(eta);
    return xi * eta / (p * (eta - xi)) * (trunc(xi) - trunc(eta));
}

/// Bucket components w_l (coefficient vectors in the restricted trace basis):
/// w_l = sum_{i in Lambda_l} (w, phi_i)_M phi_i, and w = sum_l w_l exactly.
inline std::vector<Vector> decompose(const TraceSpace& trace, const BucketPlan& plan,
                                     const Vector& w)
{
    Vector a = trace.phi.transpose() * (trace.mass * w);
    std::vector<Vector> out(plan.levels, Vector::Zero(trace.dim()));
    for (int l = 0; l < plan.levels; ++l)
        for (int i : plan.buckets[l]) out[l] += a[i] * trace.phi.col(i);
    return out;
}

/// Assembled extension E_alpha w as a separable function handle on (0,1)^2.
struct Extension {
    const TraceSpace* trace = nullptr;
    const BucketPlan* plan = nullptr;
    int alpha = 0;
    std::vector<Vector> components;

    double value(double x, double y) const
    {
        double out = 0.0;
        for (int l = 1; l <= plan->levels; ++l)
            out += psi_alpha_ell(alpha, l, *plan, x) * trace->eval(components[l - 1], y);
        return out;
    }

    /// d^(dx+dy) / dx^dx dy^dy with dx+dy <= 2.
    double derivative(double x, double y, int dx, int dy) const
    {
        double out = 0.0;
        for (int l = 1; l <= plan->levels; ++l)
            out += psi_alpha_ell(alpha, l, *plan, x, dx) * trace->eval(components[l - 1], y, dy);
        return out;
    }
};

inline Extension extend(const TraceSpace& trace, const BucketPlan& plan, const Vector& w,
                        int alpha)
{
    return {&trace, &plan, alpha, decompose(trace, plan, w)};
}

/// H2 seminorm of the extension by tensor Gauss quadrature over the knot
/// spans of the perpendicular/trace knot vectors.
inline double h2_seminorm(const Extension& ext, const splines::KnotVector& kv_perp, int order)
{
    auto qx = splines::greville_and_quadrature(kv_perp, order);
    auto qy = splines::greville_and_quadrature(ext.trace->basis.knots(), order);
    double out = 0.0;
    for (std::size_t b = 0; b < qy.nodes.size(); ++b)
        for (std::size_t a = 0; a < qx.nodes.size(); ++a) {
            double xx = ext.derivative(qx.nodes[a], qy.nodes[b], 2, 0);
            double xy = ext.derivative(qx.nodes[a], qy.nodes[b], 1, 1);
            double yy = ext.derivative(qx.nodes[a], qy.nodes[b], 0, 2);
            out += qx.weights[a] * qy.weights[b] * (xx * xx + 2.0 * xy * xy + yy * yy);
        }
    return out;
}

struct BoundSample {
    int degree = 0;
    int refinement = 0;
    int alpha = 0;
    double max_ratio = 0.0;
};

/// Ratio |E_alpha w|^2_{H2} / RHS(w) with the computable surrogate
/// RHS = sum_i min(lambda_i, p/h)^{3-2a} (w,phi_i)_M^2
///       + p^{3-2a} |w|_M^2 + (p/h)^{-1-2a} |w|_D^2,
/// maximized over random trace functions.
inline BoundSample verify_bound(int alpha, int degree, int refinement, int samples,
                                unsigned seed = 1234)
{
    splines::KnotVector kv = splines::KnotVector::uniform(degree, refinement);
    TraceSpace trace = make_trace_space(kv);
    BucketPlan plan = make_bucket_plan(kv, trace);
    const double ph = degree / kv.max_span();
    const double e_spec = 3.0 - 2.0 * alpha;
    const double e_tail = -1.0 - 2.0 * alpha;

    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    BoundSample out{degree, refinement, alpha, 0.0};
    for (int s = 0; s < samples; ++s) {
        Vector w(trace.dim());
        for (int i = 0; i < trace.dim(); ++i) w[i] = dist(rng);
        Extension ext = extend(trace, plan, w, alpha);
        double lhs = h2_seminorm(ext, kv, degree + 2);
        Vector a = trace.phi.transpose() * (trace.mass * w);
        double rhs = std::pow(degree, e_spec) * w.dot(trace.mass * w) +
                     std::pow(ph, e_tail) * w.dot(trace.second * w);
        for (int i = 0; i < trace.dim(); ++i)
            rhs += std::pow(std::min(trace.lambda[i], ph), e_spec) * a[i] * a[i];
        out.max_ratio = std::max(out.max_ratio, lhs / rhs);
    }
    return out;
}

} // namespace biharm::extension
