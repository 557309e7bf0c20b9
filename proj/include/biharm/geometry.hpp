/** @file geometry.hpp
    @brief Tensor-product B-spline geometry maps, multi-patch topology with
           interface orientation, C1 matching checks, patch splitting, and the
           built-in experiment domains.
*/

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "splines.hpp"

namespace biharm::geometry {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Point, Jacobian and per-component second derivative of a geometry map.
struct MapEval {
    Vec2 point = Vec2::Zero();
    Mat2 jac = Mat2::Zero();                      // jac(c, d) = d G_c / d x_d
    std::array<Mat2, 2> hess = {Mat2::Zero(), Mat2::Zero()}; // hess[c] = Hessian of G_c
};

/// Planar tensor-product B-spline patch map G : (0,1)^2 -> R^2.
class GeometryMap {
public:
    GeometryMap() = default;

    GeometryMap(int degree_x, int degree_y, std::vector<double> knots_x,
                std::vector<double> knots_y, Eigen::MatrixX2d control_points)
        : px_(degree_x), py_(degree_y), kx_(std::move(knots_x)), ky_(std::move(knots_y)),
          cps_(std::move(control_points))
    {
        nx_ = static_cast<int>(kx_.size()) - px_ - 1;
        ny_ = static_cast<int>(ky_.size()) - py_ - 1;
        if (nx_ < 1 || ny_ < 1 || cps_.rows() != nx_ * ny_)
            throw SolverError("GeometryMap: control net does not match knot vectors");
        Vec2 lo = cps_.colwise().minCoeff().transpose();
        Vec2 hi = cps_.colwise().maxCoeff().transpose();
        diameter_ = (hi - lo).norm();
    }

    int degree_x() const { return px_; }
    int degree_y() const { return py_; }
    const std::vector<double>& knots_x() const { return kx_; }
    const std::vector<double>& knots_y() const { return ky_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const Eigen::MatrixX2d& control_points() const { return cps_; }
    Vec2 control_point(int ix, int iy) const { return cps_.row(ix + nx_ * iy); }

    /// Patch diameter proxy: diagonal of the control point bounding box.
    double diameter() const { return diameter_; }

    MapEval eval(double u, double v, int order = 2) const
    {
        using splines::eval_bspline_all;
        splines::BasisWindow bu = eval_bspline_all(px_, kx_, u, std::min(order, 2));
        splines::BasisWindow bv = eval_bspline_all(py_, ky_, v, std::min(order, 2));
        MapEval out;
        for (int a = 0; a < bu.count; ++a) {
            for (int b = 0; b < bv.count; ++b) {
                Vec2 p = cps_.row((bu.first + a) + nx_ * (bv.first + b));
                out.point += bu.values(0, a) * bv.values(0, b) * p;
                if (order >= 1) {
                    out.jac.col(0) += bu.values(1, a) * bv.values(0, b) * p;
                    out.jac.col(1) += bu.values(0, a) * bv.values(1, b) * p;
                }
                if (order >= 2) {
                    for (int c = 0; c < 2; ++c) {
                        out.hess[c](0, 0) += bu.values(2, a) * bv.values(0, b) * p[c];
                        out.hess[c](0, 1) += bu.values(1, a) * bv.values(1, b) * p[c];
                        out.hess[c](1, 1) += bu.values(0, a) * bv.values(2, b) * p[c];
                    }
                }
            }
        }
        if (order >= 2)
            for (int c = 0; c < 2; ++c) out.hess[c](1, 0) = out.hess[c](0, 1);
        if (order >= 1 && std::abs(out.jac.determinant()) < 1e-14 * diameter_ * diameter_)
            throw DegenerateJacobian("GeometryMap: Jacobian determinant vanishes");
        return out;
    }

private:
    int px_ = 0, py_ = 0;
    std::vector<double> kx_, ky_;
    int nx_ = 0, ny_ = 0;
    Eigen::MatrixX2d cps_;
    double diameter_ = 0.0;
};

// ---------------------------------------------------------------------------
// Sides and topology

enum class Side : int { West = 0, East = 1, South = 2, North = 3 };

inline Side side_from_int(int s)
{
    if (s < 0 || s > 3) throw ParseError("side index out of range");
    return static_cast<Side>(s);
}

/// Transversal parameter direction of a side (0 = x, 1 = y).
inline int side_normal_dir(Side s) { return (s == Side::West || s == Side::East) ? 0 : 1; }

/// Along-edge parameter direction of a side.
inline int side_edge_dir(Side s) { return 1 - side_normal_dir(s); }

/// Whether the side sits at parameter value 1 of its transversal direction.
inline bool side_at_one(Side s) { return s == Side::East || s == Side::North; }

/// Parameter point of an edge sample: t runs along the edge.
inline Vec2 side_param(Side s, double t)
{
    switch (s) {
    case Side::West: return {0.0, t};
    case Side::East: return {1.0, t};
    case Side::South: return {t, 0.0};
    default: return {t, 1.0};
    }
}

struct Interface {
    int patch_a = -1;
    Side side_a = Side::West;
    int patch_b = -1;
    Side side_b = Side::West;
    int orientation = 1; // +1: edge parameters aligned, -1: reversed
};

struct BoundarySide {
    int patch = -1;
    Side side = Side::West;
};

/// Corner of a patch encoded by the parameter values (cx, cy) of the corner.
struct CornerRef {
    int patch = -1;
    int cx = 0; // 0 or 1
    int cy = 0;
};

struct Vertex {
    Vec2 position = Vec2::Zero();
    std::vector<CornerRef> corners;
    bool on_boundary = false;
};

struct C1Report {
    bool value_match = false;
    bool deriv_match = false;
    double alpha = 0.0;
    double max_value_gap = 0.0;
    double max_deriv_residual = 0.0;
};

class MultiPatch;
C1Report check_c1_matching(const MultiPatch& mp, const Interface& iface, int samples = 50);

/// Non-overlapping conforming collection of patches. Every patch side belongs
/// to exactly one interface or one boundary entry.
class MultiPatch {
public:
    MultiPatch() = default;

    MultiPatch(std::vector<GeometryMap> patches, std::vector<Interface> interfaces,
               std::vector<BoundarySide> boundary)
        : patches_(std::move(patches)), interfaces_(std::move(interfaces)),
          boundary_(std::move(boundary))
    {
        validate_sides();
        build_vertices();
    }

    /// Builds the topology by geometric matching of patch sides.
    static MultiPatch connect(std::vector<GeometryMap> patches)
    {
        std::vector<Interface> ifaces;
        std::vector<BoundarySide> bdry;
        const int k = static_cast<int>(patches.size());
        double h = 0.0;
        for (const auto& g : patches) h = std::max(h, g.diameter());
        const double tol = 1e-8 * h;

        auto sample = [&](int patch, Side s, double t) {
            Vec2 uv = side_param(s, t);
            return patches[patch].eval(uv[0], uv[1], 0).point;
        };

        std::vector<std::array<bool, 4>> used(k, {false, false, false, false});
        for (int a = 0; a < k; ++a) {
            for (int sa = 0; sa < 4; ++sa) {
                if (used[a][sa]) continue;
                Side side_a = static_cast<Side>(sa);
                Vec2 a0 = sample(a, side_a, 0.0), a1 = sample(a, side_a, 1.0);
                Vec2 am = sample(a, side_a, 0.5);
                bool matched = false;
                for (int b = a; b < k && !matched; ++b) {
                    for (int sb = (b == a ? sa + 1 : 0); sb < 4; ++sb) {
                        if (used[b][sb]) continue;
                        Side side_b = static_cast<Side>(sb);
                        Vec2 b0 = sample(b, side_b, 0.0), b1 = sample(b, side_b, 1.0);
                        Vec2 bm = sample(b, side_b, 0.5);
                        int orient = 0;
                        if ((a0 - b0).norm() < tol && (a1 - b1).norm() < tol &&
                            (am - bm).norm() < tol)
                            orient = 1;
                        else if ((a0 - b1).norm() < tol && (a1 - b0).norm() < tol &&
                                 (am - bm).norm() < tol)
                            orient = -1;
                        if (orient != 0) {
                            ifaces.push_back({a, side_a, b, side_b, orient});
                            used[a][sa] = used[b][sb] = true;
                            matched = true;
                            break;
                        }
                    }
                }
                if (!matched) {
                    bdry.push_back({a, side_a});
                    used[a][sa] = true;
                }
            }
        }
        return MultiPatch(std::move(patches), std::move(ifaces), std::move(bdry));
    }

    const std::vector<GeometryMap>& patches() const { return patches_; }
    const GeometryMap& patch(int k) const { return patches_[k]; }
    int num_patches() const { return static_cast<int>(patches_.size()); }
    const std::vector<Interface>& interfaces() const { return interfaces_; }
    const std::vector<BoundarySide>& boundary() const { return boundary_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }

    double max_diameter() const
    {
        double h = 0.0;
        for (const auto& g : patches_) h = std::max(h, g.diameter());
        return h;
    }

    /// True if (patch, side) lies on the domain boundary.
    bool is_boundary(int patch, Side side) const
    {
        for (const auto& b : boundary_)
            if (b.patch == patch && b.side == side) return true;
        return false;
    }

    /// Validates trace matching and knot agreement on every interface.
    void validate_matching() const
    {
        for (const auto& f : interfaces_) {
            const GeometryMap& ga = patches_[f.patch_a];
            const GeometryMap& gb = patches_[f.patch_b];
            const auto& ka = (side_edge_dir(f.side_a) == 0) ? ga.knots_x() : ga.knots_y();
            const auto& kb = (side_edge_dir(f.side_b) == 0) ? gb.knots_x() : gb.knots_y();
            int da = (side_edge_dir(f.side_a) == 0) ? ga.degree_x() : ga.degree_y();
            int db = (side_edge_dir(f.side_b) == 0) ? gb.degree_x() : gb.degree_y();
            if (da != db || ka.size() != kb.size())
                throw NotMatching("interface knot vectors do not agree");
            for (std::size_t i = 0; i < ka.size(); ++i) {
                double expect = (f.orientation == 1) ? kb[i] : 1.0 - kb[kb.size() - 1 - i];
                if (std::abs(ka[i] - expect) > 1e-12)
                    throw NotMatching("interface knot vectors do not agree");
            }
            check_c1_matching(*this, f); // throws NotMatching on trace mismatch
        }
    }

private:
    void validate_sides() const
    {
        std::vector<std::array<int, 4>> seen(patches_.size(), {0, 0, 0, 0});
        for (const auto& f : interfaces_) {
            seen[f.patch_a][static_cast<int>(f.side_a)]++;
            seen[f.patch_b][static_cast<int>(f.side_b)]++;
        }
        for (const auto& b : boundary_) seen[b.patch][static_cast<int>(b.side)]++;
        for (std::size_t k = 0; k < patches_.size(); ++k)
            for (int s = 0; s < 4; ++s)
                if (seen[k][s] != 1)
                    throw TopologyError("every patch side must appear in exactly one interface "
                                        "or boundary entry");
    }

    void build_vertices()
    {
        const double tol = 1e-6 * std::max(max_diameter(), 1e-300);
        vertices_.clear();
        for (int k = 0; k < num_patches(); ++k) {
            for (int cy = 0; cy <= 1; ++cy) {
                for (int cx = 0; cx <= 1; ++cx) {
                    Vec2 pos = patches_[k].eval(cx, cy, 0).point;
                    int found = -1;
                    for (std::size_t v = 0; v < vertices_.size(); ++v)
                        if ((vertices_[v].position - pos).norm() < tol) {
                            found = static_cast<int>(v);
                            break;
                        }
                    if (found < 0) {
                        vertices_.push_back({pos, {}, false});
                        found = static_cast<int>(vertices_.size()) - 1;
                    }
                    vertices_[found].corners.push_back({k, cx, cy});
                }
            }
        }
        for (const auto& b : boundary_) {
            for (double t : {0.0, 1.0}) {
                Vec2 uv = side_param(b.side, t);
                Vec2 pos = patches_[b.patch].eval(uv[0], uv[1], 0).point;
                for (auto& v : vertices_)
                    if ((v.position - pos).norm() < tol) v.on_boundary = true;
            }
        }
    }

    std::vector<GeometryMap> patches_;
    std::vector<Interface> interfaces_;
    std::vector<BoundarySide> boundary_;
    std::vector<Vertex> vertices_;
};

// ---------------------------------------------------------------------------
// C1 matching

/// Inward transversal derivative of the map along a side, at edge parameter t.
inline Vec2 inward_transversal(const GeometryMap& g, Side s, double t)
{
    Vec2 uv = side_param(s, t);
    MapEval e = g.eval(uv[0], uv[1], 1);
    Vec2 d = e.jac.col(side_normal_dir(s));
    return side_at_one(s) ? Vec2(-d) : d;
}

/// Samples the shared edge; traces must agree, and the inward transversal
/// derivatives must satisfy d_b = -alpha d_a for a constant alpha > 0 fitted
/// by least squares.
inline C1Report check_c1_matching(const MultiPatch& mp, const Interface& iface, int samples)
{
    const GeometryMap& ga = mp.patch(iface.patch_a);
    const GeometryMap& gb = mp.patch(iface.patch_b);
    const double h = std::max(ga.diameter(), gb.diameter());

    C1Report rep;
    std::vector<Vec2> da(samples), db(samples);
    double num = 0.0, den = 0.0, dscale = 0.0;
    for (int i = 0; i < samples; ++i) {
        double t = (i + 0.5) / samples;
        double tb = (iface.orientation == 1) ? t : 1.0 - t;
        Vec2 pa_uv = side_param(iface.side_a, t);
        Vec2 pb_uv = side_param(iface.side_b, tb);
        Vec2 xa = ga.eval(pa_uv[0], pa_uv[1], 0).point;
        Vec2 xb = gb.eval(pb_uv[0], pb_uv[1], 0).point;
        rep.max_value_gap = std::max(rep.max_value_gap, (xa - xb).norm());
        da[i] = inward_transversal(ga, iface.side_a, t);
        db[i] = inward_transversal(gb, iface.side_b, tb);
        num -= db[i].dot(da[i]);
        den += da[i].squaredNorm();
        dscale = std::max(dscale, da[i].norm());
    }
    if (rep.max_value_gap > 1e-8 * h)
        throw NotMatching("interface traces do not coincide");
    rep.value_match = rep.max_value_gap <= 1e-10 * h;
    rep.alpha = num / den;
    for (int i = 0; i < samples; ++i)
        rep.max_deriv_residual = std::max(rep.max_deriv_residual, (db[i] + rep.alpha * da[i]).norm());
    rep.deriv_match = rep.alpha > 0.0 && rep.max_deriv_residual <= 1e-8 * dscale;
    return rep;
}

// ---------------------------------------------------------------------------
// Patch splitting by knot insertion

namespace detail {

struct Curve1D {
    int p = 0;
    std::vector<double> knots;
    Eigen::MatrixXd pts; // one control "point" per row
};

inline void insert_knot(Curve1D& c, double u)
{
    const int k = splines::find_span(c.p, c.knots, u);
    Eigen::MatrixXd q(c.pts.rows() + 1, c.pts.cols());
    for (int i = 0; i <= k - c.p; ++i) q.row(i) = c.pts.row(i);
    for (int i = k - c.p + 1; i <= k; ++i) {
        double denom = c.knots[i + c.p] - c.knots[i];
        double a = denom > 0.0 ? (u - c.knots[i]) / denom : 0.0;
        q.row(i) = (1.0 - a) * c.pts.row(i - 1) + a * c.pts.row(i);
    }
    for (int i = k + 1; i < q.rows(); ++i) q.row(i) = c.pts.row(i - 1);
    c.knots.insert(c.knots.begin() + k + 1, u);
    c.pts = std::move(q);
}

/// Splits a clamped spline curve at i/parts into `parts` curves, each
/// re-parameterized over [0,1]. The sub-curves reproduce the original exactly.
inline std::vector<Curve1D> split_curve(Curve1D curve, int parts)
{
    const double eps = 1e-12;
    for (int i = 1; i < parts; ++i) {
        double u = static_cast<double>(i) / parts;
        int mult = 0;
        for (double k : curve.knots)
            if (std::abs(k - u) < eps) ++mult;
        for (int m = mult; m < curve.p; ++m) insert_knot(curve, u);
    }
    std::vector<Curve1D> out;
    int start = 0;
    for (int i = 0; i < parts; ++i) {
        double a = static_cast<double>(i) / parts;
        double b = static_cast<double>(i + 1) / parts;
        Curve1D part;
        part.p = curve.p;
        part.knots.assign(curve.p + 1, 0.0);
        int interior = 0;
        for (double k : curve.knots)
            if (k > a + eps && k < b - eps) {
                part.knots.push_back((k - a) / (b - a));
                ++interior;
            }
        part.knots.insert(part.knots.end(), curve.p + 1, 1.0);
        int n = curve.p + 1 + interior;
        part.pts = curve.pts.middleRows(start, n);
        start += n - 1; // junction control point is shared
        out.push_back(std::move(part));
    }
    return out;
}

} // namespace detail

/// Splits a patch into an m x n grid of exact restrictions. Patch (i, j) of
/// the result (index i + m*j) covers [i/m, (i+1)/m] x [j/n, (j+1)/n].
inline std::vector<GeometryMap> split_patch(const GeometryMap& g, int m, int n)
{
    if (m < 1 || n < 1) throw SolverError("split_patch: counts must be >= 1");
    using detail::Curve1D;

    // split in x: control rows are curves in R^(2 ny)
    Curve1D cx;
    cx.p = g.degree_x();
    cx.knots = g.knots_x();
    cx.pts.resize(g.nx(), 2 * g.ny());
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int iy = 0; iy < g.ny(); ++iy) {
            cx.pts(ix, 2 * iy) = g.control_point(ix, iy)[0];
            cx.pts(ix, 2 * iy + 1) = g.control_point(ix, iy)[1];
        }
    auto xparts = detail::split_curve(std::move(cx), m);

    std::vector<GeometryMap> out(m * n);
    for (int i = 0; i < m; ++i) {
        const int nxi = static_cast<int>(xparts[i].pts.rows());
        Curve1D cy;
        cy.p = g.degree_y();
        cy.knots = g.knots_y();
        cy.pts.resize(g.ny(), 2 * nxi);
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < nxi; ++ix) {
                cy.pts(iy, 2 * ix) = xparts[i].pts(ix, 2 * iy);
                cy.pts(iy, 2 * ix + 1) = xparts[i].pts(ix, 2 * iy + 1);
            }
        auto yparts = detail::split_curve(std::move(cy), n);
        for (int j = 0; j < n; ++j) {
            const int nyj = static_cast<int>(yparts[j].pts.rows());
            Eigen::MatrixX2d cps(nxi * nyj, 2);
            for (int iy = 0; iy < nyj; ++iy)
                for (int ix = 0; ix < nxi; ++ix) {
                    cps(ix + nxi * iy, 0) = yparts[j].pts(iy, 2 * ix);
                    cps(ix + nxi * iy, 1) = yparts[j].pts(iy, 2 * ix + 1);
                }
            out[i + m * j] =
                GeometryMap(g.degree_x(), g.degree_y(), xparts[i].knots, yparts[j].knots, cps);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in domains

namespace detail {

inline GeometryMap tensor_from_coeffs(const std::vector<double>& knots_u,
                                      const std::vector<double>& knots_v,
                                      const std::vector<Vec2>& cps, int degree = 2)
{
    int nx = static_cast<int>(knots_u.size()) - degree - 1;
    int ny = static_cast<int>(knots_v.size()) - degree - 1;
    Eigen::MatrixX2d m(nx * ny, 2);
    for (int i = 0; i < nx * ny; ++i) m.row(i) = cps[i];
    return GeometryMap(degree, degree, knots_u, knots_v, m);
}

inline GeometryMap identity_square()
{
    std::vector<double> kk = {0, 0, 0, 1, 1, 1};
    std::vector<Vec2> cps;
    for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) cps.push_back({i / 2.0, j / 2.0});
    return tensor_from_coeffs(kk, kk, cps);
}

/// Quarter annulus, inner radius 1, outer radius 2, first quadrant; degree 2,
/// knots (0,0,0,1/2,1,1,1) in both directions; x = radial, y = angular. The
/// angular direction uses the C1 two-arc interpolating B-spline approximation
/// of the circle.
inline GeometryMap quarter_annulus_base()
{
    const double t = std::tan(M_PI / 8.0);
    std::vector<double> kk = {0, 0, 0, 0.5, 1, 1, 1};
    std::vector<double> radii = {1.0, 1.25, 1.75, 2.0};
    std::vector<Vec2> arc = {{1.0, 0.0}, {1.0, t}, {t, 1.0}, {0.0, 1.0}};
    std::vector<Vec2> cps;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) cps.push_back(radii[i] * arc[j]);
    return tensor_from_coeffs(kk, kk, cps);
}

/// 8-patch D-shaped lamella with a hole: a half-annulus cap (two quarter
/// annuli, radii 1 and 3) on top, closed below by rectangles around the hole
/// [-1,1] x [-2,0]. Rectangles adjacent to the cap are reparameterized so
/// that the transversal derivative matches the annulus tangent (alpha = 1).
inline std::vector<GeometryMap> lamella_base()
{
    const double t = std::tan(M_PI / 8.0);
    std::vector<double> kk = {0, 0, 0, 0.5, 1, 1, 1};
    auto grev = [](double a, double b) { // degree-2 coefficients of a linear map
        return std::vector<double>{a, a + 0.25 * (b - a), a + 0.75 * (b - a), b};
    };

    std::vector<GeometryMap> out;

    // cap: x = radial (1..3), y = angular
    std::vector<double> radii = grev(1.0, 3.0);
    std::vector<Vec2> arc_ne = {{1.0, 0.0}, {1.0, t}, {t, 1.0}, {0.0, 1.0}};
    std::vector<Vec2> arc_nw = {{0.0, 1.0}, {-t, 1.0}, {-1.0, t}, {-1.0, 0.0}};
    for (const auto& arc : {arc_ne, arc_nw}) {
        std::vector<Vec2> cps;
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) cps.push_back(radii[i] * arc[j]);
        out.push_back(tensor_from_coeffs(kk, kk, cps));
    }

    // columns under the cap ends; the y coefficients interpolate between
    // speed 2 at the bottom and the cap tangent 4t(1+2x) at the top
    auto column = [&](double sign) {
        std::vector<double> xs = grev(sign * 1.0, sign * 3.0);
        std::vector<Vec2> cps(16);
        std::array<double, 4> ycoef;
        for (int i = 0; i < 4; ++i) {
            double xhat = std::vector<double>{0.0, 0.25, 0.75, 1.0}[i];
            ycoef = {-2.0, -1.5, -t * (1.0 + 2.0 * xhat), 0.0};
            for (int j = 0; j < 4; ++j) cps[i + 4 * j] = {xs[i], ycoef[j]};
        }
        return tensor_from_coeffs(kk, kk, cps);
    };
    out.push_back(column(+1.0)); // E  (right of the hole)
    out.push_back(column(-1.0)); // W  (left of the hole)

    // plain rectangles in the bottom row and the two bottom corners
    auto rect = [&](std::vector<double> xs, std::vector<double> ys) {
        std::vector<Vec2> cps(16);
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) cps[i + 4 * j] = {xs[i], ys[j]};
        return tensor_from_coeffs(kk, kk, cps);
    };
    std::vector<double> ybot = grev(-4.0, -2.0);
    out.push_back(rect(grev(-1.0, -3.0), ybot)); // SW, x runs outward like W
    out.push_back(rect(grev(1.0, 3.0), ybot));   // SE
    // bottom middle pair: x-speed 2 at the outer ends, 1 at the shared joint
    out.push_back(rect({-1.0, -0.5, -0.25, 0.0}, ybot)); // S1
    out.push_back(rect({0.0, 0.25, 0.5, 1.0}, ybot));    // S2
    return out;
}

} // namespace detail

/// Built-in experiment domains. `splits` subdivides every base patch into
/// splits x splits sub-patches (unit_square base: 1 patch; quarter_annulus
/// base: 1 patch; lamella base: 8 patches).
inline MultiPatch builtin_domain(const std::string& name, int splits)
{
    if (splits < 1) throw SolverError("builtin_domain: splits must be >= 1");
    std::vector<GeometryMap> base;
    if (name == "unit_square")
        base.push_back(detail::identity_square());
    else if (name == "quarter_annulus")
        base.push_back(detail::quarter_annulus_base());
    else if (name == "lamella")
        base = detail::lamella_base();
    else
        throw UnknownDomain("unknown domain: " + name);

    std::vector<GeometryMap> all;
    for (const auto& g : base) {
        auto parts = split_patch(g, splits, splits);
        all.insert(all.end(), parts.begin(), parts.end());
    }
    return MultiPatch::connect(std::move(all));
}

// ---------------------------------------------------------------------------
// JSON serialization

inline void save_multipatch(const MultiPatch& mp, const std::string& path)
{
    nlohmann::json j;
    j["patches"] = nlohmann::json::array();
    for (const auto& g : mp.patches()) {
        nlohmann::json p;
        p["degree"] = {g.degree_x(), g.degree_y()};
        p["knots_u"] = g.knots_x();
        p["knots_v"] = g.knots_y();
        auto cps = nlohmann::json::array();
        for (int i = 0; i < g.control_points().rows(); ++i)
            cps.push_back({g.control_points()(i, 0), g.control_points()(i, 1)});
        p["cps"] = cps;
        j["patches"].push_back(p);
    }
    j["interfaces"] = nlohmann::json::array();
    for (const auto& f : mp.interfaces())
        j["interfaces"].push_back({{"a", f.patch_a},
                                   {"side_a", static_cast<int>(f.side_a)},
                                   {"b", f.patch_b},
                                   {"side_b", static_cast<int>(f.side_b)},
                                   {"orient", f.orientation}});
    j["boundary"] = nlohmann::json::array();
    for (const auto& b : mp.boundary())
        j["boundary"].push_back({{"patch", b.patch}, {"side", static_cast<int>(b.side)}});

    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline MultiPatch load_multipatch(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
    }

    auto fail = [&](const std::string& what, int index) {
        std::ostringstream os;
        os << path << ": " << what << " (entry " << index << ")";
        return ParseError(os.str());
    };

    std::vector<GeometryMap> patches;
    if (!j.contains("patches") || !j["patches"].is_array()) throw fail("missing patches array", 0);
    int idx = 0;
    for (const auto& p : j["patches"]) {
        try {
            std::vector<double> ku = p.at("knots_u").get<std::vector<double>>();
            std::vector<double> kv = p.at("knots_v").get<std::vector<double>>();
            std::vector<int> deg = p.at("degree").get<std::vector<int>>();
            auto cps_json = p.at("cps");
            Eigen::MatrixX2d cps(cps_json.size(), 2);
            for (std::size_t i = 0; i < cps_json.size(); ++i) {
                cps(i, 0) = cps_json[i].at(0).get<double>();
                cps(i, 1) = cps_json[i].at(1).get<double>();
            }
            patches.emplace_back(deg.at(0), deg.at(1), ku, kv, cps);
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("bad patch: ") + e.what(), idx);
        }
        ++idx;
    }

    std::vector<Interface> ifaces;
    idx = 0;
    for (const auto& f : j.value("interfaces", nlohmann::json::array())) {
        try {
            ifaces.push_back({f.at("a").get<int>(), side_from_int(f.at("side_a").get<int>()),
                              f.at("b").get<int>(), side_from_int(f.at("side_b").get<int>()),
                              f.value("orient", 1)});
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("bad interface: ") + e.what(), idx);
        }
        ++idx;
    }
    std::vector<BoundarySide> bdry;
    idx = 0;
    for (const auto& b : j.value("boundary", nlohmann::json::array())) {
        try {
            bdry.push_back({b.at("patch").get<int>(), side_from_int(b.at("side").get<int>())});
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("bad boundary side: ") + e.what(), idx);
        }
        ++idx;
    }

    MultiPatch mp(std::move(patches), std::move(ifaces), std::move(bdry));
    mp.validate_matching();
    return mp;
}

} // namespace biharm::geometry
