/** @file assembly.hpp
    @brief Patch-local Galerkin assembly of the Hessian-Frobenius form in the
           transformed basis, Dirichlet elimination, and dof classification.

    Dof classes per patch (tensor index = ix + Nx*iy):
      - Eliminated: nonvanishing value or normal derivative on a clamped side,
        and the 2x2 corner blocks at vertices on the clamped boundary.
      - Primal: the remaining 2x2 corner blocks (fat vertices).
      - InterfaceValue / InterfaceDerivative: the outermost / second layer on
        interface sides, excluding the two outermost indices at each edge end.
      - Interior: everything else.
*/

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <tuple>
#include <vector>

#include "common.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "splines.hpp"

namespace biharm::assembly {

using geometry::GeometryMap;
using geometry::MultiPatch;
using geometry::Side;
using geometry::Vec2;
using splines::TensorBasis2D;

using ScalarField = std::function<double(double, double)>;
using VectorField = std::function<Vec2(double, double)>;

enum class DofClass : unsigned char {
    Interior,
    InterfaceValue,
    InterfaceDerivative,
    Primal,
    Eliminated
};

struct PatchDofs {
    int nx = 0, ny = 0;
    std::vector<DofClass> klass;     // per tensor dof
    std::vector<int> free_index;     // tensor -> free index, -1 if eliminated
    std::vector<int> free_to_tensor; // free index -> tensor dof
    int n_free = 0;

    // group lists in free indices
    std::vector<int> interior;
    std::vector<int> gamma;       // interface layers, values then derivatives
    std::vector<int> gamma_value; // subset of gamma
    std::vector<int> gamma_deriv; // subset of gamma
    std::vector<int> primal;

    int tensor(int ix, int iy) const { return ix + nx * iy; }
};

/// One Lagrange multiplier row: coef_a * u_a + coef_b * u_b = 0.
struct Multiplier {
    int patch_a = -1;
    int tensor_a = -1;
    double coef_a = 1.0;
    int patch_b = -1;
    int tensor_b = -1;
    double coef_b = -1.0;
    bool derivative_layer = false;
};

/// One R^(k) entry: local (tensor) primal dof = weight * global primal dof.
struct PrimalEntry {
    int tensor = -1;
    int global = -1;
    double weight = 1.0;
};

struct DofTable {
    std::vector<PatchDofs> patches;
    std::vector<Multiplier> multipliers;
    std::vector<std::vector<PrimalEntry>> primal; // per patch
    int n_primal = 0;

    int n_lambda() const { return static_cast<int>(multipliers.size()); }
    int total_free() const
    {
        int n = 0;
        for (const auto& p : patches) n += p.n_free;
        return n;
    }
};

/// Uniform discretization bases of degree p with 2^r - 1 interior knots on
/// every patch (fully matching by construction).
inline std::vector<TensorBasis2D> make_bases(const MultiPatch& mp, int degree, int refinement)
{
    splines::TransformedBasis1D basis(
        splines::KnotVector::uniform(degree, refinement, /*allow_coarse=*/refinement >= 2));
    std::vector<TensorBasis2D> out(mp.num_patches());
    for (auto& tb : out) tb = {basis, basis};
    return out;
}

namespace detail {

enum class SideKind { Interface, Clamped, Free };

/// Tensor indices of the value/derivative layer of a side.
inline std::pair<int, int> layer_indices(Side s, int nx, int ny)
{
    switch (s) {
    case Side::West: return {0, 1};
    case Side::East: return {nx - 1, nx - 2};
    case Side::South: return {0, 1};
    default: return {ny - 1, ny - 2};
    }
}

/// Inward parametric tangents of a patch at one of its corners.
inline std::pair<Vec2, Vec2> corner_tangents(const GeometryMap& g, int cx, int cy)
{
    geometry::MapEval e = g.eval(cx, cy, 1);
    Vec2 tx = e.jac.col(0) * (cx == 0 ? 1.0 : -1.0);
    Vec2 ty = e.jac.col(1) * (cy == 0 ? 1.0 : -1.0);
    return {tx, ty};
}

} // namespace detail

/// Classifies all patch dofs, enumerates the Lagrange multipliers (value and
/// derivative layer, per interface) and builds the signed primal maps. Sides
/// listed in `free_sides` are left unconstrained instead of clamped.
inline DofTable classify_dofs(const MultiPatch& mp, const std::vector<TensorBasis2D>& bases,
                              const std::vector<geometry::BoundarySide>& free_sides = {})
{
    using detail::SideKind;
    const int nk = mp.num_patches();
    DofTable table;
    table.patches.resize(nk);
    table.primal.resize(nk);

    auto side_kind = [&](int k, Side s) {
        if (!mp.is_boundary(k, s)) return SideKind::Interface;
        for (const auto& fs : free_sides)
            if (fs.patch == k && fs.side == s) return SideKind::Free;
        return SideKind::Clamped;
    };

    // vertices touched by a clamped side
    std::vector<bool> vertex_clamped(mp.vertices().size(), false);
    {
        const double tol = 1e-6 * std::max(mp.max_diameter(), 1e-300);
        for (const auto& b : mp.boundary()) {
            if (side_kind(b.patch, b.side) != SideKind::Clamped) continue;
            for (double t : {0.0, 1.0}) {
                Vec2 uv = geometry::side_param(b.side, t);
                Vec2 pos = mp.patch(b.patch).eval(uv[0], uv[1], 0).point;
                for (std::size_t v = 0; v < mp.vertices().size(); ++v)
                    if ((mp.vertices()[v].position - pos).norm() < tol) vertex_clamped[v] = true;
            }
        }
    }

    // per patch corner -> vertex id
    std::vector<std::array<int, 4>> corner_vertex(nk, {-1, -1, -1, -1});
    for (std::size_t v = 0; v < mp.vertices().size(); ++v)
        for (const auto& c : mp.vertices()[v].corners)
            corner_vertex[c.patch][c.cx + 2 * c.cy] = static_cast<int>(v);

    // classification
    for (int k = 0; k < nk; ++k) {
        PatchDofs& pd = table.patches[k];
        pd.nx = bases[k].nx();
        pd.ny = bases[k].ny();
        const int nx = pd.nx, ny = pd.ny;
        pd.klass.assign(nx * ny, DofClass::Interior);
        pd.free_index.assign(nx * ny, -1);

        const SideKind west = side_kind(k, Side::West), east = side_kind(k, Side::East);
        const SideKind south = side_kind(k, Side::South), north = side_kind(k, Side::North);

        auto corner_range_x = [&](int ix) { return ix <= 1 || ix >= nx - 2; };
        auto corner_range_y = [&](int iy) { return iy <= 1 || iy >= ny - 2; };

        for (int iy = 0; iy < ny; ++iy) {
            for (int ix = 0; ix < nx; ++ix) {
                DofClass c = DofClass::Interior;
                const bool cut_w = (west == SideKind::Clamped && ix <= 1);
                const bool cut_e = (east == SideKind::Clamped && ix >= nx - 2);
                const bool cut_s = (south == SideKind::Clamped && iy <= 1);
                const bool cut_n = (north == SideKind::Clamped && iy >= ny - 2);
                if (cut_w || cut_e || cut_s || cut_n) {
                    c = DofClass::Eliminated;
                } else if (corner_range_x(ix) && corner_range_y(iy)) {
                    int cx = (ix >= nx - 2) ? 1 : 0;
                    int cy = (iy >= ny - 2) ? 1 : 0;
                    int v = corner_vertex[k][cx + 2 * cy];
                    c = vertex_clamped[v] ? DofClass::Eliminated : DofClass::Primal;
                } else if (ix == 0 && west == SideKind::Interface) {
                    c = DofClass::InterfaceValue;
                } else if (ix == 1 && west == SideKind::Interface) {
                    c = DofClass::InterfaceDerivative;
                } else if (ix == nx - 1 && east == SideKind::Interface) {
                    c = DofClass::InterfaceValue;
                } else if (ix == nx - 2 && east == SideKind::Interface) {
                    c = DofClass::InterfaceDerivative;
                } else if (iy == 0 && south == SideKind::Interface) {
                    c = DofClass::InterfaceValue;
                } else if (iy == 1 && south == SideKind::Interface) {
                    c = DofClass::InterfaceDerivative;
                } else if (iy == ny - 1 && north == SideKind::Interface) {
                    c = DofClass::InterfaceValue;
                } else if (iy == ny - 2 && north == SideKind::Interface) {
                    c = DofClass::InterfaceDerivative;
                }
                pd.klass[pd.tensor(ix, iy)] = c;
            }
        }

        for (int t = 0; t < nx * ny; ++t) {
            if (pd.klass[t] == DofClass::Eliminated) continue;
            pd.free_index[t] = pd.n_free++;
            pd.free_to_tensor.push_back(t);
        }
        for (int t = 0; t < nx * ny; ++t) {
            const int f = pd.free_index[t];
            switch (pd.klass[t]) {
            case DofClass::Interior: pd.interior.push_back(f); break;
            case DofClass::InterfaceValue: pd.gamma_value.push_back(f); break;
            case DofClass::InterfaceDerivative: pd.gamma_deriv.push_back(f); break;
            case DofClass::Primal: pd.primal.push_back(f); break;
            default: break;
            }
        }
        pd.gamma = pd.gamma_value;
        pd.gamma.insert(pd.gamma.end(), pd.gamma_deriv.begin(), pd.gamma_deriv.end());
    }

    // Lagrange multipliers: per interface, value-layer pairs then
    // derivative-layer pairs, along-edge indices 2..n-3.
    for (const auto& f : mp.interfaces()) {
        const PatchDofs& pa = table.patches[f.patch_a];
        const PatchDofs& pb = table.patches[f.patch_b];
        geometry::C1Report c1 = geometry::check_c1_matching(mp, f);
        if (!(c1.alpha > 0.0))
            throw NotMatching("interface transversal derivatives are not parallel");
        // exact +-1 constraint coefficients unless genuinely weighted
        const double alpha = (std::abs(c1.alpha - 1.0) <= 1e-8) ? 1.0 : c1.alpha;

        const int edge_dir_a = geometry::side_edge_dir(f.side_a);
        const int edge_dir_b = geometry::side_edge_dir(f.side_b);
        const int na = (edge_dir_a == 0) ? pa.nx : pa.ny;
        const int nb = (edge_dir_b == 0) ? pb.nx : pb.ny;
        if (na != nb) throw TopologyError("interface layers have different sizes");
        auto [va, da] = detail::layer_indices(f.side_a, pa.nx, pa.ny);
        auto [vb, db] = detail::layer_indices(f.side_b, pb.nx, pb.ny);

        auto tensor_of = [](const PatchDofs& p, int edge_dir, int layer, int along) {
            return (edge_dir == 0) ? p.tensor(along, layer) : p.tensor(layer, along);
        };

        for (int layer = 0; layer < 2; ++layer) {
            const bool deriv = layer == 1;
            for (int j = 2; j <= na - 3; ++j) {
                const int jb = (f.orientation == 1) ? j : na - 1 - j;
                Multiplier m;
                m.patch_a = f.patch_a;
                m.patch_b = f.patch_b;
                m.tensor_a = tensor_of(pa, edge_dir_a, deriv ? da : va, j);
                m.tensor_b = tensor_of(pb, edge_dir_b, deriv ? db : vb, jb);
                m.derivative_layer = deriv;
                m.coef_a = 1.0;
                // traces equal for the value layer; inward transversal
                // derivatives satisfy d_b = -alpha d_a, so the derivative
                // coefficients obey c_a + (1/alpha) c_b = 0
                m.coef_b = deriv ? 1.0 / alpha : -1.0;
                DofClass expect_a = deriv ? DofClass::InterfaceDerivative : DofClass::InterfaceValue;
                if (pa.klass[m.tensor_a] != expect_a || pb.klass[m.tensor_b] != expect_a)
                    throw TopologyError("matched edge dof lacks a partner of the same class");
                table.multipliers.push_back(m);
            }
        }
    }

    // Primal maps: 4 global dofs per non-clamped vertex (value, two first
    // derivatives along reference tangent axes, mixed). Signs are resolved by
    // matching each corner's inward tangents against the reference axes.
    std::vector<int> vertex_base(mp.vertices().size(), -1);
    for (std::size_t v = 0; v < mp.vertices().size(); ++v) {
        if (vertex_clamped[v]) continue;
        const auto& corners = mp.vertices()[v].corners;
        bool active = false;
        for (const auto& c : corners) {
            const PatchDofs& pd = table.patches[c.patch];
            int ix = (c.cx == 0) ? 0 : pd.nx - 1;
            int iy = (c.cy == 0) ? 0 : pd.ny - 1;
            if (pd.klass[pd.tensor(ix, iy)] == DofClass::Primal) active = true;
        }
        if (!active) continue;
        vertex_base[v] = table.n_primal;
        table.n_primal += 4;

        auto [axis_a, axis_b] = detail::corner_tangents(mp.patch(corners[0].patch), corners[0].cx,
                                                        corners[0].cy);
        const double tol = 1e-6 * std::max(axis_a.norm(), axis_b.norm());
        auto match_axis = [&](const Vec2& t) -> std::pair<int, double> {
            for (int m = 0; m < 2; ++m) {
                const Vec2& axis = (m == 0) ? axis_a : axis_b;
                if ((t - axis).norm() < tol) return {m, 1.0};
                if ((t + axis).norm() < tol) return {m, -1.0};
            }
            throw TopologyError("corner tangents do not match the vertex reference axes");
        };

        for (const auto& c : corners) {
            PatchDofs& pd = table.patches[c.patch];
            const int vx = (c.cx == 0) ? 0 : pd.nx - 1;
            const int vy = (c.cy == 0) ? 0 : pd.ny - 1;
            const int dx = (c.cx == 0) ? 1 : pd.nx - 2;
            const int dy = (c.cy == 0) ? 1 : pd.ny - 2;
            if (pd.klass[pd.tensor(vx, vy)] != DofClass::Primal) continue;

            auto [tx, ty] = detail::corner_tangents(mp.patch(c.patch), c.cx, c.cy);
            auto [mx, sx] = match_axis(tx);
            auto [my, sy] = match_axis(ty);
            if (mx == my) throw TopologyError("degenerate tangent axes at a vertex");

            const int base = vertex_base[v];
            auto& list = table.primal[c.patch];
            list.push_back({pd.tensor(vx, vy), base + 0, 1.0});
            list.push_back({pd.tensor(dx, vy), base + 1 + mx, sx});
            list.push_back({pd.tensor(vx, dy), base + 1 + my, sy});
            list.push_back({pd.tensor(dx, dy), base + 3, sx * sy});
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Galerkin assembly

struct LocalSystem {
    linalg::Sparse a;  // over free dofs
    Eigen::VectorXd f; // over free dofs
};

/// Physical value/gradient/Hessian of one shape function from its parametric
/// derivatives (chain rule with the inverse Jacobian and the map curvature).
struct ShapeDerivs {
    double value = 0.0;
    Vec2 grad = Vec2::Zero();
    Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

namespace detail {

inline ShapeDerivs pullback_shape(const geometry::MapEval& e, const Eigen::Matrix2d& jac_inv,
                                  double v, const Vec2& pgrad, const Eigen::Matrix2d& phess)
{
    ShapeDerivs out;
    out.value = v;
    out.grad = jac_inv.transpose() * pgrad;
    Eigen::Matrix2d corrected = phess - out.grad[0] * e.hess[0] - out.grad[1] * e.hess[1];
    out.hess = jac_inv.transpose() * corrected * jac_inv;
    return out;
}

struct Cache1D {
    splines::Quadrature1D quad;
    std::vector<splines::BasisWindow> windows; // one per quadrature node
};

inline Cache1D build_cache(const splines::TransformedBasis1D& basis, int order)
{
    Cache1D c;
    c.quad = splines::greville_and_quadrature(basis.knots(), order);
    c.windows.reserve(c.quad.nodes.size());
    for (double x : c.quad.nodes) c.windows.push_back(basis.eval_all(x, 2));
    return c;
}

} // namespace detail

/// Assembles the patch stiffness matrix of the Hessian-Frobenius form and the
/// load vector over the free dofs. quad_order <= 0 selects p+1 points per
/// span and direction.
inline LocalSystem assemble_local(const GeometryMap& g, const TensorBasis2D& tb,
                                  const ScalarField& source, const PatchDofs& dofs,
                                  int quad_order = 0)
{
    const int p = std::max(tb.basis_x.knots().degree(), tb.basis_y.knots().degree());
    const int order = quad_order > 0 ? quad_order : p + 1;
    detail::Cache1D cx = detail::build_cache(tb.basis_x, order);
    detail::Cache1D cy = detail::build_cache(tb.basis_y, order);

    const int n_free = dofs.n_free;
    linalg::SparseSym a(n_free);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);

    const int nsx = static_cast<int>(cx.quad.spans.size());
    const int nsy = static_cast<int>(cy.quad.spans.size());
    std::vector<ShapeDerivs> shapes;
    std::vector<int> free_ids;

    for (int sy = 0; sy < nsy; ++sy) {
        for (int sx = 0; sx < nsx; ++sx) {
            const auto& w0x = cx.windows[cx.quad.offsets[sx]];
            const auto& w0y = cy.windows[cy.quad.offsets[sy]];
            const int ne = w0x.count * w0y.count;
            Eigen::MatrixXd elem = Eigen::MatrixXd::Zero(ne, ne);
            Eigen::VectorXd elem_rhs = Eigen::VectorXd::Zero(ne);

            for (int qy = cy.quad.offsets[sy]; qy < cy.quad.offsets[sy + 1]; ++qy) {
                const auto& wy = cy.windows[qy];
                for (int qx = cx.quad.offsets[sx]; qx < cx.quad.offsets[sx + 1]; ++qx) {
                    const auto& wx = cx.windows[qx];
                    geometry::MapEval e = g.eval(cx.quad.nodes[qx], cy.quad.nodes[qy], 2);
                    const double det = e.jac.determinant();
                    const Eigen::Matrix2d jac_inv = e.jac.inverse();
                    const double w =
                        cx.quad.weights[qx] * cy.quad.weights[qy] * std::abs(det);

                    shapes.clear();
                    for (int b = 0; b < wy.count; ++b) {
                        for (int axx = 0; axx < wx.count; ++axx) {
                            double v = wx.values(0, axx) * wy.values(0, b);
                            Vec2 pg(wx.values(1, axx) * wy.values(0, b),
                                    wx.values(0, axx) * wy.values(1, b));
                            Eigen::Matrix2d ph;
                            ph(0, 0) = wx.values(2, axx) * wy.values(0, b);
                            ph(0, 1) = ph(1, 0) = wx.values(1, axx) * wy.values(1, b);
                            ph(1, 1) = wx.values(0, axx) * wy.values(2, b);
                            shapes.push_back(detail::pullback_shape(e, jac_inv, v, pg, ph));
                        }
                    }
                    const double fval = source ? source(e.point[0], e.point[1]) : 0.0;
                    for (int i = 0; i < ne; ++i) {
                        const auto& si = shapes[i];
                        elem_rhs[i] += w * fval * si.value;
                        for (int j = 0; j <= i; ++j) {
                            const auto& sj = shapes[j];
                            double frob = si.hess(0, 0) * sj.hess(0, 0) +
                                          2.0 * si.hess(0, 1) * sj.hess(0, 1) +
                                          si.hess(1, 1) * sj.hess(1, 1);
                            elem(i, j) += w * frob;
                        }
                    }
                }
            }

            free_ids.clear();
            for (int b = 0; b < w0y.count; ++b)
                for (int axx = 0; axx < w0x.count; ++axx)
                    free_ids.push_back(
                        dofs.free_index[dofs.tensor(w0x.first + axx, w0y.first + b)]);
            for (int i = 0; i < ne; ++i) {
                if (free_ids[i] < 0) continue;
                rhs[free_ids[i]] += elem_rhs[i];
                for (int j = 0; j < ne; ++j) {
                    if (free_ids[j] < 0) continue;
                    double v = (j <= i) ? elem(i, j) : elem(j, i);
                    if (v != 0.0) a.add(free_ids[i], free_ids[j], v);
                }
            }
        }
    }
    a.compress();
    return {a.matrix(), rhs};
}

/// Evaluates a discrete function given by free-dof coefficients at one
/// parametric point (eliminated dofs are zero).
inline ShapeDerivs eval_field(const GeometryMap& g, const TensorBasis2D& tb, const PatchDofs& dofs,
                              const Eigen::VectorXd& coeffs, double u, double v)
{
    splines::BasisWindow wx = tb.basis_x.eval_all(u, 2);
    splines::BasisWindow wy = tb.basis_y.eval_all(v, 2);
    geometry::MapEval e = g.eval(u, v, 2);
    Eigen::Matrix2d jac_inv = e.jac.inverse();
    ShapeDerivs total;
    for (int b = 0; b < wy.count; ++b) {
        for (int a = 0; a < wx.count; ++a) {
            int f = dofs.free_index[dofs.tensor(wx.first + a, wy.first + b)];
            if (f < 0) continue;
            const double c = coeffs[f];
            if (c == 0.0) continue;
            double val = wx.values(0, a) * wy.values(0, b);
            Vec2 pg(wx.values(1, a) * wy.values(0, b), wx.values(0, a) * wy.values(1, b));
            Eigen::Matrix2d ph;
            ph(0, 0) = wx.values(2, a) * wy.values(0, b);
            ph(0, 1) = ph(1, 0) = wx.values(1, a) * wy.values(1, b);
            ph(1, 1) = wx.values(0, a) * wy.values(2, b);
            ShapeDerivs s = detail::pullback_shape(e, jac_inv, val, pg, ph);
            total.value += c * s.value;
            total.grad += c * s.grad;
            total.hess += c * s.hess;
        }
    }
    return total;
}

/// Quasi-interpolation of an exact solution onto the free dofs: a quadrature
/// least-squares fit of values and (scaled) gradients. Reproduces any
/// function in the discrete space exactly; used by convergence tests.
inline Eigen::VectorXd interpolate_boundary_free(const GeometryMap& g, const TensorBasis2D& tb,
                                                 const PatchDofs& dofs, const ScalarField& u,
                                                 const VectorField& grad_u)
{
    const int p = std::max(tb.basis_x.knots().degree(), tb.basis_y.knots().degree());
    detail::Cache1D cx = detail::build_cache(tb.basis_x, p + 1);
    detail::Cache1D cy = detail::build_cache(tb.basis_y, p + 1);
    const double h2 = tb.basis_x.knots().max_span() * tb.basis_y.knots().max_span();

    linalg::SparseSym gram(dofs.n_free);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dofs.n_free);

    for (std::size_t qy = 0; qy < cy.quad.nodes.size(); ++qy) {
        const auto& wy = cy.windows[qy];
        for (std::size_t qx = 0; qx < cx.quad.nodes.size(); ++qx) {
            const auto& wx = cx.windows[qx];
            geometry::MapEval e = g.eval(cx.quad.nodes[qx], cy.quad.nodes[qy], 1);
            const double w = cx.quad.weights[qx] * cy.quad.weights[qy];
            const double uval = u(e.point[0], e.point[1]);
            Vec2 pgrad_u = e.jac.transpose() * grad_u(e.point[0], e.point[1]);

            std::vector<int> ids;
            std::vector<double> vals;
            std::vector<Vec2> grads;
            for (int b = 0; b < wy.count; ++b)
                for (int a = 0; a < wx.count; ++a) {
                    int f = dofs.free_index[dofs.tensor(wx.first + a, wy.first + b)];
                    if (f < 0) continue;
                    ids.push_back(f);
                    vals.push_back(wx.values(0, a) * wy.values(0, b));
                    grads.emplace_back(wx.values(1, a) * wy.values(0, b),
                                       wx.values(0, a) * wy.values(1, b));
                }
            for (std::size_t i = 0; i < ids.size(); ++i) {
                rhs[ids[i]] += w * (vals[i] * uval + h2 * grads[i].dot(pgrad_u));
                for (std::size_t j = 0; j < ids.size(); ++j)
                    gram.add(ids[i], ids[j], w * (vals[i] * vals[j] + h2 * grads[i].dot(grads[j])));
            }
        }
    }
    gram.compress();
    return linalg::Factorization(gram.matrix()).solve(rhs);
}

} // namespace biharm::assembly
