/** @file ieti.hpp
    @brief The dual-primal solver: jump matrices, primal maps, per-patch
           eliminations and Schur complements, the operator F, the scaled
           Dirichlet preconditioner M, the modified preconditioner M_mod,
           solution recovery, and a monolithic C1 oracle.

    Per patch the free dofs are grouped into interior (I), interface layers
    (Gamma, value layer then derivative layer) and primal corner dofs (Pi);
    Delta = I + Gamma. After eliminating Delta,

        F      = sum_k B^(k) Add^(k)^-1 B^(k)^T + B_Pi S_PiPi^-1 B_Pi^T,
        M      = c * sum_k B^(k) S_GG^(k) B^(k)^T          (c = 1/4),
        M_mod  = sum_k B^(k) diag(T_V^(k), T_D^(k)) B^(k)^T,

    where S_GG applies the interface Schur complement (one interior solve)
    and T_V / T_D are the Schur complements onto the value/derivative layer
    (one solve each on I+D resp. I+V).
*/

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "assembly.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "linalg.hpp"

namespace biharm::ieti {

using assembly::DofTable;
using assembly::ScalarField;
using assembly::TensorBasis2D;
using geometry::MultiPatch;
using linalg::Matrix;
using linalg::Vector;

/// One signed jump entry of B^(k): multiplier `row` hits the dof at position
/// `gamma_pos` of the patch interface group with coefficient `coef`.
struct JumpEntry {
    int row = -1;
    int gamma_pos = -1;
    double coef = 0.0;
};

struct JumpMatrix {
    int n_lambda = 0;
    std::vector<std::vector<JumpEntry>> patch; // per patch
};

/// One R^(k) entry: primal dof at position `pi_pos` equals weight times the
/// global primal dof `global`.
struct PrimalMapEntry {
    int pi_pos = -1;
    int global = -1;
    double weight = 0.0;
};

struct PrimalMap {
    int n_primal = 0;
    std::vector<std::vector<PrimalMapEntry>> patch;
};

/// Materializes B^(k) and R^(k) from the classified dof table.
inline std::pair<JumpMatrix, PrimalMap> build_jump_and_primal(const DofTable& table)
{
    const int nk = static_cast<int>(table.patches.size());
    JumpMatrix jump;
    jump.n_lambda = table.n_lambda();
    jump.patch.resize(nk);

    // free index -> position inside the per-patch gamma group
    std::vector<std::vector<int>> gamma_pos(nk);
    for (int k = 0; k < nk; ++k) {
        gamma_pos[k].assign(table.patches[k].n_free, -1);
        for (std::size_t g = 0; g < table.patches[k].gamma.size(); ++g)
            gamma_pos[k][table.patches[k].gamma[g]] = static_cast<int>(g);
    }
    for (int row = 0; row < jump.n_lambda; ++row) {
        const auto& m = table.multipliers[row];
        int fa = table.patches[m.patch_a].free_index[m.tensor_a];
        int fb = table.patches[m.patch_b].free_index[m.tensor_b];
        if (fa < 0 || fb < 0 || gamma_pos[m.patch_a][fa] < 0 || gamma_pos[m.patch_b][fb] < 0)
            throw TopologyError("multiplier references a non-interface dof");
        jump.patch[m.patch_a].push_back({row, gamma_pos[m.patch_a][fa], m.coef_a});
        jump.patch[m.patch_b].push_back({row, gamma_pos[m.patch_b][fb], m.coef_b});
    }

    PrimalMap primal;
    primal.n_primal = table.n_primal;
    primal.patch.resize(nk);
    for (int k = 0; k < nk; ++k) {
        std::vector<int> pi_pos(table.patches[k].n_free, -1);
        for (std::size_t p = 0; p < table.patches[k].primal.size(); ++p)
            pi_pos[table.patches[k].primal[p]] = static_cast<int>(p);
        for (const auto& e : table.primal[k]) {
            int f = table.patches[k].free_index[e.tensor];
            if (f < 0 || pi_pos[f] < 0) throw TopologyError("primal entry is not a primal dof");
            primal.patch[k].push_back({pi_pos[f], e.global, e.weight});
        }
    }
    return {jump, primal};
}

struct Options {
    enum class Precond { Scaled, Modified, None };
    Precond precond = Precond::Scaled;
    double tol = 1e-6;
    int max_iter = 500;
    double scaling = 0.25; // multiplicity scaling factor of M
    bool preconditioned_residual = false;
};

struct Solution {
    std::vector<Vector> u; // per patch, over free dofs
    linalg::CgReport report;
    double constraint_residual = 0.0;
};

/// Raised when PCG exhausts its iteration budget; carries the partial
/// solution and its run record.
struct NotConverged : SolverError {
    Solution solution;
    explicit NotConverged(Solution sol)
        : SolverError("solve: conjugate gradients did not converge within the iteration cap"),
          solution(std::move(sol))
    {
    }
};

/// Per-patch factorizations and Schur pieces plus the assembled coarse
/// problem. Immutable during solves; apply_* are thread-safe.
class IetiOperators {
public:
    /// Assembles all local systems (one per patch, in parallel).
    static std::vector<assembly::LocalSystem> assemble_all(const MultiPatch& mp,
                                                           const std::vector<TensorBasis2D>& bases,
                                                           const DofTable& table,
                                                           const ScalarField& source,
                                                           int quad_order = 0)
    {
        std::vector<assembly::LocalSystem> locals(mp.num_patches());
        parallel_for(mp.num_patches(), [&](int k) {
            locals[k] = assembly::assemble_local(mp.patch(k), bases[k], source, table.patches[k],
                                                 quad_order);
        });
        return locals;
    }

    IetiOperators(const MultiPatch& mp, const std::vector<TensorBasis2D>& bases,
                  const DofTable& table, const ScalarField& source, int quad_order = 0)
        : IetiOperators(table, assemble_all(mp, bases, table, source, quad_order))
    {
    }

    IetiOperators(const DofTable& table, std::vector<assembly::LocalSystem> locals)
        : table_(&table)
    {
        const int nk = static_cast<int>(locals.size());
        auto [jump, primal] = build_jump_and_primal(table);
        jump_ = std::move(jump);
        primal_ = std::move(primal);

        blocks_.resize(nk);
        parallel_for(nk, [&](int k) { build_patch_blocks(k, std::move(locals[k])); });

        // coarse problem: S_PiPi = sum R^T S^(k) R, f_Pi = sum R^T (f_pi - A_PiDelta Add^-1 f_delta)
        const int npi = primal_.n_primal;
        s_pipi_ = Matrix::Zero(npi, npi);
        f_pi_ = Vector::Zero(npi);
        b_pi_ = Matrix::Zero(jump_.n_lambda, npi);
        for (int k = 0; k < nk; ++k) {
            const auto& blk = blocks_[k];
            const auto& map = primal_.patch[k];
            Vector f_red = blk.f_pi - blk.a_delta_pi.transpose() * blk.w_delta;
            for (const auto& ei : map) {
                f_pi_[ei.global] += ei.weight * f_red[ei.pi_pos];
                for (const auto& ej : map)
                    s_pipi_(ei.global, ej.global) += ei.weight * ej.weight * blk.s_pi(ei.pi_pos, ej.pi_pos);
            }
            // B_Pi = -sum B_Delta^(k) (Add^-1 A_DeltaPi) R^(k)
            for (const auto& je : jump_.patch[k]) {
                const int row = je.row;
                const int dpos = blk.n_interior + je.gamma_pos;
                for (const auto& ei : map)
                    b_pi_(row, ei.global) -= je.coef * blk.ext(dpos, ei.pi_pos) * ei.weight;
            }
        }
        if (npi > 0) {
            Eigen::LLT<Matrix> llt(s_pipi_);
            if (llt.info() != Eigen::Success)
                throw SingularMatrix("coarse primal Schur complement is not SPD");
            s_pipi_llt_ = llt;
        }
    }

    int n_lambda() const { return jump_.n_lambda; }
    int n_primal() const { return primal_.n_primal; }
    const JumpMatrix& jump() const { return jump_; }
    const PrimalMap& primal_map() const { return primal_; }
    const linalg::Sparse& local_matrix(int k) const { return blocks_[k].a; }
    const Vector& local_load(int k) const { return blocks_[k].f; }
    const Matrix& coarse_matrix() const { return s_pipi_; }

    /// F lambda = sum_k B Add^-1 B^T lambda + B_Pi S^-1 B_Pi^T lambda.
    Vector apply_F(const Vector& lambda) const
    {
        const int nk = static_cast<int>(blocks_.size());
        std::vector<Vector> parts(nk);
        parallel_for(nk, [&](int k) {
            const auto& blk = blocks_[k];
            Vector y = Vector::Zero(blk.n_delta());
            for (const auto& je : jump_.patch[k])
                y[blk.n_interior + je.gamma_pos] += je.coef * lambda[je.row];
            Vector x = blk.f_delta_fact.solve(y);
            Vector part = Vector::Zero(lambda.size());
            for (const auto& je : jump_.patch[k])
                part[je.row] += je.coef * x[blk.n_interior + je.gamma_pos];
            parts[k] = std::move(part);
        });
        Vector out = Vector::Zero(lambda.size());
        for (const auto& p : parts) out += p;
        if (primal_.n_primal > 0)
            out += b_pi_ * s_pipi_llt_.solve(b_pi_.transpose() * lambda);
        return out;
    }

    /// Scaled Dirichlet preconditioner: c * sum_k B S_GG^(k) B^T lambda.
    Vector apply_M(const Vector& lambda, double scaling = 0.25) const
    {
        const int nk = static_cast<int>(blocks_.size());
        std::vector<Vector> parts(nk);
        parallel_for(nk, [&](int k) {
            const auto& blk = blocks_[k];
            Vector x = Vector::Zero(blk.n_free());
            for (const auto& je : jump_.patch[k])
                x[blk.gamma_ids[je.gamma_pos]] += je.coef * lambda[je.row];
            Vector ax = blk.a * x;
            Vector zi(blk.n_interior);
            for (int i = 0; i < blk.n_interior; ++i) zi[i] = ax[blk.interior_ids[i]];
            Vector wi = blk.f_interior_fact.solve(zi);
            Vector w = Vector::Zero(blk.n_free());
            for (int i = 0; i < blk.n_interior; ++i) w[blk.interior_ids[i]] = wi[i];
            Vector aw = blk.a * w;
            Vector part = Vector::Zero(lambda.size());
            for (const auto& je : jump_.patch[k])
                part[je.row] +=
                    je.coef * (ax[blk.gamma_ids[je.gamma_pos]] - aw[blk.gamma_ids[je.gamma_pos]]);
            parts[k] = std::move(part);
        });
        Vector out = Vector::Zero(lambda.size());
        for (const auto& p : parts) out += p;
        return scaling * out;
    }

    /// Builds the auxiliary factorizations for the modified preconditioner.
    void build_modified()
    {
        if (modified_built_) return;
        const int nk = static_cast<int>(blocks_.size());
        parallel_for(nk, [&](int k) {
            auto& blk = blocks_[k];
            blk.id_ids = blk.interior_ids;
            for (std::size_t g = blk.value_count; g < blk.gamma_ids.size(); ++g)
                blk.id_ids.push_back(blk.gamma_ids[g]);
            blk.iv_ids = blk.interior_ids;
            for (std::size_t g = 0; g < blk.value_count; ++g)
                blk.iv_ids.push_back(blk.gamma_ids[g]);
            blk.f_id_fact = linalg::Factorization(submatrix(blk.a, blk.id_ids));
            blk.f_iv_fact = linalg::Factorization(submatrix(blk.a, blk.iv_ids));
        });
        modified_built_ = true;
    }

    /// M_mod lambda = sum_k B diag(T_V, T_D) B^T lambda; T_V eliminates I+D,
    /// T_D eliminates I+V (two patch solves per application).
    Vector apply_M_mod(const Vector& lambda) const
    {
        if (!modified_built_) throw SolverError("apply_M_mod: call build_modified() first");
        const int nk = static_cast<int>(blocks_.size());
        std::vector<Vector> parts(nk);
        parallel_for(nk, [&](int k) {
            const auto& blk = blocks_[k];
            Vector part = Vector::Zero(lambda.size());
            for (int layer = 0; layer < 2; ++layer) {
                const bool value_layer = layer == 0;
                Vector x = Vector::Zero(blk.n_free());
                for (const auto& je : jump_.patch[k]) {
                    bool in_layer = value_layer ? (je.gamma_pos < static_cast<int>(blk.value_count))
                                                : (je.gamma_pos >= static_cast<int>(blk.value_count));
                    if (in_layer) x[blk.gamma_ids[je.gamma_pos]] += je.coef * lambda[je.row];
                }
                const auto& elim_ids = value_layer ? blk.id_ids : blk.iv_ids;
                const auto& fact = value_layer ? blk.f_id_fact : blk.f_iv_fact;
                Vector ax = blk.a * x;
                Vector z(elim_ids.size());
                for (std::size_t i = 0; i < elim_ids.size(); ++i) z[i] = ax[elim_ids[i]];
                Vector wi = fact.solve(z);
                Vector w = Vector::Zero(blk.n_free());
                for (std::size_t i = 0; i < elim_ids.size(); ++i) w[elim_ids[i]] = wi[i];
                Vector aw = blk.a * w;
                for (const auto& je : jump_.patch[k]) {
                    bool in_layer = value_layer ? (je.gamma_pos < static_cast<int>(blk.value_count))
                                                : (je.gamma_pos >= static_cast<int>(blk.value_count));
                    if (in_layer)
                        part[je.row] += je.coef * (ax[blk.gamma_ids[je.gamma_pos]] -
                                                   aw[blk.gamma_ids[je.gamma_pos]]);
                }
            }
            parts[k] = std::move(part);
        });
        Vector out = Vector::Zero(lambda.size());
        for (const auto& p : parts) out += p;
        return out;
    }

    /// Right-hand side of the multiplier system.
    Vector rhs() const
    {
        Vector b = Vector::Zero(jump_.n_lambda);
        for (std::size_t k = 0; k < blocks_.size(); ++k)
            for (const auto& je : jump_.patch[k])
                b[je.row] += je.coef * blocks_[k].w_delta[blocks_[k].n_interior + je.gamma_pos];
        if (primal_.n_primal > 0) b += b_pi_ * s_pipi_llt_.solve(f_pi_);
        return b;
    }

    /// PCG on F lambda = b followed by solution recovery.
    Solution solve(const Options& opts = {})
    {
        if (opts.precond == Options::Precond::Modified) build_modified();
        Solution sol;
        Vector lambda = Vector::Zero(jump_.n_lambda);
        if (jump_.n_lambda > 0) {
            Vector b = rhs();
            linalg::LinOp apply_f = [this](const Vector& v) { return apply_F(v); };
            linalg::LinOp apply_m;
            switch (opts.precond) {
            case Options::Precond::Scaled:
                apply_m = [this, &opts](const Vector& v) { return apply_M(v, opts.scaling); };
                break;
            case Options::Precond::Modified:
                apply_m = [this](const Vector& v) { return apply_M_mod(v); };
                break;
            default: apply_m = [](const Vector& v) { return v; };
            }
            auto [x, report] = linalg::pcg(apply_f, apply_m, b, opts.tol, opts.max_iter,
                                           opts.preconditioned_residual);
            lambda = x;
            sol.report = report;
        } else {
            sol.report.converged = true;
        }
        sol.u = recover(lambda);

        double umax = 0.0;
        for (const auto& u : sol.u) if (u.size() > 0) umax = std::max(umax, u.cwiseAbs().maxCoeff());
        Vector jump_res = Vector::Zero(jump_.n_lambda);
        for (std::size_t k = 0; k < blocks_.size(); ++k)
            for (const auto& je : jump_.patch[k])
                jump_res[je.row] += je.coef * sol.u[k][blocks_[k].gamma_ids[je.gamma_pos]];
        sol.constraint_residual =
            (jump_.n_lambda > 0) ? jump_res.cwiseAbs().maxCoeff() / std::max(umax, 1e-300) : 0.0;
        if (!sol.report.converged) throw NotConverged(std::move(sol));
        return sol;
    }

    /// Recovers per-patch coefficient vectors from the multipliers.
    std::vector<Vector> recover(const Vector& lambda) const
    {
        Vector w_pi;
        if (primal_.n_primal > 0)
            w_pi = s_pipi_llt_.solve(f_pi_ - b_pi_.transpose() * lambda);
        std::vector<Vector> out(blocks_.size());
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& blk = blocks_[k];
            Vector y = blk.f_delta;
            for (const auto& je : jump_.patch[k])
                y[blk.n_interior + je.gamma_pos] -= je.coef * lambda[je.row];
            Vector u_delta = blk.f_delta_fact.solve(y);
            Vector u = Vector::Zero(blk.n_free());
            if (primal_.n_primal > 0 && !primal_.patch[k].empty()) {
                Vector w_loc = Vector::Zero(blk.n_pi());
                for (const auto& e : primal_.patch[k]) w_loc[e.pi_pos] = e.weight * w_pi[e.global];
                u_delta -= blk.ext * w_loc;
                for (const auto& e : primal_.patch[k])
                    u[blk.pi_ids[e.pi_pos]] = e.weight * w_pi[e.global];
            }
            for (int i = 0; i < blk.n_delta(); ++i) u[blk.delta_ids[i]] = u_delta[i];
            out[k] = std::move(u);
        }
        return out;
    }

    /// Total energy a(u, u) of a per-patch coefficient set.
    double energy(const std::vector<Vector>& u) const
    {
        double e = 0.0;
        for (std::size_t k = 0; k < blocks_.size(); ++k) e += u[k].dot(blocks_[k].a * u[k]);
        return e;
    }

private:
    struct PatchBlocks {
        linalg::Sparse a; // full free-dof stiffness
        Vector f;
        std::vector<int> interior_ids, gamma_ids, pi_ids, delta_ids;
        std::size_t value_count = 0; // leading value-layer entries of gamma_ids
        int n_interior = 0;
        linalg::Factorization f_delta_fact;   // A_DeltaDelta
        linalg::Factorization f_interior_fact; // A_II
        Matrix a_delta_pi;                     // A_DeltaPi
        Matrix ext;                            // Add^-1 A_DeltaPi
        Matrix s_pi;                           // local primal Schur complement
        Vector f_delta, f_pi;
        Vector w_delta; // Add^-1 f_delta
        // modified preconditioner pieces
        std::vector<int> id_ids, iv_ids;
        linalg::Factorization f_id_fact, f_iv_fact;

        int n_free() const { return static_cast<int>(f.size()); }
        int n_delta() const { return static_cast<int>(delta_ids.size()); }
        int n_pi() const { return static_cast<int>(pi_ids.size()); }
    };

    static linalg::Sparse submatrix(const linalg::Sparse& a, const std::vector<int>& ids)
    {
        std::vector<int> pos(a.rows(), -1);
        for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = static_cast<int>(i);
        std::vector<Eigen::Triplet<double>> trips;
        for (int c = 0; c < a.outerSize(); ++c)
            for (linalg::Sparse::InnerIterator it(a, c); it; ++it)
                if (pos[it.row()] >= 0 && pos[it.col()] >= 0)
                    trips.emplace_back(pos[it.row()], pos[it.col()], it.value());
        linalg::Sparse out(ids.size(), ids.size());
        out.setFromTriplets(trips.begin(), trips.end());
        return out;
    }

    void build_patch_blocks(int k, assembly::LocalSystem ls)
    {
        const auto& pd = table_->patches[k];
        PatchBlocks& blk = blocks_[k];
        blk.a = std::move(ls.a);
        blk.f = std::move(ls.f);
        blk.interior_ids = pd.interior;
        blk.gamma_ids = pd.gamma;
        blk.value_count = pd.gamma_value.size();
        blk.pi_ids = pd.primal;
        blk.n_interior = static_cast<int>(pd.interior.size());
        blk.delta_ids = blk.interior_ids;
        blk.delta_ids.insert(blk.delta_ids.end(), blk.gamma_ids.begin(), blk.gamma_ids.end());

        blk.f_delta_fact = linalg::Factorization(submatrix(blk.a, blk.delta_ids));
        if (!blk.interior_ids.empty())
            blk.f_interior_fact = linalg::Factorization(submatrix(blk.a, blk.interior_ids));

        const int nd = blk.n_delta(), npi = blk.n_pi();
        blk.f_delta.resize(nd);
        for (int i = 0; i < nd; ++i) blk.f_delta[i] = blk.f[blk.delta_ids[i]];
        blk.f_pi.resize(npi);
        for (int i = 0; i < npi; ++i) blk.f_pi[i] = blk.f[blk.pi_ids[i]];

        blk.a_delta_pi = Matrix::Zero(nd, npi);
        Matrix a_pipi = Matrix::Zero(npi, npi);
        {
            std::vector<int> dpos(blk.n_free(), -1), ppos(blk.n_free(), -1);
            for (int i = 0; i < nd; ++i) dpos[blk.delta_ids[i]] = i;
            for (int i = 0; i < npi; ++i) ppos[blk.pi_ids[i]] = i;
            for (int c = 0; c < blk.a.outerSize(); ++c)
                for (linalg::Sparse::InnerIterator it(blk.a, c); it; ++it) {
                    if (dpos[it.row()] >= 0 && ppos[it.col()] >= 0)
                        blk.a_delta_pi(dpos[it.row()], ppos[it.col()]) = it.value();
                    else if (ppos[it.row()] >= 0 && ppos[it.col()] >= 0)
                        a_pipi(ppos[it.row()], ppos[it.col()]) = it.value();
                }
        }
        blk.ext = (npi > 0) ? Matrix(blk.f_delta_fact.solve(blk.a_delta_pi)) : Matrix(nd, 0);
        blk.s_pi = a_pipi - blk.a_delta_pi.transpose() * blk.ext;
        blk.w_delta = blk.f_delta_fact.solve(blk.f_delta);
    }

    const DofTable* table_;
    JumpMatrix jump_;
    PrimalMap primal_;
    std::vector<PatchBlocks> blocks_;
    Matrix s_pipi_;
    Matrix b_pi_;
    Vector f_pi_;
    Eigen::LLT<Matrix> s_pipi_llt_;
    bool modified_built_ = false;
};

// ---------------------------------------------------------------------------
// Monolithic C1 oracle

namespace detail {

/// Union-find with multiplicative edge weights: u_node = w * u_root.
struct WeightedUnionFind {
    std::vector<int> parent;
    std::vector<double> weight;

    explicit WeightedUnionFind(int n) : parent(n), weight(n, 1.0)
    {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }

    /// Returns (root, w) with u_x = w * u_root; compresses the path.
    std::pair<int, double> find(int x)
    {
        if (parent[x] == x) return {x, 1.0};
        auto [root, wp] = find(parent[x]);
        parent[x] = root;
        weight[x] *= wp;
        return {root, weight[x]};
    }

    // u_a = w_ab * u_b
    void unite(int a, int b, double w_ab)
    {
        auto [ra, wa] = find(a);
        auto [rb, wb] = find(b);
        if (ra == rb) {
            if (std::abs(wa - w_ab * wb) > 1e-8 * (std::abs(wa) + std::abs(w_ab * wb)))
                throw TopologyError("inconsistent dof identification cycle");
            return;
        }
        parent[ra] = rb;
        weight[ra] = w_ab * wb / wa;
    }
};

} // namespace detail

/// Assembles and solves the conforming C1 problem by identifying matched
/// dofs across interfaces and fat vertices; the correctness oracle for the
/// IETI path. Returns per-patch coefficient vectors over the free dofs.
inline std::vector<Vector> monolithic_solve(const MultiPatch& mp,
                                            const std::vector<TensorBasis2D>& bases,
                                            const DofTable& table, const ScalarField& source,
                                            int quad_order = 0)
{
    const int nk = mp.num_patches();
    std::vector<assembly::LocalSystem> locals(nk);
    parallel_for(nk, [&](int k) {
        locals[k] = assembly::assemble_local(mp.patch(k), bases[k], source, table.patches[k],
                                             quad_order);
    });

    std::vector<int> offset(nk + 1, 0);
    for (int k = 0; k < nk; ++k) offset[k + 1] = offset[k] + table.patches[k].n_free;
    const int total = offset[nk];
    detail::WeightedUnionFind uf(total + table.n_primal);

    for (const auto& m : table.multipliers) {
        int na = offset[m.patch_a] + table.patches[m.patch_a].free_index[m.tensor_a];
        int nb = offset[m.patch_b] + table.patches[m.patch_b].free_index[m.tensor_b];
        uf.unite(na, nb, -m.coef_b / m.coef_a);
    }
    for (int k = 0; k < nk; ++k)
        for (const auto& e : table.primal[k])
            uf.unite(offset[k] + table.patches[k].free_index[e.tensor], total + e.global, e.weight);

    // enumerate roots reachable from real dofs
    std::vector<int> root_col(total + table.n_primal, -1);
    int n_glob = 0;
    for (int n = 0; n < total; ++n) {
        int root = uf.find(n).first;
        if (root_col[root] < 0) root_col[root] = n_glob++;
    }

    linalg::SparseSym a_mono(n_glob);
    Vector f_mono = Vector::Zero(n_glob);
    for (int k = 0; k < nk; ++k) {
        const int nf = table.patches[k].n_free;
        std::vector<int> col(nf);
        std::vector<double> w(nf);
        for (int i = 0; i < nf; ++i) {
            auto [root, wi] = uf.find(offset[k] + i);
            col[i] = root_col[root];
            w[i] = wi;
        }
        for (int c = 0; c < locals[k].a.outerSize(); ++c)
            for (linalg::Sparse::InnerIterator it(locals[k].a, c); it; ++it)
                a_mono.add(col[it.row()], col[it.col()], w[it.row()] * w[it.col()] * it.value());
        for (int i = 0; i < nf; ++i) f_mono[col[i]] += w[i] * locals[k].f[i];
    }
    a_mono.compress();
    Vector g = linalg::Factorization(a_mono.matrix()).solve(f_mono);

    std::vector<Vector> out(nk);
    for (int k = 0; k < nk; ++k) {
        const int nf = table.patches[k].n_free;
        out[k].resize(nf);
        for (int i = 0; i < nf; ++i) {
            auto [root, wi] = uf.find(offset[k] + i);
            out[k][i] = wi * g[root_col[root]];
        }
    }
    return out;
}

} // namespace biharm::ieti
