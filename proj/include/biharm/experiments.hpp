/** @file experiments.hpp
    @brief Experiment driver: single solver runs with machine-readable output,
           condition-number tables, a manufactured-solution convergence study,
           and the extension-bound study.
*/

#pragma once

#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "assembly.hpp"
#include "common.hpp"
#include "extension.hpp"
#include "geometry.hpp"
#include "ieti.hpp"

namespace biharm::experiments {

using assembly::DofTable;
using geometry::MultiPatch;

/// Manufactured solution (sin pi x sin pi y)^2 on the unit square.
namespace manufactured {

inline double value(double x, double y)
{
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    return sx * sx * sy * sy;
}

inline geometry::Vec2 gradient(double x, double y)
{
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    return {M_PI * std::sin(2 * M_PI * x) * sy * sy, M_PI * sx * sx * std::sin(2 * M_PI * y)};
}

inline Eigen::Matrix2d hessian(double x, double y)
{
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    Eigen::Matrix2d h;
    h(0, 0) = 2 * M_PI * M_PI * std::cos(2 * M_PI * x) * sy * sy;
    h(0, 1) = h(1, 0) = M_PI * M_PI * std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y);
    h(1, 1) = 2 * M_PI * M_PI * sx * sx * std::cos(2 * M_PI * y);
    return h;
}

/// Delta^2 of the manufactured solution.
inline double source(double x, double y)
{
    const double pi4 = std::pow(M_PI, 4);
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    return -8 * pi4 * (std::cos(2 * M_PI * x) * sy * sy + std::cos(2 * M_PI * y) * sx * sx) +
           8 * pi4 * std::cos(2 * M_PI * x) * std::cos(2 * M_PI * y);
}

} // namespace manufactured

/// Source term of the experiment domains.
inline assembly::ScalarField domain_source(const std::string& domain)
{
    if (domain == "quarter_annulus")
        return [](double x, double y) {
            return 0.125 * std::pow(M_PI, 4) * std::sin(M_PI * x / 2) * std::sin(M_PI * y / 2);
        };
    if (domain == "lamella") return [](double, double) { return 1.0; };
    if (domain == "unit_square") return manufactured::source;
    throw UnknownDomain("unknown domain: " + domain);
}

struct RunConfig {
    std::string domain = "quarter_annulus";
    int splits = 4;
    int degree = 2;
    int refine = 3;
    std::string precond = "scaled"; // scaled | modified | none
    double tol = 1e-6;
    int max_iter = 500;
    std::string output = "json"; // json | csv
    bool oracle = false;
    int jobs = 1;
    unsigned seed = 0;
    bool timings = false; // timing fields break bitwise reproducibility

    void validate() const
    {
        if (degree < 2) throw SolverError("degree must be >= 2");
        if (refine < 1) throw SolverError("refine must be >= 1");
        if (splits < 1) throw SolverError("splits must be >= 1");
        if (refine < 2)
            std::fprintf(stderr, "warning: refine=%d gives max knot span > 1/4\n", refine);
        if (precond != "scaled" && precond != "modified" && precond != "none")
            throw SolverError("precond must be scaled, modified or none");
    }
};

struct RunResult {
    RunConfig config;
    int dofs = 0;
    int n_lambda = 0;
    int n_primal = 0;
    int iterations = 0;
    double kappa = 1.0;
    double final_relative_residual = 0.0;
    bool converged = false;
    double time_assembly = 0.0;
    double time_factorization = 0.0;
    double time_solve = 0.0;
    std::optional<double> oracle_rel_l2;
};

inline ieti::Options::Precond precond_from_string(const std::string& s)
{
    if (s == "scaled") return ieti::Options::Precond::Scaled;
    if (s == "modified") return ieti::Options::Precond::Modified;
    return ieti::Options::Precond::None;
}

/// Full pipeline for one configuration.
inline RunResult run(const RunConfig& cfg)
{
    cfg.validate();
    using clock = std::chrono::steady_clock;
    RunResult res;
    res.config = cfg;

    MultiPatch mp = geometry::builtin_domain(cfg.domain, cfg.splits);
    auto bases = assembly::make_bases(mp, cfg.degree, cfg.refine);
    DofTable table = assembly::classify_dofs(mp, bases);
    auto source = domain_source(cfg.domain);

    auto t0 = clock::now();
    auto locals = ieti::IetiOperators::assemble_all(mp, bases, table, source);
    auto t1 = clock::now();
    ieti::IetiOperators ops(table, std::move(locals));
    auto t2 = clock::now();

    ieti::Options opts;
    opts.precond = precond_from_string(cfg.precond);
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    ieti::Solution sol;
    try {
        sol = ops.solve(opts);
    } catch (ieti::NotConverged& e) {
        sol = std::move(e.solution); // keep the partial result and its record
    }
    auto t3 = clock::now();

    res.dofs = table.total_free();
    res.n_lambda = table.n_lambda();
    res.n_primal = table.n_primal;
    res.iterations = sol.report.iterations;
    res.kappa = sol.report.kappa_estimate;
    res.converged = sol.report.converged;
    if (sol.report.residual_history.size() > 1)
        res.final_relative_residual =
            sol.report.residual_history.back() / sol.report.residual_history.front();
    res.time_assembly = std::chrono::duration<double>(t1 - t0).count();
    res.time_factorization = std::chrono::duration<double>(t2 - t1).count();
    res.time_solve = std::chrono::duration<double>(t3 - t2).count();

    if (cfg.oracle) {
        auto mono = ieti::monolithic_solve(mp, bases, table, source);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < mono.size(); ++k) {
            num += (sol.u[k] - mono[k]).squaredNorm();
            den += mono[k].squaredNorm();
        }
        res.oracle_rel_l2 = std::sqrt(num / std::max(den, 1e-300));
    }
    return res;
}

inline std::string to_json(const RunResult& r)
{
    nlohmann::json j;
    j["domain"] = r.config.domain;
    j["splits"] = r.config.splits;
    j["degree"] = r.config.degree;
    j["refine"] = r.config.refine;
    j["precond"] = r.config.precond;
    j["tol"] = r.config.tol;
    j["max_iter"] = r.config.max_iter;
    j["seed"] = r.config.seed;
    j["dofs"] = r.dofs;
    j["n_lambda"] = r.n_lambda;
    j["n_primal"] = r.n_primal;
    j["iterations"] = r.iterations;
    j["kappa"] = r.kappa;
    j["final_relative_residual"] = r.final_relative_residual;
    j["converged"] = r.converged;
    if (r.config.timings) {
        j["time_assembly"] = r.time_assembly;
        j["time_factorization"] = r.time_factorization;
        j["time_solve"] = r.time_solve;
    }
    if (r.oracle_rel_l2) j["oracle_rel_l2"] = *r.oracle_rel_l2;
    return j.dump(2);
}

inline std::string csv_header()
{
    return "domain,splits,degree,refine,precond,dofs,n_lambda,n_primal,iterations,kappa,"
           "final_relative_residual,converged,oracle_rel_l2";
}

inline std::string to_csv(const RunResult& r)
{
    std::ostringstream os;
    os << r.config.domain << ',' << r.config.splits << ',' << r.config.degree << ','
       << r.config.refine << ',' << r.config.precond << ',' << r.dofs << ',' << r.n_lambda << ','
       << r.n_primal << ',' << r.iterations << ',' << std::setprecision(16) << r.kappa << ','
       << r.final_relative_residual << ',' << (r.converged ? 1 : 0) << ',';
    if (r.oracle_rel_l2) os << *r.oracle_rel_l2;
    return os.str();
}

// ---------------------------------------------------------------------------
// Table study (layout of the condition number tables: one row per r, a
// kappa/it column pair per p)

struct TableCell {
    bool ok = false;
    std::string error;
    double kappa = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct TableStudy {
    std::string domain;
    int splits = 0;
    std::string precond;
    std::vector<int> degrees;
    std::vector<int> refines;
    std::vector<std::vector<TableCell>> cells; // [refine][degree]

    bool all_converged() const
    {
        for (const auto& row : cells)
            for (const auto& c : row)
                if (!c.ok || !c.converged) return false;
        return true;
    }

    std::string csv() const
    {
        std::ostringstream os;
        os << "r";
        for (int p : degrees) os << ",kappa_p" << p << ",it_p" << p;
        os << "\n";
        for (std::size_t i = 0; i < refines.size(); ++i) {
            os << refines[i];
            for (std::size_t j = 0; j < degrees.size(); ++j) {
                const TableCell& c = cells[i][j];
                if (c.ok)
                    os << ',' << std::setprecision(10) << c.kappa << ',' << c.iterations;
                else
                    os << ",ERR,ERR";
            }
            os << "\n";
        }
        return os.str();
    }
};

inline TableStudy table_study(const std::string& domain, int splits,
                              const std::vector<int>& degrees, const std::vector<int>& refines,
                              const std::string& precond, double tol = 1e-6, int max_iter = 500,
                              int jobs = 1)
{
    TableStudy study;
    study.domain = domain;
    study.splits = splits;
    study.precond = precond;
    study.degrees = degrees;
    study.refines = refines;
    study.cells.assign(refines.size(), std::vector<TableCell>(degrees.size()));

    const int n = static_cast<int>(degrees.size() * refines.size());
    parallel_for(
        n,
        [&](int idx) {
            const std::size_t i = idx / degrees.size();
            const std::size_t j = idx % degrees.size();
            TableCell& cell = study.cells[i][j];
            try {
                RunConfig cfg;
                cfg.domain = domain;
                cfg.splits = splits;
                cfg.degree = degrees[j];
                cfg.refine = refines[i];
                cfg.precond = precond;
                cfg.tol = tol;
                cfg.max_iter = max_iter;
                RunResult r = run(cfg);
                cell.ok = true;
                cell.kappa = r.kappa;
                cell.iterations = r.iterations;
                cell.converged = r.converged;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        },
        jobs);
    return study;
}

// ---------------------------------------------------------------------------
// Convergence study: H2-seminorm error of the manufactured solution on the
// 2x2-patch unit square.

struct ConvergenceRow {
    int refine = 0;
    int dofs = 0;
    double h2_error = 0.0;
    double rate = 0.0; // w.r.t. the previous row
};

inline double h2_seminorm_error(const MultiPatch& mp,
                                const std::vector<assembly::TensorBasis2D>& bases,
                                const DofTable& table, const std::vector<linalg::Vector>& u)
{
    double err2 = 0.0;
    const int p = bases[0].basis_x.knots().degree();
    for (int k = 0; k < mp.num_patches(); ++k) {
        auto qx = splines::greville_and_quadrature(bases[k].basis_x.knots(), p + 2);
        auto qy = splines::greville_and_quadrature(bases[k].basis_y.knots(), p + 2);
        for (std::size_t b = 0; b < qy.nodes.size(); ++b)
            for (std::size_t a = 0; a < qx.nodes.size(); ++a) {
                auto e = mp.patch(k).eval(qx.nodes[a], qy.nodes[b], 1);
                auto s = assembly::eval_field(mp.patch(k), bases[k], table.patches[k], u[k],
                                              qx.nodes[a], qy.nodes[b]);
                Eigen::Matrix2d d = s.hess - manufactured::hessian(e.point[0], e.point[1]);
                double frob =
                    d(0, 0) * d(0, 0) + 2 * d(0, 1) * d(0, 1) + d(1, 1) * d(1, 1);
                err2 += qx.weights[a] * qy.weights[b] * std::abs(e.jac.determinant()) * frob;
            }
    }
    return std::sqrt(err2);
}

inline std::vector<ConvergenceRow> convergence_study(int degree, const std::vector<int>& refines,
                                                     double tol = 1e-10)
{
    std::vector<ConvergenceRow> rows;
    for (int r : refines) {
        MultiPatch mp = geometry::builtin_domain("unit_square", 2);
        auto bases = assembly::make_bases(mp, degree, r);
        DofTable table = assembly::classify_dofs(mp, bases);
        ieti::IetiOperators ops(mp, bases, table, manufactured::source);
        ieti::Options opts;
        opts.tol = tol;
        ieti::Solution sol = ops.solve(opts);
        ConvergenceRow row;
        row.refine = r;
        row.dofs = table.total_free();
        row.h2_error = h2_seminorm_error(mp, bases, table, sol.u);
        if (!rows.empty()) row.rate = std::log2(rows.back().h2_error / row.h2_error);
        rows.push_back(row);
    }
    return rows;
}

inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows)
{
    std::ostringstream os;
    os << "r,dofs,h2_error,rate\n";
    for (const auto& r : rows)
        os << r.refine << ',' << r.dofs << ',' << std::setprecision(10) << r.h2_error << ','
           << r.rate << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Extension-bound study

inline std::string extension_csv(const std::vector<int>& degrees, const std::vector<int>& refines,
                                 int samples = 30, unsigned seed = 1234)
{
    std::ostringstream os;
    os << "p,r,alpha,max_ratio\n";
    for (int p : degrees)
        for (int r : refines)
            for (int alpha : {0, 1}) {
                auto s = extension::verify_bound(alpha, p, r, samples, seed);
                os << p << ',' << r << ',' << alpha << ',' << std::setprecision(10)
                   << s.max_ratio << "\n";
            }
    return os.str();
}

} // namespace biharm::experiments
