#include <catch2/catch_amalgamated.hpp>

#include <biharm/experiments.hpp>

using namespace biharm;
using namespace biharm::experiments;

TEST_CASE("single run produces a consistent result and reproducible JSON")
{
    RunConfig cfg;
    cfg.domain = "unit_square";
    cfg.splits = 2;
    cfg.degree = 2;
    cfg.refine = 3;
    cfg.oracle = true;
    cfg.tol = 1e-12; // the oracle comparison is limited by the CG tolerance
    RunResult a = run(cfg);
    REQUIRE(a.converged);
    REQUIRE(a.kappa >= 1.0);
    REQUIRE(a.final_relative_residual <= cfg.tol);
    REQUIRE(a.oracle_rel_l2.has_value());
    REQUIRE(*a.oracle_rel_l2 <= 1e-8);
    REQUIRE(a.n_primal == 4);

    RunResult b = run(cfg);
    REQUIRE(to_json(a) == to_json(b)); // timings excluded by default
}

TEST_CASE("run validates its configuration")
{
    RunConfig cfg;
    cfg.degree = 1;
    REQUIRE_THROWS_AS(run(cfg), SolverError);
    cfg.degree = 2;
    cfg.precond = "deluxe";
    REQUIRE_THROWS_AS(run(cfg), SolverError);
    cfg.precond = "scaled";
    cfg.domain = "hyperplane";
    REQUIRE_THROWS_AS(run(cfg), UnknownDomain);
}

TEST_CASE("exhausting the iteration budget reports non-convergence")
{
    RunConfig cfg;
    cfg.domain = "quarter_annulus";
    cfg.splits = 2;
    cfg.degree = 2;
    cfg.refine = 3;
    cfg.max_iter = 2;
    cfg.tol = 1e-14;
    RunResult r = run(cfg);
    REQUIRE_FALSE(r.converged);
    REQUIRE(r.iterations == 2);
    REQUIRE(to_json(r).find("\"converged\": false") != std::string::npos);
}

TEST_CASE("table study has the requested shape and is monotone for the lamella")
{
    auto t = table_study("quarter_annulus", 2, {2, 3}, {2, 3}, "scaled");
    REQUIRE(t.cells.size() == 2);
    REQUIRE(t.cells[0].size() == 2);
    for (const auto& row : t.cells)
        for (const auto& c : row) {
            REQUIRE(c.ok);
            REQUIRE(c.converged);
            REQUIRE(c.kappa >= 1.0);
        }
    std::string csv = t.csv();
    REQUIRE(csv.find("kappa_p2") != std::string::npos);
    REQUIRE(csv.find("ERR") == std::string::npos);

    auto lam = table_study("lamella", 2, {2}, {2, 3, 4}, "scaled");
    for (std::size_t i = 1; i < lam.refines.size(); ++i)
        REQUIRE(lam.cells[i][0].kappa > lam.cells[i - 1][0].kappa);
}

TEST_CASE("modified preconditioner needs fewer iterations on the coarse annulus")
{
    auto scaled = table_study("quarter_annulus", 4, {2}, {3}, "scaled");
    auto modified = table_study("quarter_annulus", 4, {2}, {3}, "modified");
    REQUIRE(modified.cells[0][0].iterations < scaled.cells[0][0].iterations);
}

TEST_CASE("convergence study shows the expected H2 rates")
{
    for (int p : {2, 3}) {
        auto rows = convergence_study(p, {3, 4, 5});
        for (std::size_t i = 1; i < rows.size(); ++i) {
            REQUIRE(rows[i].h2_error < rows[i - 1].h2_error);
            REQUIRE(rows[i].rate >= p - 1.5);
        }
    }
    // halving h with p=2 roughly halves the H2 error (rate 1)
    auto rows = convergence_study(2, {4, 5});
    REQUIRE(rows[1].rate == Catch::Approx(1.0).margin(0.35));
}
