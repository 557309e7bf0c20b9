/** @file biharm_ieti.cpp
    @brief Command line driver: single solver runs, condition-number table
           studies, the manufactured-solution convergence study, and the
           extension-bound study.
*/

#include <CLI11.hpp>

#include <biharm/experiments.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

void emit(const std::string& text, const std::string& out_path)
{
    if (out_path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw biharm::ParseError("cannot open output file: " + out_path);
    out << text << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-patch C1 isogeometric solver for the first biharmonic problem\n"
                 "with an IETI-DP (dual-primal tearing and interconnecting) solver"};

    biharm::experiments::RunConfig cfg;
    std::string study;
    std::string out_path;
    std::vector<int> degrees = {2, 3, 4, 5, 6};
    std::vector<int> refines = {3, 4, 5, 6};
    int samples = 30;

    app.add_option("--domain", cfg.domain, "unit_square | quarter_annulus | lamella")
        ->default_val(cfg.domain);
    app.add_option("--splits", cfg.splits, "per-direction subdivisions of each base patch")
        ->default_val(cfg.splits);
    app.add_option("--degree,-p", cfg.degree, "spline degree (>= 2)")->default_val(cfg.degree);
    app.add_option("--refine,-r", cfg.refine, "dyadic refinements, h = 2^-r")
        ->default_val(cfg.refine);
    app.add_option("--precond", cfg.precond, "scaled | modified | none")
        ->default_val(cfg.precond);
    app.add_option("--tol", cfg.tol, "relative residual reduction")->default_val(cfg.tol);
    app.add_option("--max-iter", cfg.max_iter, "CG iteration cap")->default_val(cfg.max_iter);
    app.add_option("--output", cfg.output, "json | csv")->default_val(cfg.output);
    app.add_flag("--oracle", cfg.oracle, "also run the monolithic C1 solve and report the "
                                         "relative l2 coefficient difference");
    app.add_flag("--timings", cfg.timings, "include wall times in the JSON output");
    app.add_option("--jobs", cfg.jobs, "concurrent table cells")->default_val(cfg.jobs);
    app.add_option("--seed", cfg.seed, "seed echoed into the output")->default_val(cfg.seed);
    app.add_option("--study", study, "table | convergence | extension");
    app.add_option("--degrees", degrees, "degree list for studies")->delimiter(',');
    app.add_option("--refines", refines, "refinement list for studies")->delimiter(',');
    app.add_option("--samples", samples, "random samples per cell (extension study)")
        ->default_val(samples);
    app.add_option("--out", out_path, "write output to a file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (study.empty()) {
            biharm::experiments::RunResult res = biharm::experiments::run(cfg);
            if (cfg.output == "csv")
                emit(biharm::experiments::csv_header() + "\n" + biharm::experiments::to_csv(res),
                     out_path);
            else
                emit(biharm::experiments::to_json(res), out_path);
            return res.converged ? 0 : 1;
        }
        if (study == "table") {
            auto t = biharm::experiments::table_study(cfg.domain, cfg.splits, degrees, refines,
                                                      cfg.precond, cfg.tol, cfg.max_iter,
                                                      cfg.jobs);
            emit(t.csv(), out_path);
            return t.all_converged() ? 0 : 1;
        }
        if (study == "convergence") {
            auto rows = biharm::experiments::convergence_study(cfg.degree, refines);
            emit(biharm::experiments::convergence_csv(rows), out_path);
            return 0;
        }
        if (study == "extension") {
            emit(biharm::experiments::extension_csv(degrees, refines, samples), out_path);
            return 0;
        }
        std::cerr << "unknown study: " << study << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
