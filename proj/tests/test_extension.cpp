#include <catch2/catch_amalgamated.hpp>

#include <biharm/extension.hpp>

#include <random>

using namespace biharm;
using namespace biharm::extension;
using linalg::Matrix;
using linalg::Vector;

namespace {

struct Lab {
    splines::KnotVector kv;
    TraceSpace trace;
    BucketPlan plan;

    Lab(int p, int r)
        : kv(splines::KnotVector::uniform(p, r)), trace(make_trace_space(kv)),
          plan(make_bucket_plan(kv, trace))
    {
    }
};

} // namespace

TEST_CASE("trace space eigenpairs are M-orthonormal with positive spectrum")
{
    for (int p : {2, 3}) {
        Lab lab(p, 4);
        const int n = lab.trace.dim();
        REQUIRE(n == lab.kv.size() - 4);
        REQUIRE(lab.trace.lambda.front() > 0.0);
        Matrix gram = lab.trace.phi.transpose() * lab.trace.mass * lab.trace.phi;
        REQUIRE((gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-9);
        Matrix dgram = lab.trace.phi.transpose() * lab.trace.second * lab.trace.phi;
        for (int i = 0; i < n; ++i) {
            REQUIRE(dgram(i, i) == Catch::Approx(lab.trace.lambda[i] * lab.trace.lambda[i])
                                       .epsilon(1e-9));
            for (int j = 0; j < n; ++j)
                if (i != j)
                    REQUIRE(std::abs(dgram(i, j)) <
                            1e-9 * lab.trace.lambda[n - 1] * lab.trace.lambda[n - 1]);
        }
        // ascending
        for (int i = 1; i < n; ++i) REQUIRE(lab.trace.lambda[i] >= lab.trace.lambda[i - 1]);
    }
}

TEST_CASE("bucket plan facts hold exactly")
{
    for (int p : {2, 3, 4}) {
        for (int r : {2, 3, 4, 5}) {
            Lab lab(p, r);
            REQUIRE(lab.plan.levels == r - 1);
            REQUIRE(lab.plan.levels >= 1);
            for (int l = 1; l <= lab.plan.levels; ++l) {
                double xi = lab.plan.xi[l - 1], eta = lab.plan.eta[l - 1];
                REQUIRE(xi > std::pow(2.0, -l - 1));
                REQUIRE(xi <= std::pow(2.0, -l));
                REQUIRE(eta > std::pow(2.0, -l));
                REQUIRE(eta <= std::pow(2.0, -l + 1));
                REQUIRE(eta - xi >= std::pow(2.0, -l - 1) - 1e-15);
                REQUIRE(lab.plan.mu[l - 1] == Catch::Approx(p * std::pow(2.0, l)));
            }
            // buckets partition all eigenindices
            std::vector<int> seen(lab.trace.dim(), 0);
            for (const auto& b : lab.plan.buckets)
                for (int i : b) seen[i]++;
            for (int s : seen) REQUIRE(s == 1);
        }
    }
}

TEST_CASE("extension splines interpolate the boundary data and vanish beyond eta")
{
    Lab lab(3, 4);
    for (int l = 1; l <= lab.plan.levels; ++l) {
        REQUIRE(psi_alpha_ell(0, l, lab.plan, 0.0) == Catch::Approx(1.0));
        REQUIRE(psi_alpha_ell(0, l, lab.plan, 0.0, 1) == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(psi_alpha_ell(1, l, lab.plan, 0.0) == Catch::Approx(0.0).margin(1e-15));
        REQUIRE(psi_alpha_ell(1, l, lab.plan, 0.0, 1) == Catch::Approx(-1.0));
        for (double x : {lab.plan.eta[l - 1], lab.plan.eta[l - 1] + 0.01, 1.0}) {
            for (int alpha : {0, 1}) {
                REQUIRE(psi_alpha_ell(alpha, l, lab.plan, x) == 0.0);
                REQUIRE(psi_alpha_ell(alpha, l, lab.plan, x, 1) == 0.0);
            }
        }
    }
}

TEST_CASE("extension splines lie in the perpendicular spline space")
{
    for (int p : {2, 3}) {
        Lab lab(p, 4);
        const auto& kv = lab.kv;
        const int n = kv.size();
        // least-squares fit in the plain B-spline basis, then compare pointwise
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (int l = 1; l <= lab.plan.levels; ++l) {
            for (int alpha : {0, 1}) {
                const int m = 40 * n;
                Matrix a(m, n);
                Vector rhs(m);
                for (int s = 0; s < m; ++s) {
                    double x = dist(rng);
                    splines::BasisWindow w = kv.eval_all(x, 0);
                    a.row(s).setZero();
                    for (int c = 0; c < w.count; ++c) a(s, w.first + c) = w.values(0, c);
                    rhs(s) = psi_alpha_ell(alpha, l, lab.plan, x);
                }
                Vector coef = a.colPivHouseholderQr().solve(rhs);
                for (int s = 0; s < 100; ++s) {
                    double x = dist(rng);
                    splines::BasisWindow w = kv.eval_all(x, 0);
                    double fit = 0.0;
                    for (int c = 0; c < w.count; ++c) fit += coef[w.first + c] * w.values(0, c);
                    REQUIRE(fit == Catch::Approx(psi_alpha_ell(alpha, l, lab.plan, x))
                                       .margin(1e-10));
                }
            }
        }
    }
}

TEST_CASE("bucket decomposition reconstructs and is mass-orthogonal")
{
    Lab lab(2, 5);
    std::mt19937 rng(11);
    std::normal_distribution<double> dist;

    // w = phi_1: single nonzero component in the bucket containing lambda_1
    {
        Vector w = lab.trace.phi.col(0);
        auto parts = decompose(lab.trace, lab.plan, w);
        int nonzero = 0;
        for (const auto& c : parts)
            if (c.norm() > 1e-12) ++nonzero;
        REQUIRE(nonzero == 1);
    }

    for (int rep = 0; rep < 20; ++rep) {
        Vector w(lab.trace.dim());
        for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
        auto parts = decompose(lab.trace, lab.plan, w);
        Vector sum = Vector::Zero(w.size());
        for (const auto& c : parts) sum += c;
        REQUIRE((sum - w).cwiseAbs().maxCoeff() <= 1e-12 * w.cwiseAbs().maxCoeff());
        for (std::size_t l = 0; l < parts.size(); ++l)
            for (std::size_t m2 = l + 1; m2 < parts.size(); ++m2)
                REQUIRE(std::abs(parts[l].dot(lab.trace.mass * parts[m2])) <=
                        1e-10 * w.dot(lab.trace.mass * w));
    }
}

TEST_CASE("extension operators satisfy the trace identities")
{
    std::mt19937 rng(5);
    std::normal_distribution<double> dist;
    for (int p : {2, 3, 4}) {
        for (int r : {3, 4, 5}) {
            Lab lab(p, r);
            Vector w(lab.trace.dim());
            for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
            double scale =  0.0;
            for (int s = 0; s < 50; ++s)
                scale = std::max(scale, std::abs(lab.trace.eval(w, (s + 0.5) / 50)));

            Extension e0 = extend(lab.trace, lab.plan, w, 0);
            Extension e1 = extend(lab.trace, lab.plan, w, 1);
            for (int s = 0; s < 50; ++s) {
                double y = (s + 0.5) / 50;
                double wy = lab.trace.eval(w, y);
                // trace on Gamma = {0} x [0,1]; outward normal is -x
                REQUIRE(e0.value(0.0, y) == Catch::Approx(wy).margin(1e-10 * scale));
                REQUIRE(-e0.derivative(0.0, y, 1, 0) == Catch::Approx(0.0).margin(1e-10 * scale));
                REQUIRE(e1.value(0.0, y) == Catch::Approx(0.0).margin(1e-10 * scale));
                REQUIRE(-e1.derivative(0.0, y, 1, 0) == Catch::Approx(wy).margin(1e-10 * scale));
                // zero value and gradient on the other three sides
                for (const Extension* e : {&e0, &e1}) {
                    REQUIRE(e->value(1.0, y) == Catch::Approx(0.0).margin(1e-12 * scale));
                    REQUIRE(e->derivative(1.0, y, 1, 0) == Catch::Approx(0.0).margin(1e-10 * scale));
                    for (double yb : {0.0, 1.0}) {
                        REQUIRE(e->value(y, yb) == Catch::Approx(0.0).margin(1e-10 * scale));
                        REQUIRE(e->derivative(y, yb, 1, 0) ==
                                Catch::Approx(0.0).margin(1e-10 * scale));
                        REQUIRE(e->derivative(y, yb, 0, 1) ==
                                Catch::Approx(0.0).margin(1e-10 * scale));
                    }
                }
            }
        }
    }
}

TEST_CASE("H2 seminorm is stable under quadrature refinement")
{
    Lab lab(3, 4);
    std::mt19937 rng(9);
    std::normal_distribution<double> dist;
    Vector w(lab.trace.dim());
    for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
    for (int alpha : {0, 1}) {
        Extension e = extend(lab.trace, lab.plan, w, alpha);
        double coarse = h2_seminorm(e, lab.kv, lab.kv.degree() + 2);
        double fine = h2_seminorm(e, lab.kv, lab.kv.degree() + 3);
        REQUIRE(coarse == Catch::Approx(fine).epsilon(0.01));
        REQUIRE(std::isfinite(coarse));
        REQUIRE(coarse > 0.0);
    }
}

TEST_CASE("empirical extension bound: bounded ratios with flat growth in r")
{
    for (int alpha : {0, 1}) {
        for (int p : {2, 3, 4}) {
            std::vector<double> log_ratios;
            for (int r : {3, 4, 5, 6}) {
                BoundSample s = verify_bound(alpha, p, r, 10);
                REQUIRE(s.max_ratio <= 100.0);
                log_ratios.push_back(std::log(s.max_ratio));
            }
            // least-squares slope of log(ratio) vs r
            double n = log_ratios.size(), sx = 0, sy = 0, sxy = 0, sxx = 0;
            for (std::size_t i = 0; i < log_ratios.size(); ++i) {
                double x = 3.0 + i;
                sx += x;
                sy += log_ratios[i];
                sxy += x * log_ratios[i];
                sxx += x * x;
            }
            double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            REQUIRE(slope <= 0.2);
        }
    }
}

TEST_CASE("alpha exponent ordering on a fixed trace function")
{
    for (int p : {2, 3, 4}) {
        splines::KnotVector kv = splines::KnotVector::uniform(p, 4);
        TraceSpace trace = make_trace_space(kv);
        BucketPlan plan = make_bucket_plan(kv, trace);
        std::mt19937 rng(17);
        std::normal_distribution<double> dist;
        Vector w(trace.dim());
        for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);

        auto ratio = [&](int alpha) {
            Extension e = extend(trace, plan, w, alpha);
            double lhs = h2_seminorm(e, kv, p + 2);
            const double ph = p / kv.max_span();
            Vector a = trace.phi.transpose() * (trace.mass * w);
            double rhs = std::pow(p, 3.0 - 2 * alpha) * w.dot(trace.mass * w) +
                         std::pow(ph, -1.0 - 2 * alpha) * w.dot(trace.second * w);
            for (int i = 0; i < trace.dim(); ++i)
                rhs += std::pow(std::min(trace.lambda[i], ph), 3.0 - 2 * alpha) * a[i] * a[i];
            return lhs / rhs;
        };
        // the alpha=1 surrogate loses a factor p^2 relative to alpha=0
        REQUIRE(ratio(1) <= 4.0 * p * p * ratio(0));
    }
}
