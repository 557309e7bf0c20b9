#include <catch2/catch_amalgamated.hpp>

#include <biharm/geometry.hpp>

#include <cstdio>
#include <fstream>
#include <random>

using namespace biharm;
using namespace biharm::geometry;

namespace {

GeometryMap identity_map() { return builtin_domain("unit_square", 1).patch(0); }

GeometryMap scaled_map(double factor)
{
    std::vector<double> kk = {0, 0, 0, 1, 1, 1};
    Eigen::MatrixX2d cps(9, 2);
    for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) cps.row(i + 3 * j) << factor * i / 2.0, factor * j / 2.0;
    return GeometryMap(2, 2, kk, kk, cps);
}

} // namespace

TEST_CASE("identity and scaling maps")
{
    GeometryMap id = identity_map();
    for (double u : {0.0, 0.3, 1.0}) {
        for (double v : {0.0, 0.7, 1.0}) {
            MapEval e = id.eval(u, v);
            REQUIRE((e.point - Vec2(u, v)).norm() < 1e-14);
            REQUIRE((e.jac - Mat2::Identity()).norm() < 1e-13);
            REQUIRE(e.hess[0].norm() < 1e-13);
            REQUIRE(e.hess[1].norm() < 1e-13);
        }
    }
    GeometryMap sc = scaled_map(2.0);
    REQUIRE(sc.eval(0.5, 0.5).jac.determinant() == Catch::Approx(4.0));
}

TEST_CASE("quarter annulus matches the two-arc Bezier construction")
{
    GeometryMap g = builtin_domain("quarter_annulus", 1).patch(0);
    MapEval e = g.eval(0.0, 0.0);
    REQUIRE((e.point - Vec2(1.0, 0.0)).norm() < 1e-14); // inner rim

    // de Casteljau oracle on the first 45-degree arc: Bezier points
    // b0=(1,0), b1=(1,t), b2=midpoint of spline control points 1,2
    const double t = std::tan(M_PI / 8.0);
    Vec2 b0(1.0, 0.0), b1(1.0, t);
    Vec2 db = 2.0 / 0.5 * (b1 - b0); // derivative of the [0,1/2] Bezier span at y=0
    REQUIRE((e.jac.col(1) - db).norm() < 1e-12);
    // radial tangent: radii run from 1 to 2
    REQUIRE((e.jac.col(0) - Vec2(1.0, 0.0)).norm() < 1e-12);

    // the interpolating arc stays within ~1% of the unit circle
    for (double v : {0.1, 0.35, 0.6, 0.9}) {
        Vec2 p = g.eval(0.0, v, 0).point;
        REQUIRE(p.norm() == Catch::Approx(1.0).epsilon(0.02));
    }
    // endpoints interpolate exactly
    REQUIRE((g.eval(0.0, 1.0, 0).point - Vec2(0.0, 1.0)).norm() < 1e-14);
}

TEST_CASE("degenerate Jacobian is detected")
{
    std::vector<double> kk = {0, 0, 0, 1, 1, 1};
    Eigen::MatrixX2d cps(9, 2);
    for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) cps.row(i + 3 * j) << i / 2.0, 0.0; // collapsed in y
    GeometryMap g(2, 2, kk, kk, cps);
    REQUIRE_THROWS_AS(g.eval(0.5, 0.5, 1), DegenerateJacobian);
}

TEST_CASE("split_patch reproduces the original map")
{
    GeometryMap annulus = builtin_domain("quarter_annulus", 1).patch(0);
    auto parts = split_patch(annulus, 2, 3);
    REQUIRE(parts.size() == 6);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int s = 0; s < 200; ++s) {
        double u = dist(rng), v = dist(rng);
        int i = std::min(1, static_cast<int>(u * 2));
        int j = std::min(2, static_cast<int>(v * 3));
        Vec2 orig = annulus.eval(u, v, 0).point;
        Vec2 sub = parts[i + 2 * j].eval(u * 2 - i, v * 3 - j, 0).point;
        REQUIRE((orig - sub).norm() < 1e-12);
    }
}

TEST_CASE("arc split in halves reproduces the curve")
{
    GeometryMap annulus = builtin_domain("quarter_annulus", 1).patch(0);
    auto halves = split_patch(annulus, 1, 2);
    for (int s = 0; s <= 100; ++s) {
        double v = s / 100.0;
        Vec2 orig = annulus.eval(0.0, v, 0).point;
        Vec2 sub = (v < 0.5) ? halves[0].eval(0.0, 2 * v, 0).point
                             : halves[1].eval(0.0, 2 * v - 1, 0).point;
        REQUIRE((orig - sub).norm() < 1e-12);
    }
}

TEST_CASE("built-in domain combinatorics")
{
    MultiPatch sq = builtin_domain("unit_square", 2);
    REQUIRE(sq.num_patches() == 4);
    REQUIRE(sq.interfaces().size() == 4);
    REQUIRE(sq.boundary().size() == 8);

    MultiPatch ann = builtin_domain("quarter_annulus", 4);
    REQUIRE(ann.num_patches() == 16);
    REQUIRE(ann.interfaces().size() == 24);
    REQUIRE(ann.boundary().size() == 16);
    int interior = 0;
    for (const auto& v : ann.vertices())
        if (!v.on_boundary) ++interior;
    REQUIRE(interior == 9);

    MultiPatch lam = builtin_domain("lamella", 2);
    REQUIRE(lam.num_patches() == 32);
    // patch graph of a ring domain: V - E + F = 0 (one hole)
    int v = static_cast<int>(lam.vertices().size());
    int e = static_cast<int>(lam.interfaces().size() + lam.boundary().size());
    REQUIRE(v - e + lam.num_patches() == 0);

    REQUIRE_THROWS_AS(builtin_domain("moebius", 1), UnknownDomain);
}

TEST_CASE("C1 matching on split and built-in domains")
{
    MultiPatch two = builtin_domain("unit_square", 2);
    for (const auto& f : two.interfaces()) {
        C1Report rep = check_c1_matching(two, f);
        REQUIRE(rep.value_match);
        REQUIRE(rep.deriv_match);
        REQUIRE(rep.alpha == Catch::Approx(1.0).margin(1e-10));
    }
    for (const std::string name : {"quarter_annulus", "lamella"}) {
        MultiPatch mp = builtin_domain(name, 2);
        for (const auto& f : mp.interfaces()) {
            C1Report rep = check_c1_matching(mp, f);
            REQUIRE(rep.value_match);
            REQUIRE(rep.deriv_match);
            REQUIRE(rep.alpha == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("transversal parameter stretch is reported as alpha")
{
    // second square covers [1,3] x [0,1]: transversal speed 2 instead of 1
    std::vector<double> kk = {0, 0, 0, 1, 1, 1};
    Eigen::MatrixX2d a(9, 2), b(9, 2);
    for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) {
            a.row(i + 3 * j) << i / 2.0, j / 2.0;
            b.row(i + 3 * j) << 1.0 + i, j / 2.0;
        }
    MultiPatch mp = MultiPatch::connect({GeometryMap(2, 2, kk, kk, a), GeometryMap(2, 2, kk, kk, b)});
    REQUIRE(mp.interfaces().size() == 1);
    const Interface& f = mp.interfaces()[0];
    C1Report rep = check_c1_matching(mp, f);
    REQUIRE(rep.value_match);
    double alpha = (f.patch_a == 0) ? 2.0 : 0.5; // d_b = -alpha d_a
    REQUIRE(rep.alpha == Catch::Approx(alpha).margin(1e-10));
}

TEST_CASE("det J keeps one sign on all built-in domains")
{
    for (const std::string name : {"unit_square", "quarter_annulus", "lamella"}) {
        MultiPatch mp = builtin_domain(name, 2);
        for (const auto& g : mp.patches()) {
            double sign = 0.0;
            for (double u : {0.05, 0.3, 0.62, 0.97}) {
                for (double v : {0.08, 0.4, 0.77, 0.93}) {
                    double d = g.eval(u, v, 1).jac.determinant();
                    if (sign == 0.0) sign = d > 0 ? 1.0 : -1.0;
                    REQUIRE(sign * d > 0.0);
                }
            }
        }
    }
}

TEST_CASE("T-junctions are rejected")
{
    std::vector<double> kk = {0, 0, 0, 1, 1, 1};
    auto box = [&](double x0, double y0, double w, double h) {
        Eigen::MatrixX2d c(9, 2);
        for (int j = 0; j <= 2; ++j)
            for (int i = 0; i <= 2; ++i) c.row(i + 3 * j) << x0 + w * i / 2.0, y0 + h * j / 2.0;
        return GeometryMap(2, 2, kk, kk, c);
    };
    // patch 1 covers only half of patch 0's east side
    std::vector<GeometryMap> patches = {box(0, 0, 1, 1), box(1, 0, 1, 0.5), box(1, 0.5, 1, 0.5)};
    std::vector<Interface> ifaces = {{0, Side::East, 1, Side::West, 1}};
    std::vector<BoundarySide> bdry = {{0, Side::West}, {0, Side::South}, {0, Side::North},
                                      {1, Side::East}, {1, Side::South}, {1, Side::North},
                                      {2, Side::West}, {2, Side::East}, {2, Side::South},
                                      {2, Side::North}};
    MultiPatch mp(std::move(patches), std::move(ifaces), std::move(bdry));
    REQUIRE_THROWS_AS(mp.validate_matching(), NotMatching);

    // connect() never pairs partial sides: the T-junction sides end up on the boundary
    MultiPatch auto_mp = MultiPatch::connect({box(0, 0, 1, 1), box(1, 0, 1, 0.5), box(1, 0.5, 1, 0.5)});
    REQUIRE(auto_mp.interfaces().size() == 1); // only the conforming 1-2 interface
}

TEST_CASE("multipatch JSON round trip")
{
    MultiPatch ann = builtin_domain("quarter_annulus", 4);
    std::string path = "annulus16_roundtrip.json";
    save_multipatch(ann, path);
    MultiPatch loaded = load_multipatch(path);
    REQUIRE(loaded.num_patches() == ann.num_patches());
    for (int k = 0; k < ann.num_patches(); ++k) {
        REQUIRE(loaded.patch(k).control_points().rows() == ann.patch(k).control_points().rows());
        REQUIRE((loaded.patch(k).control_points() - ann.patch(k).control_points()).norm() == 0.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("loader validates interface knots and parses a hand-written file")
{
    const char* two_squares = R"({
      "patches": [
        {"degree": [2,2], "knots_u": [0,0,0,1,1,1], "knots_v": [0,0,0,1,1,1],
         "cps": [[0,0],[0.5,0],[1,0],[0,0.5],[0.5,0.5],[1,0.5],[0,1],[0.5,1],[1,1]]},
        {"degree": [2,2], "knots_u": [0,0,0,1,1,1], "knots_v": [0,0,0,1,1,1],
         "cps": [[1,0],[1.5,0],[2,0],[1,0.5],[1.5,0.5],[2,0.5],[1,1],[1.5,1],[2,1]]}
      ],
      "interfaces": [{"a": 0, "side_a": 1, "b": 1, "side_b": 0, "orient": 1}],
      "boundary": [
        {"patch": 0, "side": 0}, {"patch": 0, "side": 2}, {"patch": 0, "side": 3},
        {"patch": 1, "side": 1}, {"patch": 1, "side": 2}, {"patch": 1, "side": 3}
      ]
    })";
    {
        std::ofstream out("two_squares.json");
        out << two_squares;
    }
    MultiPatch mp = load_multipatch("two_squares.json");
    REQUIRE(mp.num_patches() == 2);
    REQUIRE(mp.interfaces().size() == 1);
    REQUIRE(mp.boundary().size() == 6);
    std::remove("two_squares.json");

    // mismatched interface knots must be rejected
    const char* mismatched = R"({
      "patches": [
        {"degree": [2,2], "knots_u": [0,0,0,1,1,1], "knots_v": [0,0,0,0.5,1,1,1],
         "cps": [[0,0],[0.5,0],[1,0],[0,0.25],[0.5,0.25],[1,0.25],[0,0.75],[0.5,0.75],[1,0.75],[0,1],[0.5,1],[1,1]]},
        {"degree": [2,2], "knots_u": [0,0,0,1,1,1], "knots_v": [0,0,0,1,1,1],
         "cps": [[1,0],[1.5,0],[2,0],[1,0.5],[1.5,0.5],[2,0.5],[1,1],[1.5,1],[2,1]]}
      ],
      "interfaces": [{"a": 0, "side_a": 1, "b": 1, "side_b": 0, "orient": 1}],
      "boundary": [
        {"patch": 0, "side": 0}, {"patch": 0, "side": 2}, {"patch": 0, "side": 3},
        {"patch": 1, "side": 1}, {"patch": 1, "side": 2}, {"patch": 1, "side": 3}
      ]
    })";
    {
        std::ofstream out("mismatched.json");
        out << mismatched;
    }
    REQUIRE_THROWS_AS(load_multipatch("mismatched.json"), NotMatching);
    std::remove("mismatched.json");
}
