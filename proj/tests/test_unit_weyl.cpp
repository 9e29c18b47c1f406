#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tubes/weyl.hpp"

#include <cmath>

using namespace tubes;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("weyl spec derived quantities") {
    WeylSpec w;
    w.lambda = kPi * kPi;
    w.n = 1;
    CHECK(w.lambda_n() == doctest::Approx(kPi * kPi + 1.0));
    CHECK(w.R_n(kPi * kPi) == doctest::Approx(2.0 * kPi));

    WeylSpec bad;
    bad.lambda = 0.0;
    bad.n = 1;
    CHECK_THROWS(bad.R_n(kPi * kPi));  // lambda_n below the tube threshold

    auto H = build_hersch_pipe(32);
    CHECK(tube_threshold(H, 0) == doctest::Approx(kPi * kPi));
    CHECK_THROWS(tube_threshold(H, 7));
}

TEST_CASE("weyl function construction on H") {
    auto H = build_hersch_pipe(64);
    WeylSpec w;
    w.lambda = kPi * kPi;
    w.n = 1;
    double Rn = w.R_n(tube_threshold(H, 0));
    double R_trunc = w.r0 + Rn + 1.0;

    TruncatedDomain dom = truncate(H, R_trunc);
    Mesh mesh = triangulate(dom, 1.0 / 32);
    FeFunction U = build_weyl_function(mesh, H, w, R_trunc);

    // support contained in the axial slab (r0, r0+R_n) of tube 0, exactly
    const TubeSpec& tube = H.tubes[0];
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
        double val = U.values[static_cast<int>(v)];
        if (val == 0.0) continue;
        double t = tube_axis_coord(tube, mesh.vertices[v]);
        CHECK(t > w.r0);
        CHECK(t < w.r0 + Rn);
        CHECK(mesh.vertices[v].y > 0.0);  // tube 0 only
        CHECK(mesh.vertices[v].y < 1.0);
    }

    // nodal interpolant of a unit-L2 closed form
    CHECK(l2_norm(U) == doctest::Approx(1.0).epsilon(2e-3));

    // disjoint support: inner product with anything in the half-disk is 0
    SparseSym M = assemble_mass_full(mesh);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<int>(mesh.vertices.size()));
    for (size_t v = 0; v < mesh.vertices.size(); ++v)
        if (mesh.vertices[v].x < 0.0) g[static_cast<int>(v)] = 1.0;
    CHECK(g.dot(M * U.values) == 0.0);

    // truncation too short
    CHECK_THROWS(build_weyl_function(mesh, H, w, w.r0 + Rn - 1.0));
    WeylSpec below;
    below.lambda = 0.5 * kPi * kPi;
    CHECK_THROWS(build_weyl_function(mesh, H, below, R_trunc));
}

TEST_CASE("palais-smale diagnostics and refinement shrink") {
    auto H = build_hersch_pipe(64);
    WeylSpec w;
    w.lambda = kPi * kPi;

    double e_err_prev = 0.0, l2_err_prev = 0.0;
    for (int level = 0; level < 2; ++level) {
        double h = level == 0 ? 1.0 / 32 : 1.0 / 64;
        WeylRun r = run_weyl(H, w, h);
        double e_err = std::fabs(r.diag.energy - w.lambda_n());
        double l2_err = std::fabs(r.diag.l2 - 1.0);
        if (level == 1) {
            // one uniform refinement shrinks both discrete deviations ~4x
            CHECK(e_err_prev / e_err >= 3.0);
            CHECK(l2_err_prev / l2_err >= 3.0);
            CHECK(e_err <= 0.02);
            CHECK(l2_err <= 0.01);
        }
        e_err_prev = e_err;
        l2_err_prev = l2_err;
        // probes with support before the window vanish identically
        CHECK(r.diag.probes[0] == 0.0);
        CHECK(r.diag.probes[1] == 0.0);
    }
}

TEST_CASE("residual decays with n; scaling law above the threshold") {
    auto H = build_hersch_pipe(64);
    // at lambda strictly above the threshold the kink sources dominate and
    // dual_residual * sqrt(n) is flat
    std::vector<double> scaled;
    for (int n : {2, 4, 8}) {
        WeylSpec w;
        w.lambda = 2.0 * kPi * kPi;
        w.n = n;
        WeylRun r = run_weyl(H, w, 1.0 / 32);
        scaled.push_back(r.diag.dual_residual * std::sqrt(static_cast<double>(n)));
    }
    double mx = *std::max_element(scaled.begin(), scaled.end());
    double mn = *std::min_element(scaled.begin(), scaled.end());
    CHECK((mx - mn) / mn <= 0.25);

    // at lambda = pi^2 (the threshold itself) the residual decays ~1/n:
    // faster than the 1/sqrt(n) upper bound
    double prev = 0.0;
    for (int n : {1, 4}) {
        WeylSpec w;
        w.lambda = kPi * kPi;
        w.n = n;
        WeylRun r = run_weyl(H, w, 1.0 / 32);
        if (n == 1)
            prev = r.diag.dual_residual;
        else
            CHECK(r.diag.dual_residual < prev / 3.0);
    }
}

TEST_CASE("essential threshold report") {
    auto H = build_hersch_pipe(64);
    double E = kPi * kPi;
    auto rows = essential_threshold_report(H, {0.5 * E, E, 1.2 * E, 2.0 * E}, {1, 2}, 1.0 / 16);
    REQUIRE(rows.size() == 8);
    CHECK_FALSE(rows[0].applicable);
    CHECK_FALSE(rows[1].applicable);
    for (size_t i = 2; i < rows.size(); ++i) {
        CHECK(rows[i].applicable);
        CHECK(rows[i].diag.l2 == doctest::Approx(1.0).epsilon(5e-3));
        // coarse h = 1/16: higher lambda rows carry a larger O(h^2 omega^2)
        // interpolation error, so the tolerance is loose here
        CHECK(std::fabs(rows[i].diag.energy - (rows[i].lambda + 1.0 / rows[i].n)) < 0.25);
    }
    // energy strictly decreasing in n toward lambda
    CHECK(rows[2].diag.energy > rows[3].diag.energy);
    CHECK(rows[3].diag.energy > rows[3].lambda);

    std::string csv = weyl_csv(rows);
    CHECK(csv.rfind("lambda,n,energy,l2,dual_residual,sqrtn_scaled_residual,", 0) == 0);
    CHECK(csv.find("inapplicable") != std::string::npos);
    CHECK(csv == weyl_csv(rows));
}
