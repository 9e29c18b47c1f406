#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tubes/torsion.hpp"

#include <cmath>
#include <utility>
#include <vector>

using namespace tubes;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent 5-point finite-difference oracle for the blow-up torsion
// constant: upper half-disk of radius R with tube (-1,1) x (-L, 0],
// Dirichlet outer boundary, unit line load on Sigma = (-1,1) x {0}.
double fd_blowup_torsion(double R, double L, int per_unit) {
    double hg = 1.0 / per_unit;
    int nx = static_cast<int>(std::lround(2 * R / hg)) + 1;
    int ny = static_cast<int>(std::lround((R + L) / hg)) + 1;
    auto X = [&](int i) { return -R + i * hg; };
    auto Y = [&](int j) { return -L + j * hg; };
    std::vector<int> id(static_cast<size_t>(nx) * ny, -1);
    std::vector<std::pair<int, int>> nodes;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double x = X(i), y = Y(j);
            bool in = (y > 1e-12 && x * x + y * y < R * R - 1e-12) ||
                      (x > -1 + 1e-12 && x < 1 - 1e-12 && y > -L + 1e-12 && y <= 1e-12);
            if (in) {
                id[static_cast<size_t>(j) * nx + i] = static_cast<int>(nodes.size());
                nodes.push_back({i, j});
            }
        }
    int n = static_cast<int>(nodes.size());
    auto apply = [&](const std::vector<double>& u, std::vector<double>& r) {
        for (int k = 0; k < n; ++k) {
            auto [i, j] = nodes[k];
            double s = 4.0 * u[k];
            int nb[4] = {id[static_cast<size_t>(j) * nx + i - 1],
                         id[static_cast<size_t>(j) * nx + i + 1],
                         id[static_cast<size_t>(j - 1) * nx + i],
                         id[static_cast<size_t>(j + 1) * nx + i]};
            for (int q = 0; q < 4; ++q)
                if (nb[q] >= 0) s -= u[nb[q]];
            r[k] = s / (hg * hg);
        }
    };
    std::vector<double> b(n, 0.0), u(n, 0.0), r(n), p(n), Ap(n);
    for (int k = 0; k < n; ++k)
        if (std::fabs(Y(nodes[k].second)) < 1e-12) b[k] = 1.0 / hg;
    r = b;
    p = r;
    double rs = 0;
    for (double v : r) rs += v * v;
    for (int it = 0; it < 200000; ++it) {
        apply(p, Ap);
        double pAp = 0;
        for (int k = 0; k < n; ++k) pAp += p[k] * Ap[k];
        double al = rs / pAp;
        for (int k = 0; k < n; ++k) {
            u[k] += al * p[k];
            r[k] -= al * Ap[k];
        }
        double rs2 = 0;
        for (double v : r) rs2 += v * v;
        if (std::sqrt(rs2) < 1e-10) break;
        for (int k = 0; k < n; ++k) p[k] = r[k] + (rs2 / rs) * p[k];
        rs = rs2;
    }
    double T = 0;
    for (int k = 0; k < n; ++k) T += b[k] * u[k] * hg * hg;
    return T;
}

struct BlowFixture {
    BlowUpResult blow;
    BlowFixture() : blow(blow_up_constant({2.0, 4.0, 8.0}, {2.0, 4.0}, 1.0 / 16)) {}
};

BlowFixture& blow_fixture() {
    static BlowFixture f;
    return f;
}

struct PerturbedMesh {
    Mesh mesh;
    AssembledSystem sys;
    explicit PerturbedMesh(double eps) {
        DomainSpec dom = attach_perturbation_tubes(build_hersch_pipe(32), 1, eps);
        TruncatedDomain tr = truncate(dom, 8.0);
        mesh = triangulate(tr, 1.0 / 16);
        sys = assemble_system(mesh);
    }
};

PerturbedMesh& perturbed(double eps) {
    static PerturbedMesh coarse(0.05), fine(0.025);
    return eps == 0.05 ? coarse : fine;
}

}  // namespace

TEST_CASE("basic rigidity identities") {
    auto& pm = perturbed(0.05);
    auto one = [](Point2) { return 1.0; };
    auto zero = [](Point2) { return 0.0; };
    auto minus = [](Point2) { return -1.0; };
    auto two = [](Point2) { return 2.0; };

    TorsionResult t0 = solve_thin_torsion(pm.mesh, pm.sys, 0, zero);
    CHECK(t0.T == 0.0);
    CHECK(t0.U.values.norm() == 0.0);

    TorsionResult tp = solve_thin_torsion(pm.mesh, pm.sys, 0, one);
    TorsionResult tm = solve_thin_torsion(pm.mesh, pm.sys, 0, minus);
    CHECK(tp.T > 0.0);
    CHECK(tm.T == doctest::Approx(tp.T).epsilon(1e-12));

    // T equals the Dirichlet energy of the maximizer
    CHECK(std::fabs(tp.T - tp.energy) <= 1e-8 * tp.T);

    // quadratic homogeneity in the load
    TorsionResult t2 = solve_thin_torsion(pm.mesh, pm.sys, 0, two);
    CHECK(std::fabs(t2.T - 4.0 * tp.T) <= 1e-10 * t2.T);
}

TEST_CASE("gamma constant: trace bound and thin-tube scaling") {
    auto one = [](Point2) { return 1.0; };
    double gamma_per_eps[2];
    int idx = 0;
    for (double eps : {0.05, 0.025}) {
        auto& pm = perturbed(eps);
        double g = gamma_constant(pm.mesh, pm.sys, -1);
        // thin attached tubes: gamma is far below the eps budget
        CHECK(g > 0.0);
        CHECK(g <= 1.05 * eps);
        gamma_per_eps[idx++] = g / eps;

        // T <= gamma ||f||_inf^2 length(Sigma)
        TorsionResult t = solve_thin_torsion(pm.mesh, pm.sys, 0, one);
        CHECK(t.T <= g * sigma_length(pm.mesh, 0) * (1.0 + 1e-9));
    }
    // gamma scales linearly with the tube width
    CHECK(std::fabs(gamma_per_eps[0] - gamma_per_eps[1]) / gamma_per_eps[0] <= 0.05);

    // no Sigma facets at all: plain truncated pipe
    TruncatedDomain tr = truncate(build_hersch_pipe(32), 4.0);
    Mesh mesh = triangulate(tr, 1.0 / 8);
    AssembledSystem sys = assemble_system(mesh);
    CHECK_THROWS_AS(gamma_constant(mesh, sys, -1), std::invalid_argument);
}

TEST_CASE("superadditivity of separated pieces") {
    auto one = [](Point2) { return 1.0; };
    auto& pm = perturbed(0.05);
    SuperadditivityReport rep = superadditivity_check(pm.mesh, pm.sys, {0, 1}, one);
    REQUIRE(rep.T_single.size() == 2);
    CHECK(rep.margin >= 0.0);
    // pieces a unit apart interact only weakly
    CHECK(rep.margin <= 1e-2 * rep.T_all);
    // enlarging Sigma can only increase the rigidity
    CHECK(rep.T_all >= rep.T_single[0]);
    CHECK(rep.T_all >= rep.T_single[1]);
}

TEST_CASE("blow-up constant: monotone rows, contraction, FD oracle") {
    const BlowUpResult& blow = blow_fixture().blow;
    CHECK(blow.alpha > 0.0);
    REQUIRE(blow.rows.size() == 6);

    // T increases in R_inf at each L, and in L at each R_inf
    for (size_t k = 0; k < blow.rows.size(); ++k) {
        if (k % 3 != 0) CHECK(blow.rows[k].T > blow.rows[k - 1].T);
        if (k >= 3) CHECK(blow.rows[k].T > blow.rows[k - 3].T);
    }
    // the L = 4 extrapolation dominates and the two agree closely
    CHECK(blow.alpha_per_L.size() == 2);
    CHECK(std::fabs(blow.alpha_per_L[1] - blow.alpha_per_L[0]) <= 0.01 * blow.alpha);

    // independent finite-difference oracle on the largest truncation
    double fd = fd_blowup_torsion(8.0, 4.0, 16);
    CHECK(std::fabs(blow.alpha - fd) <= 0.03 * blow.alpha);

    CHECK_THROWS_AS(blow_up_constant({4.0, 2.0}, {2.0}, 1.0 / 16), std::invalid_argument);
}

TEST_CASE("epsilon scaling of a single attached tube") {
    const BlowUpResult& blow = blow_fixture().blow;
    auto one = [](Point2) { return 1.0; };
    EpsScalingStudy st = epsilon_scaling_study(build_hersch_pipe(32), {2.5, 1.0}, one,
                                               {0.05, 0.025}, 1.0 / 16);
    REQUIRE(st.rows.size() == 2);
    for (const EpsScalingRow& r : st.rows) {
        CHECK(r.T > 0.0);
        CHECK(r.bound_ok);
        // T(eps)/eps^2 approaches alpha f(p)^2
        CHECK(std::fabs(r.T_over_eps2 - blow.alpha) <= 0.10 * blow.alpha);
    }
    CHECK(st.last_two_dev <= 0.10);
    // halving eps quarters the rigidity, up to higher-order corrections
    CHECK(st.rows[1].T / st.rows[0].T > 0.2);
    CHECK(st.rows[1].T / st.rows[0].T < 0.3);

    CHECK_THROWS_AS(epsilon_scaling_study(build_hersch_pipe(32), {2.5, 1.0}, one,
                                          {0.025, 0.05}, 1.0 / 16),
                    std::invalid_argument);
    CHECK_THROWS_AS(attach_single_sigma_tube(build_hersch_pipe(32), {2.5, 1.0},
                                             {0.0, 1.0}, -0.1),
                    std::invalid_argument);

    std::string csv = torsion_csv(blow, st);
    CHECK(csv.rfind("eps,R_inf,L,T,T_over_eps2,gamma,bound_ok\n", 0) == 0);
    CHECK(csv == torsion_csv(blow, st));
}
