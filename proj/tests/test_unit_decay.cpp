#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tubes/decay.hpp"

#include <cmath>

using namespace tubes;

namespace {
constexpr double kPi = 3.14159265358979323846;

struct HerschFixture {
    DomainSpec H = build_hersch_pipe(64);
    ExhaustionStudy st = exhaustion_study(H, {4, 6, 8, 10}, 1.0 / 16, 1);
};

HerschFixture& hersch() {
    static HerschFixture f;
    return f;
}
}  // namespace

TEST_CASE("explicit decay constants") {
    DecayBoundConstants c = paper_decay_constants(1.0, 0.0, 0.0);
    CHECK(c.C_Omega_j == doctest::Approx(18.0));
    CHECK(c.beta_j == doctest::Approx(std::sqrt(18.0 / 19.0)));
    CHECK(c.C1_j == doctest::Approx(19.0 / 18.0));

    DecayBoundConstants c2 = paper_decay_constants(kPi * kPi, kPi * kPi / 2.0, 2.0);
    CHECK(c2.C_Omega_j == doctest::Approx(4.0 / (kPi * kPi) * (16.0 + kPi * kPi)));
    CHECK(c2.beta_j > 0.0);
    CHECK(c2.beta_j < 1.0);

    // beta -> 1 as lambda -> E, and C increases with lambda at fixed E
    double b1 = paper_decay_constants(1.0, 0.9, 0.0).beta_j;
    double b2 = paper_decay_constants(1.0, 0.99, 0.0).beta_j;
    CHECK(b2 > b1);
    CHECK(paper_decay_constants(1.0, 0.5, 0.0).C_Omega_j >
          paper_decay_constants(1.0, 0.1, 0.0).C_Omega_j);

    CHECK_THROWS(paper_decay_constants(1.0, 1.0, 0.0));
    CHECK_THROWS(paper_decay_constants(1.0, 2.0, 0.0));
}

TEST_CASE("hersch pipe tail profile and bounds") {
    auto& f = hersch();
    const EigenSolve& s = *f.st.final_solve;
    double lam = s.eig.eigenvalues[0];

    DecayProfile p = compute_tail_profile(s, 0, f.H);
    CHECK(p.r0 == doctest::Approx(2.0));
    CHECK(p.norm_u == doctest::Approx(1.0).epsilon(1e-8));
    for (size_t i = 0; i + 1 < p.A.size(); ++i) {
        CHECK(p.A[i] >= p.A[i + 1]);
        CHECK(p.S[i] >= p.S[i + 1]);
    }

    // measured rate dominates the separation-of-variables oracle
    double oracle = std::sqrt(kPi * kPi - lam);
    CHECK(p.rate >= oracle - 0.05);

    DecayBoundConstants c = paper_decay_constants(kPi * kPi, lam, p.r0);
    CHECK(p.rate >= -std::log(c.beta_j));  // explicit bound is not sharp

    DecayCheck chk = verify_decay_bounds(p, c, p.norm_u);
    CHECK(chk.overall);
    for (size_t i = 0; i < chk.sup_pass.size(); ++i) CHECK(chk.sup_pass[i]);
    // rows below r0+1 are excluded from the verdict
    CHECK_FALSE(chk.applicable.front());
    CHECK(chk.l2_pass.front());

    // forcing beta below the measured decay rate must fail at large R
    // (beta/4 decays at rate ln 4 + |ln beta| ~ 1.39, above the ~0.8 measured)
    DecayBoundConstants bad = c;
    bad.beta_j /= 4.0;
    DecayCheck chk_bad = verify_decay_bounds(p, bad, p.norm_u);
    CHECK_FALSE(chk_bad.overall);

    // grid reaching past the truncation is rejected
    CHECK_THROWS(compute_tail_profile(s, 0, f.H, {4.0, 20.0}));
}

TEST_CASE("tail telescoping identity") {
    auto& f = hersch();
    FeFunction u = f.st.final_solve->mode(0);
    for (double R : {3.0, 5.0, 7.0}) {
        double a1 = tail_norm(u, f.H, R), a2 = tail_norm(u, f.H, R + 1.0);
        double r1 = region_norm(u, f.H, R), r2 = region_norm(u, f.H, R + 1.0);
        CHECK(std::fabs((a1 * a1 - a2 * a2) - (r2 * r2 - r1 * r1)) < 1e-10);
    }
}

TEST_CASE("non-eigenfunction probe is reported, not rejected") {
    auto& f = hersch();
    const EigenSolve& s = *f.st.final_solve;
    FeFunction probe;
    probe.mesh = s.mesh.get();
    probe.values = Eigen::VectorXd::Zero(static_cast<int>(s.mesh->vertices.size()));
    for (size_t v = 0; v < s.mesh->vertices.size(); ++v)
        if (!s.mesh->dirichlet[v]) probe.values[static_cast<int>(v)] = 1.0;

    DecayProfile p = tail_profile_of(probe, f.H, s.R, {3.0, 5.0, 7.0});
    DecayBoundConstants c = paper_decay_constants(kPi * kPi, s.eig.eigenvalues[0], p.r0);
    DecayCheck chk = verify_decay_bounds(p, c, 1.0);  // constant has big tails
    CHECK_FALSE(chk.overall);
}

TEST_CASE("Linf/L2 ratio") {
    auto sq = build_unit_square();
    EigenSolve q = solve_eigs(sq, 1.0, 1.0 / 32, 1);
    FeFunction u = q.mode(0);
    double ratio = linf_l2_ratio(u, q.eig.eigenvalues[0]);
    // u = 2 sin(pi x) sin(pi y): sup/L2 = 2, lambda = 2 pi^2
    CHECK(ratio == doctest::Approx(2.0 / std::sqrt(2.0 * kPi * kPi)).epsilon(1e-2));

    FeFunction u7 = u;
    u7.values *= 7.0;
    CHECK(linf_l2_ratio(u7, q.eig.eigenvalues[0]) == doctest::Approx(ratio));

    auto& f = hersch();
    TruncatedDomain dom = truncate(f.H, 6.0);
    auto m0 = std::make_shared<Mesh>(triangulate(dom, 1.0 / 8));
    auto m1 = std::make_shared<Mesh>(refine_uniform(*m0));
    EigenSolve s0 = solve_on_mesh(m0, 6.0, 1.0 / 8, 1);
    EigenSolve s1 = solve_on_mesh(m1, 6.0, 1.0 / 16, 1);
    LinfL2Report rep = check_linf_l2({&s0, &s1}, 0);
    CHECK(rep.stable);
    CHECK(rep.variation <= 0.10);
}

TEST_CASE("decay csv") {
    auto& f = hersch();
    DecayProfile p = compute_tail_profile(*f.st.final_solve, 0, f.H);
    DecayBoundConstants c =
        paper_decay_constants(kPi * kPi, f.st.final_solve->eig.eigenvalues[0], p.r0);
    DecayCheck chk = verify_decay_bounds(p, c, p.norm_u);
    std::string csv = decay_csv(p, chk);
    CHECK(csv.rfind("R,A,S,paper_bound,pass\n", 0) == 0);
    CHECK(static_cast<size_t>(std::count(csv.begin(), csv.end(), '\n')) ==
          p.R_grid.size() + 1);
    CHECK(csv == decay_csv(p, chk));
}
