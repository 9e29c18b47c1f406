// Acceptance suite: one pass/fail line per criterion.  Exit code equals
// the number of failed criteria.

#include "tubes/decay.hpp"
#include "tubes/perturb.hpp"
#include "tubes/spectra.hpp"
#include "tubes/torsion.hpp"
#include "tubes/weyl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace tubes;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Criterion {
    bool pass = true;
    std::vector<std::string> notes;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("violated: " + what);
        }
    }
    void info(const std::string& s) { notes.push_back(s); }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int run_criterion(int id, const std::string& title,
                  const std::function<void(Criterion&)>& body) {
    Criterion c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.pass = false;
        c.notes.push_back(std::string("exception: ") + e.what());
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("CRITERION %d: %s — %s (%.0fs)\n", id, c.pass ? "PASS" : "FAIL",
                title.c_str(), dt);
    for (const std::string& s : c.notes) std::printf("    %s\n", s.c_str());
    std::fflush(stdout);
    return c.pass ? 0 : 1;
}

// 5-point finite-difference oracle for the blow-up torsion value (see the
// torsion unit suite for the derivation of the discretization).
double fd_blowup_torsion(double R, double L, int per_unit) {
    double hg = 1.0 / per_unit;
    int nx = (int)std::lround(2 * R / hg) + 1, ny = (int)std::lround((R + L) / hg) + 1;
    std::vector<int> id((size_t)nx * ny, -1);
    std::vector<std::pair<int, int>> nodes;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double x = -R + i * hg, y = -L + j * hg;
            bool in = (y > 1e-12 && x * x + y * y < R * R - 1e-12) ||
                      (x > -1 + 1e-12 && x < 1 - 1e-12 && y > -L + 1e-12 && y <= 1e-12);
            if (in) {
                id[(size_t)j * nx + i] = (int)nodes.size();
                nodes.push_back({i, j});
            }
        }
    int n = (int)nodes.size();
    auto apply = [&](const std::vector<double>& u, std::vector<double>& r) {
        for (int k = 0; k < n; ++k) {
            auto [i, j] = nodes[k];
            double s = 4.0 * u[k];
            int nb[4] = {id[(size_t)j * nx + i - 1], id[(size_t)j * nx + i + 1],
                         id[(size_t)(j - 1) * nx + i], id[(size_t)(j + 1) * nx + i]};
            for (int q = 0; q < 4; ++q)
                if (nb[q] >= 0) s -= u[nb[q]];
            r[k] = s / (hg * hg);
        }
    };
    std::vector<double> b(n, 0.0), u(n, 0.0), r(n), p(n), Ap(n);
    for (int k = 0; k < n; ++k)
        if (std::fabs(-L + nodes[k].second * hg) < 1e-12) b[k] = 1.0 / hg;
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

// shared across criteria, computed once
DomainSpec g_H;
ExhaustionStudy g_exhaust;
double g_alpha = 0.0;

}  // namespace

int main() {
    int failures = 0;
    g_H = build_hersch_pipe(64);

    failures += run_criterion(1, "golden eigenvalues (square, diamond, slit disk)", [](Criterion& c) {
        EigenSolve sq = solve_eigs(build_unit_square(), 1.0, 1.0 / 64, 1);
        double ls = sq.eig.eigenvalues[0], ex = 2.0 * kPi * kPi;
        c.require(std::fabs(ls - ex) <= 0.003 * ex, "square lambda1 within 0.3%");
        c.info("square lambda1 = " + num(ls) + " (2*pi^2 = " + num(ex) + ")");

        EigenSolve dia = solve_eigs(build_diamond_square(), 1.0, 1.0 / 16, 1);
        double ld = dia.eig.eigenvalues[0], ed = kPi * kPi / 4.0;
        c.require(std::fabs(ld - ed) <= 0.005 * ed, "diamond lambda1 within 0.5%");
        c.info("diamond lambda1 = " + num(ld) + " (pi^2/4 = " + num(ed) + ")");

        EigenSolve sd = solve_eigs(build_slit_disk(64), 1.0, 1.0 / 32, 1);
        double lsl = sd.eig.eigenvalues[0];
        c.require(std::fabs(lsl - kPi * kPi) <= 0.01 * kPi * kPi,
                  "slit disk lambda1 within 1%");
        const Mesh& m = *sd.mesh;
        SparseSym M = assemble_mass_full(m);
        FeFunction u = sd.mode(0);
        Eigen::VectorXd ue((int)m.vertices.size());
        for (size_t v = 0; v < m.vertices.size(); ++v) {
            double x = m.vertices[v].x, y = m.vertices[v].y;
            double r = std::hypot(x, y);
            double th = std::atan2(y, x);
            if (th < 0) th += 2.0 * kPi;
            double rad = r < 1e-12 ? 0.0 : std::sin(kPi * r) / std::sqrt(kPi * r);
            ue[(int)v] = m.dirichlet[v] ? 0.0 : rad * std::sin(th / 2.0);
        }
        double corr = std::fabs(u.values.dot(M * ue)) /
                      std::sqrt(u.values.dot(M * u.values) * ue.dot(M * ue));
        c.require(corr >= 0.999, "slit disk eigenfunction correlation >= 0.999");
        c.info("slit disk lambda1 = " + num(lsl) + ", correlation = " + num(corr));
    });

    failures += run_criterion(2, "exhaustion on the pipe (monotone, contracting, bracketed)", [](Criterion& c) {
        g_exhaust = exhaustion_study(g_H, {4.0, 6.0, 8.0, 10.0}, 1.0 / 16, 1);
        const auto& st = g_exhaust;
        c.require(st.monotone_ok, "lambda1(Omega_R) non-increasing (exact, nested spaces)");
        for (size_t i = 0; i + 2 < st.lambdas.size(); ++i) {
            double g1 = st.lambdas[i][0] - st.lambdas[i + 1][0];
            double g2 = st.lambdas[i + 1][0] - st.lambdas[i + 2][0];
            c.require(g2 > 0.0 && g1 / g2 >= 2.0, "successive gaps shrink by >= 2x");
        }
        double lam = st.extrapolated[0];
        c.require(lam > 2.4788 && lam < kPi * kPi,
                  "extrapolated lambda1 in (2.4788, pi^2)");
        c.info("extrapolated lambda1 = " + num(lam));
    });

    failures += run_criterion(3, "tail decay bounds with explicit constants", [](Criterion& c) {
        const EigenSolve& s = *g_exhaust.final_solve;
        double lam = s.eig.eigenvalues[0];
        DecayProfile p = compute_tail_profile(s, 0, g_H);
        DecayBoundConstants k = paper_decay_constants(kPi * kPi, lam, p.r0);
        DecayCheck chk = verify_decay_bounds(p, k, p.norm_u);
        c.require(chk.overall, "A(R) <= C1 beta^R ||u|| at every grid R");
        c.require(p.rate >= -std::log(k.beta_j), "measured rate >= -ln(beta)");
        double oracle = std::sqrt(kPi * kPi - lam) - 0.05;
        c.require(p.rate >= oracle, "measured rate >= sqrt(pi^2-lambda1) - 0.05");
        c.info("rate = " + num(p.rate) + ", -ln(beta) = " + num(-std::log(k.beta_j)) +
               ", half-strip oracle = " + num(oracle + 0.05));
    });

    failures += run_criterion(4, "higher eigenvalues on the infinite cross", [](Criterion& c) {
        HigherEigStudy hs = higher_eig_study(build_infinite_cross(), {4.0, 6.0, 8.0},
                                             1.0 / 16, 3);
        const auto& st = hs.base;
        for (const auto& row : st.lambdas)
            c.require(row[0] <= row[1], "lambda1 <= lambda2 at each R");
        for (size_t i = 0; i + 1 < st.lambdas.size(); ++i)
            c.require(st.lambdas[i][1] >= st.lambdas[i + 1][1],
                      "lambda2 non-increasing in R");
        c.require(hs.orthonormality_error <= 1e-10, "M-orthonormality error <= 1e-10");
        c.info("orthonormality error = " + num(hs.orthonormality_error));
    });

    failures += run_criterion(5, "Weyl sequences at the essential threshold", [](Criterion& c) {
        // accuracy and refinement shrink at lambda = pi^2
        for (int n : {1, 2, 4, 8}) {
            WeylSpec w;
            w.lambda = kPi * kPi;
            w.n = n;
            WeylRun r64 = run_weyl(g_H, w, 1.0 / 64);
            double e64 = std::fabs(r64.diag.energy - w.lambda_n());
            double l64 = std::fabs(r64.diag.l2 - 1.0);
            c.require(e64 <= 0.02, "energy error <= 0.02 at h=1/64 (n=" + num(n) + ")");
            c.require(l64 <= 0.01, "l2 error <= 0.01 at h=1/64 (n=" + num(n) + ")");
            if (n == 1) {
                WeylRun r32 = run_weyl(g_H, w, 1.0 / 32);
                c.require(std::fabs(r32.diag.energy - w.lambda_n()) / e64 >= 3.0,
                          "energy error shrinks >= 3x under refinement");
                c.require(std::fabs(r32.diag.l2 - 1.0) / l64 >= 3.0,
                          "l2 error shrinks >= 3x under refinement");
            }
        }
        // scaling clause, evaluated exactly as stated at lambda = pi^2
        std::vector<double> scaled;
        for (int n : {2, 4, 8}) {
            WeylSpec w;
            w.lambda = kPi * kPi;
            w.n = n;
            WeylRun r = run_weyl(g_H, w, 1.0 / 64);
            scaled.push_back(r.diag.dual_residual * std::sqrt((double)n));
        }
        double mx = *std::max_element(scaled.begin(), scaled.end());
        double mn = *std::min_element(scaled.begin(), scaled.end());
        double var = (mx - mn) / mn;
        c.require(var <= 0.25,
                  "dual_residual*sqrt(n) varies <= 25% over n in {2,4,8} at lambda = pi^2");
        c.info("measured sqrt(n)-scaled residuals at pi^2: " + num(scaled[0]) + ", " +
               num(scaled[1]) + ", " + num(scaled[2]) + " (variation " + num(100 * var) +
               "%)");
        if (var > 0.25) {
            // at the threshold itself the volume term (lambda_n - lambda)U = U/n
            // dominates the window-end kinks, so the residual decays like 1/n —
            // faster than the 1/sqrt(n) bound the clause flattens against.
            // Strictly above the threshold the kinks dominate and the stated
            // flatness does hold; evidence:
            std::vector<double> above;
            for (int n : {2, 4, 8}) {
                WeylSpec w;
                w.lambda = 2.0 * kPi * kPi;
                w.n = n;
                WeylRun r = run_weyl(g_H, w, 1.0 / 32);
                above.push_back(r.diag.dual_residual * std::sqrt((double)n));
            }
            double amx = *std::max_element(above.begin(), above.end());
            double amn = *std::min_element(above.begin(), above.end());
            c.info("above threshold (lambda = 2*pi^2) the same quantity varies " +
                   num(100 * (amx - amn) / amn) + "%: construction sound, clause " +
                   "unattainable at the threshold itself");
        }
    });

    failures += run_criterion(6, "thin torsional rigidity identities and trace bound", [](Criterion& c) {
        for (double eps : {0.05, 0.025}) {
            DomainSpec dom = attach_perturbation_tubes(g_H, 1, eps);
            TruncatedDomain tr = truncate(dom, 8.0);
            Mesh mesh = triangulate(tr, 1.0 / 16);
            AssembledSystem sys = assemble_system(mesh);
            auto one = [](Point2) { return 1.0; };
            auto two = [](Point2) { return 2.0; };
            TorsionResult t = solve_thin_torsion(mesh, sys, 0, one);
            c.require(std::fabs(t.T - t.energy) <= 1e-8 * t.T,
                      "value identity |b'U - U'KU| <= 1e-8 relative");
            TorsionResult t2 = solve_thin_torsion(mesh, sys, 0, two);
            c.require(std::fabs(t2.T - 4.0 * t.T) <= 1e-10 * t2.T,
                      "quadratic homogeneity T(2f) = 4T(f) to 1e-10");
            SuperadditivityReport rep = superadditivity_check(mesh, sys, {0, 1}, one);
            c.require(rep.margin >= 0.0, "superadditivity margin >= 0 on 2 tubes");
            double g = gamma_constant(mesh, sys, -1);
            c.require(g <= 1.05 * eps, "gamma <= 1.05*eps (eps=" + num(eps) + ")");
            c.info("eps=" + num(eps) + ": gamma=" + num(g) +
                   ", margin=" + num(rep.margin));
        }
    });

    failures += run_criterion(7, "blow-up constant alpha against the FD oracle", [](Criterion& c) {
        BlowUpResult blow = blow_up_constant({2.0, 4.0, 8.0}, {2.0, 4.0}, 1.0 / 16);
        g_alpha = blow.alpha;
        c.require(blow.alpha > 0.0, "alpha > 0");
        for (size_t i = 0; i < blow.rows.size(); ++i)
            if (i % 3 != 0)
                c.require(blow.rows[i].T > blow.rows[i - 1].T, "T monotone in R_inf");
        double fd = fd_blowup_torsion(8.0, 4.0, 16);
        c.require(std::fabs(blow.alpha - fd) <= 0.03 * blow.alpha,
                  "alpha within 3% of the 5-point FD oracle");
        auto one = [](Point2) { return 1.0; };
        EpsScalingStudy st =
            epsilon_scaling_study(g_H, {2.5, 1.0}, one, {0.05, 0.025}, 1.0 / 16);
        c.require(st.last_two_dev <= 0.10, "T/eps^2 last-two deviation <= 10%");
        for (const EpsScalingRow& r : st.rows)
            c.require(std::fabs(r.T_over_eps2 - blow.alpha) <= 0.10 * blow.alpha,
                      "T/eps^2 within 10% of alpha*f(p)^2");
        c.info("alpha = " + num(blow.alpha) + ", FD oracle = " + num(fd) +
               ", T/eps^2 = " + num(st.rows.back().T_over_eps2));
    });

    failures += run_criterion(8, "perturbation verdict (Makai-Hayman non-optimality)", [](Criterion& c) {
        double alpha = g_alpha > 0.0 ? g_alpha : 0.6313;
        EigenSolve s = solve_eigs(g_H, 8.0, 1.0 / 16, 1);
        PerturbationReport rep =
            rho_verdict(g_H, s, alpha, 1, {0.05, 0.025, 0.0125}, 8.0, 1.0 / 16);
        for (const DropRow& r : rep.direct_rows)
            c.require(r.drop > 0.0, "strict eigenvalue drop on matched meshes");
        // fitted drop slope against alpha * sum f(p_i)^2 at the direct n
        DropStudy st = eigen_drop_study(g_H, rep.profile, 1, {0.05, 0.025}, 8.0, 1.0 / 16);
        double law = alpha * st.junction_sum;
        c.require(st.fitted_drop_slope >= 0.9 * law,
                  "fitted drop/eps^2 >= 0.9*alpha*sum f(p_i)^2");
        // inradius update, independent of the tube count
        for (int n : {1, 3}) {
            for (double eps : {0.05, 0.025}) {
                double r = inradius(attach_perturbation_tubes(g_H, n, eps), 1.0 / 64).value;
                c.require(std::fabs(r * r - (0.25 + 0.5 * eps * eps)) <= 1e-4,
                          "inradius^2 = 1/4 + eps^2/2 (n=" + num(n) + ")");
            }
        }
        c.require(rep.verdict == "decreasing", "verdict is 'decreasing'");
        c.require(rep.fitted_drho_deps2 < 0.0, "fitted drho/deps^2 < 0 at n = n0");
        for (size_t i = 1; i < rep.n0_rows.size(); ++i)
            c.require(rep.n0_rows[i].rho > rep.n0_rows[i - 1].rho,
                      "all three eps points agree in sign");
        c.info("n0 = " + num(rep.n0) + ", drop law = " + num(st.fitted_drop_slope) + " vs " +
               num(law) + ", drho/deps^2 = " + num(rep.fitted_drho_deps2));
        c.info("lambda1 at n0 follows the eps^2 drop law validated by the direct rows " +
               std::string("(direct solves at n0 would need ~1e8 elements)"));
    });

    failures += run_criterion(9, "determinism of emitted CSVs", [](Criterion& c) {
        auto once = [] {
            ExhaustionStudy st = exhaustion_study(g_H, {4.0, 6.0}, 1.0 / 8, 1);
            DecayProfile p = compute_tail_profile(*st.final_solve, 0, g_H);
            DecayBoundConstants k =
                paper_decay_constants(kPi * kPi, st.lambdas.back()[0], p.r0);
            DecayCheck chk = verify_decay_bounds(p, k, p.norm_u);
            auto rows = essential_threshold_report(g_H, {2.0 * kPi * kPi}, {2}, 1.0 / 16);
            return exhaustion_csv(st) + decay_csv(p, chk) + weyl_csv(rows);
        };
        std::string a = once(), b = once();
        c.require(a == b, "recomputed CSV bytes identical");
        c.info("compared " + num((double)a.size()) + " bytes");
    });

    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures;
}
