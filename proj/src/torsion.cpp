#include "tubes/torsion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace tubes {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Sigma-trace line mass matrix over all vertices.
SparseSym trace_mass(const Mesh& mesh, int sigma_id) {
    std::vector<std::array<double, 3>> ijv;
    for (const auto& f : mesh.sigma_facets) {
        if (sigma_id >= 0 && f[2] != sigma_id) continue;
        double len = dist(mesh.vertices[f[0]], mesh.vertices[f[1]]);
        double a = f[0], b = f[1];
        ijv.push_back({a, a, len / 3.0});
        ijv.push_back({b, b, len / 3.0});
        ijv.push_back({a, b, len / 6.0});
        ijv.push_back({b, a, len / 6.0});
    }
    return SparseSym::from_triplets(static_cast<int>(mesh.vertices.size()), std::move(ijv));
}

SparseSym restrict_free(const SparseSym& full, const AssembledSystem& sys) {
    std::vector<std::array<double, 3>> ijv;
    for (int i = 0; i < full.n; ++i) {
        int fi = sys.vertex_to_free[i];
        if (fi < 0) continue;
        for (int k = full.row_ptr[i]; k < full.row_ptr[i + 1]; ++k) {
            int fj = sys.vertex_to_free[full.col_idx[k]];
            if (fj < 0) continue;
            ijv.push_back({static_cast<double>(fi), static_cast<double>(fj), full.values[k]});
        }
    }
    return SparseSym::from_triplets(sys.K.n, std::move(ijv));
}

double power_law_extrapolate(const std::vector<double>& x, const std::vector<double>& y) {
    // increasing y(x) = y_inf - c x^(-p) on the last three points with x doubling
    size_t n = x.size();
    if (n < 3) return y.back();
    double g1 = y[n - 2] - y[n - 3], g2 = y[n - 1] - y[n - 2];
    if (g2 <= 0.0) return y.back();
    double q = g1 / g2;
    if (q <= 1.2)
        throw std::runtime_error("blow_up_constant: extrapolation over R_inf does not contract");
    return y[n - 1] + g2 / (q - 1.0);
}

}  // namespace

TorsionResult solve_thin_torsion(const Mesh& mesh, const AssembledSystem& sys, int sigma_id,
                                 const std::function<double(Point2)>& f) {
    Eigen::VectorXd b_full = assemble_line_load(mesh, sigma_id, f);
    Eigen::VectorXd b = restrict_to_free(b_full, sys);
    TorsionResult out;
    if (b.norm() == 0.0) {
        out.U.mesh = &mesh;
        out.U.values = Eigen::VectorXd::Zero(static_cast<int>(mesh.vertices.size()));
        return out;
    }
    Eigen::VectorXd u = cg_solve(sys.K, b, 1e-12, 20000);
    out.U = fe_from_free(mesh, sys, u);
    out.T = b.dot(u);
    out.energy = u.dot(sys.K * u);
    return out;
}

double sigma_length(const Mesh& mesh, int sigma_id) {
    double len = 0.0;
    for (const auto& f : mesh.sigma_facets)
        if (sigma_id < 0 || f[2] == sigma_id)
            len += dist(mesh.vertices[f[0]], mesh.vertices[f[1]]);
    return len;
}

double gamma_constant(const Mesh& mesh, const AssembledSystem& sys, int sigma_id) {
    SparseSym B = restrict_free(trace_mass(mesh, sigma_id), sys);
    bool empty = true;
    for (double v : B.values)
        if (v != 0.0) empty = false;
    if (B.values.empty() || empty)
        throw std::invalid_argument("gamma_constant: no Sigma facets");

    // power iteration on K^{-1} B: B is positive semidefinite of low rank,
    // so the generalized Rayleigh quotient converges to the top of the pencil
    Eigen::VectorXd v = Eigen::VectorXd::Ones(sys.K.n);
    double gamma = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd Bv = B * v;
        double nb = Bv.norm();
        if (nb == 0.0) {
            // restart off the kernel of B
            Eigen::VectorXd rnd = Eigen::VectorXd::Random(sys.K.n);
            v = B * rnd;
            continue;
        }
        Eigen::VectorXd w = cg_solve(sys.K, Bv, 1e-12, 20000);
        double num = w.dot(B * w), den = w.dot(sys.K * w);
        double g = num / den;
        if (it > 2 && std::fabs(g - gamma) <= 1e-11 * std::fabs(g)) return g;
        gamma = g;
        v = w / w.norm();
    }
    return gamma;
}

SuperadditivityReport superadditivity_check(const Mesh& mesh, const AssembledSystem& sys,
                                            const std::vector<int>& sigma_ids,
                                            const std::function<double(Point2)>& f) {
    auto absf = [&f](Point2 p) { return std::fabs(f(p)); };
    SuperadditivityReport rep;
    double sum = 0.0;
    for (int id : sigma_ids) {
        double Ti = solve_thin_torsion(mesh, sys, id, absf).T;
        rep.T_single.push_back(Ti);
        sum += Ti;
    }
    // joint load over exactly the requested pieces
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sys.K.n);
    for (int id : sigma_ids)
        b += restrict_to_free(assemble_line_load(mesh, id, absf), sys);
    if (b.norm() > 0.0) {
        Eigen::VectorXd u = cg_solve(sys.K, b, 1e-12, 20000);
        rep.T_all = b.dot(u);
    }
    rep.margin = rep.T_all - sum;
    return rep;
}

BlowUpResult blow_up_constant(const std::vector<double>& R_schedule,
                              const std::vector<double>& L_schedule, double h) {
    if (!std::is_sorted(R_schedule.begin(), R_schedule.end()) ||
        !std::is_sorted(L_schedule.begin(), L_schedule.end()))
        throw std::invalid_argument("blow_up_constant: schedules must be increasing");
    BlowUpResult out;
    auto one = [](Point2) { return 1.0; };
    for (double L : L_schedule) {
        std::vector<double> Ts;
        for (double R : R_schedule) {
            DomainSpec dom = build_blowup_domain(R, L);
            TruncatedDomain trunc = truncate(dom, 1.0);
            // keep the direct triangulation modest on large half-disks and
            // reach the target h by nested uniform refinement
            double h0 = h;
            int refines = 0;
            while (R / h0 > 128.0) {
                h0 *= 2.0;
                ++refines;
            }
            Mesh mesh = triangulate(trunc, h0);
            for (int i = 0; i < refines; ++i) mesh = refine_uniform(mesh);
            AssembledSystem sys = assemble_system(mesh);
            double T = solve_thin_torsion(mesh, sys, 0, one).T;
            Ts.push_back(T);
            out.rows.push_back({R, L, T});
        }
        out.alpha_per_L.push_back(power_law_extrapolate(R_schedule, Ts));
    }
    out.alpha = out.alpha_per_L.back();
    if (!(out.alpha > 0.0)) throw std::runtime_error("blow_up_constant: nonpositive alpha");
    return out;
}

DomainSpec attach_single_sigma_tube(const DomainSpec& base, Point2 p, Point2 d, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("attach_single_sigma_tube: eps must be positive");
    DomainSpec dom = base;
    dom.name = base.name + "_tube";
    Point2 t{-d.y, d.x};  // unit tangent of the wall
    TubeSpec tube{p - eps * t, p + eps * t, d, 2.0 * eps, 1.0};
    tube.sigma = true;
    tube.sigma_id = static_cast<int>(dom.tubes.size());
    dom.tubes.push_back(tube);
    return dom;
}

EpsScalingStudy epsilon_scaling_study(const DomainSpec& base, Point2 p,
                                      const std::function<double(Point2)>& f,
                                      const std::vector<double>& eps_schedule, double h) {
    if (eps_schedule.size() < 2 ||
        !std::is_sorted(eps_schedule.rbegin(), eps_schedule.rend()))
        throw std::invalid_argument("epsilon_scaling_study: need a decreasing eps schedule");
    EpsScalingStudy out;
    for (double eps : eps_schedule) {
        DomainSpec dom = attach_single_sigma_tube(base, p, {0.0, 1.0}, eps);
        int sid = dom.tubes.back().sigma_id;
        TruncatedDomain trunc = truncate(dom, 4.0);
        Mesh mesh = triangulate(trunc, h);
        AssembledSystem sys = assemble_system(mesh);
        TorsionResult res = solve_thin_torsion(mesh, sys, sid, f);
        EpsScalingRow row;
        row.eps = eps;
        row.T = res.T;
        row.T_over_eps2 = res.T / (eps * eps);
        row.gamma = gamma_constant(mesh, sys, sid);
        double fmax = 0.0;
        for (const auto& fc : mesh.sigma_facets) {
            if (fc[2] != sid) continue;
            fmax = std::max({fmax, std::fabs(f(mesh.vertices[fc[0]])),
                             std::fabs(f(mesh.vertices[fc[1]]))});
        }
        row.bound_ok = res.T <= row.gamma * fmax * fmax * sigma_length(mesh, sid) * (1.0 + 1e-9);
        out.rows.push_back(row);
    }
    size_t n = out.rows.size();
    double r1 = out.rows[n - 2].T_over_eps2, r2 = out.rows[n - 1].T_over_eps2;
    double e1 = out.rows[n - 2].eps, e2 = out.rows[n - 1].eps;
    out.fitted_limit = r2 + (r2 - r1) * e2 / (e1 - e2);
    out.last_two_dev = std::fabs(r2 - r1) / std::fabs(r2);
    return out;
}

std::string torsion_csv(const BlowUpResult& blow, const EpsScalingStudy& scaling) {
    std::ostringstream os;
    os << "eps,R_inf,L,T,T_over_eps2,gamma,bound_ok\n";
    for (const BlowUpRow& r : blow.rows)
        os << "0," << fmt(r.R_inf) << ',' << fmt(r.L) << ',' << fmt(r.T) << ",,,\n";
    for (const EpsScalingRow& r : scaling.rows)
        os << fmt(r.eps) << ",0,0," << fmt(r.T) << ',' << fmt(r.T_over_eps2) << ','
           << fmt(r.gamma) << ',' << (r.bound_ok ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace tubes
