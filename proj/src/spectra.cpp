#include "tubes/spectra.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace tubes {

namespace {

int env_thread_count(int njobs) {
    if (const char* s = std::getenv("TUBE_SPECTRA_THREADS")) {
        int v = std::atoi(s);
        if (v >= 1) return std::min(v, njobs);
    }
    unsigned hw = std::thread::hardware_concurrency();
    int def = hw == 0 ? 1 : static_cast<int>(std::min<unsigned>(hw, 8));
    return std::min(def, njobs);
}

template <class F>
void parallel_for(int n, const F& body) {
    int nt = env_thread_count(n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mutex;
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Fit lambda(R) = lambda_inf + a exp(-b R) through the last three points.
/// Returns {lambda_inf, b}; falls back to the last value with rate 0 when
/// the gaps are not a decreasing positive sequence.
struct TailFit {
    double limit = 0.0;
    double rate = 0.0;
    bool ok = false;
};

TailFit fit_exponential_tail(const std::vector<double>& R, const std::vector<double>& lam) {
    TailFit out;
    size_t n = R.size();
    if (n < 2) {
        out.limit = lam.empty() ? 0.0 : lam.back();
        return out;
    }
    size_t i0 = n >= 3 ? n - 3 : 0;
    double R1 = R[n - 2], R2 = R[n - 1], lam1 = lam[n - 2], lam2 = lam[n - 1];
    if (n < 3) {
        out.limit = lam2;
        return out;
    }
    double R0 = R[i0], lam0 = lam[i0];
    double g1 = lam0 - lam1, g2 = lam1 - lam2;
    double scale = std::max({std::fabs(lam0), std::fabs(lam2), 1.0});
    if (g2 <= scale * 1e-14) {
        // already converged to rounding; the last value is the limit
        out.limit = lam2;
        out.ok = g2 >= -scale * 1e-12 && g1 >= -scale * 1e-12;
        return out;
    }
    double target = g1 / g2;
    double base = (R1 - R0) / (R2 - R1);  // ratio in the b -> 0 limit
    if (target <= base * (1.0 + 1e-12)) {
        out.limit = lam2;
        return out;
    }
    auto ratio = [&](double b) {
        double e0 = std::exp(-b * (R0 - R0)), e1 = std::exp(-b * (R1 - R0)),
               e2 = std::exp(-b * (R2 - R0));
        return (e0 - e1) / (e1 - e2);
    };
    double lo = 1e-9, hi = 1.0;
    while (ratio(hi) < target && hi < 60.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (ratio(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    double b = 0.5 * (lo + hi);
    double e1 = std::exp(-b * (R1 - R0)), e2 = std::exp(-b * (R2 - R0));
    double a = g2 / (e1 - e2);
    out.limit = lam2 - a * e2;
    out.rate = b;
    out.ok = true;
    return out;
}

long long quantize(double v) { return llround(v * 1e8); }

}  // namespace

double sign_fix(Eigen::VectorXd& x) {
    int best = 0;
    double mag = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        if (std::fabs(x[i]) > mag) {
            mag = std::fabs(x[i]);
            best = i;
        }
    }
    double s = x.size() && x[best] < 0.0 ? -1.0 : 1.0;
    if (s < 0.0) x = -x;
    return s;
}

FeFunction EigenSolve::mode(int j) const {
    if (j < 0 || j >= static_cast<int>(eig.eigenvalues.size()))
        throw std::invalid_argument("EigenSolve::mode: index out of range");
    Eigen::VectorXd free_values = eig.eigenvectors.col(j);
    sign_fix(free_values);
    return fe_from_free(*mesh, *sys, free_values);
}

EigenSolve solve_on_mesh(std::shared_ptr<Mesh> mesh, double R, double h, int k, double tol) {
    if (k < 1) throw std::invalid_argument("solve_on_mesh: k must be >= 1");
    EigenSolve out;
    out.R = R;
    out.h = h;
    out.mesh = std::move(mesh);
    out.sys = std::make_shared<AssembledSystem>(assemble_system(*out.mesh));
    if (out.sys->K.n < k)
        throw std::runtime_error("solve_on_mesh: fewer free nodes than requested eigenpairs");
    out.eig = lobpcg(out.sys->K, out.sys->M, k, tol, 600);
    return out;
}

EigenSolve solve_eigs(const DomainSpec& spec, double R, double h, int k, double tol) {
    TruncatedDomain dom = truncate(spec, R);
    auto mesh = std::make_shared<Mesh>(triangulate(dom, h));
    return solve_on_mesh(std::move(mesh), R, h, k, tol);
}

ExhaustionStudy exhaustion_study(const DomainSpec& spec, const std::vector<double>& R_schedule,
                                 double h, int k, bool submesh_mode) {
    if (R_schedule.empty()) throw std::invalid_argument("exhaustion_study: empty R schedule");
    if (!std::is_sorted(R_schedule.begin(), R_schedule.end()))
        throw std::invalid_argument("exhaustion_study: R schedule must be ascending");

    ExhaustionStudy study;
    study.R_schedule = R_schedule;
    study.h = h;
    study.k = k;
    study.submesh_mode = submesh_mode;
    bool has_infinite = std::any_of(spec.tubes.begin(), spec.tubes.end(),
                                    [](const TubeSpec& t) { return t.infinite(); });
    // bounded domains have purely discrete spectrum: no finite threshold
    study.threshold =
        has_infinite ? threshold_energy(spec) : std::numeric_limits<double>::infinity();

    int nR = static_cast<int>(R_schedule.size());
    study.solves.resize(nR);

    if (submesh_mode) {
        double R_max = R_schedule.back();
        std::vector<double> cuts(R_schedule.begin(), R_schedule.end() - 1);
        TruncatedDomain dom = truncate(spec, R_max, cuts);
        auto master = std::make_shared<Mesh>(triangulate(dom, h));
        parallel_for(nR, [&](int i) {
            double R = R_schedule[i];
            std::shared_ptr<Mesh> m;
            if (i + 1 == nR) {
                m = master;
            } else {
                m = std::make_shared<Mesh>(
                    submesh(*master, [&](Point2 c) { return inside_domain(spec, c, R); }));
            }
            study.solves[i] = std::make_shared<EigenSolve>(solve_on_mesh(m, R, h, k));
        });
    } else {
        parallel_for(nR, [&](int i) {
            study.solves[i] =
                std::make_shared<EigenSolve>(solve_eigs(spec, R_schedule[i], h, k));
        });
    }
    study.final_solve = study.solves.back();

    study.lambdas.resize(nR);
    study.residuals.resize(nR);
    for (int i = 0; i < nR; ++i) {
        study.lambdas[i] = study.solves[i]->eig.eigenvalues;
        study.residuals[i] = study.solves[i]->eig.residuals;
    }

    for (int j = 0; j < k; ++j) {
        for (int i = 0; i + 1 < nR; ++i) {
            double a = study.lambdas[i][j], b = study.lambdas[i + 1][j];
            double slack = 1e-6 * std::fabs(a);
            if (b > a + slack) {
                study.monotone_ok = false;
                study.warnings.push_back("lambda_" + std::to_string(j + 1) +
                                         " increased beyond slack from R=" + fmt(R_schedule[i]) +
                                         " to R=" + fmt(R_schedule[i + 1]));
            }
        }
        std::vector<double> lam_j(nR);
        for (int i = 0; i < nR; ++i) lam_j[i] = study.lambdas[i][j];
        TailFit fit = fit_exponential_tail(R_schedule, lam_j);
        if (!fit.ok && nR >= 3)
            study.warnings.push_back("exponential tail fit degenerate for lambda_" +
                                     std::to_string(j + 1) + "; using the last value");
        study.extrapolated.push_back(fit.limit);
        study.gap_rate.push_back(fit.rate);
        study.below_threshold.push_back(fit.limit < study.threshold);
        study.margin.push_back(study.threshold - fit.limit);
    }
    return study;
}

MeshConvergence mesh_convergence(const DomainSpec& spec, double R,
                                 const std::vector<double>& h_schedule, int k) {
    if (h_schedule.size() < 3)
        throw std::invalid_argument("mesh_convergence: need at least 3 h levels");
    for (size_t i = 0; i + 1 < h_schedule.size(); ++i)
        if (std::fabs(h_schedule[i + 1] - 0.5 * h_schedule[i]) > 1e-12 * h_schedule[i])
            throw std::invalid_argument("mesh_convergence: h schedule must halve at each level");

    MeshConvergence out;
    out.R = R;
    out.h_schedule = h_schedule;

    TruncatedDomain dom = truncate(spec, R);
    auto mesh = std::make_shared<Mesh>(triangulate(dom, h_schedule.front()));
    std::vector<std::shared_ptr<Mesh>> levels{mesh};
    for (size_t l = 1; l < h_schedule.size(); ++l)
        levels.push_back(std::make_shared<Mesh>(refine_uniform(*levels.back())));

    out.lambdas.resize(levels.size());
    parallel_for(static_cast<int>(levels.size()), [&](int l) {
        EigenSolve s = solve_on_mesh(levels[l], R, h_schedule[l], k);
        out.lambdas[l] = s.eig.eigenvalues;
    });

    size_t L = levels.size();
    for (int j = 0; j < k; ++j) {
        double l0 = out.lambdas[L - 3][j], l1 = out.lambdas[L - 2][j], l2 = out.lambdas[L - 1][j];
        double g1 = l0 - l1, g2 = l1 - l2;
        if (g1 <= 0.0 || g2 <= 0.0 || g1 <= g2) {
            out.warnings.push_back("non-contracting refinement gaps for lambda_" +
                                   std::to_string(j + 1));
            out.order.push_back(0.0);
            out.extrapolated.push_back(l2);
            continue;
        }
        double p = std::log(g1 / g2) / std::log(2.0);
        out.order.push_back(p);
        out.extrapolated.push_back(l2 - g2 / (std::pow(2.0, p) - 1.0));
    }
    return out;
}

HigherEigStudy higher_eig_study(const DomainSpec& spec, const std::vector<double>& R_schedule,
                                double h, int k) {
    HigherEigStudy out;
    out.base = exhaustion_study(spec, R_schedule, h, k, /*submesh_mode=*/true);

    for (const auto& solve : out.base.solves) {
        const Eigen::MatrixXd& X = solve->eig.eigenvectors;
        Eigen::MatrixXd G = X.transpose() * (solve->sys->M * X);
        G -= Eigen::MatrixXd::Identity(k, k);
        out.orthonormality_error =
            std::max(out.orthonormality_error, G.cwiseAbs().maxCoeff());
    }

    int nR = static_cast<int>(R_schedule.size());
    for (int i = 0; i + 1 < nR; ++i) {
        const EigenSolve& lo = *out.base.solves[i];
        const EigenSolve& hi = *out.base.solves[i + 1];

        // Both meshes are carved from the same parent, so the vertices of the
        // smaller one are (coordinate-wise) a subset of the larger one's.
        // Crack duplicates are Dirichlet on every copy, so the coordinate key
        // is unambiguous where values are nonzero.
        std::map<std::pair<long long, long long>, int> where;
        for (size_t v = 0; v < hi.mesh->vertices.size(); ++v)
            where[{quantize(hi.mesh->vertices[v].x), quantize(hi.mesh->vertices[v].y)}] =
                static_cast<int>(v);

        int nv = static_cast<int>(lo.mesh->vertices.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nv, k);  // modes of the smaller domain
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nv, k);  // larger-domain modes restricted
        for (int j = 0; j < k; ++j) {
            FeFunction uj = lo.mode(j);
            FeFunction vj = hi.mode(j);
            A.col(j) = uj.values;
            for (int v = 0; v < nv; ++v) {
                auto it = where.find({quantize(lo.mesh->vertices[v].x),
                                      quantize(lo.mesh->vertices[v].y)});
                if (it != where.end()) B(v, j) = vj.values[it->second];
            }
        }

        SparseSym Mfull = assemble_mass_full(*lo.mesh);

        // Cluster near-equal eigenvalues of the smaller solve; rotation inside
        // a near-multiple group is not an error, so compare group subspaces.
        std::vector<int> group(k, 0);
        int ng = 0;
        for (int j = 1; j < k; ++j) {
            double a = lo.eig.eigenvalues[j - 1], b = lo.eig.eigenvalues[j];
            if (b - a > 0.02 * std::max(1.0, std::fabs(b))) ++ng;
            group[j] = ng;
        }

        std::vector<double> disc(k, 0.0);
        std::vector<bool> used_angle(k, false);
        for (int g = 0; g <= ng; ++g) {
            std::vector<int> members;
            for (int j = 0; j < k; ++j)
                if (group[j] == g) members.push_back(j);
            if (members.size() == 1) {
                int j = members[0];
                Eigen::VectorXd d = A.col(j) - B.col(j);
                disc[j] = std::sqrt(std::max(0.0, d.dot(Mfull * d)));
            } else {
                int m = static_cast<int>(members.size());
                Eigen::MatrixXd Ag(nv, m), Bg(nv, m);
                for (int c = 0; c < m; ++c) {
                    Ag.col(c) = A.col(members[c]);
                    Bg.col(c) = B.col(members[c]);
                }
                Eigen::MatrixXd MA = Mfull * Ag, MB = Mfull * Bg;
                Eigen::MatrixXd Ga = Ag.transpose() * MA, Gb = Bg.transpose() * MB,
                                C = Ag.transpose() * MB;
                Eigen::LLT<Eigen::MatrixXd> la(Ga), lb(Gb);
                Eigen::MatrixXd Ct = la.matrixL().solve(C);
                Ct = lb.matrixL().solve(Ct.transpose()).transpose();
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ct);
                double smin = svd.singularValues().minCoeff();
                double ang = std::acos(std::clamp(smin, -1.0, 1.0));
                for (int j : members) {
                    disc[j] = ang;
                    used_angle[j] = true;
                }
            }
        }
        out.discrepancy.push_back(std::move(disc));
        out.used_subspace_angle.push_back(std::move(used_angle));
    }
    return out;
}

std::string exhaustion_csv(const ExhaustionStudy& s) {
    std::ostringstream os;
    os << "R,h,j,lambda,residual,below_threshold,margin\n";
    for (size_t i = 0; i < s.R_schedule.size(); ++i)
        for (int j = 0; j < s.k; ++j) {
            double lam = s.lambdas[i][j];
            os << fmt(s.R_schedule[i]) << ',' << fmt(s.h) << ',' << (j + 1) << ',' << fmt(lam)
               << ',' << fmt(s.residuals[i][j]) << ',' << (lam < s.threshold ? 1 : 0) << ','
               << fmt(s.threshold - lam) << '\n';
        }
    return os.str();
}

std::string exhaustion_json(const ExhaustionStudy& s) {
    nlohmann::ordered_json j;
    j["threshold"] = s.threshold;
    j["h"] = s.h;
    j["k"] = s.k;
    j["R_schedule"] = s.R_schedule;
    j["submesh_mode"] = s.submesh_mode;
    j["monotone_ok"] = s.monotone_ok;
    j["extrapolated"] = s.extrapolated;
    j["gap_rate"] = s.gap_rate;
    j["below_threshold"] = s.below_threshold;
    j["margin"] = s.margin;
    j["warnings"] = s.warnings;
    return j.dump(2) + "\n";
}

std::string mesh_convergence_csv(const MeshConvergence& s) {
    std::ostringstream os;
    os << "R,h,j,lambda,order,extrapolated\n";
    for (size_t l = 0; l < s.h_schedule.size(); ++l)
        for (size_t j = 0; j < s.lambdas[l].size(); ++j)
            os << fmt(s.R) << ',' << fmt(s.h_schedule[l]) << ',' << (j + 1) << ','
               << fmt(s.lambdas[l][j]) << ',' << fmt(s.order[j]) << ','
               << fmt(s.extrapolated[j]) << '\n';
    return os.str();
}

}  // namespace tubes
