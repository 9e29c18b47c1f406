#pragma once

#include "tubes/spectra.hpp"
#include "tubes/torsion.hpp"

#include <string>
#include <vector>

namespace tubes {

/// Sampled one-sided trace of the wall derivative of the ground state of
/// the pipe H on the segment y = 1, x in [1, 4].
struct WallProfile {
    std::vector<double> x;             // sample abscissae
    std::vector<double> f;             // adjacent-element trace values
    std::vector<double> f_richardson;  // second-order one-sided variant
    double m_min = 0.0;                // min of f_richardson^2 over samples

    /// Piecewise-linear interpolation of the Richardson values.
    double value(double xq) const;
    /// sum_{i=0..n} value(2 + i/n)^2, the junction weights of n+1 tubes.
    double junction_sum(int n) const;
};

/// Extract the wall profile from an eigen solve of H (mode j), sign-fixed
/// so the eigenfunction is positive; values are Hopf-negative.
WallProfile normal_derivative_profile(const EigenSolve& solve, int samples = 25, int j = 0);

/// Thin f-torsional rigidity of the union of slot interfaces of the
/// perturbed pipe carried by `mesh` (all slot ids), with the line load
/// taken from the wall profile.
double thin_rigidity_T(const Mesh& mesh, const AssembledSystem& sys, const WallProfile& prof);

struct DropRow {
    int n = 0;
    double eps = 0.0;
    double lambda1_pert = 0.0;  // lambda_1 of the perturbed pipe
    double lambda1_ref = 0.0;   // lambda_1 of the matched submesh of H
    double drop = 0.0;          // lambda1_ref - lambda1_pert, strictly > 0
    double drop_over_eps2 = 0.0;
    double T = 0.0;             // thin rigidity of the slot interfaces
    double T_over_eps2 = 0.0;
    double inradius2 = 0.0;     // squared inradius of the perturbed pipe
    double rho = 0.0;           // inradius2 * lambda1_pert
    bool upper_bound_ok = false;  // lambda1_pert <= lambda1_ref - T + slack
};

struct DropStudy {
    int n = 0;
    std::vector<DropRow> rows;       // one per eps, decreasing eps
    double fitted_drop_slope = 0.0;  // least-squares drop vs eps^2
    double junction_sum = 0.0;       // sum of f(p_i)^2 over the junctions
};

/// Direct eigenvalue-drop study for n+1 tubes of half-width eps: the
/// perturbed pipe is meshed once per eps and the reference pipe is solved
/// on the matched submesh (identical elements below the wall), so the
/// drop is free of the shared discretization bias.
DropStudy eigen_drop_study(const DomainSpec& H, const WallProfile& prof, int n,
                           const std::vector<double>& eps_schedule, double R, double h);

/// n0 = ceil(lambda1 (1 + 2 r^2) / (2 alpha m r^2)); errors unless all
/// inputs are positive.
int choose_n0(double lambda1_H, double r_H, double alpha, double m_min);

struct PerturbationReport {
    double lambda1_H = 0.0;
    double alpha = 0.0;
    double m_min = 0.0;
    int n0 = 0;
    WallProfile profile;
    double rho_H = 0.0;                 // inradius^2 * lambda1 of H itself
    std::vector<DropRow> direct_rows;   // measured at the validation n
    std::vector<DropRow> n0_rows;       // at n0, lambda1 via the eps^2 law
    double fitted_drho_deps2 = 0.0;     // slope of rho vs eps^2 at n0
    std::string verdict;                // "decreasing" | "increasing" | "inconclusive"
};

/// Compose the full study: wall profile and reference eigenvalue from
/// `solve`, validation drop study at `n_direct`, then the rho rows at n0.
/// Direct eigensolves at n0 are out of reach (thousands of slots), so the
/// n0 rows evaluate lambda1 through the eps^2 drop law after it has been
/// validated against the direct rows; the verdict is "inconclusive"
/// whenever that validation disagrees by more than `law_tol` or the three
/// smallest eps disagree in sign.
PerturbationReport rho_verdict(const DomainSpec& H, const EigenSolve& solve, double alpha,
                               int n_direct, const std::vector<double>& eps_schedule,
                               double R, double h, double law_tol = 0.35);

/// CSV rows n,eps,lambda1_pert,drop,drop_over_eps2,T,T_over_eps2,inradius2,rho,verdict.
std::string perturb_csv(const PerturbationReport& rep);
/// JSON summary with alpha, n0, m_min, fitted slopes, and the verdict.
std::string perturb_json(const PerturbationReport& rep);

}  // namespace tubes
