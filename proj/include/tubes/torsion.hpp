#pragma once

#include "tubes/fem.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tubes {

struct TorsionResult {
    FeFunction U;        // the maximizer
    double T = 0.0;      // b^T U
    double energy = 0.0; // U^T K U, equal to T up to solver tolerance
};

/// Solve K U = b_Sigma (CG) for the line load f on SIGMA(sigma_id)
/// (sigma_id < 0: all Sigma facets); report T with its energy cross-check.
TorsionResult solve_thin_torsion(const Mesh& mesh, const AssembledSystem& sys, int sigma_id,
                                 const std::function<double(Point2)>& f);

/// Total length of the SIGMA(sigma_id) facets.
double sigma_length(const Mesh& mesh, int sigma_id = -1);

/// Largest eigenvalue gamma of the pencil B phi = gamma K phi, B the
/// Sigma-trace line mass matrix.  T <= gamma ||f||_inf^2 length(Sigma).
/// Errors when there are no Sigma facets.
double gamma_constant(const Mesh& mesh, const AssembledSystem& sys, int sigma_id = -1);

struct SuperadditivityReport {
    double T_all = 0.0;
    std::vector<double> T_single;
    double margin = 0.0;  // T_all - sum T_single, nonnegative for f >= 0
};

/// Compare the joint rigidity of several Sigma pieces against the sum of
/// their individual rigidities on the same mesh, with load |f|.
SuperadditivityReport superadditivity_check(const Mesh& mesh, const AssembledSystem& sys,
                                            const std::vector<int>& sigma_ids,
                                            const std::function<double(Point2)>& f);

struct BlowUpRow {
    double R_inf = 0.0;
    double L = 0.0;
    double T = 0.0;
};

struct BlowUpResult {
    std::vector<BlowUpRow> rows;
    std::vector<double> alpha_per_L;  // extrapolated over R_inf, one per L
    double alpha = 0.0;               // value at the largest L
};

/// The universal blow-up constant: torsion of Sigma = I x {0}, f = 1, on
/// the upper half-disk of radius R_inf with tube I x (-L, 0], Dirichlet
/// outer boundary; power-law extrapolation over the (increasing) R_inf
/// schedule at each L.  Errors when the extrapolation does not contract.
BlowUpResult blow_up_constant(const std::vector<double>& R_schedule,
                              const std::vector<double>& L_schedule, double h);

struct EpsScalingRow {
    double eps = 0.0;
    double T = 0.0;
    double T_over_eps2 = 0.0;
    double gamma = 0.0;
    bool bound_ok = false;  // T <= gamma ||f||_inf^2 length(Sigma)
};

struct EpsScalingStudy {
    std::vector<EpsScalingRow> rows;
    double fitted_limit = 0.0;   // linear-in-eps extrapolation of T/eps^2
    double last_two_dev = 0.0;   // relative gap of the last two T/eps^2
};

/// Rigidity of a single thin tube of half-width eps attached at boundary
/// point p of the base domain, for each eps in the (decreasing) schedule;
/// T(eps)/eps^2 converges to alpha f(p)^2.
EpsScalingStudy epsilon_scaling_study(const DomainSpec& base, Point2 p,
                                      const std::function<double(Point2)>& f,
                                      const std::vector<double>& eps_schedule, double h);

/// A copy of the base domain with one finite sigma tube of half-width eps
/// and length 1 attached at boundary point p (outward normal direction d).
DomainSpec attach_single_sigma_tube(const DomainSpec& base, Point2 p, Point2 d, double eps);

/// CSV: eps,R_inf,L,T,T_over_eps2,gamma,bound_ok (blow-up rows carry
/// eps = 0 and empty scaling columns; scaling rows carry R_inf = L = 0).
std::string torsion_csv(const BlowUpResult& blow, const EpsScalingStudy& scaling);

}  // namespace tubes
