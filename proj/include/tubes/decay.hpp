#pragma once

#include "tubes/spectra.hpp"

#include <string>
#include <vector>

namespace tubes {

/// Explicit constants of the exponential tail estimate
/// A_j(R) <= C1_j * beta_j^R * ||u_j||_2.
struct DecayBoundConstants {
    double E = 0.0;
    double lambda_j = 0.0;
    double r0 = 0.0;
    double C_Omega_j = 0.0;
    double beta_j = 0.0;  // in (0,1)
    double C1_j = 0.0;
};

/// C = 2/(E-lambda) * (8E/(E-lambda) + E), beta = sqrt(C/(C+1)),
/// C1 = (C/(C+1))^(-r0/2-1).  Requires lambda < E.
DecayBoundConstants paper_decay_constants(double E, double lambda_j, double r0);

struct DecayProfile {
    std::vector<double> R_grid;
    std::vector<double> A;  // tail L2 norm past each R
    std::vector<double> S;  // tail sup norm past each R
    double rate = 0.0;      // fitted log-linear decay rate per unit length
    double r0 = 0.0;
    double R_trunc = 0.0;
    double lambda = 0.0;
    double norm_u = 0.0;
};

/// Tail L2 / sup norms of mode j of a solve on the given R grid (step 0.5
/// by default), with a least-squares rate fitted over R in
/// [r0+1, R_trunc-2].  Errors if the grid reaches past the truncation.
DecayProfile compute_tail_profile(const EigenSolve& solve, int j, const DomainSpec& spec,
                                  const std::vector<double>& R_grid);
DecayProfile compute_tail_profile(const EigenSolve& solve, int j, const DomainSpec& spec);

/// Same profile for an arbitrary nodal function (descriptive; no
/// normalization assumed).
DecayProfile tail_profile_of(const FeFunction& u, const DomainSpec& spec, double R_trunc,
                             const std::vector<double>& R_grid);

struct DecayCheck {
    std::vector<double> R_grid;
    std::vector<bool> applicable;   // rows with R >= r0+1 participate
    std::vector<double> l2_bound;   // C1 * beta^R * norm_u
    std::vector<double> l2_margin;  // bound - A(R)
    std::vector<bool> l2_pass;
    double C2 = 0.0;  // sup-norm prefactor fitted at the first applicable row
    std::vector<bool> sup_pass;     // S(R) <= C2 * beta^R * norm_u afterwards
    bool overall = false;           // all applicable L2 rows pass
};

DecayCheck verify_decay_bounds(const DecayProfile& profile, const DecayBoundConstants& constants,
                               double norm_u);

/// ||u||_inf / (sqrt(lambda) ||u||_2): scale-invariant boundedness ratio.
double linf_l2_ratio(const FeFunction& u, double lambda);

struct LinfL2Report {
    std::vector<double> ratios;  // one per refinement level
    double variation = 0.0;      // max relative spread
    bool stable = false;         // variation <= 10%
};

LinfL2Report check_linf_l2(const std::vector<const EigenSolve*>& levels, int j);

/// CSV with columns R,A,S,paper_bound,pass.
std::string decay_csv(const DecayProfile& profile, const DecayCheck& check);

}  // namespace tubes
