#pragma once

#include "tubes/fem.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tubes {

/// One truncated-domain eigenvalue solve with its mesh kept alive.
struct EigenSolve {
    double R = 0.0;
    double h = 0.0;
    std::shared_ptr<Mesh> mesh;
    std::shared_ptr<AssembledSystem> sys;
    EigenResult eig;  // eigenvalues ascending, M-orthonormal free-node vectors

    /// j-th eigenfunction as a nodal function (sign-fixed: the nodal value
    /// of largest magnitude is positive).
    FeFunction mode(int j) const;
};

EigenSolve solve_eigs(const DomainSpec& spec, double R, double h, int k, double tol = 1e-8);

/// Eigensolve on a prebuilt mesh (shared by the exhaustion machinery).
EigenSolve solve_on_mesh(std::shared_ptr<Mesh> mesh, double R, double h, int k,
                         double tol = 1e-8);

struct ExhaustionStudy {
    std::vector<double> R_schedule;
    double h = 0.0;
    int k = 0;
    std::vector<std::vector<double>> lambdas;    // [R index][j]
    std::vector<std::vector<double>> residuals;  // [R index][j]
    std::vector<double> extrapolated;            // per j
    std::vector<double> gap_rate;                // fitted exponential rate b per j
    double threshold = 0.0;                      // E(Omega)
    std::vector<bool> below_threshold;           // extrapolated lambda_j < E
    std::vector<double> margin;                  // E - extrapolated lambda_j
    bool monotone_ok = true;                     // within slack (exact in submesh mode)
    bool submesh_mode = true;
    std::vector<std::string> warnings;
    std::vector<std::shared_ptr<EigenSolve>> solves;  // one per R, ascending
    std::shared_ptr<EigenSolve> final_solve;          // alias of solves.back()
};

/// Truncation exhaustion in R.  In submesh mode (default) the largest
/// truncation is meshed once with interior cut constraints at the smaller
/// R values and the smaller domains are carved out of it, which makes the
/// finite element spaces literally nested and the monotonicity in R exact.
ExhaustionStudy exhaustion_study(const DomainSpec& spec, const std::vector<double>& R_schedule,
                                 double h, int k, bool submesh_mode = true);

struct MeshConvergence {
    double R = 0.0;
    std::vector<double> h_schedule;              // descending, nested by uniform refinement
    std::vector<std::vector<double>> lambdas;    // [level][j]
    std::vector<double> order;                   // fitted per j
    std::vector<double> extrapolated;            // Richardson limit per j
    std::vector<std::string> warnings;
};

/// Eigenvalues across nested uniform refinements starting from the coarsest
/// h in the schedule; Richardson extrapolation in h with fitted order.
MeshConvergence mesh_convergence(const DomainSpec& spec, double R,
                                 const std::vector<double>& h_schedule, int k);

struct HigherEigStudy {
    ExhaustionStudy base;
    // Aligned-mode comparison between consecutive truncations: L2 norm of
    // the sign-fixed difference on the smaller region, or the largest
    // principal subspace angle (radians) for near-multiple groups.
    std::vector<std::vector<double>> discrepancy;       // [pair index][j]
    std::vector<std::vector<bool>> used_subspace_angle; // [pair index][j]
    double orthonormality_error = 0.0;  // max |X^T M X - I| over all solves
};

HigherEigStudy higher_eig_study(const DomainSpec& spec, const std::vector<double>& R_schedule,
                                double h, int k);

/// Fix the sign of a free-node vector: nodal value of largest magnitude
/// becomes positive.  Returns the applied sign.
double sign_fix(Eigen::VectorXd& x);

/// CSV (columns R,h,j,lambda,residual,below_threshold,margin) and JSON
/// summary emission.
std::string exhaustion_csv(const ExhaustionStudy& s);
std::string exhaustion_json(const ExhaustionStudy& s);
std::string mesh_convergence_csv(const MeshConvergence& s);

}  // namespace tubes
