#pragma once

#include "tubes/spectra.hpp"

#include <array>
#include <string>
#include <vector>

namespace tubes {

/// Parameters of the singular Weyl (constrained Palais-Smale) sequence
/// member U_n on one tube.
struct WeylSpec {
    double lambda = 0.0;  // >= E(Omega)
    int n = 1;            // >= 1
    int tube_id = 0;
    double r0 = 2.0;

    double lambda_n() const { return lambda + 1.0 / n; }
    /// Window length: the axial sine completes n full periods.
    double R_n(double E_tube) const;
};

/// Transverse ground-state energy pi^2/w^2 of tube i.
double tube_threshold(const DomainSpec& spec, int tube_id);

/// Nodal interpolant of U_n = sqrt(2/R_n) psi_1(x') sin(omega (t - r0)) on
/// the axial slab t in (r0, r0 + R_n) of the chosen tube; zero elsewhere.
/// R_trunc is the truncation the mesh was built at; errors when
/// R_trunc < r0 + R_n + 1 or lambda < E(Omega).
FeFunction build_weyl_function(const Mesh& mesh, const DomainSpec& spec, const WeylSpec& w,
                               double R_trunc);

struct PsDiagnostics {
    double energy = 0.0;         // U^T K U, target lambda + 1/n
    double l2 = 0.0;             // sqrt(U^T M U), target 1
    double dual_residual = 0.0;  // dual norm of K U - lambda M U
    std::array<double, 3> probes{};  // |<U, g_k>| for fixed bumps: core, mouth, mid-tube
};

PsDiagnostics ps_diagnostics(const FeFunction& U, const DomainSpec& spec, const WeylSpec& w,
                             const AssembledSystem& sys);

struct WeylRun {
    WeylSpec w;
    double R_trunc = 0.0;
    double h = 0.0;
    PsDiagnostics diag;
};

/// Truncate just past the window, mesh (coarse triangulation refined
/// uniformly down to h), build U_n and collect diagnostics.
WeylRun run_weyl(const DomainSpec& spec, const WeylSpec& w, double h);

struct ThresholdRow {
    double lambda = 0.0;
    int n = 0;
    bool applicable = false;
    PsDiagnostics diag;
};

/// Diagnostics over a lambda grid: variational evidence that [E, inf) is
/// essential spectrum.  Rows with lambda < E(Omega) are inapplicable.
std::vector<ThresholdRow> essential_threshold_report(const DomainSpec& spec,
                                                     const std::vector<double>& lambda_grid,
                                                     const std::vector<int>& n_list, double h);

/// CSV: lambda,n,energy,l2,dual_residual,sqrtn_scaled_residual,probe1..3.
std::string weyl_csv(const std::vector<ThresholdRow>& rows);

}  // namespace tubes
