#pragma once

#include "tubes/geometry.hpp"
#include "tubes/linalg.hpp"
#include "tubes/mesh.hpp"

#include <functional>
#include <vector>

namespace tubes {

/// Nodal P1 function on a mesh; Dirichlet nodes carry value 0.
struct FeFunction {
    const Mesh* mesh = nullptr;
    Eigen::VectorXd values;  // one entry per vertex
};

/// Stiffness and mass restricted to the free (non-Dirichlet) nodes.
struct AssembledSystem {
    SparseSym K;
    SparseSym M;
    std::vector<int> vertex_to_free;  // -1 for Dirichlet vertices
    std::vector<int> free_to_vertex;
};

AssembledSystem assemble_system(const Mesh& mesh);

/// Full (pre-elimination) matrices over all vertices.
SparseSym assemble_stiffness_full(const Mesh& mesh);
SparseSym assemble_mass_full(const Mesh& mesh);

/// Trapezoid-rule line load on the SIGMA(sigma_id) facets (all Sigma facets
/// when sigma_id < 0), over all vertices; restrict with fe_to_free for solves.
Eigen::VectorXd assemble_line_load(const Mesh& mesh, int sigma_id,
                                   const std::function<double(Point2)>& f);

double l2_norm(const FeFunction& u);
double h1_seminorm(const FeFunction& u);

FeFunction fe_from_free(const Mesh& mesh, const AssembledSystem& sys,
                        const Eigen::VectorXd& free_values);
Eigen::VectorXd fe_to_free(const FeFunction& u, const AssembledSystem& sys);
Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full, const AssembledSystem& sys);

/// Point evaluation (0 outside the mesh).
double fe_eval(const FeFunction& u, Point2 p);

/// sqrt of the L2 mass beyond Omega_R (exact polygonal clipping of
/// straddling triangles along the tube cut lines).
double tail_norm(const FeFunction& u, const DomainSpec& spec, double R);
/// Companion: sqrt of the L2 mass inside Omega_R, clipped independently.
double region_norm(const FeFunction& u, const DomainSpec& spec, double R);

double sup_norm_tail(const FeFunction& u, const DomainSpec& spec, double R);

/// One-sided P1 normal derivative at sample points on a straight Dirichlet
/// boundary portion; direction = outward normal.
std::vector<double> normal_derivative_trace(const FeFunction& u, Point2 seg_a, Point2 seg_b,
                                            const std::vector<Point2>& samples);

/// Second-order one-sided difference variant using interior point values.
std::vector<double> normal_derivative_trace_richardson(const FeFunction& u, Point2 seg_a,
                                                       Point2 seg_b,
                                                       const std::vector<Point2>& samples,
                                                       double step);

}  // namespace tubes
