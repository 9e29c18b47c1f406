#pragma once

#include "tubes/geometry.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace tubes {

struct MeshEdge {
    int a = -1;
    int b = -1;
    EdgeMarker marker = EdgeMarker::OuterDirichlet;
    int id = -1;
};

/// P1 triangulation with crack support.  Slit vertices are duplicated
/// (coincident coordinates, distinct indices, one copy per side).
struct Mesh {
    std::vector<Point2> vertices;
    std::vector<std::array<int, 3>> triangles;  // CCW
    std::vector<char> dirichlet;                // per vertex
    std::vector<MeshEdge> edges;                // constrained subsegments
    std::vector<std::array<int, 3>> sigma_facets;  // (a, b, sigma_id)
    double h_target = 0.0;
};

struct QualityReport {
    double min_angle_deg = 0.0;
    double max_aspect = 0.0;
    int n_vertices = 0;
    int n_triangles = 0;
    int n_below_20deg = 0;
    double total_area = 0.0;
};

double triangle_area(Point2 a, Point2 b, Point2 c);

/// Conforming Delaunay triangulation of a marked PSLG with Ruppert-style
/// refinement: constrained edges kept Gabriel, triangles split until the
/// longest edge meets the sizing field and angles reach 20 deg (small
/// input angles produce documented exception zones instead of diverging).
Mesh triangulate_pslg(const Pslg& pslg, double h,
                      const std::function<bool(Point2)>& inside,
                      const std::function<double(Point2)>& sizing);

/// Mesh a truncated domain: sizing graded inside marked thin tubes and
/// near interior crack tips.
Mesh triangulate(const TruncatedDomain& domain, double h);

/// 4-way red refinement; markers inherited, slit duplication preserved.
Mesh refine_uniform(const Mesh& mesh);

QualityReport mesh_quality(const Mesh& mesh);

/// Keep the triangles whose centroid satisfies the predicate.  Edges that
/// become boundary get their vertices marked Dirichlet (nested FE spaces);
/// exposed Sigma / TubeMouth constraints turn into OUTER_DIRICHLET.
Mesh submesh(const Mesh& mesh, const std::function<bool(Point2)>& keep_centroid);

std::string mesh_to_json(const Mesh& mesh);

}  // namespace tubes
