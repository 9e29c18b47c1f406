#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace tubes {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double dist(Point2 a, Point2 b) { return norm(a - b); }

/// Edge markers of a planar straight-line graph.
enum class EdgeMarker {
    OuterDirichlet,  // exterior boundary, homogeneous Dirichlet
    Slit,            // interior crack, domain on both sides, Dirichlet on both
    TubeMouth,       // interface between core and a tube (id = tube index)
    Sigma,           // marked interior facet carrying a line source (id)
};

struct PslgEdge {
    int a = -1;
    int b = -1;
    EdgeMarker marker = EdgeMarker::OuterDirichlet;
    int id = -1;  // tube / sigma id for TubeMouth and Sigma edges
};

struct Pslg {
    std::vector<Point2> vertices;
    std::vector<PslgEdge> edges;
};

constexpr double kInfiniteLength = -1.0;

/// A straight tube attached to the domain: mouth segment, outward axis
/// direction, width (= mouth length) and axial length (kInfiniteLength
/// for a semi-infinite tube).
struct TubeSpec {
    Point2 mouth_a;
    Point2 mouth_b;
    Point2 direction;  // unit, orthogonal to the mouth
    double width = 0.0;
    double length = kInfiniteLength;
    bool sigma = false;  // mouth carries a Sigma marker
    int sigma_id = -1;

    bool infinite() const { return length < 0.0; }
    Point2 mouth_mid() const { return 0.5 * (mouth_a + mouth_b); }
};

struct DomainSpec {
    std::string name;
    Pslg core;  // outline + slit chains + mouth edges, with markers
    std::vector<TubeSpec> tubes;
    int circle_segments = 0;

    bool has_core() const { return !core.vertices.empty(); }
};

struct TruncatedDomain {
    Pslg pslg;  // boundary + slit + sigma constraint edges of the truncated region
    double R = 0.0;
    double r0 = 0.0;
    DomainSpec spec;
    std::vector<double> cut_constraints;  // constrained interior cut lines (axis offsets)
};

struct InradiusResult {
    double value = 0.0;
    Point2 center;
};

// -------- builders --------

DomainSpec build_hersch_pipe(int circle_segments);
DomainSpec build_infinite_cross();
DomainSpec build_broken_strip(double theta);
DomainSpec build_unit_square();
DomainSpec build_slit_disk(int circle_segments);
/// Diamond square with vertices (0,+-2), (+-2,0).
DomainSpec build_diamond_square();
/// Blow-up model domain: upper half-disk of radius r_inf plus the tube
/// I x (-tube_len, 0], with Sigma = I x {0}, I = (-1,1).
DomainSpec build_blowup_domain(double r_inf, double tube_len);

DomainSpec attach_perturbation_tubes(const DomainSpec& base, int n, double eps);

// -------- operations --------

double threshold_energy(const DomainSpec& spec);
double polya_triangle_bound(double L, double A);
double compute_r0(const DomainSpec& spec);

TruncatedDomain truncate(const DomainSpec& spec, double R,
                         const std::vector<double>& cut_constraints = {});

/// Ordered closed outline of the core (outer edges chained, closed through
/// mouth edges where the outer chain is open).  Empty if there is no core.
std::vector<Point2> core_outline(const DomainSpec& spec);

/// Slit polylines of the core, as point chains.
std::vector<std::vector<Point2>> slit_chains(const DomainSpec& spec);

/// Is p strictly inside the domain truncated at R?  Tube mouths count as
/// interior, slit carriers as exterior.
bool inside_domain(const DomainSpec& spec, Point2 p, double R);

/// Axial coordinate of p in the frame of tube i (distance past the mouth),
/// negative if p is behind the mouth plane.
double tube_axis_coord(const TubeSpec& tube, Point2 p);

InradiusResult inradius(const DomainSpec& spec, double grid_h, int refine_steps = 48);

double polygon_area(const std::vector<Point2>& poly);
bool point_in_polygon(const std::vector<Point2>& poly, Point2 p);
double dist_point_segment(Point2 p, Point2 a, Point2 b);

// -------- serialization --------

std::string domain_to_json(const DomainSpec& spec);
DomainSpec domain_from_json(const std::string& text);

}  // namespace tubes
