#include "tubes/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tubes {

namespace {

struct ElemGeo {
    Point2 a, b, c;
    double area;
    // gradients of the three hat functions
    Point2 g[3];
};

ElemGeo elem_geo(const Mesh& mesh, const std::array<int, 3>& t) {
    ElemGeo e;
    e.a = mesh.vertices[t[0]];
    e.b = mesh.vertices[t[1]];
    e.c = mesh.vertices[t[2]];
    e.area = triangle_area(e.a, e.b, e.c);
    if (e.area <= 0.0) throw std::runtime_error("assemble: degenerate or misoriented triangle");
    double inv = 1.0 / (2.0 * e.area);
    e.g[0] = {inv * (e.b.y - e.c.y), inv * (e.c.x - e.b.x)};
    e.g[1] = {inv * (e.c.y - e.a.y), inv * (e.a.x - e.c.x)};
    e.g[2] = {inv * (e.a.y - e.b.y), inv * (e.b.x - e.a.x)};
    return e;
}

// barycentric coordinates of p in triangle (a,b,c)
std::array<double, 3> barycentric(Point2 a, Point2 b, Point2 c, Point2 p) {
    double d = cross(b - a, c - a);
    double l1 = cross(b - p, c - p) / d;
    double l2 = cross(c - p, a - p) / d;
    return {l1, l2, 1.0 - l1 - l2};
}

// integral of the square of a linear function over a polygon, the linear
// function given by nodal values on a reference triangle (exact: 3-midpoint
// rule per fan triangle)
double poly_sq_integral(const std::vector<Point2>& poly, Point2 a, Point2 b, Point2 c,
                        double va, double vb, double vc) {
    auto value = [&](Point2 p) {
        auto l = barycentric(a, b, c, p);
        return l[0] * va + l[1] * vb + l[2] * vc;
    };
    double total = 0.0;
    for (size_t i = 1; i + 1 < poly.size(); ++i) {
        Point2 p0 = poly[0], p1 = poly[i], p2 = poly[i + 1];
        double area = triangle_area(p0, p1, p2);
        Point2 m0 = 0.5 * (p0 + p1), m1 = 0.5 * (p1 + p2), m2 = 0.5 * (p2 + p0);
        double v0 = value(m0), v1 = value(m1), v2 = value(m2);
        total += area / 3.0 * (v0 * v0 + v1 * v1 + v2 * v2);
    }
    return total;
}

// clip polygon against halfplane s(p) >= 0
std::vector<Point2> clip_halfplane(const std::vector<Point2>& poly,
                                   const std::function<double(Point2)>& s) {
    std::vector<Point2> out;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        Point2 p = poly[i], q = poly[(i + 1) % n];
        double sp = s(p), sq = s(q);
        if (sp >= 0.0) out.push_back(p);
        if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
            double t = sp / (sp - sq);
            out.push_back(p + t * (q - p));
        }
    }
    return out;
}

}  // namespace

SparseSym assemble_stiffness_full(const Mesh& mesh) {
    std::vector<std::array<double, 3>> trip;
    trip.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        ElemGeo e = elem_geo(mesh, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.push_back({(double)t[i], (double)t[j], e.area * dot(e.g[i], e.g[j])});
    }
    return SparseSym::from_triplets((int)mesh.vertices.size(), std::move(trip));
}

SparseSym assemble_mass_full(const Mesh& mesh) {
    std::vector<std::array<double, 3>> trip;
    trip.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        ElemGeo e = elem_geo(mesh, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.push_back({(double)t[i], (double)t[j], e.area / 12.0 * (i == j ? 2.0 : 1.0)});
    }
    return SparseSym::from_triplets((int)mesh.vertices.size(), std::move(trip));
}

AssembledSystem assemble_system(const Mesh& mesh) {
    AssembledSystem sys;
    sys.vertex_to_free.assign(mesh.vertices.size(), -1);
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (!mesh.dirichlet[v]) {
            sys.vertex_to_free[v] = (int)sys.free_to_vertex.size();
            sys.free_to_vertex.push_back((int)v);
        }
    }
    int nf = (int)sys.free_to_vertex.size();
    if (nf == 0) throw std::runtime_error("assemble: no free nodes");
    std::vector<std::array<double, 3>> kt, mt;
    for (const auto& t : mesh.triangles) {
        ElemGeo e = elem_geo(mesh, t);
        for (int i = 0; i < 3; ++i) {
            int fi = sys.vertex_to_free[t[i]];
            if (fi < 0) continue;
            for (int j = 0; j < 3; ++j) {
                int fj = sys.vertex_to_free[t[j]];
                if (fj < 0) continue;
                kt.push_back({(double)fi, (double)fj, e.area * dot(e.g[i], e.g[j])});
                mt.push_back({(double)fi, (double)fj, e.area / 12.0 * (i == j ? 2.0 : 1.0)});
            }
        }
    }
    sys.K = SparseSym::from_triplets(nf, std::move(kt));
    sys.M = SparseSym::from_triplets(nf, std::move(mt));
    return sys;
}

Eigen::VectorXd assemble_line_load(const Mesh& mesh, int sigma_id,
                                   const std::function<double(Point2)>& f) {
    bool found = false;
    Eigen::VectorXd b = Eigen::VectorXd::Zero((int)mesh.vertices.size());
    for (const auto& fac : mesh.sigma_facets) {
        if (sigma_id >= 0 && fac[2] != sigma_id) continue;
        found = true;
        Point2 pa = mesh.vertices[fac[0]], pb = mesh.vertices[fac[1]];
        double len = dist(pa, pb);
        b[fac[0]] += 0.5 * len * f(pa);
        b[fac[1]] += 0.5 * len * f(pb);
    }
    if (!found) throw std::invalid_argument("assemble_line_load: no facets with requested sigma id");
    return b;
}

double l2_norm(const FeFunction& u) {
    double s = 0.0;
    for (const auto& t : u.mesh->triangles) {
        ElemGeo e = elem_geo(*u.mesh, t);
        double v0 = u.values[t[0]], v1 = u.values[t[1]], v2 = u.values[t[2]];
        s += e.area / 12.0 *
             (2.0 * (v0 * v0 + v1 * v1 + v2 * v2) + 2.0 * (v0 * v1 + v1 * v2 + v2 * v0));
    }
    return std::sqrt(std::max(0.0, s));
}

double h1_seminorm(const FeFunction& u) {
    double s = 0.0;
    for (const auto& t : u.mesh->triangles) {
        ElemGeo e = elem_geo(*u.mesh, t);
        Point2 g{0.0, 0.0};
        for (int i = 0; i < 3; ++i) g = g + u.values[t[i]] * e.g[i];
        s += e.area * dot(g, g);
    }
    return std::sqrt(std::max(0.0, s));
}

FeFunction fe_from_free(const Mesh& mesh, const AssembledSystem& sys,
                        const Eigen::VectorXd& free_values) {
    FeFunction u;
    u.mesh = &mesh;
    u.values = Eigen::VectorXd::Zero((int)mesh.vertices.size());
    for (size_t i = 0; i < sys.free_to_vertex.size(); ++i)
        u.values[sys.free_to_vertex[i]] = free_values[(int)i];
    return u;
}

Eigen::VectorXd fe_to_free(const FeFunction& u, const AssembledSystem& sys) {
    Eigen::VectorXd x((int)sys.free_to_vertex.size());
    for (size_t i = 0; i < sys.free_to_vertex.size(); ++i)
        x[(int)i] = u.values[sys.free_to_vertex[i]];
    return x;
}

Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full, const AssembledSystem& sys) {
    Eigen::VectorXd x((int)sys.free_to_vertex.size());
    for (size_t i = 0; i < sys.free_to_vertex.size(); ++i) x[(int)i] = full[sys.free_to_vertex[i]];
    return x;
}

double fe_eval(const FeFunction& u, Point2 p) {
    const Mesh& m = *u.mesh;
    for (const auto& t : m.triangles) {
        Point2 a = m.vertices[t[0]], b = m.vertices[t[1]], c = m.vertices[t[2]];
        double lo_x = std::min({a.x, b.x, c.x}), hi_x = std::max({a.x, b.x, c.x});
        double lo_y = std::min({a.y, b.y, c.y}), hi_y = std::max({a.y, b.y, c.y});
        if (p.x < lo_x - 1e-12 || p.x > hi_x + 1e-12 || p.y < lo_y - 1e-12 || p.y > hi_y + 1e-12)
            continue;
        auto l = barycentric(a, b, c, p);
        if (l[0] >= -1e-10 && l[1] >= -1e-10 && l[2] >= -1e-10)
            return l[0] * u.values[t[0]] + l[1] * u.values[t[1]] + l[2] * u.values[t[2]];
    }
    return 0.0;
}

namespace {

// squared L2 mass of u over the intersection of each triangle with
// { tube axial coordinate relation R }, side = +1 for beyond, -1 for within
double clipped_mass(const FeFunction& u, const DomainSpec& spec, double R, int side) {
    double total = 0.0;
    for (const auto& t : u.mesh->triangles) {
        Point2 a = u.mesh->vertices[t[0]], b = u.mesh->vertices[t[1]], c = u.mesh->vertices[t[2]];
        double va = u.values[t[0]], vb = u.values[t[1]], vc = u.values[t[2]];
        if (side > 0) {
            // tails of different tubes can share a halfplane (parallel
            // tubes), so attribute each triangle to the single tube
            // containing its centroid before clipping
            Point2 cen = (1.0 / 3.0) * (a + b + c);
            for (const TubeSpec& tube : spec.tubes) {
                if (!tube.infinite()) continue;
                Point2 mu = tube.mouth_b - tube.mouth_a;
                double w = norm(mu);
                Point2 un = (1.0 / w) * mu;
                Point2 rel = cen - tube.mouth_a;
                double sc = dot(rel, un), ax = dot(rel, tube.direction);
                if (sc <= 0.0 || sc >= w || ax <= 0.0) continue;
                auto s = [&](Point2 p) { return tube_axis_coord(tube, p) - R; };
                auto poly = clip_halfplane({a, b, c}, s);
                if (poly.size() >= 3) total += poly_sq_integral(poly, a, b, c, va, vb, vc);
                break;
            }
        } else {
            // inside Omega_R: clip the triangle against every tail in turn
            std::vector<Point2> poly{a, b, c};
            for (const TubeSpec& tube : spec.tubes) {
                if (!tube.infinite()) continue;
                auto s = [&](Point2 p) { return R - tube_axis_coord(tube, p); };
                poly = clip_halfplane(poly, s);
                if (poly.size() < 3) break;
            }
            if (poly.size() >= 3) total += poly_sq_integral(poly, a, b, c, va, vb, vc);
        }
    }
    return total;
}

}  // namespace

double tail_norm(const FeFunction& u, const DomainSpec& spec, double R) {
    return std::sqrt(std::max(0.0, clipped_mass(u, spec, R, +1)));
}

double region_norm(const FeFunction& u, const DomainSpec& spec, double R) {
    return std::sqrt(std::max(0.0, clipped_mass(u, spec, R, -1)));
}

double sup_norm_tail(const FeFunction& u, const DomainSpec& spec, double R) {
    double s = 0.0;
    for (size_t v = 0; v < u.mesh->vertices.size(); ++v) {
        Point2 p = u.mesh->vertices[v];
        bool beyond = false;
        if (R <= 0.0) {
            beyond = true;
        } else {
            for (const TubeSpec& tube : spec.tubes)
                if (tube.infinite() && tube_axis_coord(tube, p) > R) beyond = true;
        }
        if (beyond) s = std::max(s, std::abs(u.values[(int)v]));
    }
    return s;
}

std::vector<double> normal_derivative_trace(const FeFunction& u, Point2 seg_a, Point2 seg_b,
                                            const std::vector<Point2>& samples) {
    const Mesh& m = *u.mesh;
    Point2 d = seg_b - seg_a;
    double len = norm(d);
    if (len <= 0.0) throw std::invalid_argument("normal_derivative_trace: degenerate segment");

    // boundary edges of the mesh that lie on the segment, with their triangle
    struct BEdge {
        int a, b, tri;
    };
    std::vector<BEdge> on_seg;
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (int ti = 0; ti < (int)m.triangles.size(); ++ti) {
        const auto& t = m.triangles[ti];
        for (int k = 0; k < 3; ++k) {
            int x = t[k], y = t[(k + 1) % 3];
            edge_tris[{std::min(x, y), std::max(x, y)}].push_back(ti);
        }
    }
    for (const auto& [e, tris] : edge_tris) {
        if (tris.size() != 1) continue;
        Point2 pa = m.vertices[e.first], pb = m.vertices[e.second];
        if (dist_point_segment(pa, seg_a, seg_b) < 1e-9 &&
            dist_point_segment(pb, seg_a, seg_b) < 1e-9) {
            on_seg.push_back({e.first, e.second, tris[0]});
        }
    }
    std::vector<double> out;
    for (Point2 s : samples) {
        if (dist_point_segment(s, seg_a, seg_b) > 1e-7)
            throw std::invalid_argument("normal_derivative_trace: sample off segment");
        int best = -1;
        double bd = 1e30;
        for (size_t i = 0; i < on_seg.size(); ++i) {
            double dd = dist_point_segment(s, m.vertices[on_seg[i].a], m.vertices[on_seg[i].b]);
            if (dd < bd) { bd = dd; best = (int)i; }
        }
        if (best < 0) throw std::runtime_error("normal_derivative_trace: no boundary edge on segment");
        const BEdge& be = on_seg[best];
        const auto& t = m.triangles[be.tri];
        ElemGeo e = elem_geo(m, t);
        Point2 g{0.0, 0.0};
        for (int i = 0; i < 3; ++i) g = g + u.values[t[i]] * e.g[i];
        // outward normal: orthogonal to the edge, pointing away from the
        // triangle's opposite vertex
        int opp = t[0] + t[1] + t[2] - be.a - be.b;
        Point2 ev = m.vertices[be.b] - m.vertices[be.a];
        Point2 n{ev.y, -ev.x};
        double nl = norm(n);
        n = (1.0 / nl) * n;
        Point2 to_opp = m.vertices[opp] - m.vertices[be.a];
        if (dot(n, to_opp) > 0.0) n = -1.0 * n;
        out.push_back(dot(g, n));
    }
    return out;
}

std::vector<double> normal_derivative_trace_richardson(const FeFunction& u, Point2 seg_a,
                                                       Point2 seg_b,
                                                       const std::vector<Point2>& samples,
                                                       double step) {
    // outward normal of the segment determined from the adjacent triangle of
    // the first sample via the one-sided routine's convention
    Point2 d = seg_b - seg_a;
    Point2 n{d.y, -d.x};
    double nl = norm(n);
    n = (1.0 / nl) * n;
    // orient n outward: u should be nonzero on the interior side
    std::vector<double> out;
    for (Point2 s : samples) {
        double u1p = fe_eval(u, s - step * n);
        double u2p = fe_eval(u, s - 2.0 * step * n);
        double u1m = fe_eval(u, s + step * n);
        double u2m = fe_eval(u, s + 2.0 * step * n);
        // pick the side with interior support as the inward direction
        bool plus_inward = std::abs(u1m) + std::abs(u2m) > std::abs(u1p) + std::abs(u2p);
        double v1 = plus_inward ? u1m : u1p;
        double v2 = plus_inward ? u2m : u2p;
        double dudin = (4.0 * v1 - v2) / (2.0 * step);  // u(s) = 0 on the wall
        out.push_back(-dudin);
    }
    return out;
}

}  // namespace tubes
