#include "tubes/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace tubes {

namespace {

constexpr double kSnap = 1e-9;

int64_t quantize(double v) { return static_cast<int64_t>(std::llround(v / kSnap)); }

struct VertexPool {
    std::vector<Point2> points;
    std::map<std::pair<int64_t, int64_t>, int> index;

    int get(Point2 p) {
        auto key = std::make_pair(quantize(p.x), quantize(p.y));
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        int id = static_cast<int>(points.size());
        points.push_back(p);
        index.emplace(key, id);
        return id;
    }
};

Point2 rot90(Point2 p) { return {-p.y, p.x}; }

// Four corners of a tube carrier truncated at axial length L, CCW.
std::array<Point2, 4> tube_corners(const TubeSpec& t, double L) {
    Point2 d = t.direction;
    return {t.mouth_a, t.mouth_b, t.mouth_b + L * d, t.mouth_a + L * d};
}

double tube_cut_length(const TubeSpec& t, double R) {
    return t.infinite() ? R : t.length;
}

}  // namespace

double polygon_area(const std::vector<Point2>& poly) {
    double a = 0.0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Point2& p = poly[i];
        const Point2& q = poly[(i + 1) % n];
        a += cross(p, q);
    }
    return 0.5 * a;
}

bool point_in_polygon(const std::vector<Point2>& poly, Point2 p) {
    bool in = false;
    size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xint) in = !in;
        }
    }
    return in;
}

double dist_point_segment(Point2 p, Point2 a, Point2 b) {
    Point2 ab = b - a;
    double len2 = dot(ab, ab);
    if (len2 == 0.0) return dist(p, a);
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return dist(p, a + t * ab);
}

double tube_axis_coord(const TubeSpec& tube, Point2 p) {
    return dot(p - tube.mouth_mid(), tube.direction);
}

// -------- builders --------

namespace {

void add_chain(Pslg& g, VertexPool& pool, const std::vector<Point2>& pts,
               EdgeMarker marker, int id = -1) {
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        g.edges.push_back({pool.get(pts[i]), pool.get(pts[i + 1]), marker, id});
    }
}

Pslg finish(VertexPool& pool, Pslg g) {
    g.vertices = pool.points;
    return g;
}

}  // namespace

DomainSpec build_hersch_pipe(int circle_segments) {
    if (circle_segments < 32) throw std::invalid_argument("hersch pipe: circle_segments must be >= 32");
    DomainSpec d;
    d.name = "hersch";
    d.circle_segments = circle_segments;

    VertexPool pool;
    Pslg g;
    int m = circle_segments / 2;  // arc segments for the left half circle
    std::vector<Point2> arc;
    for (int i = 0; i <= m; ++i) {
        double th = std::numbers::pi / 2 + std::numbers::pi * i / m;
        arc.push_back({std::cos(th), std::sin(th)});
    }
    arc.front() = {0.0, 1.0};
    arc.back() = {0.0, -1.0};
    add_chain(g, pool, arc, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {{0.0, -1.0}, {0.0, 0.0}}, EdgeMarker::TubeMouth, 1);
    add_chain(g, pool, {{0.0, 0.0}, {0.0, 1.0}}, EdgeMarker::TubeMouth, 0);
    add_chain(g, pool, {{0.0, 0.0}, {1.0, 0.0}}, EdgeMarker::Slit);
    d.core = finish(pool, g);

    TubeSpec top{{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, 1.0, kInfiniteLength};
    TubeSpec bottom{{0.0, -1.0}, {0.0, 0.0}, {1.0, 0.0}, 1.0, kInfiniteLength};
    d.tubes = {top, bottom};
    return d;
}

DomainSpec build_infinite_cross() {
    DomainSpec d;
    d.name = "cross";
    VertexPool pool;
    Pslg g;
    add_chain(g, pool, {{1, -1}, {1, 1}}, EdgeMarker::TubeMouth, 0);
    add_chain(g, pool, {{1, 1}, {-1, 1}}, EdgeMarker::TubeMouth, 1);
    add_chain(g, pool, {{-1, 1}, {-1, -1}}, EdgeMarker::TubeMouth, 2);
    add_chain(g, pool, {{-1, -1}, {1, -1}}, EdgeMarker::TubeMouth, 3);
    d.core = finish(pool, g);
    d.tubes = {
        {{1, -1}, {1, 1}, {1, 0}, 2.0, kInfiniteLength},
        {{1, 1}, {-1, 1}, {0, 1}, 2.0, kInfiniteLength},
        {{-1, 1}, {-1, -1}, {-1, 0}, 2.0, kInfiniteLength},
        {{-1, -1}, {1, -1}, {0, -1}, 2.0, kInfiniteLength},
    };
    return d;
}

DomainSpec build_broken_strip(double theta) {
    if (!(theta > 0.0 && theta < std::numbers::pi / 2)) {
        throw std::invalid_argument("broken strip: theta must lie in (0, pi/2)");
    }
    DomainSpec d;
    d.name = "broken_strip";
    double s = std::sin(theta), c = std::cos(theta);
    Point2 apex{-1.0 / s, 0.0};
    Point2 top{0.0, 1.0 / c};
    Point2 bot{0.0, -1.0 / c};
    VertexPool pool;
    Pslg g;
    add_chain(g, pool, {apex, top}, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {bot, apex}, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {top, bot}, EdgeMarker::OuterDirichlet);
    // Tube mouths are chords of the triangle, through the V's inner corner.
    add_chain(g, pool, {{-s, c}, {0.0, 0.0}}, EdgeMarker::TubeMouth, 0);
    add_chain(g, pool, {{0.0, 0.0}, {-s, -c}}, EdgeMarker::TubeMouth, 1);
    d.core = finish(pool, g);
    d.tubes = {
        {{-s, c}, {0.0, 0.0}, {c, s}, 1.0, kInfiniteLength},
        {{0.0, 0.0}, {-s, -c}, {c, -s}, 1.0, kInfiniteLength},
    };
    return d;
}

DomainSpec build_unit_square() {
    DomainSpec d;
    d.name = "square";
    VertexPool pool;
    Pslg g;
    add_chain(g, pool, {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}, EdgeMarker::OuterDirichlet);
    d.core = finish(pool, g);
    return d;
}

DomainSpec build_diamond_square() {
    DomainSpec d;
    d.name = "diamond";
    VertexPool pool;
    Pslg g;
    add_chain(g, pool, {{2, 0}, {0, 2}, {-2, 0}, {0, -2}, {2, 0}}, EdgeMarker::OuterDirichlet);
    d.core = finish(pool, g);
    return d;
}

DomainSpec build_slit_disk(int circle_segments) {
    if (circle_segments < 32) throw std::invalid_argument("slit disk: circle_segments must be >= 32");
    DomainSpec d;
    d.name = "slit_disk";
    d.circle_segments = circle_segments;
    VertexPool pool;
    Pslg g;
    std::vector<Point2> circle;
    for (int i = 0; i <= circle_segments; ++i) {
        double th = 2.0 * std::numbers::pi * i / circle_segments;
        circle.push_back({std::cos(th), std::sin(th)});
    }
    circle.front() = {1.0, 0.0};
    circle.back() = {1.0, 0.0};
    add_chain(g, pool, circle, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {{0.0, 0.0}, {1.0, 0.0}}, EdgeMarker::Slit);
    d.core = finish(pool, g);
    return d;
}

DomainSpec build_blowup_domain(double r_inf, double tube_len) {
    if (r_inf <= 1.5 || tube_len <= 0.0) throw std::invalid_argument("blowup domain: bad parameters");
    DomainSpec d;
    d.name = "blowup";
    VertexPool pool;
    Pslg g;
    int m = std::max(48, static_cast<int>(8 * r_inf));
    std::vector<Point2> arc;
    arc.push_back({r_inf, 0.0});
    for (int i = 1; i < m; ++i) {
        double th = std::numbers::pi * i / m;
        arc.push_back({r_inf * std::cos(th), r_inf * std::sin(th)});
    }
    arc.push_back({-r_inf, 0.0});
    add_chain(g, pool, arc, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {{-r_inf, 0.0}, {-1.0, 0.0}}, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {{1.0, 0.0}, {r_inf, 0.0}}, EdgeMarker::OuterDirichlet);
    add_chain(g, pool, {{-1.0, 0.0}, {1.0, 0.0}}, EdgeMarker::Sigma, 0);
    d.core = finish(pool, g);
    TubeSpec tube{{-1.0, 0.0}, {1.0, 0.0}, {0.0, -1.0}, 2.0, tube_len};
    tube.sigma = true;
    tube.sigma_id = 0;
    d.tubes = {tube};
    return d;
}

DomainSpec attach_perturbation_tubes(const DomainSpec& base, int n, double eps) {
    if (n < 0) throw std::invalid_argument("perturbation tubes: n must be >= 0");
    if (!(eps > 0.0 && eps < 0.5 / std::max(n, 1))) {
        throw std::invalid_argument("perturbation tubes: eps must satisfy 0 < eps < 1/(2n)");
    }
    DomainSpec d = base;
    d.name = base.name + "_pert";
    for (int i = 0; i <= n; ++i) {
        double c = 2.0 + (n == 0 ? 0.0 : static_cast<double>(i) / n);
        TubeSpec t{{c - eps, 1.0}, {c + eps, 1.0}, {0.0, 1.0}, 2.0 * eps, 1.0};
        t.sigma = true;
        t.sigma_id = i;
        d.tubes.push_back(t);
    }
    return d;
}

// -------- core outline / slits --------

std::vector<Point2> core_outline(const DomainSpec& spec) {
    if (!spec.has_core()) return {};
    const Pslg& g = spec.core;
    // adjacency over outer + mouth edges
    std::vector<std::vector<std::pair<int, bool>>> adj(g.vertices.size());  // (other, is_outer)
    int first_outer = -1, first_any = -1;
    for (size_t e = 0; e < g.edges.size(); ++e) {
        const PslgEdge& ed = g.edges[e];
        if (ed.marker == EdgeMarker::Slit) continue;
        bool outer = ed.marker == EdgeMarker::OuterDirichlet;
        adj[ed.a].push_back({ed.b, outer});
        adj[ed.b].push_back({ed.a, outer});
        if (outer && first_outer < 0) first_outer = static_cast<int>(e);
        if (first_any < 0) first_any = static_cast<int>(e);
    }
    int e0 = first_outer >= 0 ? first_outer : first_any;
    if (e0 < 0) return {};
    int start = g.edges[e0].a;
    int prev = start, cur = g.edges[e0].b;
    std::vector<Point2> loop{g.vertices[start], g.vertices[cur]};
    size_t guard = 0;
    while (cur != start && guard++ < 4 * g.edges.size()) {
        int next = -1;
        // prefer outer continuation, skip backtracking
        for (auto [v, outer] : adj[cur]) {
            if (v == prev) continue;
            if (outer) { next = v; break; }
        }
        if (next < 0) {
            for (auto [v, outer] : adj[cur]) {
                if (v != prev) { next = v; break; }
            }
        }
        if (next < 0) throw std::runtime_error("core outline: open chain");
        prev = cur;
        cur = next;
        loop.push_back(g.vertices[cur]);
    }
    loop.pop_back();  // drop repeated start
    if (polygon_area(loop) < 0.0) std::reverse(loop.begin(), loop.end());
    return loop;
}

std::vector<std::vector<Point2>> slit_chains(const DomainSpec& spec) {
    std::vector<std::vector<Point2>> chains;
    for (const PslgEdge& e : spec.core.edges) {
        if (e.marker != EdgeMarker::Slit) continue;
        Point2 a = spec.core.vertices[e.a];
        Point2 b = spec.core.vertices[e.b];
        bool merged = false;
        for (auto& ch : chains) {
            if (dist(ch.back(), a) < kSnap) { ch.push_back(b); merged = true; break; }
            if (dist(ch.back(), b) < kSnap) { ch.push_back(a); merged = true; break; }
        }
        if (!merged) chains.push_back({a, b});
    }
    return chains;
}

// -------- inside test --------

namespace {

bool inside_tube(const TubeSpec& t, Point2 p, double L) {
    Point2 u = t.mouth_b - t.mouth_a;
    double w = norm(u);
    u = (1.0 / w) * u;
    Point2 rel = p - t.mouth_a;
    double s = dot(rel, u);
    double ax = dot(rel, t.direction);
    if (s <= kSnap || s >= w - kSnap) return false;
    if (ax >= L - kSnap) return false;
    return ax > -kSnap;  // mouth face counts as inside
}

}  // namespace

bool inside_domain(const DomainSpec& spec, Point2 p, double R) {
    for (const auto& ch : slit_chains(spec)) {
        for (size_t i = 0; i + 1 < ch.size(); ++i) {
            if (dist_point_segment(p, ch[i], ch[i + 1]) < kSnap) return false;
        }
    }
    for (const TubeSpec& t : spec.tubes) {
        if (inside_tube(t, p, tube_cut_length(t, R))) return true;
    }
    if (spec.has_core()) {
        std::vector<Point2> poly = core_outline(spec);
        if (point_in_polygon(poly, p)) return true;
    }
    return false;
}

// -------- threshold / Polya --------

double threshold_energy(const DomainSpec& spec) {
    double best = -1.0;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (const TubeSpec& t : spec.tubes) {
        if (!t.infinite()) continue;
        double v = pi2 / (t.width * t.width);
        if (best < 0.0 || v < best) best = v;
    }
    if (best < 0.0) throw std::invalid_argument("threshold_energy: domain has no infinite tubes");
    return best;
}

double polya_triangle_bound(double L, double A) {
    if (L <= 0.0 || A <= 0.0) throw std::invalid_argument("polya_triangle_bound: L, A must be positive");
    double r = L / A;
    double f = std::numbers::pi / 3.0;
    return f * f * r * r;
}

// -------- r0 certification --------

namespace {

bool segments_properly_cross(Point2 a, Point2 b, Point2 c, Point2 d) {
    double d1 = cross(b - a, c - a);
    double d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c);
    double d4 = cross(d - c, b - c);
    return ((d1 > kSnap && d2 < -kSnap) || (d1 < -kSnap && d2 > kSnap)) &&
           ((d3 > kSnap && d4 < -kSnap) || (d3 < -kSnap && d4 > kSnap));
}

// Positive-area overlap of two simple polygons.
bool polygons_overlap(const std::vector<Point2>& A, const std::vector<Point2>& B) {
    for (size_t i = 0; i < A.size(); ++i) {
        for (size_t j = 0; j < B.size(); ++j) {
            if (segments_properly_cross(A[i], A[(i + 1) % A.size()], B[j], B[(j + 1) % B.size()]))
                return true;
        }
    }
    for (const Point2& p : A) {
        Point2 q = p;  // nudge inward not needed: strict containment check below
        if (point_in_polygon(B, q)) {
            // exclude boundary touches
            bool on_boundary = false;
            for (size_t j = 0; j < B.size(); ++j) {
                if (dist_point_segment(q, B[j], B[(j + 1) % B.size()]) < 1e-7) { on_boundary = true; break; }
            }
            if (!on_boundary) return true;
        }
    }
    for (const Point2& p : B) {
        if (point_in_polygon(A, p)) {
            bool on_boundary = false;
            for (size_t j = 0; j < A.size(); ++j) {
                if (dist_point_segment(p, A[j], A[(j + 1) % A.size()]) < 1e-7) { on_boundary = true; break; }
            }
            if (!on_boundary) return true;
        }
    }
    return false;
}

// Does segment [a,b] overlap polygon boundary-or-interior with positive length?
bool segment_touches_polygon(Point2 a, Point2 b, const std::vector<Point2>& poly) {
    Point2 mid = 0.5 * (a + b);
    if (point_in_polygon(poly, mid)) return true;
    for (size_t j = 0; j < poly.size(); ++j) {
        Point2 c = poly[j], d = poly[(j + 1) % poly.size()];
        if (dist_point_segment(mid, c, d) < 1e-7) return true;
    }
    return false;
}

std::vector<Point2> tail_polygon(const TubeSpec& t, double r, double far) {
    Point2 d = t.direction;
    Point2 a = t.mouth_a + r * d, b = t.mouth_b + r * d;
    return {a, b, b + far * d, a + far * d};
}

double core_circumradius(const DomainSpec& spec) {
    double r = 0.0;
    for (const Point2& p : spec.core.vertices) r = std::max(r, norm(p));
    for (const TubeSpec& t : spec.tubes) {
        if (!t.infinite()) {
            Point2 d = t.direction;
            for (const Point2& c : {t.mouth_a, t.mouth_b, t.mouth_a + t.length * d, t.mouth_b + t.length * d})
                r = std::max(r, norm(c));
        }
    }
    return r;
}

}  // namespace

double compute_r0(const DomainSpec& spec) {
    bool any_infinite = false;
    for (const TubeSpec& t : spec.tubes) any_infinite |= t.infinite();
    if (!any_infinite) return 0.0;

    double rad = core_circumradius(spec);
    std::vector<Point2> core = spec.has_core() ? core_outline(spec) : std::vector<Point2>{};
    const double far = 1e4;

    for (int r = 1; r <= 64; ++r) {
        if (r <= rad) continue;
        bool ok = true;
        for (size_t i = 0; i < spec.tubes.size() && ok; ++i) {
            const TubeSpec& ti = spec.tubes[i];
            if (!ti.infinite()) continue;
            auto tail = tail_polygon(ti, r, far);
            if (!core.empty() && polygons_overlap(tail, core)) ok = false;
            for (size_t j = 0; j < spec.tubes.size() && ok; ++j) {
                if (j == i) continue;
                const TubeSpec& tj = spec.tubes[j];
                if (tj.infinite()) {
                    if (polygons_overlap(tail, tail_polygon(tj, r, far))) ok = false;
                } else {
                    // a finite tube whose carrier or mouth touches the tail
                    // means the removed set is not a straight cylinder
                    auto carrier = tube_corners(tj, tj.length);
                    std::vector<Point2> cpoly(carrier.begin(), carrier.end());
                    if (polygons_overlap(tail, cpoly)) ok = false;
                    if (segment_touches_polygon(tj.mouth_a, tj.mouth_b, tail)) ok = false;
                }
            }
        }
        if (ok) return static_cast<double>(r);
    }
    throw std::runtime_error("compute_r0: could not certify a truncation radius <= 64");
}

// -------- truncation --------

namespace {

struct RawSegment {
    Point2 a, b;
    EdgeMarker marker;
    int id;
    bool is_cut;   // interior cut-line constraint
    bool is_mouth; // candidate mouth face (interior unless classified boundary)
};

// Split s at its intersections with all other segments; returns sorted
// parameter values in (0,1).
std::vector<double> split_params(const RawSegment& s, const std::vector<RawSegment>& all, size_t self) {
    std::vector<double> ts;
    Point2 d = s.b - s.a;
    double len2 = dot(d, d);
    for (size_t j = 0; j < all.size(); ++j) {
        if (j == self) continue;
        const RawSegment& o = all[j];
        Point2 e = o.b - o.a;
        double denom = cross(d, e);
        if (std::abs(denom) > 1e-12 * std::sqrt(len2) * norm(e)) {
            double t = cross(o.a - s.a, e) / denom;
            double u = cross(o.a - s.a, d) / denom;
            if (t > 1e-12 && t < 1.0 - 1e-12 && u > -1e-9 && u < 1.0 + 1e-9) ts.push_back(t);
        } else {
            // parallel: project o's endpoints if they lie on s's line
            for (Point2 p : {o.a, o.b}) {
                if (dist_point_segment(p, s.a, s.b) < kSnap) {
                    double t = dot(p - s.a, d) / len2;
                    if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
                }
            }
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-10; }),
             ts.end());
    return ts;
}

}  // namespace

TruncatedDomain truncate(const DomainSpec& spec, double R,
                         const std::vector<double>& cut_constraints) {
    double r0 = compute_r0(spec);
    bool any_infinite = false;
    for (const TubeSpec& t : spec.tubes) any_infinite |= t.infinite();
    if (any_infinite && R < r0) {
        throw std::invalid_argument("truncate: R below certified r0");
    }

    std::vector<RawSegment> raw;
    // core outline and slits
    if (spec.has_core()) {
        for (const PslgEdge& e : spec.core.edges) {
            Point2 a = spec.core.vertices[e.a];
            Point2 b = spec.core.vertices[e.b];
            bool mouth = e.marker == EdgeMarker::TubeMouth || e.marker == EdgeMarker::Sigma;
            raw.push_back({a, b, e.marker, e.id, false, mouth});
        }
    }
    // tube sides, caps, mouths
    for (size_t i = 0; i < spec.tubes.size(); ++i) {
        const TubeSpec& t = spec.tubes[i];
        double L = tube_cut_length(t, R);
        auto c = tube_corners(t, L);
        raw.push_back({c[1], c[2], EdgeMarker::OuterDirichlet, -1, false, false});
        raw.push_back({c[2], c[3], EdgeMarker::OuterDirichlet, -1, false, false});
        raw.push_back({c[3], c[0], EdgeMarker::OuterDirichlet, -1, false, false});
        EdgeMarker mm = t.sigma ? EdgeMarker::Sigma : EdgeMarker::TubeMouth;
        raw.push_back({c[0], c[1], mm, t.sigma ? t.sigma_id : static_cast<int>(i), false, true});
        if (t.infinite()) {
            for (double cut : cut_constraints) {
                if (cut > kSnap && cut < L - kSnap) {
                    Point2 off = cut * t.direction;
                    raw.push_back({t.mouth_a + off, t.mouth_b + off,
                                   EdgeMarker::TubeMouth, -1, true, false});
                }
            }
        }
    }

    TruncatedDomain out;
    out.R = R;
    out.r0 = r0;
    out.spec = spec;
    out.cut_constraints = cut_constraints;

    VertexPool pool;
    std::set<std::array<int64_t, 4>> seen;
    auto keep = [&](Point2 a, Point2 b, EdgeMarker m, int id) {
        std::array<int64_t, 4> key{quantize(a.x), quantize(a.y), quantize(b.x), quantize(b.y)};
        if (key > std::array<int64_t, 4>{key[2], key[3], key[0], key[1]}) {
            key = {key[2], key[3], key[0], key[1]};
        }
        if (!seen.insert(key).second) return;
        out.pslg.edges.push_back({pool.get(a), pool.get(b), m, id});
    };

    std::vector<Point2> core_poly = spec.has_core() ? core_outline(spec) : std::vector<Point2>{};

    // Does p lie on a mouth face (domain passes through there)?
    auto near_mouth = [&](Point2 p) {
        for (const TubeSpec& t : spec.tubes) {
            if (dist_point_segment(p, t.mouth_a, t.mouth_b) < 10 * kSnap) return true;
        }
        return false;
    };
    auto strictly_inside_piece = [&](Point2 p) {
        for (const TubeSpec& t : spec.tubes) {
            Point2 u = t.mouth_b - t.mouth_a;
            double w = norm(u);
            u = (1.0 / w) * u;
            Point2 rel = p - t.mouth_a;
            double s = dot(rel, u), ax = dot(rel, t.direction);
            double L = tube_cut_length(t, R);
            if (s > 10 * kSnap && s < w - 10 * kSnap && ax > 10 * kSnap && ax < L - 10 * kSnap)
                return true;
        }
        if (!core_poly.empty() && point_in_polygon(core_poly, p)) {
            double d = 1e30;
            for (size_t j = 0; j < core_poly.size(); ++j)
                d = std::min(d, dist_point_segment(p, core_poly[j], core_poly[(j + 1) % core_poly.size()]));
            if (d > 10 * kSnap) return true;
        }
        return false;
    };

    for (size_t i = 0; i < raw.size(); ++i) {
        const RawSegment& s = raw[i];
        std::vector<double> ts = split_params(s, raw, i);
        ts.insert(ts.begin(), 0.0);
        ts.push_back(1.0);
        Point2 d = s.b - s.a;
        double seglen = norm(d);
        Point2 n = (1.0 / seglen) * rot90(d);
        for (size_t k = 0; k + 1 < ts.size(); ++k) {
            Point2 a = s.a + ts[k] * d;
            Point2 b = s.a + ts[k + 1] * d;
            double sublen = dist(a, b);
            if (sublen < kSnap) continue;
            Point2 mid = 0.5 * (a + b);
            double delta = std::min(1e-6, 0.05 * sublen);
            bool left = inside_domain(spec, mid + delta * n, R);
            bool right = inside_domain(spec, mid - delta * n, R);
            if (!left && !right) continue;  // stray piece fully outside
            if (left != right) {
                keep(a, b, EdgeMarker::OuterDirichlet, -1);
                continue;
            }
            // domain on both sides: interior facet or crack
            if (s.marker == EdgeMarker::Slit) {
                keep(a, b, EdgeMarker::Slit, -1);
            } else if (strictly_inside_piece(mid) || near_mouth(mid)) {
                if (s.marker == EdgeMarker::Sigma) keep(a, b, EdgeMarker::Sigma, s.id);
                else if (s.is_cut) keep(a, b, EdgeMarker::TubeMouth, -1);
            } else {
                keep(a, b, EdgeMarker::Slit, -1);
            }
        }
    }
    out.pslg.vertices = pool.points;
    return out;
}

// -------- inradius --------

InradiusResult inradius(const DomainSpec& spec, double grid_h, int refine_steps) {
    if (grid_h <= 0.0) throw std::invalid_argument("inradius: grid_h must be positive");
    double r0 = 0.0;
    bool any_infinite = false;
    for (const TubeSpec& t : spec.tubes) any_infinite |= t.infinite();
    double maxw = 0.0;
    for (const TubeSpec& t : spec.tubes) maxw = std::max(maxw, t.width);
    double R = any_infinite ? compute_r0(spec) + 2.0 * maxw + 2.0 : 1.0;
    TruncatedDomain td = truncate(spec, R);

    // boundary edges, excluding truncation caps of infinite tubes
    std::vector<std::pair<Point2, Point2>> bnd;
    for (const PslgEdge& e : td.pslg.edges) {
        if (e.marker != EdgeMarker::OuterDirichlet && e.marker != EdgeMarker::Slit) continue;
        Point2 a = td.pslg.vertices[e.a];
        Point2 b = td.pslg.vertices[e.b];
        bool cap = false;
        for (const TubeSpec& t : spec.tubes) {
            if (!t.infinite()) continue;
            double axa = tube_axis_coord(t, a), axb = tube_axis_coord(t, b);
            if (std::abs(axa - R) < 1e-7 && std::abs(axb - R) < 1e-7) cap = true;
        }
        if (!cap) bnd.push_back({a, b});
    }
    if (bnd.empty()) throw std::invalid_argument("inradius: empty region");

    // keep candidate centers a tube-width short of the truncation caps so
    // their clearance is always governed by retained boundary edges
    double cap_margin = any_infinite ? 1.0 + maxw : 0.0;
    auto clearance = [&, cap_margin](Point2 p) -> double {
        if (!inside_domain(spec, p, R - cap_margin)) return -1.0;
        double d = 1e30;
        for (auto& [a, b] : bnd) d = std::min(d, dist_point_segment(p, a, b));
        return d;
    };

    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (auto& [a, b] : bnd) {
        for (Point2 p : {a, b}) {
            xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
        }
    }
    std::vector<InradiusResult> samples;
    double top = -1.0;
    for (double x = xmin + 0.5 * grid_h; x < xmax; x += grid_h) {
        for (double y = ymin + 0.5 * grid_h; y < ymax; y += grid_h) {
            double d = clearance({x, y});
            if (d <= 0.0) continue;
            samples.push_back({d, {x, y}});
            top = std::max(top, d);
        }
    }
    if (top < 0.0) throw std::invalid_argument("inradius: no interior sample found");

    // local pattern refinement from every near-tie candidate: the clearance
    // landscape can be flat along a tube axis with the true maximum hiding
    // in a shallow bump, so a single start is not enough
    InradiusResult best;
    best.value = -1.0;
    for (const InradiusResult& seed : samples) {
        if (seed.value < top - 2.0 * grid_h) continue;
        InradiusResult cur = seed;
        double step = grid_h;
        for (int it = 0; it < refine_steps; ++it) {
            bool improved = false;
            for (Point2 dirv : {Point2{1, 0}, Point2{-1, 0}, Point2{0, 1}, Point2{0, -1},
                                Point2{1, 1}, Point2{1, -1}, Point2{-1, 1}, Point2{-1, -1}}) {
                Point2 q = cur.center + step * dirv;
                double d = clearance(q);
                if (d > cur.value) { cur = {d, q}; improved = true; }
            }
            if (!improved) step *= 0.6;
            if (step < 1e-10) break;
        }
        if (cur.value > best.value) best = cur;
    }
    return best;
}

// -------- serialization --------

namespace {

std::string marker_to_string(const PslgEdge& e) {
    switch (e.marker) {
        case EdgeMarker::OuterDirichlet: return "OUTER_DIRICHLET";
        case EdgeMarker::Slit: return "SLIT";
        case EdgeMarker::TubeMouth: return "TUBE_MOUTH(" + std::to_string(e.id) + ")";
        case EdgeMarker::Sigma: return "SIGMA(" + std::to_string(e.id) + ")";
    }
    return "OUTER_DIRICHLET";
}

std::pair<EdgeMarker, int> marker_from_string(const std::string& s) {
    if (s == "OUTER_DIRICHLET") return {EdgeMarker::OuterDirichlet, -1};
    if (s == "SLIT") return {EdgeMarker::Slit, -1};
    auto paren = s.find('(');
    if (paren != std::string::npos) {
        int id = std::stoi(s.substr(paren + 1));
        if (s.rfind("TUBE_MOUTH", 0) == 0) return {EdgeMarker::TubeMouth, id};
        if (s.rfind("SIGMA", 0) == 0) return {EdgeMarker::Sigma, id};
    }
    throw std::invalid_argument("unknown edge marker: " + s);
}

}  // namespace

std::string domain_to_json(const DomainSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    nlohmann::json core;
    core["vertices"] = nlohmann::json::array();
    for (const Point2& p : spec.core.vertices) core["vertices"].push_back({p.x, p.y});
    core["edges"] = nlohmann::json::array();
    for (const PslgEdge& e : spec.core.edges) {
        core["edges"].push_back({e.a, e.b, marker_to_string(e)});
    }
    j["core"] = core;
    j["tubes"] = nlohmann::json::array();
    for (const TubeSpec& t : spec.tubes) {
        nlohmann::json tj;
        tj["mouth"] = {{t.mouth_a.x, t.mouth_a.y}, {t.mouth_b.x, t.mouth_b.y}};
        tj["dir"] = {t.direction.x, t.direction.y};
        tj["width"] = t.width;
        if (t.infinite()) tj["length"] = "inf";
        else tj["length"] = t.length;
        if (t.sigma) tj["sigma"] = t.sigma_id;
        j["tubes"].push_back(tj);
    }
    if (spec.circle_segments > 0) j["circle_segments"] = spec.circle_segments;
    return j.dump(2);
}

DomainSpec domain_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DomainSpec d;
    d.name = j.at("name").get<std::string>();
    for (const auto& v : j.at("core").at("vertices")) {
        d.core.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    for (const auto& e : j.at("core").at("edges")) {
        auto [m, id] = marker_from_string(e.at(2).get<std::string>());
        d.core.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), m, id});
    }
    for (const auto& tj : j.at("tubes")) {
        TubeSpec t;
        t.mouth_a = {tj.at("mouth").at(0).at(0).get<double>(), tj.at("mouth").at(0).at(1).get<double>()};
        t.mouth_b = {tj.at("mouth").at(1).at(0).get<double>(), tj.at("mouth").at(1).at(1).get<double>()};
        t.direction = {tj.at("dir").at(0).get<double>(), tj.at("dir").at(1).get<double>()};
        t.width = tj.at("width").get<double>();
        if (tj.at("length").is_string()) t.length = kInfiniteLength;
        else t.length = tj.at("length").get<double>();
        if (tj.contains("sigma")) { t.sigma = true; t.sigma_id = tj.at("sigma").get<int>(); }
        d.tubes.push_back(t);
    }
    if (j.contains("circle_segments")) d.circle_segments = j.at("circle_segments").get<int>();
    return d;
}

}  // namespace tubes
