#include "tubes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tubes {

double triangle_area(Point2 a, Point2 b, Point2 c) {
    return 0.5 * cross(b - a, c - a);
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinAngleDeg = 20.0;

inline int64_t pair_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<int64_t>(a) << 32) | static_cast<uint32_t>(b);
}

inline long double orient2d(Point2 a, Point2 b, Point2 c) {
    long double abx = (long double)b.x - a.x, aby = (long double)b.y - a.y;
    long double acx = (long double)c.x - a.x, acy = (long double)c.y - a.y;
    return abx * acy - aby * acx;
}

// sign of the in-circumcircle determinant of CCW triangle (a,b,c) vs p:
// +1 strictly inside, -1 strictly outside, 0 within tolerance (cocircular)
inline int incircle_sign(Point2 a, Point2 b, Point2 c, Point2 p) {
    long double ax = (long double)a.x - p.x, ay = (long double)a.y - p.y;
    long double bx = (long double)b.x - p.x, by = (long double)b.y - p.y;
    long double cx = (long double)c.x - p.x, cy = (long double)c.y - p.y;
    long double la = ax * ax + ay * ay;
    long double lb = bx * bx + by * by;
    long double lc = cx * cx + cy * cy;
    long double det = ax * (by * lc - cy * lb) - ay * (bx * lc - cx * lb) + la * (bx * cy - by * cx);
    long double mag = (std::fabs((double)ax) + std::fabs((double)bx) + std::fabs((double)cx) +
                       std::fabs((double)ay) + std::fabs((double)by) + std::fabs((double)cy));
    long double scale = mag * mag * mag * mag + 1e-300;
    if (det > 1e-13L * scale) return 1;
    if (det < -1e-13L * scale) return -1;
    return 0;
}

// near-cocircular counts as inside so cavities absorb degenerate fans
inline bool in_circumcircle(Point2 a, Point2 b, Point2 c, Point2 p) {
    return incircle_sign(a, b, c, p) >= 0;
}

Point2 circumcenter(Point2 a, Point2 b, Point2 c) {
    double d = 2.0 * cross(b - a, c - a);
    if (std::abs(d) < 1e-300) return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
    double la = dot(b - a, b - a), lb = dot(c - a, c - a);
    double ux = ((c.y - a.y) * la - (b.y - a.y) * lb) / d;
    double uy = ((b.x - a.x) * lb - (c.x - a.x) * la) / d;
    return {a.x + ux, a.y + uy};
}

// ------------------------------------------------------------------
// Incremental Delaunay triangulation (Bowyer-Watson) with adjacency.
// ------------------------------------------------------------------
struct Delaunay {
    struct Tri {
        std::array<int, 3> v;
        std::array<int, 3> n;  // neighbor opposite v[i]
        bool alive = true;
    };

    std::vector<Point2> pts;
    std::vector<Tri> tris;
    std::vector<int> vert2tri;
    int super[3] = {-1, -1, -1};
    int last_tri = 0;
    double dup_tol = 1e-11;
    // edges reported constrained here are never flipped during legalization
    std::function<bool(int, int)> is_constrained;

    void init(double xmin, double xmax, double ymin, double ymax) {
        double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
        double r = 8.0 * (std::max(xmax - xmin, ymax - ymin) + 1.0);
        super[0] = add_point({cx - 2.0 * r, cy - r});
        super[1] = add_point({cx + 2.0 * r, cy - r});
        super[2] = add_point({cx, cy + 2.0 * r});
        tris.push_back({{super[0], super[1], super[2]}, {-1, -1, -1}, true});
        vert2tri.assign(3, 0);
        last_tri = 0;
    }

    int add_point(Point2 p) {
        pts.push_back(p);
        return static_cast<int>(pts.size()) - 1;
    }

    bool is_super(int v) const { return v == super[0] || v == super[1] || v == super[2]; }

    int locate(Point2 p, int hint) const {
        int t = (hint >= 0 && hint < (int)tris.size() && tris[hint].alive) ? hint : last_tri;
        if (t < 0 || t >= (int)tris.size() || !tris[t].alive) {
            for (int i = (int)tris.size() - 1; i >= 0; --i)
                if (tris[i].alive) { t = i; break; }
        }
        int steps = 0, limit = 4 * (int)tris.size() + 64;
        while (steps++ < limit) {
            const Tri& tr = tris[t];
            int next = -1;
            for (int i = 0; i < 3; ++i) {
                Point2 a = pts[tr.v[(i + 1) % 3]], b = pts[tr.v[(i + 2) % 3]];
                if (orient2d(a, b, p) < 0.0L) { next = tr.n[i]; break; }
            }
            if (next < 0) return t;
            t = next;
        }
        // fallback: brute-force scan (degenerate walk)
        for (int i = 0; i < (int)tris.size(); ++i) {
            if (!tris[i].alive) continue;
            const Tri& tr = tris[i];
            bool in = true;
            for (int k = 0; k < 3 && in; ++k)
                in = orient2d(pts[tr.v[(k + 1) % 3]], pts[tr.v[(k + 2) % 3]], p) >= -1e-12L;
            if (in) return i;
        }
        throw std::runtime_error("triangulate: point location failed");
    }

    // Insert p; returns vertex index, or the index of an existing vertex if
    // p duplicates it.  created (if non-null) receives new triangle ids.
    int insert(Point2 p, int hint, std::vector<int>* created = nullptr) {
        int t0 = locate(p, hint);
        for (int k = 0; k < 3; ++k) {
            int v = tris[t0].v[k];
            if (dist(pts[v], p) < dup_tol) return v;
        }
        // cavity BFS
        std::vector<int> cavity;
        std::vector<char> mark(tris.size(), 0);
        std::deque<int> bfs{t0};
        mark[t0] = 1;
        while (!bfs.empty()) {
            int t = bfs.front();
            bfs.pop_front();
            const Tri& tr = tris[t];
            if (!in_circumcircle(pts[tr.v[0]], pts[tr.v[1]], pts[tr.v[2]], p) && t != t0) {
                mark[t] = 2;  // visited, not in cavity
                continue;
            }
            cavity.push_back(t);
            mark[t] = 3;
            for (int i = 0; i < 3; ++i) {
                int nb = tr.n[i];
                if (nb >= 0 && !mark[nb]) { mark[nb] = 1; bfs.push_back(nb); }
            }
        }
        // star-shape repair: every cavity boundary edge must see p positively
        bool changed = true;
        while (changed) {
            changed = false;
            for (size_t ci = 0; ci < cavity.size(); ++ci) {
                int t = cavity[ci];
                if (t == t0) continue;
                const Tri& tr = tris[t];
                for (int i = 0; i < 3; ++i) {
                    int nb = tr.n[i];
                    if (nb >= 0 && mark[nb] == 3) continue;
                    Point2 a = pts[tr.v[(i + 1) % 3]], b = pts[tr.v[(i + 2) % 3]];
                    if (orient2d(a, b, p) <= 0.0L) {
                        mark[t] = 2;
                        cavity.erase(cavity.begin() + ci);
                        changed = true;
                        break;
                    }
                }
                if (changed) break;
            }
        }
        int vp = add_point(p);
        vert2tri.push_back(-1);
        // build new triangles over cavity boundary edges
        std::unordered_map<int64_t, std::pair<int, int>> open_edge;  // (u,w) -> (tri, slot)
        std::vector<int> fresh;
        for (int t : cavity) {
            const Tri tr = tris[t];
            for (int i = 0; i < 3; ++i) {
                int nb = tr.n[i];
                if (nb >= 0 && mark[nb] == 3) continue;
                int u = tr.v[(i + 1) % 3], w = tr.v[(i + 2) % 3];
                Tri nt;
                nt.v = {u, w, vp};
                nt.n = {-1, -1, nb};  // slot 2 faces edge (u,w) -> old outside tri
                // fix: neighbor opposite v[2]=vp is edge (u,w) => slot 2
                int id = (int)tris.size();
                tris.push_back(nt);
                fresh.push_back(id);
                if (nb >= 0) {
                    Tri& onb = tris[nb];
                    for (int k = 0; k < 3; ++k)
                        if (onb.n[k] == t) onb.n[k] = id;
                }
                // link sibling edges (u,vp) and (w,vp)
                for (int pass = 0; pass < 2; ++pass) {
                    int x = pass == 0 ? u : w;
                    int slot = pass == 0 ? 1 : 0;  // neighbor opposite w is edge (u,vp)
                    int64_t key = pair_key(x, vp);
                    auto it = open_edge.find(key);
                    if (it == open_edge.end()) {
                        open_edge[key] = {id, slot};
                    } else {
                        tris[id].n[slot] = it->second.first;
                        tris[it->second.first].n[it->second.second] = id;
                        open_edge.erase(it);
                    }
                }
                vert2tri[u] = id;
                vert2tri[w] = id;
                vert2tri[vp] = id;
            }
        }
        for (int t : cavity) tris[t].alive = false;
        if (fresh.empty()) throw std::runtime_error("triangulate: empty cavity boundary");
        // restore the Delaunay property by Lawson flips so later cavity
        // searches stay connected
        std::vector<std::pair<int, int>> stack;
        for (int t : fresh) stack.push_back({t, 2});  // edge facing the old mesh
        int flips = 0;
        while (!stack.empty() && flips < 100000) {
            auto [t, i] = stack.back();
            stack.pop_back();
            if (t >= (int)tris.size() || !tris[t].alive) continue;
            int nb = tris[t].n[i];
            if (nb < 0 || !tris[nb].alive) continue;
            int pv = tris[t].v[i];
            int u = tris[t].v[(i + 1) % 3], w = tris[t].v[(i + 2) % 3];
            if (is_constrained && is_constrained(u, w)) continue;
            int j = -1;
            for (int k = 0; k < 3; ++k)
                if (tris[nb].v[k] != u && tris[nb].v[k] != w) j = k;
            if (j < 0) continue;
            int q = tris[nb].v[j];
            if (is_super(q) &&
                !(is_super(pv) || is_super(u) || is_super(w)))
                continue;  // never pull super vertices into interior stars
            if (incircle_sign(pts[tris[t].v[0]], pts[tris[t].v[1]], pts[tris[t].v[2]],
                              pts[q]) <= 0)
                continue;
            // flip (u,w) -> (pv,q): quad pv,u,q,w is CCW
            int A = tris[t].n[(i + 1) % 3];   // across (w,pv)
            int B = tris[t].n[(i + 2) % 3];   // across (pv,u)
            int C = tris[nb].n[(j + 2) % 3];  // across (q, first shared)
            int D = tris[nb].n[(j + 1) % 3];  // across (second shared, q)
            // in nb, vertices (j+1), (j+2) traverse the shared edge w->u
            if (tris[nb].v[(j + 1) % 3] == u) std::swap(C, D);
            int t1 = (int)tris.size();
            tris.push_back({{pv, u, q}, {D, -1, B}, true});
            int t2 = (int)tris.size();
            tris.push_back({{pv, q, w}, {C, A, -1}, true});
            tris[t1].n[1] = t2;
            tris[t2].n[2] = t1;
            auto relink = [&](int ext, int from, int to) {
                if (ext < 0) return;
                for (int k = 0; k < 3; ++k)
                    if (tris[ext].n[k] == from) tris[ext].n[k] = to;
            };
            relink(B, t, t1);
            relink(A, t, t2);
            relink(D, nb, t1);
            relink(C, nb, t2);
            tris[t].alive = false;
            tris[nb].alive = false;
            vert2tri[pv] = t1;
            vert2tri[u] = t1;
            vert2tri[q] = t1;
            vert2tri[w] = t2;
            fresh.push_back(t1);
            fresh.push_back(t2);
            flips++;
            stack.push_back({t1, 0});  // edge (u,q) opposite pv
            stack.push_back({t2, 0});  // edge (q,w) opposite pv
        }
        // drop dead ids so callers only see live triangles
        fresh.erase(std::remove_if(fresh.begin(), fresh.end(),
                                   [&](int t) { return !tris[t].alive; }),
                    fresh.end());
        last_tri = fresh.empty() ? last_tri : fresh.back();
        if (created) *created = fresh;
        return vp;
    }

    // Does edge (a,b) exist?  Walks the ring around a.
    bool edge_exists(int a, int b) const {
        int t0 = vert2tri[a];
        if (t0 < 0 || !tris[t0].alive) return false;
        int t = t0;
        int guard = 0;
        do {
            const Tri& tr = tris[t];
            int ia = -1;
            for (int k = 0; k < 3; ++k)
                if (tr.v[k] == a) ia = k;
            if (ia < 0) return false;
            if (tr.v[(ia + 1) % 3] == b || tr.v[(ia + 2) % 3] == b) return true;
            t = tr.n[(ia + 1) % 3];  // neighbor across edge (a, v[ia+2])
            if (t < 0) return false;
        } while (t != t0 && guard++ < 512);
        return false;
    }

    // Apex vertices of the (up to two) triangles adjacent to edge (a,b).
    std::vector<int> edge_apexes(int a, int b) const {
        std::vector<int> out;
        int t0 = vert2tri[a];
        if (t0 < 0 || !tris[t0].alive) return out;
        int t = t0, guard = 0;
        do {
            const Tri& tr = tris[t];
            int ia = -1;
            for (int k = 0; k < 3; ++k)
                if (tr.v[k] == a) ia = k;
            if (ia < 0) break;
            int u = tr.v[(ia + 1) % 3], w = tr.v[(ia + 2) % 3];
            if (u == b) out.push_back(w);
            if (w == b) out.push_back(u);
            t = tr.n[(ia + 1) % 3];
            if (t < 0) break;
        } while (t != t0 && guard++ < 512);
        return out;
    }
};

// ------------------------------------------------------------------
// Constrained-subsegment store with a spatial grid for encroachment.
// ------------------------------------------------------------------
struct SegStore {
    struct Seg {
        int a, b;
        EdgeMarker marker;
        int id;
        bool alive = true;
    };
    std::vector<Seg> segs;
    std::unordered_map<int64_t, int> by_pair;  // alive seg by vertex pair
    std::unordered_map<int64_t, std::vector<int>> grid;
    double cell = 1.0;
    const Delaunay* dt = nullptr;

    int64_t cell_key(int ix, int iy) const {
        return (static_cast<int64_t>(ix) << 32) ^ (static_cast<uint32_t>(iy));
    }

    void reg(int si) {
        const Seg& s = segs[si];
        Point2 a = dt->pts[s.a], b = dt->pts[s.b];
        Point2 m = 0.5 * (a + b);
        double r = 0.5 * dist(a, b) + 0.25 * cell;
        int x0 = (int)std::floor((m.x - r) / cell), x1 = (int)std::floor((m.x + r) / cell);
        int y0 = (int)std::floor((m.y - r) / cell), y1 = (int)std::floor((m.y + r) / cell);
        for (int ix = x0; ix <= x1; ++ix)
            for (int iy = y0; iy <= y1; ++iy) grid[cell_key(ix, iy)].push_back(si);
    }

    int add(int a, int b, EdgeMarker m, int id) {
        segs.push_back({a, b, m, id, true});
        int si = (int)segs.size() - 1;
        by_pair[pair_key(a, b)] = si;
        reg(si);
        return si;
    }

    void kill(int si) {
        segs[si].alive = false;
        by_pair.erase(pair_key(segs[si].a, segs[si].b));
    }

    // alive constrained segment on vertex pair (a,b), or -1
    int find_pair(int a, int b) const {
        auto it = by_pair.find(pair_key(a, b));
        return it == by_pair.end() ? -1 : it->second;
    }

    bool encroached_by(int si, Point2 p) const {
        const Seg& s = segs[si];
        Point2 a = dt->pts[s.a], b = dt->pts[s.b];
        Point2 m = 0.5 * (a + b);
        double r = 0.5 * dist(a, b);
        return dist(p, m) < r * (1.0 - 1e-9);
    }

    // alive segments whose diametral disk contains p (p given as vertex id
    // to exclude the segment's own endpoints)
    std::vector<int> encroached_near(Point2 p, int pv) const {
        std::vector<int> out;
        int ix = (int)std::floor(p.x / cell), iy = (int)std::floor(p.y / cell);
        auto it = grid.find(cell_key(ix, iy));
        if (it == grid.end()) return out;
        for (int si : it->second) {
            const Seg& s = segs[si];
            if (!s.alive || s.a == pv || s.b == pv) continue;
            if (encroached_by(si, p)) out.push_back(si);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

struct Mesher {
    Delaunay dt;
    SegStore store;
    std::function<bool(Point2)> inside;
    std::function<double(Point2)> sizing;
    double h = 0.0;
    size_t max_vertices = 8'000'000;

    double seg_len(int si) const {
        return dist(dt.pts[store.segs[si].a], dt.pts[store.segs[si].b]);
    }

    double min_len(int si) const {
        Point2 m = 0.5 * (dt.pts[store.segs[si].a] + dt.pts[store.segs[si].b]);
        return 0.02 * sizing(m);
    }

    // Split segment si at its midpoint; returns the midpoint vertex or -1.
    // queue_children: re-queue the two halves for a conformity re-check
    // (only safe when the consumer re-tests encroachment before splitting)
    int split_seg(int si, std::deque<int>& segq, bool queue_children,
                  std::vector<int>* created = nullptr) {
        SegStore::Seg s = store.segs[si];
        if (!s.alive) return -1;
        if (seg_len(si) < min_len(si)) return -1;
        Point2 m = 0.5 * (dt.pts[s.a] + dt.pts[s.b]);
        int mv = dt.insert(m, dt.vert2tri[s.a], created);
        if (mv == s.a || mv == s.b) return -1;
        store.kill(si);
        int c1 = store.add(s.a, mv, s.marker, s.id);
        int c2 = store.add(mv, s.b, s.marker, s.id);
        if (queue_children) {
            segq.push_back(c1);
            segq.push_back(c2);
        }
        for (int e : store.encroached_near(m, mv)) segq.push_back(e);
        return mv;
    }

    int conform() {
        int splits = 0;
        std::deque<int> segq;
        for (int i = 0; i < (int)store.segs.size(); ++i)
            if (store.segs[i].alive) segq.push_back(i);
        size_t guard = 0;
        while (!segq.empty() && dt.pts.size() < max_vertices && guard++ < 50'000'000) {
            int si = segq.front();
            segq.pop_front();
            const SegStore::Seg& s = store.segs[si];
            if (!s.alive) continue;
            bool bad;
            if (!dt.edge_exists(s.a, s.b)) {
                bad = true;
            } else {
                bad = false;
                Point2 a = dt.pts[s.a], b = dt.pts[s.b];
                Point2 m = 0.5 * (a + b);
                double r = 0.5 * dist(a, b);
                for (int apex : dt.edge_apexes(s.a, s.b))
                    if (!dt.is_super(apex) && dist(dt.pts[apex], m) < r * (1.0 - 1e-9)) bad = true;
            }
            if (bad) {
                if (split_seg(si, segq, true) >= 0) splits++;
            }
        }
        return splits;
    }

    void tri_metrics(const Delaunay::Tri& tr, double& longest, double& shortest,
                     double& min_angle) const {
        Point2 a = dt.pts[tr.v[0]], b = dt.pts[tr.v[1]], c = dt.pts[tr.v[2]];
        double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
        longest = std::max({la, lb, lc});
        shortest = std::min({la, lb, lc});
        double area = std::abs(triangle_area(a, b, c));
        // sin of min angle = 2*area / (product of the two longest sides)
        double mid = la + lb + lc - longest - shortest;
        double s = 2.0 * area / (longest * mid + 1e-300);
        min_angle = std::asin(std::clamp(s, 0.0, 1.0)) * 180.0 / kPi;
    }

    void refine() {
        std::deque<int> triq;
        for (int i = 0; i < (int)dt.tris.size(); ++i)
            if (dt.tris[i].alive) triq.push_back(i);
        size_t guard = 0;
        std::deque<int> segq;
        while (!triq.empty() && dt.pts.size() < max_vertices && guard++ < 80'000'000) {
            // flush pending encroached segments first
            while (!segq.empty()) {
                int si = segq.front();
                segq.pop_front();
                if (!store.segs[si].alive) continue;
                // queued segments are encroached (by a mesh vertex or by a
                // rejected insertion candidate): split unconditionally
                std::vector<int> created;
                int mv = split_seg(si, segq, false, &created);
                if (mv >= 0)
                    for (int t : created) triq.push_back(t);
            }
            int ti = triq.front();
            triq.pop_front();
            if (ti >= (int)dt.tris.size() || !dt.tris[ti].alive) continue;
            const Delaunay::Tri tr = dt.tris[ti];
            if (dt.is_super(tr.v[0]) || dt.is_super(tr.v[1]) || dt.is_super(tr.v[2])) continue;
            Point2 a = dt.pts[tr.v[0]], b = dt.pts[tr.v[1]], c = dt.pts[tr.v[2]];
            Point2 cen{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
            if (!inside(cen)) continue;
            double longest, shortest, min_angle;
            tri_metrics(tr, longest, shortest, min_angle);
            double sz = sizing(cen);
            bool bad_size = longest > sz;
            bool bad_angle = min_angle < kMinAngleDeg && shortest > 0.08 * sz;
            if (!bad_size && !bad_angle) continue;

            Point2 cc = circumcenter(a, b, c);
            Point2 cand = cc;
            if (!inside(cc)) {
                // the circumcenter escaped the domain, so it encroaches the
                // subsegment it crossed: split those segments instead
                bool queued = false;
                for (int si : store.encroached_near(cc, -1))
                    if (store.segs[si].alive && seg_len(si) >= min_len(si)) {
                        segq.push_back(si);
                        queued = true;
                    }
                if (queued) { triq.push_back(ti); continue; }
                // no splittable encroached segment: fall back to the
                // longest-edge midpoint, which always lies in the closure
                Point2 m01 = 0.5 * (a + b), m12 = 0.5 * (b + c), m20 = 0.5 * (c + a);
                double l01 = dist(a, b), l12 = dist(b, c), l20 = dist(c, a);
                cand = m01;
                double best = l01;
                if (l12 > best) { cand = m12; best = l12; }
                if (l20 > best) { cand = m20; }
                // never place the fallback on a constrained segment
                if (!inside(cand) || store.find_pair(tr.v[0], tr.v[1]) >= 0 ||
                    store.find_pair(tr.v[1], tr.v[2]) >= 0 ||
                    store.find_pair(tr.v[2], tr.v[0]) >= 0)
                    continue;
            }
            auto enc = store.encroached_near(cand, -1);
            if (!enc.empty()) {
                bool any = false;
                for (int si : enc)
                    if (store.segs[si].alive && seg_len(si) >= min_len(si)) {
                        segq.push_back(si);
                        any = true;
                    }
                if (any) triq.push_back(ti);
                continue;
            }
            std::vector<int> created;
            int nv = dt.insert(cand, ti, &created);
            if (nv < 0 || created.empty()) continue;
            for (int t : created) triq.push_back(t);
            for (int si : store.encroached_near(cand, nv)) segq.push_back(si);
        }
    }
};

// key for coordinate-based marker lookup (slit duplicates share coords)
std::array<int64_t, 4> coord_key(Point2 a, Point2 b) {
    auto q = [](double v) { return (int64_t)std::llround(v * 1e8); };
    std::array<int64_t, 4> k{q(a.x), q(a.y), q(b.x), q(b.y)};
    std::array<int64_t, 4> r{k[2], k[3], k[0], k[1]};
    return std::min(k, r);
}

}  // namespace

Mesh triangulate_pslg(const Pslg& pslg, double h,
                      const std::function<bool(Point2)>& inside,
                      const std::function<double(Point2)>& sizing) {
    if (h <= 0.0) throw std::invalid_argument("triangulate: h must be positive");
    if (pslg.vertices.empty() || pslg.edges.empty())
        throw std::invalid_argument("triangulate: empty PSLG");

    Mesher M;
    M.inside = inside;
    M.sizing = sizing;
    M.h = h;

    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (const Point2& p : pslg.vertices) {
        xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
    }
    M.dt.init(xmin, xmax, ymin, ymax);
    M.store.dt = &M.dt;
    M.dt.is_constrained = [store = &M.store](int a, int b) {
        return store->find_pair(a, b) >= 0;
    };
    M.store.cell = std::max(h, 1e-6);

    std::vector<int> vmap(pslg.vertices.size());
    for (size_t i = 0; i < pslg.vertices.size(); ++i)
        vmap[i] = M.dt.insert(pslg.vertices[i], -1);

    // pre-split constrained edges to the sizing field
    struct Job { int a, b; EdgeMarker m; int id; };
    std::deque<Job> jobs;
    for (const PslgEdge& e : pslg.edges)
        jobs.push_back({vmap[e.a], vmap[e.b], e.marker, e.id});
    size_t guard = 0;
    while (!jobs.empty() && guard++ < 20'000'000) {
        Job j = jobs.front();
        jobs.pop_front();
        Point2 a = M.dt.pts[j.a], b = M.dt.pts[j.b];
        Point2 mid = 0.5 * (a + b);
        double len = dist(a, b);
        if (len > M.sizing(mid) && len > 0.04 * M.sizing(mid)) {
            int mv = M.dt.insert(mid, M.dt.vert2tri[j.a]);
            if (mv != j.a && mv != j.b) {
                jobs.push_back({j.a, mv, j.m, j.id});
                jobs.push_back({mv, j.b, j.m, j.id});
                continue;
            }
        }
        M.store.add(j.a, j.b, j.m, j.id);
    }

    // alternate conformity enforcement and quality refinement to a fixed
    // point: late insertions may re-encroach subsegments, and conformity
    // splits may create new low-quality triangles
    M.conform();
    for (int pass = 0; pass < 12; ++pass) {
        M.refine();
        if (M.conform() == 0) break;
    }

    // ---- extraction ----
    const Delaunay& dt = M.dt;
    std::vector<int> keep_tri;
    for (int i = 0; i < (int)dt.tris.size(); ++i) {
        const auto& tr = dt.tris[i];
        if (!tr.alive) continue;
        if (dt.is_super(tr.v[0]) || dt.is_super(tr.v[1]) || dt.is_super(tr.v[2])) continue;
        Point2 a = dt.pts[tr.v[0]], b = dt.pts[tr.v[1]], c = dt.pts[tr.v[2]];
        Point2 cen{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
        if (inside(cen)) keep_tri.push_back(i);
    }
    if (keep_tri.empty()) throw std::runtime_error("triangulate: no interior triangles");

    std::vector<int> old2new(dt.pts.size(), -1);
    Mesh mesh;
    mesh.h_target = h;
    for (int ti : keep_tri) {
        for (int k = 0; k < 3; ++k) {
            int v = dt.tris[ti].v[k];
            if (old2new[v] < 0) {
                old2new[v] = (int)mesh.vertices.size();
                mesh.vertices.push_back(dt.pts[v]);
            }
        }
    }
    for (int ti : keep_tri) {
        const auto& tr = dt.tris[ti];
        std::array<int, 3> t{old2new[tr.v[0]], old2new[tr.v[1]], old2new[tr.v[2]]};
        Point2 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        if (triangle_area(a, b, c) < 0.0) std::swap(t[1], t[2]);
        mesh.triangles.push_back(t);
    }

    // marker lookup keyed by coordinates
    std::map<std::array<int64_t, 4>, std::pair<EdgeMarker, int>> marker_of;
    for (const auto& s : M.store.segs) {
        if (!s.alive) continue;
        marker_of[coord_key(dt.pts[s.a], dt.pts[s.b])] = {s.marker, s.id};
    }

    // edge adjacency counts (by vertex-index pair)
    std::unordered_map<int64_t, int> adj;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) adj[pair_key(t[k], t[(k + 1) % 3])]++;

    // ---- slit surgery ----
    std::set<std::array<int64_t, 4>> slit_keys;
    for (const auto& [k, mi] : marker_of)
        if (mi.first == EdgeMarker::Slit) slit_keys.insert(k);

    if (!slit_keys.empty()) {
        // incidence
        std::vector<std::vector<int>> inc(mesh.vertices.size());
        for (int t = 0; t < (int)mesh.triangles.size(); ++t)
            for (int k = 0; k < 3; ++k) inc[mesh.triangles[t][k]].push_back(t);
        auto is_slit_edge = [&](int u, int w) {
            return slit_keys.count(coord_key(mesh.vertices[u], mesh.vertices[w])) > 0;
        };
        int nv0 = (int)mesh.vertices.size();
        for (int v = 0; v < nv0; ++v) {
            bool on_slit = false;
            for (int t : inc[v]) {
                for (int k = 0; k < 3; ++k) {
                    int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
                    if ((a == v || b == v) && is_slit_edge(a, b)) on_slit = true;
                }
            }
            if (!on_slit) continue;
            // union-find over the star, joined across non-slit edges at v
            std::map<int, int> comp;  // triangle -> component representative
            std::vector<int> star = inc[v];
            std::map<int, int> idx;
            for (int i = 0; i < (int)star.size(); ++i) idx[star[i]] = i;
            std::vector<int> parent(star.size());
            for (int i = 0; i < (int)star.size(); ++i) parent[i] = i;
            std::function<int(int)> find = [&](int x) {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            };
            // group star triangles by the opposite vertex of each edge at v
            std::map<int, std::vector<int>> by_other;
            for (int t : inc[v]) {
                const auto& tv = mesh.triangles[t];
                for (int k = 0; k < 3; ++k)
                    if (tv[k] != v) by_other[tv[k]].push_back(t);
            }
            for (auto& [w, ts] : by_other) {
                if (ts.size() != 2) continue;
                if (is_slit_edge(v, w)) continue;
                parent[find(idx[ts[0]])] = find(idx[ts[1]]);
            }
            std::map<int, std::vector<int>> comps;
            for (int i = 0; i < (int)star.size(); ++i) comps[find(i)].push_back(star[i]);
            if (comps.size() < 2) continue;
            bool first = true;
            for (auto& [rep, ts] : comps) {
                if (first) { first = false; continue; }
                int nv = (int)mesh.vertices.size();
                mesh.vertices.push_back(mesh.vertices[v]);
                for (int t : ts)
                    for (int k = 0; k < 3; ++k)
                        if (mesh.triangles[t][k] == v) mesh.triangles[t][k] = nv;
            }
        }
    }

    // ---- rebuild adjacency, edges, markers after surgery ----
    adj.clear();
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) adj[pair_key(t[k], t[(k + 1) % 3])]++;
    std::set<int64_t> emitted;
    mesh.edges.clear();
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            int64_t pk = pair_key(a, b);
            if (emitted.count(pk)) continue;
            auto it = marker_of.find(coord_key(mesh.vertices[a], mesh.vertices[b]));
            int count = adj[pk];
            if (it != marker_of.end()) {
                emitted.insert(pk);
                mesh.edges.push_back({a, b, it->second.first, it->second.second});
            } else if (count == 1) {
                emitted.insert(pk);
                mesh.edges.push_back({a, b, EdgeMarker::OuterDirichlet, -1});
            }
        }
    }

    mesh.dirichlet.assign(mesh.vertices.size(), 0);
    for (const auto& e : mesh.edges) {
        if (e.marker == EdgeMarker::OuterDirichlet || e.marker == EdgeMarker::Slit) {
            mesh.dirichlet[e.a] = 1;
            mesh.dirichlet[e.b] = 1;
        }
        if (e.marker == EdgeMarker::Sigma) mesh.sigma_facets.push_back({e.a, e.b, e.id});
    }
    return mesh;
}

Mesh triangulate(const TruncatedDomain& domain, double h) {
    for (const TubeSpec& t : domain.spec.tubes)
        if (h > t.width / 3.0 + 1e-12 && !t.sigma)
            throw std::invalid_argument("triangulate: h must be <= min tube width / 3");

    const DomainSpec spec = domain.spec;
    const double R = domain.R;
    auto inside = [spec, R](Point2 p) { return inside_domain(spec, p, R); };

    // interior crack tips: slit-chain endpoints meeting no other edge
    std::vector<Point2> tips;
    {
        std::map<int, std::pair<int, int>> deg;  // vertex -> (slit_deg, other_deg)
        for (const PslgEdge& e : domain.pslg.edges) {
            for (int v : {e.a, e.b}) {
                if (e.marker == EdgeMarker::Slit) deg[v].first++;
                else deg[v].second++;
            }
        }
        for (const auto& [v, d] : deg)
            if (d.first == 1 && d.second == 0) tips.push_back(domain.pslg.vertices[v]);
    }
    std::vector<TubeSpec> thin;
    for (const TubeSpec& t : spec.tubes)
        if (t.sigma) thin.push_back(t);

    auto sizing = [h, tips, thin](Point2 p) {
        double s = h;
        for (const Point2& tip : tips) {
            double d = dist(p, tip);
            if (d < 0.6) s = std::min(s, std::max(h / 16.0, 0.45 * d));
        }
        for (const TubeSpec& t : thin) {
            Point2 u = t.mouth_b - t.mouth_a;
            double w = norm(u);
            u = (1.0 / w) * u;
            Point2 rel = p - t.mouth_a;
            double sc = dot(rel, u), ax = dot(rel, t.direction);
            double L = t.infinite() ? 1e30 : t.length;
            if (sc > -w && sc < 2.0 * w && ax > -w && ax < L + w)
                s = std::min(s, w / 6.0);
        }
        return s;
    };
    return triangulate_pslg(domain.pslg, h, inside, sizing);
}

Mesh refine_uniform(const Mesh& mesh) {
    Mesh out;
    out.h_target = mesh.h_target / 2.0;
    out.vertices = mesh.vertices;
    out.dirichlet = mesh.dirichlet;

    std::unordered_map<int64_t, int> midpoint;
    auto mid_of = [&](int a, int b) {
        int64_t k = pair_key(a, b);
        auto it = midpoint.find(k);
        if (it != midpoint.end()) return it->second;
        int v = (int)out.vertices.size();
        out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        out.dirichlet.push_back(0);
        midpoint[k] = v;
        return v;
    };
    for (const auto& t : mesh.triangles) {
        int m01 = mid_of(t[0], t[1]), m12 = mid_of(t[1], t[2]), m20 = mid_of(t[2], t[0]);
        out.triangles.push_back({t[0], m01, m20});
        out.triangles.push_back({t[1], m12, m01});
        out.triangles.push_back({t[2], m20, m12});
        out.triangles.push_back({m01, m12, m20});
    }
    for (const auto& e : mesh.edges) {
        int m = mid_of(e.a, e.b);
        out.edges.push_back({e.a, m, e.marker, e.id});
        out.edges.push_back({m, e.b, e.marker, e.id});
        if (e.marker == EdgeMarker::OuterDirichlet || e.marker == EdgeMarker::Slit)
            out.dirichlet[m] = 1;
    }
    for (const auto& e : out.edges)
        if (e.marker == EdgeMarker::Sigma) out.sigma_facets.push_back({e.a, e.b, e.id});
    return out;
}

QualityReport mesh_quality(const Mesh& mesh) {
    QualityReport r;
    r.n_vertices = (int)mesh.vertices.size();
    r.n_triangles = (int)mesh.triangles.size();
    r.min_angle_deg = 180.0;
    for (const auto& t : mesh.triangles) {
        Point2 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
        double area = triangle_area(a, b, c);
        r.total_area += area;
        double lmax = std::max({la, lb, lc}), lmin = std::min({la, lb, lc});
        double lmid = la + lb + lc - lmax - lmin;
        double s = 2.0 * std::abs(area) / (lmax * lmid + 1e-300);
        double ang = std::asin(std::clamp(s, 0.0, 1.0)) * 180.0 / kPi;
        r.min_angle_deg = std::min(r.min_angle_deg, ang);
        r.max_aspect = std::max(r.max_aspect, lmax / (lmin + 1e-300));
        if (ang < 20.0) r.n_below_20deg++;
    }
    return r;
}

Mesh submesh(const Mesh& mesh, const std::function<bool(Point2)>& keep_centroid) {
    Mesh out;
    out.h_target = mesh.h_target;
    std::vector<int> old2new(mesh.vertices.size(), -1);
    for (const auto& t : mesh.triangles) {
        Point2 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        Point2 cen{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
        if (!keep_centroid(cen)) continue;
        std::array<int, 3> nt{};
        for (int k = 0; k < 3; ++k) {
            int v = t[k];
            if (old2new[v] < 0) {
                old2new[v] = (int)out.vertices.size();
                out.vertices.push_back(mesh.vertices[v]);
                out.dirichlet.push_back(mesh.dirichlet[v]);
            }
            nt[k] = old2new[v];
        }
        out.triangles.push_back(nt);
    }
    if (out.triangles.empty()) throw std::invalid_argument("submesh: empty selection");

    std::unordered_map<int64_t, int> adj;
    for (const auto& t : out.triangles)
        for (int k = 0; k < 3; ++k) adj[pair_key(t[k], t[(k + 1) % 3])]++;

    for (const auto& e : mesh.edges) {
        int a = old2new[e.a], b = old2new[e.b];
        if (a < 0 || b < 0) continue;
        auto it = adj.find(pair_key(a, b));
        if (it == adj.end()) continue;
        EdgeMarker m = e.marker;
        if (it->second == 1 &&
            (m == EdgeMarker::Sigma || m == EdgeMarker::TubeMouth)) {
            m = EdgeMarker::OuterDirichlet;  // exposed interior constraint becomes a cap
        }
        out.edges.push_back({a, b, m, m == e.marker ? e.id : -1});
    }
    // any remaining unmarked boundary edge (cut through unconstrained
    // interior should not happen, but seal it as Dirichlet if it does)
    std::set<int64_t> marked;
    for (const auto& e : out.edges) marked.insert(pair_key(e.a, e.b));
    for (const auto& t : out.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            int64_t pk = pair_key(a, b);
            if (adj[pk] == 1 && !marked.count(pk)) {
                marked.insert(pk);
                out.edges.push_back({a, b, EdgeMarker::OuterDirichlet, -1});
            }
        }
    }
    for (auto& d : out.dirichlet) d = 0;
    for (const auto& e : out.edges) {
        if (e.marker == EdgeMarker::OuterDirichlet || e.marker == EdgeMarker::Slit) {
            out.dirichlet[e.a] = 1;
            out.dirichlet[e.b] = 1;
        }
        if (e.marker == EdgeMarker::Sigma) out.sigma_facets.push_back({e.a, e.b, e.id});
    }
    return out;
}

std::string mesh_to_json(const Mesh& mesh) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"vertices\":[";
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (i) os << ",";
        os << "[" << mesh.vertices[i].x << "," << mesh.vertices[i].y << "]";
    }
    os << "],\"triangles\":[";
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        if (i) os << ",";
        os << "[" << mesh.triangles[i][0] << "," << mesh.triangles[i][1] << ","
           << mesh.triangles[i][2] << "]";
    }
    os << "],\"dirichlet\":[";
    for (size_t i = 0; i < mesh.dirichlet.size(); ++i) {
        if (i) os << ",";
        os << (mesh.dirichlet[i] ? "true" : "false");
    }
    os << "],\"sigma_facets\":[";
    for (size_t i = 0; i < mesh.sigma_facets.size(); ++i) {
        if (i) os << ",";
        os << "[" << mesh.sigma_facets[i][0] << "," << mesh.sigma_facets[i][1] << ","
           << mesh.sigma_facets[i][2] << "]";
    }
    os << "]}";
    return os.str();
}

}  // namespace tubes
