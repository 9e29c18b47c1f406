#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tubes/geometry.hpp"

#include <cmath>
#include <set>

using namespace tubes;

namespace {
constexpr double kPi = 3.14159265358979323846;

double core_area(const DomainSpec& spec) {
    return polygon_area(core_outline(spec));
}
}  // namespace

TEST_CASE("hersch pipe construction") {
    DomainSpec h = build_hersch_pipe(64);
    CHECK(h.tubes.size() == 2);
    CHECK(h.tubes[0].width == doctest::Approx(1.0));
    CHECK(h.tubes[1].width == doctest::Approx(1.0));
    CHECK(threshold_energy(h) == doctest::Approx(kPi * kPi));

    CHECK_THROWS(build_hersch_pipe(16));

    double a32 = core_area(build_hersch_pipe(32));
    double a128 = core_area(build_hersch_pipe(128));
    CHECK(std::abs(a32 - a128) < 0.01 * (kPi / 2.0));
    CHECK(a128 < kPi / 2.0);                  // inscribed polygon
    CHECK(a128 > kPi / 2.0 * 0.995);
}

TEST_CASE("hersch inradius is 1/2") {
    DomainSpec h = build_hersch_pipe(64);
    InradiusResult r = inradius(h, 0.05);
    CHECK(r.value == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("infinite cross") {
    DomainSpec c = build_infinite_cross();
    CHECK(threshold_energy(c) == doctest::Approx(kPi * kPi / 4.0));
    // symmetric under 90 degree rotation: vertex set maps to itself
    std::set<std::pair<long long, long long>> vs;
    auto q = [](double v) { return (long long)llround(v * 1e7); };
    for (const Point2& p : c.core.vertices) vs.insert({q(p.x), q(p.y)});
    for (const Point2& p : c.core.vertices) CHECK(vs.count({q(-p.y), q(p.x)}) == 1);
    for (const TubeSpec& t : c.tubes) CHECK(t.width == doctest::Approx(2.0));
    CHECK(c.tubes.size() == 4);
}

TEST_CASE("diamond square") {
    DomainSpec q = build_diamond_square();
    auto poly = core_outline(q);
    CHECK(polygon_area(poly) == doctest::Approx(8.0));
}

TEST_CASE("broken strip") {
    CHECK_THROWS(build_broken_strip(0.0));
    CHECK_THROWS(build_broken_strip(kPi / 2.0));

    double theta = kPi / 6.0;
    DomainSpec b = build_broken_strip(theta);
    double L = 2.0 / (std::sin(theta) * std::cos(theta)) + 2.0 / std::cos(theta);
    double A = 1.0 / (std::sin(theta) * std::cos(theta));
    CHECK(core_area(b) == doctest::Approx(A).epsilon(1e-9));
    CHECK(polya_triangle_bound(L, A) == doctest::Approx(kPi * kPi).epsilon(1e-9));

    // mouths orthogonal to tube axes
    DomainSpec b4 = build_broken_strip(kPi / 4.0);
    for (const TubeSpec& t : b4.tubes) {
        Point2 m = t.mouth_b - t.mouth_a;
        CHECK(std::abs(dot(m, t.direction)) < 1e-12);
        CHECK(norm(t.direction) == doctest::Approx(1.0));
        CHECK(t.width == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("polya bound") {
    CHECK(polya_triangle_bound(3.0, std::sqrt(3.0) / 4.0) ==
          doctest::Approx((kPi / 3.0) * (kPi / 3.0) * 48.0));
    CHECK(polya_triangle_bound(1.0, 1.0) == doctest::Approx((kPi / 3.0) * (kPi / 3.0)));
    CHECK_THROWS(polya_triangle_bound(-1.0, 1.0));
    // monotone in L for fixed A
    CHECK(polya_triangle_bound(4.0, 2.0) > polya_triangle_bound(3.0, 2.0));
}

TEST_CASE("threshold energy") {
    DomainSpec d;
    d.name = "single";
    TubeSpec t;
    t.mouth_a = {0, 0};
    t.mouth_b = {0, 0.5};
    t.direction = {1, 0};
    t.width = 0.5;
    d.tubes.push_back(t);
    CHECK(threshold_energy(d) == doctest::Approx(4.0 * kPi * kPi));
    DomainSpec none = build_unit_square();
    CHECK_THROWS(threshold_energy(none));
}

TEST_CASE("r0 certification") {
    CHECK(compute_r0(build_hersch_pipe(64)) <= 2.0);
    CHECK(compute_r0(build_infinite_cross()) == doctest::Approx(2.0));
    DomainSpec b = build_broken_strip(kPi / 6.0);
    double rad = 0.0;
    for (const Point2& p : b.core.vertices) rad = std::max(rad, norm(p));
    CHECK(compute_r0(b) >= rad);
}

TEST_CASE("truncation") {
    DomainSpec h = build_hersch_pipe(64);
    CHECK_THROWS(truncate(h, 0.5));

    TruncatedDomain t6 = truncate(h, 6.0);
    CHECK(t6.R == doctest::Approx(6.0));
    CHECK(t6.pslg.edges.size() > 10);

    // nesting: every vertex of the R=4 PSLG lies in the closed R=6 region
    TruncatedDomain t4 = truncate(h, 4.0);
    for (const Point2& v : t4.pslg.vertices) {
        bool inside = inside_domain(h, v, 6.0);
        double d = 1e30;
        for (const PslgEdge& e : t6.pslg.edges)
            d = std::min(d, dist_point_segment(v, t6.pslg.vertices[e.a], t6.pslg.vertices[e.b]));
        CHECK((inside || d < 1e-7));
    }

    // cross at R=5: four caps (one per tube), each of width 2
    TruncatedDomain c5 = truncate(build_infinite_cross(), 5.0);
    int caps = 0;
    for (const PslgEdge& e : c5.pslg.edges) {
        Point2 a = c5.pslg.vertices[e.a], b = c5.pslg.vertices[e.b];
        for (const TubeSpec& tube : build_infinite_cross().tubes) {
            if (std::abs(tube_axis_coord(tube, a) - 5.0) < 1e-9 &&
                std::abs(tube_axis_coord(tube, b) - 5.0) < 1e-9 &&
                e.marker == EdgeMarker::OuterDirichlet && dist(a, b) > 1.9)
                caps++;
        }
    }
    CHECK(caps == 4);
}

TEST_CASE("perturbation tubes") {
    DomainSpec h = build_hersch_pipe(64);
    DomainSpec p = attach_perturbation_tubes(h, 3, 0.05);
    CHECK(p.tubes.size() == h.tubes.size() + 4);
    std::vector<double> centers;
    for (const TubeSpec& t : p.tubes)
        if (t.sigma) centers.push_back(t.mouth_mid().x);
    REQUIRE(centers.size() == 4);
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(2.0));
    CHECK(centers[1] == doctest::Approx(2.0 + 1.0 / 3.0));
    CHECK(centers[2] == doctest::Approx(2.0 + 2.0 / 3.0));
    CHECK(centers[3] == doctest::Approx(3.0));
    for (const TubeSpec& t : p.tubes) {
        if (!t.sigma) continue;
        CHECK(t.width == doctest::Approx(0.1));
        CHECK(t.length == doctest::Approx(1.0));
    }
    CHECK_THROWS(attach_perturbation_tubes(h, 1, 0.5));   // eps >= 1/(2n)
    CHECK_THROWS(attach_perturbation_tubes(h, 2, 0.25));
    CHECK_THROWS(attach_perturbation_tubes(h, 1, -0.1));
}

TEST_CASE("perturbed inradius (1+eps^2)/2, independent of n") {
    DomainSpec h = build_hersch_pipe(64);
    double grid = 0.02;
    double r1 = inradius(attach_perturbation_tubes(h, 1, 0.1), grid).value;
    CHECK(r1 == doctest::Approx(0.505).epsilon(0.03));
    double eps = 0.05;
    double expect = (1.0 + eps * eps) / 2.0;
    double ra = inradius(attach_perturbation_tubes(h, 1, eps), grid).value;
    double rb = inradius(attach_perturbation_tubes(h, 2, eps), grid).value;
    double rc = inradius(attach_perturbation_tubes(h, 4, eps), grid).value;
    CHECK(ra == doctest::Approx(expect).epsilon(0.02));
    CHECK(std::abs(ra - rb) < 2e-3);
    CHECK(std::abs(ra - rc) < 2e-3);
}

TEST_CASE("inradius of a plain polygonized disk") {
    DomainSpec d;
    d.name = "disk";
    int n = 128;
    for (int i = 0; i < n; ++i) {
        double a = 2.0 * kPi * i / n;
        d.core.vertices.push_back({std::cos(a), std::sin(a)});
    }
    for (int i = 0; i < n; ++i)
        d.core.edges.push_back({i, (i + 1) % n, EdgeMarker::OuterDirichlet, -1});
    InradiusResult r = inradius(d, 0.05);
    CHECK(r.value == doctest::Approx(1.0).epsilon(0.01));
    CHECK_THROWS(inradius(d, -1.0));
}

TEST_CASE("slit disk carries a slit to the center") {
    DomainSpec s = build_slit_disk(64);
    auto chains = slit_chains(s);
    REQUIRE(chains.size() == 1);
    bool has_origin = false, has_rim = false;
    for (const Point2& p : chains[0]) {
        if (norm(p) < 1e-12) has_origin = true;
        if (std::abs(norm(p) - 1.0) < 1e-12) has_rim = true;
    }
    CHECK(has_origin);
    CHECK(has_rim);
    InradiusResult r = inradius(s, 0.02);
    CHECK(r.value == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("json round trip") {
    DomainSpec h = attach_perturbation_tubes(build_hersch_pipe(64), 2, 0.05);
    std::string text = domain_to_json(h);
    DomainSpec back = domain_from_json(text);
    CHECK(back.name == h.name);
    REQUIRE(back.core.vertices.size() == h.core.vertices.size());
    REQUIRE(back.tubes.size() == h.tubes.size());
    for (size_t i = 0; i < h.tubes.size(); ++i) {
        CHECK(back.tubes[i].width == doctest::Approx(h.tubes[i].width));
        CHECK(back.tubes[i].infinite() == h.tubes[i].infinite());
        CHECK(back.tubes[i].sigma == h.tubes[i].sigma);
    }
    REQUIRE(back.core.edges.size() == h.core.edges.size());
    for (size_t i = 0; i < h.core.edges.size(); ++i)
        CHECK(back.core.edges[i].marker == h.core.edges[i].marker);
}
