#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "lrbms/grid.hpp"

using namespace lrbms;

TEST_CASE("single cell counts") {
  const NestedGrid grid(1, 1);
  CHECK(grid.cells_per_dim() == 1);
  CHECK(grid.num_coarse() == 1);
  CHECK(grid.num_fine() == 2);
  CHECK(grid.num_vertices() == 4);
  CHECK(grid.num_faces() == 5);

  int interior = 0, boundary = 0;
  for (std::size_t e = 0; e < grid.num_faces(); ++e)
    (grid.face(static_cast<int>(e)).boundary ? boundary : interior)++;
  CHECK(interior == 1);
  CHECK(boundary == 4);

  // The diagonal face couples the two triangles.
  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    const FineFace& f = grid.face(static_cast<int>(e));
    if (f.boundary) continue;
    CHECK(((f.inside == 0 && f.outside == 1) || (f.inside == 1 && f.outside == 0)));
    CHECK(f.length == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("entity counts against an edge set oracle") {
  for (const auto& [nc, nf] : {std::pair{1, 4}, std::pair{2, 2}, std::pair{4, 8}, std::pair{3, 5}}) {
    const NestedGrid grid(nc, nf);
    const int n = nc * nf;
    CHECK(grid.cells_per_dim() == n);
    CHECK(grid.num_vertices() == static_cast<std::size_t>((n + 1) * (n + 1)));
    CHECK(grid.num_fine() == static_cast<std::size_t>(2 * n * n));
    CHECK(grid.num_coarse() == static_cast<std::size_t>(nc * nc));

    // Collect undirected edges from the triangles; they must match the faces
    // one to one, and an edge is on the boundary iff it has one incident cell.
    std::map<std::pair<int, int>, int> edges;
    for (std::size_t t = 0; t < grid.num_fine(); ++t) {
      const FineTriangle& tri = grid.fine(static_cast<int>(t));
      for (int k = 0; k < 3; ++k) {
        const int a = tri.vertices[k];
        const int b = tri.vertices[(k + 1) % 3];
        ++edges[{std::min(a, b), std::max(a, b)}];
      }
    }
    CHECK(edges.size() == grid.num_faces());
    std::size_t boundary_edges = 0;
    for (const auto& [edge, count] : edges)
      if (count == 1) ++boundary_edges;
    std::size_t boundary_faces = 0;
    for (std::size_t e = 0; e < grid.num_faces(); ++e) {
      const FineFace& f = grid.face(static_cast<int>(e));
      if (f.boundary) ++boundary_faces;
      const auto key = std::pair{std::min(f.vertices[0], f.vertices[1]),
                                 std::max(f.vertices[0], f.vertices[1])};
      CHECK(edges.count(key) == 1);
      CHECK(edges.at(key) == (f.boundary ? 1 : 2));
    }
    CHECK(boundary_faces == boundary_edges);
  }
  CHECK(NestedGrid(1, 4).num_faces() == 56);
}

TEST_CASE("triangle geometry") {
  const NestedGrid grid(2, 4);
  const double h = 1.0 / 8.0;
  double area = 0.0;
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const FineTriangle& tri = grid.fine(static_cast<int>(t));
    CHECK(tri.area == doctest::Approx(h * h / 2.0).epsilon(1e-14));
    area += tri.area;
    const Vec2 c = (1.0 / 3.0) * (tri.corner[0] + tri.corner[1] + tri.corner[2]);
    CHECK(norm(c - tri.centroid) < 1e-15);
    for (int k = 0; k < 3; ++k) {
      CHECK(norm(grid.vertex(tri.vertices[k]) - tri.corner[k]) == 0.0);
      CHECK(grid.local_vertex(static_cast<int>(t), tri.vertices[k]) == k);
      // Nodal property of the basis gradients: linear on the triangle, one at
      // the own corner, zero at the others.
      for (int j = 0; j < 3; ++j) {
        const double value =
            1.0 / 3.0 + dot(tri.basis_gradient[k], tri.corner[j] - tri.centroid);
        CHECK(value == doctest::Approx(k == j ? 1.0 : 0.0).epsilon(1e-13));
      }
    }
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("face orientation and signs") {
  const NestedGrid grid(2, 3);
  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    const FineFace& f = grid.face(static_cast<int>(e));
    CHECK(norm(f.normal) == doctest::Approx(1.0).epsilon(1e-14));
    const Vec2 edge = grid.vertex(f.vertices[1]) - grid.vertex(f.vertices[0]);
    CHECK(std::abs(dot(f.normal, edge)) < 1e-14);

    const FineTriangle& in = grid.fine(f.inside);
    CHECK(dot(f.normal, f.midpoint - in.centroid) > 0.0);
    if (!f.boundary) {
      const FineTriangle& out = grid.fine(f.outside);
      CHECK(dot(f.normal, out.centroid - in.centroid) > 0.0);
    }
  }
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const FineTriangle& tri = grid.fine(static_cast<int>(t));
    for (int k = 0; k < 3; ++k) {
      const FineFace& f = grid.face(tri.faces[k]);
      CHECK((f.inside == static_cast<int>(t) || f.outside == static_cast<int>(t)));
      CHECK(tri.face_sign[k] == (f.inside == static_cast<int>(t) ? 1 : -1));
      // faces[k] is opposite corner k, so corner k is not one of its vertices.
      CHECK(f.vertices[0] != tri.vertices[k]);
      CHECK(f.vertices[1] != tri.vertices[k]);
    }
  }
}

TEST_CASE("coarse partition bookkeeping") {
  const NestedGrid grid(2, 4);
  CHECK(grid.num_coarse() == 4);
  CHECK(grid.num_coarse_faces() == 12);
  std::set<int> seen;
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    const CoarseElement& ce = grid.coarse(static_cast<int>(c));
    CHECK(ce.index == static_cast<int>(c));
    CHECK(ce.side == doctest::Approx(0.5));
    CHECK(ce.diameter == doctest::Approx(0.5 * std::sqrt(2.0)));
    CHECK(ce.fine_elements.size() == 32);
    for (int t : ce.fine_elements) {
      CHECK(grid.fine(t).coarse_element == static_cast<int>(c));
      CHECK(seen.insert(t).second);
      // Centroid of every owned triangle lies inside the coarse square.
      const Vec2 x = grid.fine(t).centroid;
      CHECK(x.x > ce.lower.x);
      CHECK(x.x < ce.lower.x + ce.side);
      CHECK(x.y > ce.lower.y);
      CHECK(x.y < ce.lower.y + ce.side);
    }
  }
  CHECK(seen.size() == grid.num_fine());

  for (std::size_t c = 0; c < grid.num_coarse_faces(); ++c) {
    const CoarseFace& cf = grid.coarse_face(static_cast<int>(c));
    double length = 0.0;
    for (int e : cf.fine_faces) {
      const FineFace& f = grid.face(e);
      CHECK(f.coarse_face == static_cast<int>(c));
      CHECK(norm(f.normal - cf.normal) < 1e-14);
      length += f.length;
    }
    CHECK(length == doctest::Approx(cf.length).epsilon(1e-14));
    CHECK(cf.boundary == (cf.outside < 0));
  }

  // Faces strictly inside a coarse element carry no coarse face.
  std::size_t interior_skeleton = 0;
  for (std::size_t e = 0; e < grid.num_faces(); ++e)
    if (grid.face(static_cast<int>(e)).coarse_face >= 0) ++interior_skeleton;
  // 12 coarse faces, 4 fine faces each.
  CHECK(interior_skeleton == 48);
}

TEST_CASE("fine numbering ignores the coarse partition") {
  const NestedGrid a(2, 4);
  const NestedGrid b(4, 2);
  const NestedGrid c(1, 8);
  for (const NestedGrid* other : {&b, &c}) {
    REQUIRE(other->num_fine() == a.num_fine());
    REQUIRE(other->num_faces() == a.num_faces());
    REQUIRE(other->num_vertices() == a.num_vertices());
    for (std::size_t v = 0; v < a.num_vertices(); ++v) {
      CHECK(a.vertex(static_cast<int>(v)).x == other->vertex(static_cast<int>(v)).x);
      CHECK(a.vertex(static_cast<int>(v)).y == other->vertex(static_cast<int>(v)).y);
    }
    for (std::size_t t = 0; t < a.num_fine(); ++t) {
      CHECK(a.fine(static_cast<int>(t)).vertices == other->fine(static_cast<int>(t)).vertices);
      CHECK(a.fine(static_cast<int>(t)).faces == other->fine(static_cast<int>(t)).faces);
      CHECK(a.fine(static_cast<int>(t)).area == other->fine(static_cast<int>(t)).area);
    }
    for (std::size_t e = 0; e < a.num_faces(); ++e) {
      CHECK(a.face(static_cast<int>(e)).vertices == other->face(static_cast<int>(e)).vertices);
      CHECK(a.face(static_cast<int>(e)).inside == other->face(static_cast<int>(e)).inside);
      CHECK(a.face(static_cast<int>(e)).outside == other->face(static_cast<int>(e)).outside);
      CHECK(a.face(static_cast<int>(e)).normal.x == other->face(static_cast<int>(e)).normal.x);
      CHECK(a.face(static_cast<int>(e)).normal.y == other->face(static_cast<int>(e)).normal.y);
    }
  }
}

TEST_CASE("vertex patches") {
  const NestedGrid grid(1, 1);
  // Southwest and northeast corners touch both triangles, the other two one.
  CHECK(grid.vertex_patch(0) == std::vector<int>{0, 1});
  CHECK(grid.vertex_patch(1) == std::vector<int>{0});
  CHECK(grid.vertex_patch(2) == std::vector<int>{1});
  CHECK(grid.vertex_patch(3) == std::vector<int>{0, 1});
  for (int v = 0; v < 4; ++v) CHECK(grid.boundary_vertex(v));

  const NestedGrid fine(2, 2);
  std::size_t references = 0;
  for (std::size_t v = 0; v < fine.num_vertices(); ++v) {
    const auto& patch = fine.vertex_patch(static_cast<int>(v));
    CHECK(std::is_sorted(patch.begin(), patch.end()));
    references += patch.size();
    for (int t : patch) CHECK(fine.local_vertex(t, static_cast<int>(v)) >= 0);
  }
  // Every triangle is referenced exactly three times.
  CHECK(references == 3 * fine.num_fine());
  // Interior vertex (1/4, 1/4) of the 4x4 fine mesh touches six triangles.
  CHECK(fine.vertex_patch(6).size() == 6);
  CHECK_FALSE(fine.boundary_vertex(6));
}

TEST_CASE("quadrature integrates polynomials exactly") {
  const NestedGrid grid(2, 2);

  const auto integrate = [&](int order, auto&& f) {
    double s = 0.0;
    for (std::size_t t = 0; t < grid.num_fine(); ++t)
      for (const QuadPoint& q : triangle_rule(grid, static_cast<int>(t), order))
        s += q.weight * f(q.x);
    return s;
  };

  CHECK(integrate(1, [](Vec2) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(integrate(1, [](Vec2 x) { return x.x; }) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(integrate(2, [](Vec2 x) { return x.x * x.y; }) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(integrate(2, [](Vec2 x) { return x.x * x.x; }) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(integrate(3, [](Vec2 x) { return x.x * x.x * x.x * x.x; }) ==
        doctest::Approx(0.2).epsilon(1e-13));
  CHECK(integrate(3, [](Vec2 x) { return x.x * x.x * x.y * x.y; }) ==
        doctest::Approx(1.0 / 9.0).epsilon(1e-13));

  // Weights are positive and sum to the area for every rule.
  for (int order : {1, 2, 3}) {
    double sum = 0.0;
    for (const QuadPoint& q : triangle_rule(grid, 0, order)) {
      CHECK(q.weight > 0.0);
      sum += q.weight;
    }
    CHECK(sum == doctest::Approx(grid.fine(0).area).epsilon(1e-14));
  }

  CHECK_THROWS(triangle_rule(grid, 0, 0));
  CHECK_THROWS(triangle_rule(grid, 0, 4));
}

TEST_CASE("face quadrature") {
  const NestedGrid grid(1, 2);
  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    for (int order : {1, 2, 3}) {
      double sum = 0.0;
      for (const QuadPoint& q : face_rule(grid, static_cast<int>(e), order)) sum += q.weight;
      CHECK(sum == doctest::Approx(grid.face(static_cast<int>(e)).length).epsilon(1e-14));
    }
    // The two point rule integrates cubics along the face exactly.
    const FineFace& f = grid.face(static_cast<int>(e));
    const Vec2 a = grid.vertex(f.vertices[0]);
    const Vec2 b = grid.vertex(f.vertices[1]);
    const auto cubic = [](Vec2 x) { return std::pow(x.x + 2.0 * x.y, 3); };
    // Exact value by Simpson (exact for cubics with the midpoint refinement).
    const Vec2 m = 0.5 * (a + b);
    const Vec2 am = 0.5 * (a + m), mb = 0.5 * (m + b);
    const double exact =
        (f.length / 12.0) *
        (cubic(a) + 4.0 * cubic(am) + 2.0 * cubic(m) + 4.0 * cubic(mb) + cubic(b));
    double sum = 0.0;
    for (const QuadPoint& q : face_rule(grid, static_cast<int>(e), 2))
      sum += q.weight * cubic(q.x);
    CHECK(sum == doctest::Approx(exact).epsilon(1e-13));
    CHECK(face_rule(grid, static_cast<int>(e), 2).size() == 2);
    CHECK_THROWS(face_rule(grid, static_cast<int>(e), 4));
  }
}

TEST_CASE("grid constructor validation") {
  CHECK_THROWS(NestedGrid(0, 4));
  CHECK_THROWS(NestedGrid(2, 0));
  CHECK_THROWS(NestedGrid(-1, 3));
}
