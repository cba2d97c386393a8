#include "lrbms/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace lrbms {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace

NestedGrid::NestedGrid(int coarse_per_dim, int fine_per_dim)
    : coarse_per_dim_(coarse_per_dim), fine_per_dim_(fine_per_dim) {
  if (coarse_per_dim < 1 || fine_per_dim < 1)
    throw std::invalid_argument("NestedGrid: subdivision counts must be positive");

  const int nc = coarse_per_dim;
  const int nf = fine_per_dim;
  const int n = nc * nf;  // fine cells per dimension
  const double h = 1.0 / n;
  const double hc = 1.0 / nc;

  // Vertices on the (n+1)^2 lattice, row major.
  vertices_.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      vertices_.push_back({i * h, j * h});
  const auto vid = [n](int i, int j) { return j * (n + 1) + i; };

  boundary_vertex_.assign(vertices_.size(), false);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      if (i == 0 || i == n || j == 0 || j == n)
        boundary_vertex_[vid(i, j)] = true;

  // Coarse squares, row major.
  coarse_.resize(static_cast<std::size_t>(nc) * nc);
  for (int cj = 0; cj < nc; ++cj) {
    for (int ci = 0; ci < nc; ++ci) {
      CoarseElement& c = coarse_[cj * nc + ci];
      c.index = cj * nc + ci;
      c.ix = ci;
      c.iy = cj;
      c.lower = {ci * hc, cj * hc};
      c.side = hc;
      c.diameter = hc * kSqrt2;
    }
  }

  // Coarse faces: horizontal ones first (between rows), then vertical ones.
  const auto coarse_h = [nc](int i, int j) { return j * nc + i; };
  const int num_coarse_h = nc * (nc + 1);
  const auto coarse_v = [nc, num_coarse_h](int i, int j) { return num_coarse_h + i * nc + j; };
  coarse_faces_.resize(static_cast<std::size_t>(2) * nc * (nc + 1));
  for (int j = 0; j <= nc; ++j) {
    for (int i = 0; i < nc; ++i) {
      CoarseFace& f = coarse_faces_[coarse_h(i, j)];
      f.index = coarse_h(i, j);
      f.a = {i * hc, j * hc};
      f.b = {(i + 1) * hc, j * hc};
      f.length = hc;
      if (j == 0) {
        f.normal = {0.0, -1.0};
        f.inside = i;
        f.boundary = true;
      } else if (j == nc) {
        f.normal = {0.0, 1.0};
        f.inside = (nc - 1) * nc + i;
        f.boundary = true;
      } else {
        f.normal = {0.0, 1.0};
        f.inside = (j - 1) * nc + i;
        f.outside = j * nc + i;
      }
    }
  }
  for (int i = 0; i <= nc; ++i) {
    for (int j = 0; j < nc; ++j) {
      CoarseFace& f = coarse_faces_[coarse_v(i, j)];
      f.index = coarse_v(i, j);
      f.a = {i * hc, j * hc};
      f.b = {i * hc, (j + 1) * hc};
      f.length = hc;
      if (i == 0) {
        f.normal = {-1.0, 0.0};
        f.inside = j * nc;
        f.boundary = true;
      } else if (i == nc) {
        f.normal = {1.0, 0.0};
        f.inside = j * nc + (nc - 1);
        f.boundary = true;
      } else {
        f.normal = {1.0, 0.0};
        f.inside = j * nc + (i - 1);
        f.outside = j * nc + i;
      }
    }
  }
  for (int cj = 0; cj < nc; ++cj)
    for (int ci = 0; ci < nc; ++ci)
      coarse_[cj * nc + ci].faces = {coarse_h(ci, cj), coarse_v(ci + 1, cj),
                                     coarse_h(ci, cj + 1), coarse_v(ci, cj)};

  // Fine triangles: cell (i, j) splits along its southwest-northeast diagonal
  // into a lower triangle (SW, SE, NE) and an upper one (SW, NE, NW).
  fine_.resize(static_cast<std::size_t>(2) * n * n);
  const auto cell = [n](int i, int j) { return j * n + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = cell(i, j);
      const int sw = vid(i, j), se = vid(i + 1, j), ne = vid(i + 1, j + 1), nw = vid(i, j + 1);
      FineTriangle& lo = fine_[2 * c];
      lo.index = 2 * c;
      lo.vertices = {sw, se, ne};
      FineTriangle& up = fine_[2 * c + 1];
      up.index = 2 * c + 1;
      up.vertices = {sw, ne, nw};
      const int coarse_id = (j / nf) * nc + (i / nf);
      lo.coarse_element = coarse_id;
      up.coarse_element = coarse_id;
      coarse_[coarse_id].fine_elements.push_back(2 * c);
      coarse_[coarse_id].fine_elements.push_back(2 * c + 1);
    }
  }
  for (FineTriangle& t : fine_) {
    for (int k = 0; k < 3; ++k)
      t.corner[k] = vertices_[t.vertices[k]];
    const Vec2 e1 = t.corner[1] - t.corner[0];
    const Vec2 e2 = t.corner[2] - t.corner[0];
    const double doubled = cross(e1, e2);
    t.area = 0.5 * doubled;
    t.centroid = (1.0 / 3.0) * (t.corner[0] + t.corner[1] + t.corner[2]);
    for (int k = 0; k < 3; ++k)
      t.basis_gradient[k] = (1.0 / doubled) * perp(t.corner[(k + 2) % 3] - t.corner[(k + 1) % 3]);
  }

  // Fine faces: horizontal, vertical, diagonal, in that order.
  const int num_h = n * (n + 1);
  const int num_v = n * (n + 1);
  const auto fid_h = [n](int i, int j) { return j * n + i; };
  const auto fid_v = [n, num_h](int i, int j) { return num_h + i * n + j; };
  const auto fid_d = [num_h, num_v](int c) { return num_h + num_v + c; };
  faces_.resize(static_cast<std::size_t>(num_h + num_v) + static_cast<std::size_t>(n) * n);

  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < n; ++i) {
      FineFace& f = faces_[fid_h(i, j)];
      f.index = fid_h(i, j);
      f.vertices = {vid(i, j), vid(i + 1, j)};
      f.length = h;
      if (j == 0) {
        f.inside = 2 * cell(i, 0);
        f.normal = {0.0, -1.0};
        f.boundary = true;
      } else if (j == n) {
        f.inside = 2 * cell(i, n - 1) + 1;
        f.normal = {0.0, 1.0};
        f.boundary = true;
      } else {
        f.inside = 2 * cell(i, j - 1) + 1;
        f.outside = 2 * cell(i, j);
        f.normal = {0.0, 1.0};
      }
      if (j % nf == 0)
        f.coarse_face = coarse_h(i / nf, j / nf);
    }
  }
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j < n; ++j) {
      FineFace& f = faces_[fid_v(i, j)];
      f.index = fid_v(i, j);
      f.vertices = {vid(i, j), vid(i, j + 1)};
      f.length = h;
      if (i == 0) {
        f.inside = 2 * cell(0, j) + 1;
        f.normal = {-1.0, 0.0};
        f.boundary = true;
      } else if (i == n) {
        f.inside = 2 * cell(n - 1, j);
        f.normal = {1.0, 0.0};
        f.boundary = true;
      } else {
        f.inside = 2 * cell(i - 1, j);
        f.outside = 2 * cell(i, j) + 1;
        f.normal = {1.0, 0.0};
      }
      if (i % nf == 0)
        f.coarse_face = coarse_v(i / nf, j / nf);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = cell(i, j);
      FineFace& f = faces_[fid_d(c)];
      f.index = fid_d(c);
      f.vertices = {vid(i, j), vid(i + 1, j + 1)};
      f.length = h * kSqrt2;
      f.inside = 2 * c;
      f.outside = 2 * c + 1;
      f.normal = {-1.0 / kSqrt2, 1.0 / kSqrt2};
    }
  }
  for (FineFace& f : faces_)
    f.midpoint = 0.5 * (vertices_[f.vertices[0]] + vertices_[f.vertices[1]]);

  // Attach faces to triangles, slot k opposite corner k.
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = cell(i, j);
      FineTriangle& lo = fine_[2 * c];
      lo.faces = {fid_v(i + 1, j), fid_d(c), fid_h(i, j)};
      FineTriangle& up = fine_[2 * c + 1];
      up.faces = {fid_h(i, j + 1), fid_v(i, j), fid_d(c)};
      for (FineTriangle* t : {&lo, &up})
        for (int k = 0; k < 3; ++k)
          t->face_sign[k] = (faces_[t->faces[k]].inside == t->index) ? 1 : -1;
    }
  }

  // Fine faces carried by each coarse face.
  for (int j = 0; j <= nc; ++j)
    for (int i = 0; i < nc; ++i)
      for (int k = 0; k < nf; ++k)
        coarse_faces_[coarse_h(i, j)].fine_faces.push_back(fid_h(i * nf + k, j * nf));
  for (int i = 0; i <= nc; ++i)
    for (int j = 0; j < nc; ++j)
      for (int k = 0; k < nf; ++k)
        coarse_faces_[coarse_v(i, j)].fine_faces.push_back(fid_v(i * nf, j * nf + k));

  vertex_patch_.assign(vertices_.size(), {});
  for (const FineTriangle& t : fine_)
    for (int v : t.vertices)
      vertex_patch_[v].push_back(t.index);
}

int NestedGrid::local_vertex(int t, int v) const {
  const FineTriangle& tri = fine_[t];
  for (int k = 0; k < 3; ++k)
    if (tri.vertices[k] == v)
      return k;
  return -1;
}

namespace {

struct BaryPoint {
  double l0, l1, l2, weight;  // weight relative to the triangle area
};

std::vector<BaryPoint> barycentric_rule(int order) {
  switch (order) {
    case 1:
      return {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0}};
    case 2:
      return {{0.5, 0.5, 0.0, 1.0 / 3.0},
              {0.0, 0.5, 0.5, 1.0 / 3.0},
              {0.5, 0.0, 0.5, 1.0 / 3.0}};
    case 3: {
      // Six-point rule, exact through degree 4; all weights positive.
      const double a1 = 0.445948490915965;
      const double w1 = 0.223381589678011;
      const double a2 = 0.091576213509771;
      const double w2 = 0.109951743655322;
      return {{a1, a1, 1.0 - 2.0 * a1, w1}, {a1, 1.0 - 2.0 * a1, a1, w1},
              {1.0 - 2.0 * a1, a1, a1, w1}, {a2, a2, 1.0 - 2.0 * a2, w2},
              {a2, 1.0 - 2.0 * a2, a2, w2}, {1.0 - 2.0 * a2, a2, a2, w2}};
    }
    default:
      throw std::invalid_argument("triangle_rule: unsupported order");
  }
}

}  // namespace

std::vector<QuadPoint> triangle_rule(const NestedGrid& grid, int t, int order) {
  const FineTriangle& tri = grid.fine(t);
  std::vector<QuadPoint> rule;
  for (const BaryPoint& b : barycentric_rule(order)) {
    QuadPoint q;
    q.x = b.l0 * tri.corner[0] + b.l1 * tri.corner[1] + b.l2 * tri.corner[2];
    q.weight = b.weight * tri.area;
    rule.push_back(q);
  }
  return rule;
}

std::vector<QuadPoint> reference_triangle_rule(int order) {
  const Vec2 p0{0.0, 0.0}, p1{1.0, 0.0}, p2{0.0, 1.0};
  std::vector<QuadPoint> rule;
  for (const BaryPoint& b : barycentric_rule(order)) {
    QuadPoint q;
    q.x = b.l0 * p0 + b.l1 * p1 + b.l2 * p2;
    q.weight = b.weight * 0.5;
    rule.push_back(q);
  }
  return rule;
}

std::vector<QuadPoint> face_rule(const NestedGrid& grid, int e, int order) {
  const FineFace& f = grid.face(e);
  const Vec2 a = grid.vertex(f.vertices[0]);
  const Vec2 b = grid.vertex(f.vertices[1]);
  if (order == 1)
    return {{f.midpoint, f.length}};
  if (order == 2 || order == 3) {
    const double offset = 0.5 / std::sqrt(3.0);
    const Vec2 d = b - a;
    return {{f.midpoint - offset * d, 0.5 * f.length},
            {f.midpoint + offset * d, 0.5 * f.length}};
  }
  throw std::invalid_argument("face_rule: unsupported order");
}

}  // namespace lrbms
