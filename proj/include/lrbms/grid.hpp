#pragma once

#include <array>
#include <vector>

#include "lrbms/geometry.hpp"

namespace lrbms {

struct CoarseElement {
  int index = -1;
  int ix = 0, iy = 0;
  Vec2 lower;
  double side = 0.0;
  double diameter = 0.0;
  /// Face ids in the order bottom, right, top, left.
  std::array<int, 4> faces{};
  std::vector<int> fine_elements;
};

struct CoarseFace {
  int index = -1;
  Vec2 a, b;
  Vec2 normal;
  double length = 0.0;
  int inside = -1;   // element the normal points away from
  int outside = -1;  // -1 on the domain boundary
  bool boundary = false;
  std::vector<int> fine_faces;
};

struct FineTriangle {
  int index = -1;
  std::array<int, 3> vertices{};
  std::array<Vec2, 3> corner{};
  /// Gradient of the nodal basis function attached to each corner.
  std::array<Vec2, 3> basis_gradient{};
  /// faces[k] is the edge opposite corner k; face_sign[k] is +1 when the stored
  /// face normal points out of this triangle.
  std::array<int, 3> faces{};
  std::array<int, 3> face_sign{};
  int coarse_element = -1;
  double area = 0.0;
  Vec2 centroid;
};

struct FineFace {
  int index = -1;
  std::array<int, 2> vertices{};
  Vec2 midpoint;
  Vec2 normal;  // fixed orientation: from inside towards outside, outward on the boundary
  double length = 0.0;
  int inside = -1;
  int outside = -1;  // -1 on the domain boundary
  bool boundary = false;
  int coarse_face = -1;  // -1 when the face lies strictly inside a coarse element
};

/// Conforming two-level mesh of the unit square: an axis-aligned partition into
/// coarse squares, each refined into 2 * fine_per_dim^2 triangles by splitting
/// subsquares along the southwest-northeast diagonal. Fine entities are numbered
/// independently of the coarse partition, so identical fine meshes obtained from
/// different coarse partitions carry identical indices.
class NestedGrid {
 public:
  NestedGrid(int coarse_per_dim, int fine_per_dim);

  int coarse_per_dim() const { return coarse_per_dim_; }
  int fine_per_dim() const { return fine_per_dim_; }
  /// Fine cells per dimension over the whole domain.
  int cells_per_dim() const { return coarse_per_dim_ * fine_per_dim_; }

  std::size_t num_coarse() const { return coarse_.size(); }
  std::size_t num_fine() const { return fine_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  std::size_t num_coarse_faces() const { return coarse_faces_.size(); }
  std::size_t num_vertices() const { return vertices_.size(); }

  const CoarseElement& coarse(int t) const { return coarse_[t]; }
  const FineTriangle& fine(int t) const { return fine_[t]; }
  const FineFace& face(int e) const { return faces_[e]; }
  const CoarseFace& coarse_face(int e) const { return coarse_faces_[e]; }
  Vec2 vertex(int v) const { return vertices_[v]; }

  /// Fine triangles sharing the vertex, ascending.
  const std::vector<int>& vertex_patch(int v) const { return vertex_patch_[v]; }
  bool boundary_vertex(int v) const { return boundary_vertex_[v]; }

  /// Local index of a global vertex within a fine triangle, -1 if absent.
  int local_vertex(int t, int v) const;

 private:
  int coarse_per_dim_;
  int fine_per_dim_;
  std::vector<Vec2> vertices_;
  std::vector<CoarseElement> coarse_;
  std::vector<CoarseFace> coarse_faces_;
  std::vector<FineTriangle> fine_;
  std::vector<FineFace> faces_;
  std::vector<std::vector<int>> vertex_patch_;
  std::vector<bool> boundary_vertex_;
};

struct QuadPoint {
  Vec2 x;
  double weight = 0.0;
};

/// Volume rule on a fine triangle, exact for polynomials of the given total
/// degree. Supported orders: 1 (centroid), 2 (edge midpoints), 3 (six-point
/// rule with positive weights). Weights sum to the triangle area.
std::vector<QuadPoint> triangle_rule(const NestedGrid& grid, int t, int order);

/// Rule on the reference triangle (0,0)-(1,0)-(0,1); weights sum to 1/2.
std::vector<QuadPoint> reference_triangle_rule(int order);

/// Line rule on a fine face: order 1 is the midpoint rule, orders 2 and 3 the
/// two-point Gauss rule. Weights sum to the face length.
std::vector<QuadPoint> face_rule(const NestedGrid& grid, int e, int order);

}  // namespace lrbms
