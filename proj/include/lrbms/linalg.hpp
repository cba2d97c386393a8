#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrbms {

using Vector = std::vector<double>;

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
/// y += s * x
void axpy(double s, const Vector& x, Vector& y);
void scale(double s, Vector& x);

/// Compressed sparse row matrix. Built through SparseBuilder; immutable afterwards.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_.size(); }

  void multiply(const Vector& x, Vector& y) const;
  Vector operator*(const Vector& x) const;

  double max_abs() const;
  Vector diagonal() const;

  /// Largest |A(i,j) - A(j,i)|; zero for exactly symmetric storage.
  double symmetry_defect() const;

  /// Principal submatrix for the given strictly increasing index set.
  SparseMatrix submatrix(std::span<const int> indices) const;

  /// sum_k weights[k] * terms[k]. All terms must share row/col dimensions.
  static SparseMatrix weighted_sum(std::span<const SparseMatrix* const> terms,
                                   std::span<const double> weights);

  bool same_pattern(const SparseMatrix& other) const;

  std::span<const int> row_cols(std::size_t i) const;
  std::span<const double> row_values(std::size_t i) const;

 private:
  friend class SparseBuilder;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;
};

/// Triplet accumulator; duplicate (row, col) pairs are summed in insertion order.
class SparseBuilder {
 public:
  SparseBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  void add(int row, int col, double value) { trips_.push_back({row, col, value}); }

  SparseMatrix compress() const;

 private:
  struct Triplet {
    int row;
    int col;
    double value;
  };
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Triplet> trips_;
};

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Set when a non-positive curvature direction was met; the matrix is not SPD.
  bool indefinite = false;
};

/// Jacobi-preconditioned conjugate gradients. A zero right-hand side returns the
/// zero vector in zero iterations. The result always carries the true relative
/// residual so callers can report failures meaningfully.
CgResult cg_solve(const SparseMatrix& a, const Vector& b, double rel_tol, int max_iter);

/// Dense row-major matrix for reduced systems and estimator blocks.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void symmetrize();

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian elimination with partial pivoting. Throws SingularMatrixError when a
/// pivot falls below 1e-14 times the largest entry of a.
Vector dense_solve(DenseMatrix a, Vector b);

/// Maintains a set of vectors orthonormal with respect to an SPD matrix inner
/// product (gram == nullptr means the Euclidean one). Extension uses modified
/// Gram-Schmidt with one reorthogonalization pass; candidates whose remainder
/// drops below drop_tol times their original norm are rejected.
class OrthonormalSet {
 public:
  explicit OrthonormalSet(const SparseMatrix* gram) : gram_(gram) {}

  bool extend(Vector candidate, double drop_tol);

  std::size_t size() const { return vecs_.size(); }
  const std::vector<Vector>& vectors() const { return vecs_; }
  double inner(const Vector& a, const Vector& b) const;

 private:
  const SparseMatrix* gram_;
  std::vector<Vector> vecs_;
  std::vector<Vector> gvecs_;  // gram * vecs_[j], cached
};

/// Orthonormalizes a sequence in order, dropping near-dependent members.
std::vector<Vector> orthonormalize(const std::vector<Vector>& vectors,
                                   const SparseMatrix* gram, double drop_tol);

/// Matrix Market coordinate output (1-based indices, general symmetry).
void write_matrix_market(const SparseMatrix& a, const std::string& path);

}  // namespace lrbms
