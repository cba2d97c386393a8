#include "lrbms/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace lrbms {

double dot(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

void axpy(double s, const Vector& x, Vector& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] += s * x[i];
}

void scale(double s, Vector& x) {
  for (auto& v : x)
    v *= s;
}

void SparseMatrix::multiply(const Vector& x, Vector& y) const {
  if (x.size() != cols_)
    throw std::invalid_argument("SparseMatrix::multiply: dimension mismatch");
  y.assign(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      s += val_[k] * x[col_[k]];
    y[i] = s;
  }
}

Vector SparseMatrix::operator*(const Vector& x) const {
  Vector y;
  multiply(x, y);
  return y;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : val_)
    m = std::max(m, std::abs(v));
  return m;
}

Vector SparseMatrix::diagonal() const {
  Vector d(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (static_cast<std::size_t>(col_[k]) == i)
        d[i] = val_[k];
  return d;
}

double SparseMatrix::symmetry_defect() const {
  double defect = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t j = static_cast<std::size_t>(col_[k]);
      // Binary search for (j, i).
      double mirror = 0.0;
      const auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[j]);
      const auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[j + 1]);
      const auto it = std::lower_bound(begin, end, static_cast<int>(i));
      if (it != end && *it == static_cast<int>(i))
        mirror = val_[static_cast<std::size_t>(it - col_.begin())];
      defect = std::max(defect, std::abs(val_[k] - mirror));
    }
  }
  return defect;
}

SparseMatrix SparseMatrix::submatrix(std::span<const int> indices) const {
  std::vector<int> where(cols_, -1);
  for (std::size_t l = 0; l < indices.size(); ++l)
    where[indices[l]] = static_cast<int>(l);
  SparseBuilder builder(indices.size(), indices.size());
  for (std::size_t l = 0; l < indices.size(); ++l) {
    const std::size_t i = static_cast<std::size_t>(indices[l]);
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int lj = where[col_[k]];
      if (lj >= 0)
        builder.add(static_cast<int>(l), lj, val_[k]);
    }
  }
  return builder.compress();
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && row_ptr_ == other.row_ptr_ && col_ == other.col_;
}

SparseMatrix SparseMatrix::weighted_sum(std::span<const SparseMatrix* const> terms,
                                        std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw std::invalid_argument("SparseMatrix::weighted_sum: empty or mismatched input");
  const SparseMatrix& first = *terms[0];
  bool shared = true;
  for (std::size_t k = 1; k < terms.size(); ++k)
    shared = shared && first.same_pattern(*terms[k]);
  if (shared) {
    SparseMatrix out = first;
    for (auto& v : out.val_)
      v = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k)
      for (std::size_t n = 0; n < out.val_.size(); ++n)
        out.val_[n] += weights[k] * terms[k]->val_[n];
    return out;
  }
  SparseBuilder builder(first.rows(), first.cols());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const SparseMatrix& a = *terms[k];
    if (a.rows() != first.rows() || a.cols() != first.cols())
      throw std::invalid_argument("SparseMatrix::weighted_sum: dimension mismatch");
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t n = a.row_ptr_[i]; n < a.row_ptr_[i + 1]; ++n)
        builder.add(static_cast<int>(i), a.col_[n], weights[k] * a.val_[n]);
  }
  return builder.compress();
}

std::span<const int> SparseMatrix::row_cols(std::size_t i) const {
  return {col_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

std::span<const double> SparseMatrix::row_values(std::size_t i) const {
  return {val_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

SparseMatrix SparseBuilder::compress() const {
  std::vector<std::size_t> order(trips_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable order keeps duplicate accumulation deterministic.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (trips_[a].row != trips_[b].row)
      return trips_[a].row < trips_[b].row;
    return trips_[a].col < trips_[b].col;
  });
  SparseMatrix m;
  m.rows_ = rows_;
  m.cols_ = cols_;
  m.row_ptr_.assign(rows_ + 1, 0);
  for (std::size_t n = 0; n < order.size();) {
    const auto& t = trips_[order[n]];
    if (t.row < 0 || t.col < 0 || static_cast<std::size_t>(t.row) >= rows_ ||
        static_cast<std::size_t>(t.col) >= cols_)
      throw std::invalid_argument("SparseBuilder: index out of range");
    double v = 0.0;
    std::size_t n2 = n;
    while (n2 < order.size() && trips_[order[n2]].row == t.row && trips_[order[n2]].col == t.col) {
      v += trips_[order[n2]].value;
      ++n2;
    }
    m.col_.push_back(t.col);
    m.val_.push_back(v);
    ++m.row_ptr_[static_cast<std::size_t>(t.row) + 1];
    n = n2;
  }
  for (std::size_t i = 0; i < rows_; ++i)
    m.row_ptr_[i + 1] += m.row_ptr_[i];
  return m;
}

CgResult cg_solve(const SparseMatrix& a, const Vector& b, double rel_tol, int max_iter) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("cg_solve: dimension mismatch");
  CgResult result;
  result.x.assign(b.size(), 0.0);
  const double norm_b = norm2(b);
  if (norm_b == 0.0) {
    result.converged = true;
    return result;
  }
  Vector diag = a.diagonal();
  for (auto& d : diag)
    d = (d > 0.0) ? 1.0 / d : 1.0;

  Vector r = b;  // x0 = 0
  Vector z(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    z[i] = diag[i] * r[i];
  Vector p = z;
  Vector ap(b.size());
  double rz = dot(r, z);

  // Progress is judged by the true residual. Whenever the recurrence claims
  // convergence (and every 1000 iterations) the true residual is recomputed
  // and the iteration restarts from the current point. Three consecutive
  // confirmations with less than ten percent improvement mean the rounding
  // floor is reached and further iterations only accumulate drift.
  Vector best_x = result.x;
  double best_rel = 1.0;
  double last_checked = std::numeric_limits<double>::infinity();
  int strikes = 0;
  int iter = 0;
  while (iter < max_iter) {
    a.multiply(p, ap);
    const double p_ap = dot(p, ap);
    if (!(p_ap > 0.0)) {
      result.indefinite = true;
      break;
    }
    const double alpha = rz / p_ap;
    axpy(alpha, p, result.x);
    axpy(-alpha, ap, r);
    ++iter;
    const double rec_rel = norm2(r) / norm_b;
    if (rec_rel <= rel_tol || iter % 1000 == 0) {
      Vector true_r = a * result.x;
      for (std::size_t i = 0; i < b.size(); ++i)
        true_r[i] = b[i] - true_r[i];
      const double true_rel = norm2(true_r) / norm_b;
      if (true_rel < best_rel) {
        best_rel = true_rel;
        best_x = result.x;
      }
      if (true_rel <= rel_tol) break;
      if (true_rel <= 0.9 * last_checked)
        strikes = 0;
      else if (++strikes >= 3)
        break;
      last_checked = true_rel;
      r = std::move(true_r);
      for (std::size_t i = 0; i < b.size(); ++i)
        z[i] = diag[i] * r[i];
      p = z;
      rz = dot(r, z);
      continue;
    }
    for (std::size_t i = 0; i < b.size(); ++i)
      z[i] = diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < b.size(); ++i)
      p[i] = z[i] + beta * p[i];
  }

  Vector true_r = a * result.x;
  for (std::size_t i = 0; i < b.size(); ++i)
    true_r[i] = b[i] - true_r[i];
  double final_rel = norm2(true_r) / norm_b;
  if (best_rel < final_rel) {
    result.x = std::move(best_x);
    final_rel = best_rel;
  }
  result.iterations = iter;
  result.relative_residual = final_rel;
  result.converged = !result.indefinite && final_rel <= rel_tol;
  return result;
}

void DenseMatrix::symmetrize() {
  assert(rows_ == cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j) {
      const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
}

Vector dense_solve(DenseMatrix a, Vector b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n)
    throw std::invalid_argument("dense_solve: dimension mismatch");
  double max_entry = 0.0;
  for (double v : a.data())
    max_entry = std::max(max_entry, std::abs(v));
  std::vector<std::size_t> piv(n);
  std::iota(piv.begin(), piv.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(best, k)))
        best = i;
    if (std::abs(a(best, k)) < 1e-14 * max_entry)
      throw SingularMatrixError("dense_solve: matrix is singular to working precision");
    if (best != k) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(a(k, j), a(best, j));
      std::swap(b[k], b[best]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j)
        a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j)
      s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

double OrthonormalSet::inner(const Vector& a, const Vector& b) const {
  if (gram_ == nullptr)
    return dot(a, b);
  return dot(a, *gram_ * b);
}

bool OrthonormalSet::extend(Vector candidate, double drop_tol) {
  const double norm0 = std::sqrt(std::max(0.0, inner(candidate, candidate)));
  if (norm0 == 0.0)
    return false;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < vecs_.size(); ++j) {
      const double c = gram_ ? dot(candidate, gvecs_[j]) : dot(candidate, vecs_[j]);
      axpy(-c, vecs_[j], candidate);
    }
  }
  const double remainder = std::sqrt(std::max(0.0, inner(candidate, candidate)));
  if (remainder < drop_tol * norm0)
    return false;
  scale(1.0 / remainder, candidate);
  if (gram_)
    gvecs_.push_back(*gram_ * candidate);
  vecs_.push_back(std::move(candidate));
  return true;
}

std::vector<Vector> orthonormalize(const std::vector<Vector>& vectors,
                                   const SparseMatrix* gram, double drop_tol) {
  OrthonormalSet set(gram);
  for (const auto& v : vectors)
    set.extend(v, drop_tol);
  return set.vectors();
}

void write_matrix_market(const SparseMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%zu %d %.17g\n", i + 1, cols[k] + 1, vals[k]);
      out << buf;
    }
  }
}

}  // namespace lrbms
