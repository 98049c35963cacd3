#pragma once
// Sparse/dense linear algebra kernels: CSR storage, sparse LU solves, dense
// symmetric eigendecomposition. Eigen does the numerical heavy lifting; the
// structs here are the plain-array containers the rest of the library uses.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

namespace supgrom {

// Thrown when a linear system cannot be solved (exit code 3 in the CLI).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Triplet {
  int row;
  int col;
  double value;
};

// Compressed sparse row, 0-based indices, columns sorted and unique per row.
struct CsrMatrix {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<int> row_ptr;  // size n_rows + 1
  std::vector<int> col_idx;
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx.size()); }

  double coeff(int r, int c) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return values[k];
    return 0.0;
  }
};

inline CsrMatrix csr_from_triplets(int n_rows, int n_cols, std::vector<Triplet> trip) {
  if (n_rows < 0 || n_cols < 0)
    throw std::invalid_argument("csr_from_triplets: negative dimensions");
  for (const Triplet& t : trip)
    if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
      throw std::invalid_argument("csr_from_triplets: index (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") outside " + std::to_string(n_rows) +
                                  "x" + std::to_string(n_cols));
  std::sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(n_rows + 1, 0);
  m.col_idx.reserve(trip.size());
  m.values.reserve(trip.size());
  std::size_t i = 0;
  for (int r = 0; r < n_rows; ++r) {
    while (i < trip.size() && trip[i].row == r) {
      double v = trip[i].value;
      int c = trip[i].col;
      ++i;
      while (i < trip.size() && trip[i].row == r && trip[i].col == c) {
        v += trip[i].value;  // duplicates coalesce by summation
        ++i;
      }
      m.col_idx.push_back(c);
      m.values.push_back(v);
    }
    m.row_ptr[r + 1] = static_cast<int>(m.col_idx.size());
  }
  return m;
}

inline std::vector<double> csr_matvec(const CsrMatrix& a, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != a.n_cols)
    throw std::invalid_argument("csr_matvec: size mismatch");
  std::vector<double> y(a.n_rows, 0.0);
  for (int r = 0; r < a.n_rows; ++r) {
    double s = 0.0;
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) s += a.values[k] * x[a.col_idx[k]];
    y[r] = s;
  }
  return y;
}

inline CsrMatrix csr_transpose(const CsrMatrix& a) {
  CsrMatrix t;
  t.n_rows = a.n_cols;
  t.n_cols = a.n_rows;
  t.row_ptr.assign(a.n_cols + 1, 0);
  t.col_idx.resize(a.col_idx.size());
  t.values.resize(a.values.size());
  for (int c : a.col_idx) ++t.row_ptr[c + 1];
  for (int r = 0; r < t.n_rows; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  std::vector<int> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (int r = 0; r < a.n_rows; ++r)
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      int pos = next[a.col_idx[k]]++;
      t.col_idx[pos] = r;
      t.values[pos] = a.values[k];
    }
  return t;  // columns come out sorted because rows are visited in order
}

// c = alpha*a + beta*b (patterns merged)
inline CsrMatrix csr_add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b) {
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols)
    throw std::invalid_argument("csr_add: shape mismatch");
  CsrMatrix c;
  c.n_rows = a.n_rows;
  c.n_cols = a.n_cols;
  c.row_ptr.assign(a.n_rows + 1, 0);
  c.col_idx.reserve(a.col_idx.size() + b.col_idx.size());
  c.values.reserve(a.col_idx.size() + b.col_idx.size());
  for (int r = 0; r < a.n_rows; ++r) {
    int ia = a.row_ptr[r], ea = a.row_ptr[r + 1];
    int ib = b.row_ptr[r], eb = b.row_ptr[r + 1];
    while (ia < ea || ib < eb) {
      int ca = ia < ea ? a.col_idx[ia] : std::numeric_limits<int>::max();
      int cb = ib < eb ? b.col_idx[ib] : std::numeric_limits<int>::max();
      if (ca < cb) {
        c.col_idx.push_back(ca);
        c.values.push_back(alpha * a.values[ia++]);
      } else if (cb < ca) {
        c.col_idx.push_back(cb);
        c.values.push_back(beta * b.values[ib++]);
      } else {
        c.col_idx.push_back(ca);
        c.values.push_back(alpha * a.values[ia++] + beta * b.values[ib++]);
      }
    }
    c.row_ptr[r + 1] = static_cast<int>(c.col_idx.size());
  }
  return c;
}

inline CsrMatrix csr_scale(double alpha, CsrMatrix a) {
  for (double& v : a.values) v *= alpha;
  return a;
}

// Rows/cols are kept in the order given (both must be strictly increasing for
// the output columns to stay sorted; assembly always passes sorted dof lists).
inline CsrMatrix csr_submatrix(const CsrMatrix& a, const std::vector<int>& rows,
                               const std::vector<int>& cols) {
  std::vector<int> col_map(a.n_cols, -1);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= a.n_cols)
      throw std::invalid_argument("csr_submatrix: column index out of range");
    col_map[cols[j]] = static_cast<int>(j);
  }
  CsrMatrix s;
  s.n_rows = static_cast<int>(rows.size());
  s.n_cols = static_cast<int>(cols.size());
  s.row_ptr.assign(rows.size() + 1, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    if (r < 0 || r >= a.n_rows) throw std::invalid_argument("csr_submatrix: row index out of range");
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      if (col_map[a.col_idx[k]] >= 0) {
        s.col_idx.push_back(col_map[a.col_idx[k]]);
        s.values.push_back(a.values[k]);
      }
    s.row_ptr[i + 1] = static_cast<int>(s.col_idx.size());
  }
  return s;
}

inline double csr_frob_norm(const CsrMatrix& a) {
  double s = 0.0;
  for (double v : a.values) s += v * v;
  return std::sqrt(s);
}

inline double csr_frob_diff(const CsrMatrix& a, const CsrMatrix& b) {
  return csr_frob_norm(csr_add(1.0, a, -1.0, b));
}

using EigenCsrMap = Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>>;

inline EigenCsrMap as_eigen(const CsrMatrix& a) {
  return EigenCsrMap(a.n_rows, a.n_cols, static_cast<Eigen::Index>(a.col_idx.size()),
                     a.row_ptr.data(), a.col_idx.data(), a.values.data());
}

// x^T A y through the CSR map (A need not be symmetric)
inline double csr_bilinear(const CsrMatrix& a, const std::vector<double>& x,
                           const std::vector<double>& y) {
  std::vector<double> ay = csr_matvec(a, y);
  double s = 0.0;
  for (int i = 0; i < a.n_rows; ++i) s += x[i] * ay[i];
  return s;
}

// Direct solver wrapper around UMFPACK's multifrontal sparse LU. Kept as an
// object so one factorization can serve many right-hand sides; the supplied
// matrix is copied into column-major storage that must outlive the factors
// (UMFPACK re-reads the matrix arrays during each solve).
class SparseLuSolver {
 public:
  void factorize(const CsrMatrix& a) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("SparseLuSolver: matrix not square");
    mat_ = as_eigen(a);
    mat_.makeCompressed();
    lu_.analyzePattern(mat_);
    lu_.factorize(mat_);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse LU factorization failed (UMFPACK status " +
                        std::to_string(lu_.umfpackFactorizeReturncode()) + ")");
    n_ = a.n_rows;
  }

  std::vector<double> solve(const std::vector<double>& rhs) const {
    if (static_cast<int>(rhs.size()) != n_)
      throw std::invalid_argument("SparseLuSolver::solve: rhs size mismatch");
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n_);
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
    if (!x.allFinite()) throw SolverError("sparse LU solve produced non-finite entries");
    return std::vector<double>(x.data(), x.data() + n_);
  }

 private:
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> mat_;
  Eigen::UmfPackLU<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> lu_;
  int n_ = 0;
};

inline std::vector<double> sparse_lu_solve(const CsrMatrix& a, const std::vector<double>& rhs) {
  SparseLuSolver s;
  s.factorize(a);
  return s.solve(rhs);
}

// Dense symmetric matrix, full column-major storage.
struct DenseSymMatrix {
  int n = 0;
  std::vector<double> a;  // n*n, column-major

  explicit DenseSymMatrix(int n_ = 0) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(j) * n + i]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(j) * n + i]; }
};

struct SymEig {
  std::vector<double> eigenvalues;  // descending
  Eigen::MatrixXd vectors;          // column k pairs with eigenvalues[k]
};

inline SymEig sym_eigh(const DenseSymMatrix& c) {
  Eigen::Map<const Eigen::MatrixXd> m(c.a.data(), c.n, c.n);
  if (c.n > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() >
                     1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("sym_eigh: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw SolverError("sym_eigh: eigendecomposition failed");
  SymEig r;
  r.eigenvalues.resize(c.n);
  r.vectors.resize(c.n, c.n);
  for (int k = 0; k < c.n; ++k) {  // Eigen returns ascending order
    r.eigenvalues[k] = es.eigenvalues()(c.n - 1 - k);
    r.vectors.col(k) = es.eigenvectors().col(c.n - 1 - k);
  }
  return r;
}

}  // namespace supgrom
