#ifndef ISOTNS_TENSOR_HPP
#define ISOTNS_TENSOR_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace isotns {

using cplx = std::complex<double>;

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense complex tensor with row-major storage.
///
/// Leg-ordering conventions used throughout the library:
///  - reshape keeps the flat (row-major) entry order;
///  - permute(axes) reorders legs so that new leg p is old leg axes[p];
///  - contract(a, b, pairs) returns a tensor whose legs are the free legs of
///    `a` in their original order, followed by the free legs of `b`;
///  - kron(a, b) of matrices indexes the composite row as i_a * rows(b) + i_b
///    (first factor is the major index).
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(std::vector<std::int64_t> shape, std::vector<cplx> entries);
  explicit DenseTensor(std::vector<std::int64_t> shape);

  static DenseTensor zeros(const std::vector<std::int64_t>& shape);
  static DenseTensor identity(std::int64_t n);
  /// |idx><idx| on an n-dimensional space.
  static DenseTensor basis_projector(std::int64_t n, std::int64_t idx);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  std::int64_t dim(std::int64_t leg) const { return shape_.at(static_cast<std::size_t>(leg)); }

  const cplx* data() const { return data_.data(); }
  cplx* data() { return data_.data(); }
  const std::vector<cplx>& entries() const { return data_; }

  cplx& at(const std::vector<std::int64_t>& idx);
  const cplx& at(const std::vector<std::int64_t>& idx) const;
  cplx& operator[](std::int64_t flat) { return data_[static_cast<std::size_t>(flat)]; }
  const cplx& operator[](std::int64_t flat) const { return data_[static_cast<std::size_t>(flat)]; }

  DenseTensor reshape(const std::vector<std::int64_t>& shape) const;
  DenseTensor permute(const std::vector<std::int64_t>& axes) const;
  DenseTensor conj() const;
  /// Conjugate transpose; requires a rank-2 tensor.
  DenseTensor adjoint() const;

  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);
  DenseTensor& operator*=(cplx s);
  DenseTensor operator+(const DenseTensor& o) const;
  DenseTensor operator-(const DenseTensor& o) const;
  DenseTensor operator*(cplx s) const;

  /// Frobenius-norm distance, for tests.
  double dist(const DenseTensor& o) const;
  double norm() const;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<cplx> data_;
};

/// Matrix product of two rank-2 tensors.
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);

/// Contract paired legs; pairs[k] = {leg of a, leg of b}. Output legs are the
/// free legs of a (original order) followed by the free legs of b.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs);

/// Kronecker product of two matrices, first factor major.
DenseTensor kron(const DenseTensor& a, const DenseTensor& b);

/// Partial trace of an operator over the listed subsystems. The operator is
/// given as a matrix whose row/column index factorizes according to `dims`;
/// remaining subsystems keep their original relative order.
DenseTensor partial_trace(const DenseTensor& op, const std::vector<std::int64_t>& dims,
                          const std::vector<std::int64_t>& traced);

cplx trace(const DenseTensor& m);
cplx hs_inner(const DenseTensor& a, const DenseTensor& b);  // Tr(a^dag b)

}  // namespace isotns

#endif
