#include "isotns/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace isotns {

namespace {

std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("nonpositive dimension in shape");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<std::int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

using EMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ECMap = Eigen::Map<const EMat>;
using EMap = Eigen::Map<EMat>;

}  // namespace

DenseTensor::DenseTensor(std::vector<std::int64_t> shape, std::vector<cplx> entries)
    : shape_(std::move(shape)), data_(std::move(entries)) {
  if (shape_size(shape_) != static_cast<std::int64_t>(data_.size()))
    throw ShapeError("entry count does not match shape " + shape_str(shape_));
}

DenseTensor::DenseTensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_size(shape_)), cplx(0, 0));
}

DenseTensor DenseTensor::zeros(const std::vector<std::int64_t>& shape) {
  return DenseTensor(shape);
}

DenseTensor DenseTensor::identity(std::int64_t n) {
  DenseTensor t({n, n});
  for (std::int64_t i = 0; i < n; ++i) t.data_[static_cast<std::size_t>(i * n + i)] = 1.0;
  return t;
}

DenseTensor DenseTensor::basis_projector(std::int64_t n, std::int64_t idx) {
  DenseTensor t({n, n});
  t.data_[static_cast<std::size_t>(idx * n + idx)] = 1.0;
  return t;
}

cplx& DenseTensor::at(const std::vector<std::int64_t>& idx) {
  return const_cast<cplx&>(static_cast<const DenseTensor*>(this)->at(idx));
}

const cplx& DenseTensor::at(const std::vector<std::int64_t>& idx) const {
  if (idx.size() != shape_.size()) throw ShapeError("index rank mismatch");
  std::int64_t flat = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= shape_[k]) throw ShapeError("index out of range");
    flat = flat * shape_[k] + idx[k];
  }
  return data_[static_cast<std::size_t>(flat)];
}

DenseTensor DenseTensor::reshape(const std::vector<std::int64_t>& shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                     " changes entry count");
  DenseTensor out = *this;
  out.shape_ = shape;
  return out;
}

DenseTensor DenseTensor::permute(const std::vector<std::int64_t>& axes) const {
  const auto r = static_cast<std::size_t>(rank());
  if (axes.size() != r) throw ShapeError("permute axes rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto a : axes) {
    if (a < 0 || a >= rank() || seen[static_cast<std::size_t>(a)])
      throw ShapeError("permute axes must be a permutation");
    seen[static_cast<std::size_t>(a)] = true;
  }
  std::vector<std::int64_t> new_shape(r);
  for (std::size_t p = 0; p < r; ++p) new_shape[p] = shape_[static_cast<std::size_t>(axes[p])];

  // strides of the old layout
  std::vector<std::int64_t> old_stride(r, 1);
  for (std::size_t k = r; k-- > 1;) old_stride[k - 1] = old_stride[k] * shape_[k];

  DenseTensor out(new_shape);
  std::vector<std::int64_t> idx(r, 0);
  const std::int64_t n = size();
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t src = 0;
    for (std::size_t p = 0; p < r; ++p) src += idx[p] * old_stride[static_cast<std::size_t>(axes[p])];
    out.data_[static_cast<std::size_t>(flat)] = data_[static_cast<std::size_t>(src)];
    for (std::size_t p = r; p-- > 0;) {
      if (++idx[p] < new_shape[p]) break;
      idx[p] = 0;
    }
  }
  return out;
}

DenseTensor DenseTensor::conj() const {
  DenseTensor out = *this;
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

DenseTensor DenseTensor::adjoint() const {
  if (rank() != 2) throw ShapeError("adjoint requires a matrix");
  return permute({1, 0}).conj();
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (shape_ != o.shape_) throw ShapeError("shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (shape_ != o.shape_) throw ShapeError("shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

DenseTensor DenseTensor::operator+(const DenseTensor& o) const {
  DenseTensor t = *this;
  t += o;
  return t;
}

DenseTensor DenseTensor::operator-(const DenseTensor& o) const {
  DenseTensor t = *this;
  t -= o;
  return t;
}

DenseTensor DenseTensor::operator*(cplx s) const {
  DenseTensor t = *this;
  t *= s;
  return t;
}

double DenseTensor::dist(const DenseTensor& o) const {
  if (shape_ != o.shape_) throw ShapeError("shape mismatch in dist");
  double s = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) s += std::norm(data_[i] - o.data_[i]);
  return std::sqrt(s);
}

double DenseTensor::norm() const {
  double s = 0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul requires matrices");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner dimension mismatch: " + std::to_string(a.dim(1)) + " vs " +
                     std::to_string(b.dim(0)));
  DenseTensor out({a.dim(0), b.dim(1)});
  ECMap ma(a.data(), a.dim(0), a.dim(1));
  ECMap mb(b.data(), b.dim(0), b.dim(1));
  EMap mo(out.data(), out.dim(0), out.dim(1));
  mo.noalias() = ma * mb;
  return out;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs) {
  std::vector<bool> a_used(static_cast<std::size_t>(a.rank()), false);
  std::vector<bool> b_used(static_cast<std::size_t>(b.rank()), false);
  for (const auto& [la, lb] : pairs) {
    if (la < 0 || la >= a.rank() || lb < 0 || lb >= b.rank())
      throw ShapeError("contract leg index out of range");
    if (a.dim(la) != b.dim(lb))
      throw ShapeError("contract dimension mismatch on legs (" + std::to_string(la) + "," +
                       std::to_string(lb) + "): " + std::to_string(a.dim(la)) + " vs " +
                       std::to_string(b.dim(lb)));
    if (a_used[static_cast<std::size_t>(la)] || b_used[static_cast<std::size_t>(lb)])
      throw ShapeError("contract leg listed twice");
    a_used[static_cast<std::size_t>(la)] = true;
    b_used[static_cast<std::size_t>(lb)] = true;
  }
  std::vector<std::int64_t> a_free, b_free, a_con, b_con;
  for (std::int64_t l = 0; l < a.rank(); ++l)
    if (!a_used[static_cast<std::size_t>(l)]) a_free.push_back(l);
  for (std::int64_t l = 0; l < b.rank(); ++l)
    if (!b_used[static_cast<std::size_t>(l)]) b_free.push_back(l);
  for (const auto& [la, lb] : pairs) {
    a_con.push_back(la);
    b_con.push_back(lb);
  }
  std::vector<std::int64_t> a_perm = a_free, b_perm = b_con;
  a_perm.insert(a_perm.end(), a_con.begin(), a_con.end());
  b_perm.insert(b_perm.end(), b_free.begin(), b_free.end());

  std::int64_t m = 1, k = 1, n = 1;
  std::vector<std::int64_t> out_shape;
  for (auto l : a_free) {
    m *= a.dim(l);
    out_shape.push_back(a.dim(l));
  }
  for (auto l : a_con) k *= a.dim(l);
  for (auto l : b_free) {
    n *= b.dim(l);
    out_shape.push_back(b.dim(l));
  }
  DenseTensor ap = a.permute(a_perm).reshape({m, k});
  DenseTensor bp = b.permute(b_perm).reshape({k, n});
  DenseTensor out = matmul(ap, bp);
  if (out_shape.empty()) out_shape = {1};
  return out.reshape(out_shape);
}

DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("kron requires matrices");
  const std::int64_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  DenseTensor out({ar * br, ac * bc});
  for (std::int64_t i = 0; i < ar; ++i)
    for (std::int64_t j = 0; j < ac; ++j) {
      const cplx av = a[i * ac + j];
      if (av == cplx(0, 0)) continue;
      for (std::int64_t p = 0; p < br; ++p)
        for (std::int64_t q = 0; q < bc; ++q)
          out[(i * br + p) * (ac * bc) + (j * bc + q)] = av * b[p * bc + q];
    }
  return out;
}

DenseTensor partial_trace(const DenseTensor& op, const std::vector<std::int64_t>& dims,
                          const std::vector<std::int64_t>& traced) {
  const std::int64_t ns = static_cast<std::int64_t>(dims.size());
  std::int64_t dtot = 1;
  for (auto d : dims) dtot *= d;
  if (op.rank() != 2 || op.dim(0) != dtot || op.dim(1) != dtot)
    throw ShapeError("partial_trace operator does not match subsystem dims");
  std::vector<bool> tr(static_cast<std::size_t>(ns), false);
  for (auto s : traced) {
    if (s < 0 || s >= ns) throw ShapeError("partial_trace subsystem out of range");
    tr[static_cast<std::size_t>(s)] = true;
  }
  std::vector<std::int64_t> keep;
  for (std::int64_t s = 0; s < ns; ++s)
    if (!tr[static_cast<std::size_t>(s)]) keep.push_back(s);

  std::vector<std::int64_t> full_shape(dims.begin(), dims.end());
  full_shape.insert(full_shape.end(), dims.begin(), dims.end());
  DenseTensor t = op.reshape(full_shape);
  std::vector<std::int64_t> perm;
  std::int64_t dk = 1, dt = 1;
  for (auto s : keep) {
    perm.push_back(s);
    dk *= dims[static_cast<std::size_t>(s)];
  }
  for (auto s : traced) {
    perm.push_back(s);
    dt *= dims[static_cast<std::size_t>(s)];
  }
  for (auto s : keep) perm.push_back(ns + s);
  for (auto s : traced) perm.push_back(ns + s);
  DenseTensor tp = t.permute(perm).reshape({dk, dt, dk, dt});
  DenseTensor out({dk, dk});
  for (std::int64_t i = 0; i < dk; ++i)
    for (std::int64_t j = 0; j < dk; ++j) {
      cplx s(0, 0);
      for (std::int64_t x = 0; x < dt; ++x) s += tp[((i * dt + x) * dk + j) * dt + x];
      out[i * dk + j] = s;
    }
  return out;
}

cplx trace(const DenseTensor& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw ShapeError("trace requires a square matrix");
  cplx s(0, 0);
  for (std::int64_t i = 0; i < m.dim(0); ++i) s += m[i * m.dim(0) + i];
  return s;
}

cplx hs_inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("hs_inner shape mismatch");
  cplx s(0, 0);
  for (std::int64_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

}  // namespace isotns
