#include "isotns/basis.hpp"

#include <cmath>

namespace isotns {

OperatorBasis gell_mann_basis(std::int64_t chi) {
  if (chi < 2) throw ShapeError("gell_mann_basis requires chi >= 2");
  OperatorBasis b{chi, BasisKind::GellMann, {}};
  for (std::int64_t j = 0; j < chi; ++j)
    for (std::int64_t k = j + 1; k < chi; ++k) {
      DenseTensor sym({chi, chi});
      sym[j * chi + k] = 1.0;
      sym[k * chi + j] = 1.0;
      b.elements.push_back(sym);
      DenseTensor asym({chi, chi});
      asym[j * chi + k] = cplx(0, -1);
      asym[k * chi + j] = cplx(0, 1);
      b.elements.push_back(asym);
    }
  for (std::int64_t l = 1; l < chi; ++l) {
    DenseTensor diag({chi, chi});
    const double f = std::sqrt(2.0 / static_cast<double>(l * (l + 1)));
    for (std::int64_t j = 0; j < l; ++j) diag[j * chi + j] = f;
    diag[l * chi + l] = -static_cast<double>(l) * f;
    b.elements.push_back(diag);
  }
  return b;
}

bool is_power_of_two(std::int64_t n) { return n >= 1 && (n & (n - 1)) == 0; }

OperatorBasis pauli_product_basis(std::int64_t n) {
  if (!is_power_of_two(n)) throw ShapeError("pauli_product_basis requires n = 2^k");
  DenseTensor I = DenseTensor::identity(2);
  DenseTensor X({2, 2});
  X[1] = 1.0;
  X[2] = 1.0;
  DenseTensor Y({2, 2});
  Y[1] = cplx(0, -1);
  Y[2] = cplx(0, 1);
  DenseTensor Z({2, 2});
  Z[0] = 1.0;
  Z[3] = -1.0;
  const DenseTensor single[4] = {I, X, Y, Z};

  std::int64_t k = 0;
  for (std::int64_t m = n; m > 1; m >>= 1) ++k;
  OperatorBasis b{n, BasisKind::PauliProduct, {}};
  const std::int64_t count = n * n;  // 4^k
  for (std::int64_t code = 0; code < count; ++code) {
    DenseTensor op = DenseTensor::identity(1);
    std::int64_t c = code;
    for (std::int64_t q = 0; q < k; ++q) {
      op = kron(op, single[c % 4]);
      c /= 4;
    }
    b.elements.push_back(op);
  }
  return b;
}

LocalOperator::LocalOperator(std::int64_t site_dim_in, std::int64_t width_in,
                             std::int64_t start_in, DenseTensor op_in)
    : site_dim(site_dim_in), width(width_in), start(start_in), op(std::move(op_in)) {
  std::int64_t dtot = 1;
  for (std::int64_t i = 0; i < width; ++i) dtot *= site_dim;
  if (op.rank() != 2 || op.dim(0) != dtot || op.dim(1) != dtot)
    throw ShapeError("LocalOperator shape does not match site_dim^width");
  if (op.dist(op.adjoint()) > 1e-12 * std::max(1.0, op.norm()))
    throw ShapeError("LocalOperator must be Hermitian");
  if (std::abs(trace(op)) > 1e-12 * std::max(1.0, op.norm()))
    throw ShapeError("LocalOperator must be traceless");
}

LocalOperator build_interaction(std::int64_t chi, std::int64_t n, std::int64_t start) {
  if (chi < 2 || n < 1) throw ShapeError("build_interaction requires chi >= 2, n >= 1");
  OperatorBasis gm = gell_mann_basis(chi);
  std::int64_t dtot = 1;
  for (std::int64_t i = 0; i < n; ++i) dtot *= chi;
  DenseTensor h({dtot, dtot});
  for (const auto& lam : gm.elements) {
    DenseTensor t = lam;
    for (std::int64_t i = 1; i < n; ++i) t = kron(t, lam);
    h += t;
  }
  h *= 1.0 / std::sqrt(std::pow(2.0, static_cast<double>(n)) *
                       static_cast<double>(chi * chi - 1));
  return LocalOperator(chi, n, start, std::move(h));
}

}  // namespace isotns
