#ifndef ISOTNS_BASIS_HPP
#define ISOTNS_BASIS_HPP

#include <vector>

#include "isotns/tensor.hpp"

namespace isotns {

enum class BasisKind { GellMann, PauliProduct };

/// Operator basis on an N-dimensional space.
///  - GellMann: the N^2-1 traceless Hermitian SU(N) generators,
///    Tr(La Lb) = 2 delta_ab.
///  - PauliProduct (N = 2^k only): N^2 Hermitian unitary operators,
///    Tr(sm sn) = N delta_mn; includes the identity.
struct OperatorBasis {
  std::int64_t dimension;
  BasisKind kind;
  std::vector<DenseTensor> elements;
};

OperatorBasis gell_mann_basis(std::int64_t chi);
OperatorBasis pauli_product_basis(std::int64_t n);

bool is_power_of_two(std::int64_t n);

/// Traceless Hermitian n-site interaction with its support.
struct LocalOperator {
  std::int64_t site_dim;   // dimension per leg
  std::int64_t width;      // number of sites acted on
  std::int64_t start;      // leftmost support site
  DenseTensor op;          // [site_dim^width, site_dim^width]

  LocalOperator(std::int64_t site_dim, std::int64_t width, std::int64_t start, DenseTensor op_in);

  LocalOperator at(std::int64_t new_start) const {
    return LocalOperator(site_dim, width, new_start, op);
  }
};

/// Isotropic n-site interaction built from generalized Gell-Mann matrices:
/// h = (2^n (chi^2-1))^{-1/2} sum_a La x ... x La. Traceless, Hermitian,
/// Tr(h^2) = 1, and all single-site partial traces vanish.
LocalOperator build_interaction(std::int64_t chi, std::int64_t n, std::int64_t start = 0);

}  // namespace isotns

#endif
