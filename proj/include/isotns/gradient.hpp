#ifndef ISOTNS_GRADIENT_HPP
#define ISOTNS_GRADIENT_HPP

#include <vector>

#include "isotns/expectation.hpp"

namespace isotns {

/// Riemannian energy gradient on the parent-unitary space:
/// g = Tr_M( Y Ut X - Ut X Ut^dag Y Ut ), Ut = U x 1_M.
/// U^dag g is anti-Hermitian.
DenseTensor riemannian_gradient(const Environment& env, const DenseTensor& u);

/// Gradient of the summed energy of all terms whose cone contains `key`.
/// Terms not containing `key` contribute zero and are skipped.
DenseTensor summed_gradient(const TNSInstance& inst, const TensorKey& key,
                            const std::vector<LocalOperator>& terms);

/// Residual of the tangent-space condition (max-norm of U^dag g + (U^dag g)^dag).
double tangent_residual(const DenseTensor& u, const DenseTensor& g);

/// One Monte Carlo draw of the gradient variance: (1/N) Tr(g^dag g) for the
/// full summed gradient (diagonal and off-diagonal term pairs included).
double variance_sample(const TNSInstance& inst, const TensorKey& key,
                       const std::vector<LocalOperator>& terms);

/// Rotation-angle derivatives a_n = E(U e^{i pi s_n/4}) - E(U e^{-i pi s_n/4})
/// for every element of a Hermitian-unitary basis on the tensor's parent
/// space (N = 2^k only). Satisfies (1/N^2) sum a_n^2 = (1/N) Tr(g^dag g).
std::vector<double> rotation_angle_derivatives(const TNSInstance& inst, const TensorKey& key,
                                               const std::vector<LocalOperator>& terms,
                                               const OperatorBasis& basis);

/// The extensive Hamiltonian sum_i h_i for the instance geometry: mps places
/// width-n terms at starts 0..L-n; hierarchical families wrap periodically.
std::vector<LocalOperator> extensive_hamiltonian(const AnsatzSpec& spec, std::int64_t width);

/// exp(A) for a small anti-Hermitian matrix (scaling and squaring).
DenseTensor matrix_exp(const DenseTensor& a);

}  // namespace isotns

#endif
