#include "isotns/gradient.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace isotns {

DenseTensor riemannian_gradient(const Environment& env, const DenseTensor& u) {
  const std::int64_t n = env.n, m = env.m;
  if (u.dim(0) != n || u.dim(1) != n) throw ShapeError("gradient: unitary dimension mismatch");
  if (env.x.dim(0) != n * m || env.y.dim(0) != n * m)
    throw ShapeError("gradient: environment dimension mismatch");
  DenseTensor ut = (m == 1) ? u : kron(u, DenseTensor::identity(m));
  DenseTensor ux = matmul(ut, env.x);
  DenseTensor a = matmul(env.y, ux) - matmul(matmul(ux, ut.adjoint()), matmul(env.y, ut));
  if (m == 1) return a;
  return partial_trace(a, {n, m}, {1});
}

double tangent_residual(const DenseTensor& u, const DenseTensor& g) {
  DenseTensor t = matmul(u.adjoint(), g);
  DenseTensor s = t + t.adjoint();
  double r = 0;
  for (std::int64_t i = 0; i < s.size(); ++i) r = std::max(r, std::abs(s[i]));
  return r;
}

DenseTensor summed_gradient(const TNSInstance& inst, const TensorKey& key,
                            const std::vector<LocalOperator>& terms) {
  const std::int64_t n = inst.parent_dim(key);
  DenseTensor g({n, n});
  const DenseTensor& u = inst.parent(key);
  for (const auto& h : terms) {
    if (!cone_contains(inst.spec(), key, h.start, h.width)) continue;
    Environment env = environment(inst, key, h);
    g += riemannian_gradient(env, u);
  }
  return g;
}

double variance_sample(const TNSInstance& inst, const TensorKey& key,
                       const std::vector<LocalOperator>& terms) {
  DenseTensor g = summed_gradient(inst, key, terms);
  const double n = static_cast<double>(g.dim(0));
  return hs_inner(g, g).real() / n;
}

std::vector<double> rotation_angle_derivatives(const TNSInstance& inst, const TensorKey& key,
                                               const std::vector<LocalOperator>& terms,
                                               const OperatorBasis& basis) {
  const std::int64_t n = inst.parent_dim(key);
  if (basis.kind != BasisKind::PauliProduct || basis.dimension != n)
    throw ValidationError("rotation-angle derivatives need a Pauli-product basis of matching dimension");
  const DenseTensor& u = inst.parent(key);
  std::vector<Environment> envs;
  for (const auto& h : terms) {
    if (!cone_contains(inst.spec(), key, h.start, h.width)) continue;
    envs.push_back(environment(inst, key, h));
  }
  std::vector<double> alphas;
  alphas.reserve(basis.elements.size());
  for (const auto& sigma : basis.elements) {
    // exp(+- i pi s / 4) = (1 +- i s) / sqrt(2) for s^2 = 1
    DenseTensor rot_p = (DenseTensor::identity(n) + sigma * cplx(0, 1)) * (1.0 / std::sqrt(2.0));
    DenseTensor rot_m = (DenseTensor::identity(n) - sigma * cplx(0, 1)) * (1.0 / std::sqrt(2.0));
    DenseTensor up = matmul(u, rot_p), um = matmul(u, rot_m);
    double a = 0;
    for (const auto& env : envs) a += env.energy(up) - env.energy(um);
    alphas.push_back(a);
  }
  return alphas;
}

std::vector<LocalOperator> extensive_hamiltonian(const AnsatzSpec& spec, std::int64_t width) {
  std::vector<LocalOperator> terms;
  const std::int64_t site_dim = (spec.family == Family::Mps) ? spec.d : spec.chi;
  LocalOperator proto = build_interaction(site_dim, width, 0);
  if (spec.family == Family::Mps) {
    for (std::int64_t i = 0; i + width <= spec.size; ++i) terms.push_back(proto.at(i));
  } else {
    for (std::int64_t i = 0; i < spec.sites(); ++i) terms.push_back(proto.at(i));
  }
  return terms;
}

DenseTensor matrix_exp(const DenseTensor& a) {
  using EMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::int64_t n = a.dim(0);
  EMat m(n, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) m(i, j) = a[i * n + j];
  // scaling and squaring with a Taylor core; fine for the small matrices here
  int s = 0;
  double nrm = m.cwiseAbs().sum();
  while (nrm > 0.5) {
    nrm /= 2;
    ++s;
  }
  EMat x = m / std::pow(2.0, s);
  EMat term = EMat::Identity(n, n);
  EMat sum = EMat::Identity(n, n);
  for (int k = 1; k <= 18; ++k) {
    term = (term * x) / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  DenseTensor out({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] = sum(i, j);
  return out;
}

}  // namespace isotns
