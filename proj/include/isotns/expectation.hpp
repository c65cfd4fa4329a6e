#ifndef ISOTNS_EXPECTATION_HPP
#define ISOTNS_EXPECTATION_HPP

#include <vector>

#include "isotns/ansatz.hpp"
#include "isotns/basis.hpp"
#include "isotns/tensor.hpp"

namespace isotns {

struct ConeMembershipError : std::runtime_error {
  explicit ConeMembershipError(const std::string& m) : std::runtime_error(m) {}
};

// ---- operator algebra on a register of equal-dimension sites ----
// Operators are square matrices over chi^ns; site 0 is the major index.

DenseTensor op_apply_gate(const DenseTensor& op, const DenseTensor& gate,
                          const std::vector<std::int64_t>& sites, std::int64_t ns,
                          std::int64_t chi);
/// V: chi -> chi^b expands `site` into b sites at the same position.
DenseTensor op_apply_iso(const DenseTensor& op, const DenseTensor& v, std::int64_t site,
                         std::int64_t ns, std::int64_t chi);
/// Reduce to `keep` (result sites ordered as listed).
DenseTensor op_ptrace_sites(const DenseTensor& op, const std::vector<std::int64_t>& keep,
                            std::int64_t ns, std::int64_t chi);
/// Permute legs so `lead` sites come first (order preserved among the rest).
DenseTensor op_move_front(const DenseTensor& op, const std::vector<std::int64_t>& lead,
                          std::int64_t ns, std::int64_t chi);
/// Embed an operator given on `sites` (in that order) with identity elsewhere.
DenseTensor op_embed(const DenseTensor& op, const std::vector<std::int64_t>& sites,
                     std::int64_t ns, std::int64_t chi);

// ---- transition maps ----

/// mps site-transition map M(R) = sum_s V^s R V^s+ and its Hilbert-Schmidt
/// adjoint M+(A) = sum_s V^s+ A V^s. V maps the right bond into
/// (left bond x physical), composite row index (bond, phys).
DenseTensor mps_transition(const DenseTensor& v, const DenseTensor& r, std::int64_t chi,
                           std::int64_t d);
DenseTensor mps_transition_adj(const DenseTensor& v, const DenseTensor& a, std::int64_t chi,
                               std::int64_t d);

/// Descend the cone density operator through layer t (hierarchical TNS).
DenseTensor cone_step_down(const TNSInstance& inst, const DenseTensor& rho, std::int64_t t,
                           std::int64_t window, const std::vector<std::int64_t>& kept);
/// Hilbert-Schmidt adjoint: ascend an operator on the kept fine window of
/// layer t to the coarse cone window.
DenseTensor cone_step_up(const TNSInstance& inst, const DenseTensor& op, std::int64_t t,
                         std::int64_t window, const std::vector<std::int64_t>& kept);

/// Direction-tagged view of one transition map, for property tests.
struct TransitionMap {
  const TNSInstance* inst;
  std::int64_t layer;     // mps: site
  std::int64_t window;    // hierarchical: cone window at the coarse level
  std::vector<std::int64_t> kept;

  DenseTensor descend(const DenseTensor& rho) const;
  DenseTensor ascend(const DenseTensor& op) const;
  std::int64_t lower_dim() const;
  std::int64_t upper_dim() const;
};

TransitionMap transition_map(const TNSInstance& inst, std::int64_t layer, std::int64_t i);

// ---- expectation values ----

/// Exact reduced state of the whole level `level` (top closure descended).
DenseTensor full_level_state(const TNSInstance& inst, std::int64_t level);

/// Cone state of interaction position i at level `level`.
DenseTensor cone_state(const TNSInstance& inst, std::int64_t i, std::int64_t level);

/// <Psi| h_i |Psi> for a left-orthonormal mps (h starts at site h.start).
double mps_local_expectation(const TNSInstance& inst, const LocalOperator& h);

/// <Psi| h_i |Psi> for hierarchical TNS; h.width must match the family cone
/// width and h.start selects the physical window (periodic).
double hier_local_expectation(const TNSInstance& inst, const LocalOperator& h);

double local_expectation(const TNSInstance& inst, const LocalOperator& h);

/// Statevector oracles (test-scale sizes).
DenseTensor mps_statevector(const TNSInstance& inst);       // shape [chi, d^L]
DenseTensor hier_statevector(const TNSInstance& inst);      // shape [chi^L]
double statevector_expectation(const TNSInstance& inst, const LocalOperator& h);

// ---- environments ----

/// E(U) = Tr[ X (U x 1_M)^dag Y (U x 1_M) ] with X the descended input-side
/// density operator (trace one) and Y the ascended interaction.
struct Environment {
  DenseTensor x;
  DenseTensor y;
  std::int64_t n = 0;  // tensor (parent-unitary) dimension
  std::int64_t m = 0;  // spectator dimension

  double energy(const DenseTensor& u) const;
};

/// Environment of tensor `key` for interaction h; throws ConeMembershipError
/// if the expectation does not depend on that tensor.
Environment environment(const TNSInstance& inst, const TensorKey& key, const LocalOperator& h);

/// Assembly primitives shared by environment() and the scan evaluators.
/// `rho` is the cone state at the tensor's layer, `o_below` the interaction
/// ascended to the layer's fine side (cone window coordinates, kept slots).
Environment hier_cone_environment(const TNSInstance& inst, std::int64_t tau, std::int64_t window,
                                  const std::vector<std::int64_t>& kept, const TensorKey& key,
                                  const DenseTensor& rho, const DenseTensor& o_below);
/// Full-level variant for the wrapped layers near the top: `rho_full` is the
/// whole level-tau state, `o_full` the interaction ascended and embedded into
/// the whole level tau-1.
Environment hier_full_environment(const TNSInstance& inst, const TensorKey& key,
                                  const DenseTensor& rho_full, const DenseTensor& o_full);

}  // namespace isotns

#endif
