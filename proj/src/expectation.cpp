#include "isotns/expectation.hpp"

#include <algorithm>
#include <cmath>

namespace isotns {

namespace {

std::int64_t ipow(std::int64_t b, std::int64_t e) {
  std::int64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

std::vector<std::int64_t> rest_sites(const std::vector<std::int64_t>& sel, std::int64_t ns) {
  std::vector<std::int64_t> rest;
  for (std::int64_t s = 0; s < ns; ++s)
    if (std::find(sel.begin(), sel.end(), s) == sel.end()) rest.push_back(s);
  return rest;
}

std::vector<std::int64_t> inverse_perm(const std::vector<std::int64_t>& p) {
  std::vector<std::int64_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<std::int64_t>(i);
  return inv;
}

std::vector<std::int64_t> rep(std::int64_t v, std::int64_t n) {
  return std::vector<std::int64_t>(static_cast<std::size_t>(n), v);
}

}  // namespace

DenseTensor op_apply_gate(const DenseTensor& op, const DenseTensor& gate,
                          const std::vector<std::int64_t>& sites, std::int64_t ns,
                          std::int64_t chi) {
  const std::int64_t k = static_cast<std::int64_t>(sites.size());
  const std::int64_t dk = ipow(chi, k), dr = ipow(chi, ns - k);
  auto rest = rest_sites(sites, ns);
  std::vector<std::int64_t> perm;
  for (auto s : sites) perm.push_back(s);
  for (auto s : rest) perm.push_back(s);
  for (auto s : sites) perm.push_back(ns + s);
  for (auto s : rest) perm.push_back(ns + s);
  DenseTensor t = op.reshape(rep(chi, 2 * ns)).permute(perm).reshape({dk, dr * dk * dr});
  t = matmul(gate, t).reshape({dk * dr, dk, dr}).permute({1, 0, 2}).reshape({dk, dk * dr * dr});
  // rows are now the column sites; conjugate action on the column index
  t = matmul(gate.conj(), t).reshape({dk, dk, dr, dr}).permute({1, 2, 0, 3});
  // legs ordered (row sites, row rest | col sites, col rest) again
  t = t.reshape(rep(chi, 2 * ns));
  return t.permute(inverse_perm(perm)).reshape({ipow(chi, ns), ipow(chi, ns)});
}

DenseTensor op_apply_iso(const DenseTensor& op, const DenseTensor& v, std::int64_t site,
                         std::int64_t ns, std::int64_t chi) {
  const std::int64_t out_dim = v.dim(0);
  std::int64_t b = 0;
  for (std::int64_t m = out_dim; m > 1; m /= chi) ++b;
  const std::int64_t dr = ipow(chi, ns - 1);
  auto rest = rest_sites({site}, ns);
  std::vector<std::int64_t> perm;
  perm.push_back(site);
  for (auto s : rest) perm.push_back(s);
  perm.push_back(ns + site);
  for (auto s : rest) perm.push_back(ns + s);
  DenseTensor t = op.reshape(rep(chi, 2 * ns)).permute(perm).reshape({chi, dr * chi * dr});
  t = matmul(v, t).reshape({out_dim * dr, chi, dr}).permute({1, 0, 2}).reshape({chi, out_dim * dr * dr});
  t = matmul(v.conj(), t).reshape({out_dim, out_dim, dr, dr}).permute({1, 2, 0, 3});
  // legs: (row new-b, row rest | col new-b, col rest); place new sites at `site`
  const std::int64_t nn = ns - 1 + b;
  t = t.reshape(rep(chi, 2 * nn));
  std::vector<std::int64_t> final_perm;
  auto pos_of = [&](std::int64_t s) {
    // current layout rows: [b new][rest...]; find position of original site s
    const auto it = std::find(rest.begin(), rest.end(), s);
    return b + static_cast<std::int64_t>(it - rest.begin());
  };
  for (std::int64_t s = 0; s < site; ++s) final_perm.push_back(pos_of(s));
  for (std::int64_t q = 0; q < b; ++q) final_perm.push_back(q);
  for (std::int64_t s = site + 1; s < ns; ++s) final_perm.push_back(pos_of(s));
  std::vector<std::int64_t> both = final_perm;
  for (auto x : final_perm) both.push_back(nn + x);
  return t.permute(both).reshape({ipow(chi, nn), ipow(chi, nn)});
}

DenseTensor op_ptrace_sites(const DenseTensor& op, const std::vector<std::int64_t>& keep,
                            std::int64_t ns, std::int64_t chi) {
  auto tr = rest_sites(keep, ns);
  const std::int64_t dk = ipow(chi, static_cast<std::int64_t>(keep.size()));
  const std::int64_t dt = ipow(chi, static_cast<std::int64_t>(tr.size()));
  std::vector<std::int64_t> perm;
  for (auto s : keep) perm.push_back(s);
  for (auto s : tr) perm.push_back(s);
  for (auto s : keep) perm.push_back(ns + s);
  for (auto s : tr) perm.push_back(ns + s);
  DenseTensor t = op.reshape(rep(chi, 2 * ns)).permute(perm).reshape({dk, dt, dk, dt});
  DenseTensor out({dk, dk});
  for (std::int64_t i = 0; i < dk; ++i)
    for (std::int64_t j = 0; j < dk; ++j) {
      cplx s(0, 0);
      for (std::int64_t x = 0; x < dt; ++x) s += t[((i * dt + x) * dk + j) * dt + x];
      out[i * dk + j] = s;
    }
  return out;
}

DenseTensor op_move_front(const DenseTensor& op, const std::vector<std::int64_t>& lead,
                          std::int64_t ns, std::int64_t chi) {
  auto rest = rest_sites(lead, ns);
  std::vector<std::int64_t> perm;
  for (auto s : lead) perm.push_back(s);
  for (auto s : rest) perm.push_back(s);
  std::vector<std::int64_t> both = perm;
  for (auto x : perm) both.push_back(ns + x);
  const std::int64_t dtot = ipow(chi, ns);
  return op.reshape(rep(chi, 2 * ns)).permute(both).reshape({dtot, dtot});
}

DenseTensor op_embed(const DenseTensor& op, const std::vector<std::int64_t>& sites,
                     std::int64_t ns, std::int64_t chi) {
  const std::int64_t k = static_cast<std::int64_t>(sites.size());
  DenseTensor big = kron(op, DenseTensor::identity(ipow(chi, ns - k)));
  // current site order: sites..., rest...; permute back
  auto rest = rest_sites(sites, ns);
  std::vector<std::int64_t> cur;
  for (auto s : sites) cur.push_back(s);
  for (auto s : rest) cur.push_back(s);
  auto inv = inverse_perm(cur);
  std::vector<std::int64_t> both = inv;
  for (auto x : inv) both.push_back(ns + x);
  const std::int64_t dtot = ipow(chi, ns);
  return big.reshape(rep(chi, 2 * ns)).permute(both).reshape({dtot, dtot});
}

// ---- mps transitions ----

DenseTensor mps_transition(const DenseTensor& v, const DenseTensor& r, std::int64_t chi,
                           std::int64_t d) {
  DenseTensor w = matmul(matmul(v, r), v.adjoint());
  return partial_trace(w, {chi, d}, {1});
}

DenseTensor mps_transition_adj(const DenseTensor& v, const DenseTensor& a, std::int64_t chi,
                               std::int64_t d) {
  DenseTensor lifted = kron(a, DenseTensor::identity(d));
  return matmul(matmul(v.adjoint(), lifted), v);
}

// ---- hierarchical layer maps ----

namespace {

struct LayerCtx {
  std::int64_t chi, b, w, Lt, nf;
  std::vector<DenseTensor> isos;                 // w cone isometries
  std::vector<DenseTensor> dis;                  // cone disentanglers
  std::vector<std::pair<std::int64_t, std::int64_t>> dslots;
};

LayerCtx layer_ctx(const TNSInstance& inst, std::int64_t t, std::int64_t window) {
  const AnsatzSpec& sp = inst.spec();
  LayerCtx c;
  c.chi = sp.chi;
  c.b = sp.branching;
  c.w = sp.cone_width();
  c.Lt = sp.level_sites(t);
  c.nf = c.w * c.b;
  for (std::int64_t g = 0; g < c.w; ++g)
    c.isos.push_back(inst.isometry({t, (window + g) % c.Lt, TensorKind::Isometry}));
  c.dslots = cone_disentangler_slots(sp);
  for (std::size_t idx = 0; idx < c.dslots.size(); ++idx)
    c.dis.push_back(inst.parent({t, (window + static_cast<std::int64_t>(idx)) % c.Lt,
                                 TensorKind::Disentangler}));
  return c;
}

}  // namespace

DenseTensor cone_step_down(const TNSInstance& inst, const DenseTensor& rho, std::int64_t t,
                           std::int64_t window, const std::vector<std::int64_t>& kept) {
  LayerCtx c = layer_ctx(inst, t, window);
  DenseTensor r = rho;
  std::int64_t ns = c.w;
  for (std::int64_t g = c.w - 1; g >= 0; --g) {
    r = op_apply_iso(r, c.isos[static_cast<std::size_t>(g)], g, ns, c.chi);
    ns += c.b - 1;
  }
  for (std::size_t idx = 0; idx < c.dslots.size(); ++idx)
    r = op_apply_gate(r, c.dis[idx], {c.dslots[idx].first, c.dslots[idx].second}, c.nf, c.chi);
  return op_ptrace_sites(r, kept, c.nf, c.chi);
}

DenseTensor cone_step_up(const TNSInstance& inst, const DenseTensor& op, std::int64_t t,
                         std::int64_t window, const std::vector<std::int64_t>& kept) {
  LayerCtx c = layer_ctx(inst, t, window);
  DenseTensor o = op_embed(op, kept, c.nf, c.chi);
  for (std::size_t idx = c.dslots.size(); idx-- > 0;)
    o = op_apply_gate(o, c.dis[idx].adjoint(), {c.dslots[idx].first, c.dslots[idx].second}, c.nf,
                      c.chi);
  DenseTensor w = DenseTensor::identity(1);
  for (std::int64_t g = 0; g < c.w; ++g) w = kron(w, c.isos[static_cast<std::size_t>(g)]);
  return matmul(matmul(w.adjoint(), o), w);
}

DenseTensor TransitionMap::descend(const DenseTensor& rho) const {
  if (inst->spec().family == Family::Mps)
    return mps_transition(inst->isometry({layer, 0, TensorKind::Isometry}), rho,
                          inst->spec().chi, inst->spec().d);
  return cone_step_down(*inst, rho, layer, window, kept);
}

DenseTensor TransitionMap::ascend(const DenseTensor& op) const {
  if (inst->spec().family == Family::Mps)
    return mps_transition_adj(inst->isometry({layer, 0, TensorKind::Isometry}), op,
                              inst->spec().chi, inst->spec().d);
  return cone_step_up(*inst, op, layer, window, kept);
}

std::int64_t TransitionMap::lower_dim() const {
  const AnsatzSpec& sp = inst->spec();
  if (sp.family == Family::Mps) return sp.chi;
  return ipow(sp.chi, sp.cone_width());
}

std::int64_t TransitionMap::upper_dim() const { return lower_dim(); }

TransitionMap transition_map(const TNSInstance& inst, std::int64_t layer, std::int64_t i) {
  if (inst.spec().family == Family::Mps) return {&inst, layer, 0, {}};
  ConePath p = cone_path(inst.spec(), i);
  return {&inst, layer, p.window[static_cast<std::size_t>(layer)],
          p.kept[static_cast<std::size_t>(layer - 1)]};
}

// ---- expectation values ----

DenseTensor full_level_state(const TNSInstance& inst, std::int64_t level) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, b = sp.branching, T = sp.layers();
  DenseTensor rho = DenseTensor::basis_projector(chi, 0);
  std::int64_t ns = 1;
  for (std::int64_t tau = T; tau > level; --tau) {
    const std::int64_t Lt = sp.level_sites(tau);
    for (std::int64_t k = Lt - 1; k >= 0; --k) {
      rho = op_apply_iso(rho, inst.isometry({tau, k, TensorKind::Isometry}), k, ns, chi);
      ns += b - 1;
    }
    if (sp.has_disentanglers()) {
      for (std::int64_t k = 0; k < Lt; ++k) {
        const std::int64_t p = (b * k + b - 1) % ns, q = (b * k + b) % ns;
        rho = op_apply_gate(rho, inst.parent({tau, k, TensorKind::Disentangler}), {p, q}, ns, chi);
      }
    }
  }
  return rho;
}

DenseTensor cone_state(const TNSInstance& inst, std::int64_t i, std::int64_t level) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t t0 = cone_top_level(sp);
  const std::int64_t w = sp.cone_width();
  ConePath p = cone_path(sp, i);
  if (level > t0) throw ValidationError("cone_state above the wrap-free region");
  DenseTensor rho = full_level_state(inst, t0);
  const std::int64_t ns0 = sp.level_sites(t0);
  std::vector<std::int64_t> keep;
  for (std::int64_t r = 0; r < w; ++r)
    keep.push_back((p.window[static_cast<std::size_t>(t0)] + r) % ns0);
  rho = op_ptrace_sites(rho, keep, ns0, sp.chi);
  for (std::int64_t t = t0; t > level; --t)
    rho = cone_step_down(inst, rho, t, p.window[static_cast<std::size_t>(t)],
                         p.kept[static_cast<std::size_t>(t - 1)]);
  return rho;
}

double mps_local_expectation(const TNSInstance& inst, const LocalOperator& h) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, d = sp.d, L = sp.size;
  const std::int64_t i = h.start, ie = h.start + h.width - 1;
  if (i < 0 || ie >= L) throw ShapeError("interaction support outside the chain");
  DenseTensor rho = DenseTensor::basis_projector(chi, 0);
  for (std::int64_t t = L - 1; t > ie; --t)
    rho = mps_transition(inst.isometry({t, 0, TensorKind::Isometry}), rho, chi, d);
  // sandwich W = (V_i x 1) ... V_ie : l_ie -> (l_{i-1}, s_i..s_ie)
  DenseTensor w = inst.isometry({ie, 0, TensorKind::Isometry});
  for (std::int64_t t = ie - 1; t >= i; --t) {
    const std::int64_t m = w.dim(0) / chi;
    w = matmul(kron(inst.isometry({t, 0, TensorKind::Isometry}), DenseTensor::identity(m)), w);
  }
  DenseTensor lh = matmul(matmul(w.adjoint(), kron(DenseTensor::identity(chi), h.op)), w);
  return trace(matmul(rho, lh)).real();
}

double hier_local_expectation(const TNSInstance& inst, const LocalOperator& h) {
  const AnsatzSpec& sp = inst.spec();
  if (h.width != sp.cone_width())
    throw ValidationError("interaction width " + std::to_string(h.width) +
                          " does not match the family cone width " +
                          std::to_string(sp.cone_width()));
  const std::int64_t t0 = cone_top_level(sp);
  const std::int64_t i = ((h.start % sp.sites()) + sp.sites()) % sp.sites();
  if (t0 == 0) {
    DenseTensor rho = full_level_state(inst, 0);
    const std::int64_t L = sp.sites();
    std::vector<std::int64_t> keep;
    for (std::int64_t r = 0; r < h.width; ++r) keep.push_back((i + r) % L);
    rho = op_ptrace_sites(rho, keep, L, sp.chi);
    return trace(matmul(rho, h.op)).real();
  }
  DenseTensor rho = cone_state(inst, i, 0);
  return trace(matmul(rho, h.op)).real();
}

double local_expectation(const TNSInstance& inst, const LocalOperator& h) {
  return inst.spec().family == Family::Mps ? mps_local_expectation(inst, h)
                                           : hier_local_expectation(inst, h);
}

// ---- statevector oracles ----

namespace {

DenseTensor state_apply_gate(const DenseTensor& psi, const DenseTensor& gate,
                             const std::vector<std::int64_t>& sites, std::int64_t ns,
                             std::int64_t chi) {
  const std::int64_t k = static_cast<std::int64_t>(sites.size());
  auto rest = rest_sites(sites, ns);
  std::vector<std::int64_t> perm;
  for (auto s : sites) perm.push_back(s);
  for (auto s : rest) perm.push_back(s);
  DenseTensor t = psi.reshape(rep(chi, ns)).permute(perm).reshape({ipow(chi, k), ipow(chi, ns - k)});
  t = matmul(gate, t).reshape(rep(chi, ns));
  return t.permute(inverse_perm(perm)).reshape({ipow(chi, ns)});
}

DenseTensor state_apply_iso(const DenseTensor& psi, const DenseTensor& v, std::int64_t site,
                            std::int64_t ns, std::int64_t chi) {
  const std::int64_t out_dim = v.dim(0);
  std::int64_t b = 0;
  for (std::int64_t m = out_dim; m > 1; m /= chi) ++b;
  auto rest = rest_sites({site}, ns);
  std::vector<std::int64_t> perm;
  perm.push_back(site);
  for (auto s : rest) perm.push_back(s);
  DenseTensor t = psi.reshape(rep(chi, ns)).permute(perm).reshape({chi, ipow(chi, ns - 1)});
  t = matmul(v, t).reshape(rep(chi, ns - 1 + b));
  std::vector<std::int64_t> final_perm;
  auto pos_of = [&](std::int64_t s) {
    const auto it = std::find(rest.begin(), rest.end(), s);
    return b + static_cast<std::int64_t>(it - rest.begin());
  };
  for (std::int64_t s = 0; s < site; ++s) final_perm.push_back(pos_of(s));
  for (std::int64_t q = 0; q < b; ++q) final_perm.push_back(q);
  for (std::int64_t s = site + 1; s < ns; ++s) final_perm.push_back(pos_of(s));
  return t.permute(final_perm).reshape({ipow(chi, ns - 1 + b)});
}

}  // namespace

DenseTensor mps_statevector(const TNSInstance& inst) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, d = sp.d, L = sp.size;
  DenseTensor t({chi, 1});
  t[0] = 1.0;
  for (std::int64_t j = L - 1; j >= 0; --j) {
    const std::int64_t m = t.dim(1);
    t = matmul(inst.isometry({j, 0, TensorKind::Isometry}), t.reshape({chi, m}));
    t = t.reshape({chi, d * m});
  }
  return t;  // [chi, d^L], open auxiliary bond first
}

DenseTensor hier_statevector(const TNSInstance& inst) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, b = sp.branching, T = sp.layers();
  DenseTensor psi({chi});
  psi[0] = 1.0;
  std::int64_t ns = 1;
  for (std::int64_t tau = T; tau >= 1; --tau) {
    const std::int64_t Lt = sp.level_sites(tau);
    for (std::int64_t k = Lt - 1; k >= 0; --k) {
      psi = state_apply_iso(psi, inst.isometry({tau, k, TensorKind::Isometry}), k, ns, chi);
      ns += b - 1;
    }
    if (sp.has_disentanglers()) {
      for (std::int64_t k = 0; k < Lt; ++k) {
        const std::int64_t p = (b * k + b - 1) % ns, q = (b * k + b) % ns;
        psi = state_apply_gate(psi, inst.parent({tau, k, TensorKind::Disentangler}), {p, q}, ns,
                               chi);
      }
    }
  }
  return psi;
}

double statevector_expectation(const TNSInstance& inst, const LocalOperator& h) {
  const AnsatzSpec& sp = inst.spec();
  if (sp.family == Family::Mps) {
    DenseTensor phi = mps_statevector(inst);  // [chi, d^L]
    const std::int64_t L = sp.size, d = sp.d;
    std::vector<std::int64_t> dims;
    dims.push_back(sp.chi);
    for (std::int64_t s = 0; s < L; ++s) dims.push_back(d);
    // rho over support sites = ptrace of |phi><phi| keeping support
    DenseTensor dm = contract(phi.reshape({phi.size()}), phi.reshape({phi.size()}).conj(), {});
    DenseTensor rho = dm.reshape({phi.size(), phi.size()});
    std::vector<std::int64_t> traced;
    for (std::int64_t s = 0; s < L + 1; ++s) {
      const bool in_support = (s >= 1) && (s - 1 >= h.start) && (s - 1 < h.start + h.width);
      if (!in_support) traced.push_back(s);
    }
    DenseTensor red = partial_trace(rho, dims, traced);
    return trace(matmul(red, h.op)).real();
  }
  DenseTensor psi = hier_statevector(inst);
  const std::int64_t L = sp.sites(), chi = sp.chi;
  DenseTensor dm = contract(psi, psi.conj(), {}).reshape({psi.size(), psi.size()});
  std::vector<std::int64_t> keep;
  for (std::int64_t r = 0; r < h.width; ++r) keep.push_back((h.start + r) % L);
  DenseTensor red = op_ptrace_sites(dm, keep, L, chi);
  return trace(matmul(red, h.op)).real();
}

// ---- environments ----

double Environment::energy(const DenseTensor& u) const {
  DenseTensor ut = (m == 1) ? u : kron(u, DenseTensor::identity(m));
  return trace(matmul(matmul(x, ut.adjoint()), matmul(y, ut))).real();
}

namespace {

Environment mps_environment(const TNSInstance& inst, const TensorKey& key,
                            const LocalOperator& h) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, d = sp.d, L = sp.size;
  const std::int64_t j = key.layer, i = h.start, ie = h.start + h.width - 1;
  if (j < i)
    throw ConeMembershipError("site " + std::to_string(j) +
                              " is not in the causal cone of the term at " + std::to_string(i));
  if (ie >= L) throw ShapeError("interaction support outside the chain");
  auto iso = [&](std::int64_t t) { return inst.isometry({t, 0, TensorKind::Isometry}); };
  if (j > ie) {
    DenseTensor rho = DenseTensor::basis_projector(chi, 0);
    for (std::int64_t t = L - 1; t > j; --t) rho = mps_transition(iso(t), rho, chi, d);
    DenseTensor x = kron(rho, DenseTensor::basis_projector(d, 0));
    DenseTensor w = iso(ie);
    for (std::int64_t t = ie - 1; t >= i; --t) {
      const std::int64_t m = w.dim(0) / chi;
      w = matmul(kron(iso(t), DenseTensor::identity(m)), w);
    }
    DenseTensor a = matmul(matmul(w.adjoint(), kron(DenseTensor::identity(chi), h.op)), w);
    for (std::int64_t t = ie + 1; t < j; ++t) a = mps_transition_adj(iso(t), a, chi, d);
    DenseTensor y = kron(a, DenseTensor::identity(d));
    return {std::move(x), std::move(y), chi * d, 1};
  }
  // j inside the support
  const std::int64_t mspec = ipow(d, ie - j);
  DenseTensor rho = DenseTensor::basis_projector(chi, 0);
  for (std::int64_t t = L - 1; t > ie; --t) rho = mps_transition(iso(t), rho, chi, d);
  DenseTensor sigma;
  if (ie == j) {
    sigma = rho;  // on l_j alone
  } else {
    DenseTensor w = iso(ie);
    for (std::int64_t t = ie - 1; t > j; --t) {
      const std::int64_t m = w.dim(0) / chi;
      w = matmul(kron(iso(t), DenseTensor::identity(m)), w);
    }
    sigma = matmul(matmul(w, rho), w.adjoint());  // on (l_j, s_{j+1}..s_ie)
  }
  // X: insert the fresh |0_d><0_d| as the second leg: (l_j, fresh, s_{j+1}..)
  DenseTensor x = kron(sigma, DenseTensor::basis_projector(d, 0));
  {
    // legs now (l_j, spect, fresh): reorder to (l_j, fresh, spect)
    DenseTensor t = x.reshape({chi, mspec, d, chi, mspec, d}).permute({0, 2, 1, 3, 5, 4});
    x = t.reshape({chi * d * mspec, chi * d * mspec});
  }
  DenseTensor y;
  if (j == i) {
    y = kron(DenseTensor::identity(chi), h.op);  // (l_{i-1}, s_i..s_ie)
  } else {
    DenseTensor w2 = iso(j - 1);
    for (std::int64_t t = j - 2; t >= i; --t) {
      const std::int64_t m = w2.dim(0) / chi;
      w2 = matmul(kron(iso(t), DenseTensor::identity(m)), w2);
    }
    const std::int64_t rest = ipow(d, h.width - (j - i));
    DenseTensor wfull = kron(w2, DenseTensor::identity(rest));
    y = matmul(matmul(wfull.adjoint(), kron(DenseTensor::identity(chi), h.op)), wfull);
  }
  return {std::move(x), std::move(y), chi * d, mspec};
}

}  // namespace

Environment hier_cone_environment(const TNSInstance& inst, std::int64_t tau, std::int64_t w,
                                  const std::vector<std::int64_t>& kept, const TensorKey& key,
                                  const DenseTensor& rho, const DenseTensor& o_below) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, b = sp.branching, wd = sp.cone_width();
  const std::int64_t Lt = sp.level_sites(tau);
  const auto dslots = cone_disentangler_slots(sp);
  std::int64_t slot = -1;
  if (key.kind == TensorKind::Isometry) {
    for (std::int64_t g = 0; g < wd; ++g)
      if ((w + g) % Lt == key.pos) slot = g;
  } else {
    for (std::size_t g = 0; g < dslots.size(); ++g)
      if ((w + static_cast<std::int64_t>(g)) % Lt == key.pos) slot = static_cast<std::int64_t>(g);
  }
  if (slot < 0)
    throw ConeMembershipError("tensor " + key_to_string(key) + " is not in this causal cone");
  const std::int64_t nf = wd * b;
  DenseTensor oemb = op_embed(o_below, kept, nf, chi);
  auto iso_at = [&](std::int64_t g) {
    return inst.isometry({tau, (w + g) % Lt, TensorKind::Isometry});
  };
  auto dis_at = [&](std::int64_t g) {
    return inst.parent({tau, (w + g) % Lt, TensorKind::Disentangler});
  };
  if (key.kind == TensorKind::Disentangler) {
    DenseTensor s = rho;
    std::int64_t ns = wd;
    for (std::int64_t g = wd - 1; g >= 0; --g) {
      s = op_apply_iso(s, iso_at(g), g, ns, chi);
      ns += b - 1;
    }
    DenseTensor y = oemb;
    for (std::size_t g = 0; g < dslots.size(); ++g) {
      if (static_cast<std::int64_t>(g) == slot) continue;
      y = op_apply_gate(y, dis_at(static_cast<std::int64_t>(g)).adjoint(),
                        {dslots[g].first, dslots[g].second}, nf, chi);
    }
    const std::vector<std::int64_t> mine = {dslots[static_cast<std::size_t>(slot)].first,
                                            dslots[static_cast<std::size_t>(slot)].second};
    return {op_move_front(s, mine, nf, chi), op_move_front(y, mine, nf, chi), chi * chi,
            ipow(chi, nf - 2)};
  }
  DenseTensor s2 = rho;
  std::int64_t ns = wd;
  for (std::int64_t g = wd - 1; g >= 0; --g) {
    if (g == slot) continue;
    s2 = op_apply_iso(s2, iso_at(g), g, ns, chi);
    ns += b - 1;
  }
  std::int64_t cslot = 0, cnt = 0;
  for (std::int64_t g = 0; g < wd; ++g) {
    if (g == slot) cslot = cnt;
    cnt += (g == slot) ? 1 : b;
  }
  DenseTensor xbig = s2;
  for (std::int64_t r = 0; r < b - 1; ++r)
    xbig = kron(xbig, DenseTensor::basis_projector(chi, 0));
  std::vector<std::int64_t> lead = {cslot};
  for (std::int64_t r = 0; r < b - 1; ++r) lead.push_back(cnt + r);
  DenseTensor x = op_move_front(xbig, lead, cnt + b - 1, chi);
  DenseTensor y = oemb;
  for (std::size_t g = 0; g < dslots.size(); ++g)
    y = op_apply_gate(y, dis_at(static_cast<std::int64_t>(g)).adjoint(),
                      {dslots[g].first, dslots[g].second}, nf, chi);
  std::vector<std::int64_t> mine;
  for (std::int64_t r = 0; r < b; ++r) mine.push_back(b * slot + r);
  y = op_move_front(y, mine, nf, chi);
  return {std::move(x), std::move(y), ipow(chi, b), ipow(chi, nf - b)};
}

Environment hier_full_environment(const TNSInstance& inst, const TensorKey& key,
                                  const DenseTensor& rho_full, const DenseTensor& o_full) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, b = sp.branching, tau = key.layer;
  const std::int64_t Lt = sp.level_sites(tau);
  const std::int64_t Lf = sp.level_sites(tau - 1);
  auto dis_at = [&](std::int64_t kk) { return inst.parent({tau, kk, TensorKind::Disentangler}); };
  if (key.kind == TensorKind::Disentangler) {
    DenseTensor s = rho_full;
    std::int64_t ns = Lt;
    for (std::int64_t g = Lt - 1; g >= 0; --g) {
      s = op_apply_iso(s, inst.isometry({tau, g, TensorKind::Isometry}), g, ns, chi);
      ns += b - 1;
    }
    DenseTensor y = o_full;
    for (std::int64_t kk = 0; kk < Lt; ++kk) {
      if (kk == key.pos) continue;
      const std::int64_t p = (b * kk + b - 1) % Lf, q = (b * kk + b) % Lf;
      y = op_apply_gate(y, dis_at(kk).adjoint(), {p, q}, Lf, chi);
    }
    const std::vector<std::int64_t> mine = {(b * key.pos + b - 1) % Lf, (b * key.pos + b) % Lf};
    return {op_move_front(s, mine, Lf, chi), op_move_front(y, mine, Lf, chi), chi * chi,
            ipow(chi, Lf - 2)};
  }
  DenseTensor s2 = rho_full;
  std::int64_t ns = Lt;
  for (std::int64_t g = Lt - 1; g >= 0; --g) {
    if (g == key.pos) continue;
    s2 = op_apply_iso(s2, inst.isometry({tau, g, TensorKind::Isometry}), g, ns, chi);
    ns += b - 1;
  }
  std::int64_t cslot = 0, cnt = 0;
  for (std::int64_t g = 0; g < Lt; ++g) {
    if (g == key.pos) cslot = cnt;
    cnt += (g == key.pos) ? 1 : b;
  }
  DenseTensor xbig = s2;
  for (std::int64_t r = 0; r < b - 1; ++r) xbig = kron(xbig, DenseTensor::basis_projector(chi, 0));
  std::vector<std::int64_t> lead = {cslot};
  for (std::int64_t r = 0; r < b - 1; ++r) lead.push_back(cnt + r);
  DenseTensor x = op_move_front(xbig, lead, cnt + b - 1, chi);
  DenseTensor y = o_full;
  if (sp.has_disentanglers()) {
    for (std::int64_t kk = 0; kk < Lt; ++kk) {
      const std::int64_t p = (b * kk + b - 1) % Lf, q = (b * kk + b) % Lf;
      y = op_apply_gate(y, dis_at(kk).adjoint(), {p, q}, Lf, chi);
    }
  }
  std::vector<std::int64_t> mine;
  for (std::int64_t r = 0; r < b; ++r) mine.push_back(b * key.pos + r);
  y = op_move_front(y, mine, Lf, chi);
  return {std::move(x), std::move(y), ipow(chi, b), ipow(chi, Lf - b)};
}

namespace {

/// Interaction ascended and embedded into the whole level tau-1 (full-level
/// regime), following the term's cone path through the wrap-free layers.
DenseTensor ascend_to_full_level(const TNSInstance& inst, std::int64_t tau, std::int64_t i,
                                 const LocalOperator& h, const ConePath& path) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, b = sp.branching, wd = sp.cone_width();
  const std::int64_t t0 = cone_top_level(sp);
  DenseTensor o = h.op;
  for (std::int64_t t = 1; t <= std::min(tau - 1, t0); ++t)
    o = cone_step_up(inst, o, t, path.window[static_cast<std::size_t>(t)],
                     path.kept[static_cast<std::size_t>(t - 1)]);
  const std::int64_t lvl = std::min(tau - 1, t0);
  const std::int64_t nl = sp.level_sites(lvl);
  std::vector<std::int64_t> osites;
  for (std::int64_t r = 0; r < wd; ++r)
    osites.push_back((path.window[static_cast<std::size_t>(lvl)] + r) % nl);
  DenseTensor ofull = op_embed(o, osites, nl, chi);
  for (std::int64_t t = lvl + 1; t < tau; ++t) {
    const std::int64_t ntc = sp.level_sites(t), ntf = sp.level_sites(t - 1);
    if (sp.has_disentanglers()) {
      for (std::int64_t kk = 0; kk < ntc; ++kk) {
        const std::int64_t p = (b * kk + b - 1) % ntf, q = (b * kk + b) % ntf;
        ofull = op_apply_gate(ofull, inst.parent({t, kk, TensorKind::Disentangler}).adjoint(),
                              {p, q}, ntf, chi);
      }
    }
    DenseTensor wmat = DenseTensor::identity(1);
    for (std::int64_t kk = 0; kk < ntc; ++kk)
      wmat = kron(wmat, inst.isometry({t, kk, TensorKind::Isometry}));
    ofull = matmul(matmul(wmat.adjoint(), ofull), wmat);
  }
  return ofull;
}

Environment hier_environment(const TNSInstance& inst, const TensorKey& key,
                             const LocalOperator& h) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t wd = sp.cone_width();
  const std::int64_t tau = key.layer;
  const std::int64_t L = sp.sites();
  const std::int64_t i = ((h.start % L) + L) % L;
  if (h.width != wd) throw ValidationError("interaction width does not match the family cone");
  const std::int64_t t0 = cone_top_level(sp);
  ConePath path = cone_path(sp, i);
  if (tau <= t0) {
    DenseTensor rho = cone_state(inst, i, tau);
    DenseTensor o = h.op;
    for (std::int64_t t = 1; t < tau; ++t)
      o = cone_step_up(inst, o, t, path.window[static_cast<std::size_t>(t)],
                       path.kept[static_cast<std::size_t>(t - 1)]);
    return hier_cone_environment(inst, tau, path.window[static_cast<std::size_t>(tau)],
                                 path.kept[static_cast<std::size_t>(tau - 1)], key, rho, o);
  }
  DenseTensor rho = full_level_state(inst, tau);
  DenseTensor ofull = ascend_to_full_level(inst, tau, i, h, path);
  return hier_full_environment(inst, key, rho, ofull);
}

}  // namespace

Environment environment(const TNSInstance& inst, const TensorKey& key, const LocalOperator& h) {
  if (inst.spec().family == Family::Mps) return mps_environment(inst, key, h);
  return hier_environment(inst, key, h);
}

}  // namespace isotns
