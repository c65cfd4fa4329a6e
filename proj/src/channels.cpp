#include "isotns/channels.hpp"

#include "isotns/expectation.hpp"

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace isotns {

namespace {

std::int64_t ipow(std::int64_t b, std::int64_t e) {
  std::int64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace

double wg_identity(std::int64_t n) { return 1.0 / static_cast<double>(n * n - 1); }
double wg_swap(std::int64_t n) { return -1.0 / static_cast<double>(n * (n * n - 1)); }

DenseTensor swap_operator(std::int64_t n) {
  DenseTensor s({n * n, n * n});
  for (std::int64_t a = 0; a < n; ++a)
    for (std::int64_t b = 0; b < n; ++b) s[(a * n + b) * n * n + (b * n + a)] = 1.0;
  return s;
}

DenseTensor weingarten_twirl(std::int64_t n, const DenseTensor& a) {
  if (n < 2) throw ShapeError("k=2 Weingarten twirl requires n >= 2");
  if (a.rank() != 2 || a.dim(0) != n * n || a.dim(1) != n * n)
    throw ShapeError("twirl operand must act on the doubled space");
  const DenseTensor s = swap_operator(n);
  const cplx tr_a = trace(a);
  const cplx tr_sa = trace(matmul(s, a));
  const double denom = static_cast<double>(n * n - 1);
  const cplx f1 = (tr_a - tr_sa / static_cast<double>(n)) / denom;
  const cplx fs = (tr_sa - tr_a / static_cast<double>(n)) / denom;
  return DenseTensor::identity(n * n) * f1 + s * fs;
}

// ---- channel tags ----

ChannelTag channel_tag_from_string(const std::string& s) {
  if (s == "mps-site") return ChannelTag::MpsSite;
  if (s == "mera-binary-left") return ChannelTag::MeraBinaryLeft;
  if (s == "mera-binary-right") return ChannelTag::MeraBinaryRight;
  if (s == "mera-binary-average") return ChannelTag::MeraBinaryAverage;
  if (s == "ttns-binary") return ChannelTag::TtnsBinary;
  if (s == "ttns-ternary") return ChannelTag::TtnsTernary;
  if (s == "mera-ternary") return ChannelTag::MeraTernary;
  throw ValidationError("unknown channel tag '" + s + "'");
}

std::string channel_tag_to_string(ChannelTag t) {
  switch (t) {
    case ChannelTag::MpsSite: return "mps-site";
    case ChannelTag::MeraBinaryLeft: return "mera-binary-left";
    case ChannelTag::MeraBinaryRight: return "mera-binary-right";
    case ChannelTag::MeraBinaryAverage: return "mera-binary-average";
    case ChannelTag::TtnsBinary: return "ttns-binary";
    case ChannelTag::TtnsTernary: return "ttns-ternary";
    case ChannelTag::MeraTernary: return "mera-ternary";
  }
  return "?";
}

AnsatzSpec channel_family_spec(ChannelTag tag, std::int64_t chi, std::int64_t d) {
  AnsatzSpec sp;
  sp.chi = chi;
  sp.d = d;
  sp.size = 4;
  switch (tag) {
    case ChannelTag::MpsSite:
      sp.family = Family::Mps;
      sp.branching = 1;
      break;
    case ChannelTag::MeraBinaryLeft:
    case ChannelTag::MeraBinaryRight:
    case ChannelTag::MeraBinaryAverage:
      sp.family = Family::Mera;
      sp.branching = 2;
      sp.d = chi;
      break;
    case ChannelTag::TtnsBinary:
      sp.family = Family::Ttns;
      sp.branching = 2;
      sp.d = chi;
      break;
    case ChannelTag::TtnsTernary:
      sp.family = Family::Ttns;
      sp.branching = 3;
      sp.d = chi;
      break;
    case ChannelTag::MeraTernary:
      sp.family = Family::Mera;
      sp.branching = 3;
      sp.d = chi;
      break;
  }
  return sp;
}

// ---- spin-basis (identity/swap) construction ----

namespace {

// Product of per-site identity/swap operators on the doubled cone space,
// legs ordered (x_1..x_w, y_1..y_w) x (x'_1..x'_w, y'_1..y'_w).
DenseTensor spin_product_op(const std::vector<int>& config, std::int64_t chi) {
  const std::int64_t w = static_cast<std::int64_t>(config.size());
  DenseTensor k = DenseTensor::identity(1);
  for (int s : config) k = kron(k, s ? swap_operator(chi) : DenseTensor::identity(chi * chi));
  // kron row ordering is (x1,y1,x2,y2,..); regroup to (x1..xw, y1..yw)
  std::vector<std::int64_t> dims(static_cast<std::size_t>(2 * w), chi);
  std::vector<std::int64_t> shape;
  for (std::int64_t i = 0; i < 4 * w; ++i) shape.push_back(chi);
  DenseTensor t = k.reshape(shape);
  std::vector<std::int64_t> perm;
  for (std::int64_t s = 0; s < w; ++s) perm.push_back(2 * s);
  for (std::int64_t s = 0; s < w; ++s) perm.push_back(2 * s + 1);
  for (std::int64_t s = 0; s < w; ++s) perm.push_back(2 * w + 2 * s);
  for (std::int64_t s = 0; s < w; ++s) perm.push_back(2 * w + 2 * s + 1);
  const std::int64_t dd = ipow(chi, w);
  return t.permute(perm).reshape({dd * dd, dd * dd});
}

struct FamilyGeo {
  std::int64_t b, w;
  std::vector<std::pair<std::int64_t, std::int64_t>> dslots;
  std::vector<std::vector<std::int64_t>> moves;  // kept fine slots
};

FamilyGeo channel_geometry(ChannelTag tag) {
  switch (tag) {
    case ChannelTag::MeraBinaryLeft: return {2, 3, {{1, 2}, {3, 4}}, {{1, 2, 3}}};
    case ChannelTag::MeraBinaryRight: return {2, 3, {{1, 2}, {3, 4}}, {{2, 3, 4}}};
    case ChannelTag::MeraBinaryAverage: return {2, 3, {{1, 2}, {3, 4}}, {{1, 2, 3}, {2, 3, 4}}};
    case ChannelTag::TtnsBinary: return {2, 2, {}, {{0, 1}, {1, 2}}};
    case ChannelTag::TtnsTernary: return {3, 2, {}, {{0, 1}, {1, 2}, {2, 3}}};
    case ChannelTag::MeraTernary: return {3, 2, {{2, 3}}, {{1, 2}, {2, 3}, {3, 4}}};
    default: throw ValidationError("mps channel is built directly");
  }
}

SuperOperatorMatrix build_mps_channel(std::int64_t chi, std::int64_t d) {
  if (chi < 1 || d < 2) throw ValidationError("mps channel requires chi >= 1, d >= 2");
  const std::int64_t n = chi * d;
  if (n < 2) throw ValidationError("k=2 Weingarten average undefined for chi*d < 2");
  SuperOperatorMatrix ch;
  ch.tag = ChannelTag::MpsSite;
  ch.chi = chi;
  ch.d = d;
  ch.operand_dim = chi * chi;
  const std::int64_t d2 = ch.operand_dim * ch.operand_dim;  // chi^4
  DenseTensor id = DenseTensor::identity(chi * chi);
  DenseTensor sw = swap_operator(chi);
  ch.out = DenseTensor({d2, 2});
  ch.func = DenseTensor({2, d2});
  for (std::int64_t i = 0; i < d2; ++i) {
    ch.out[i * 2 + 0] = id[i];
    ch.out[i * 2 + 1] = sw[i];
    ch.func[i] = id[i];        // Tr(I x): I symmetric real
    ch.func[d2 + i] = sw[i];   // Tr(W x)
  }
  const double dd = static_cast<double>(d);
  const double denom = static_cast<double>(n * n - 1);
  ch.core = DenseTensor({2, 2});
  ch.core[0] = dd * dd / denom;                        // c_I from Tr x
  ch.core[1] = -dd * dd / (static_cast<double>(n) * denom);  // c_I from Tr(Wx)
  ch.core[2] = -dd / (static_cast<double>(n) * denom);       // c_W from Tr x
  ch.core[3] = dd / denom;                             // c_W from Tr(Wx)
  return ch;
}

SuperOperatorMatrix build_spin_channel(ChannelTag tag, std::int64_t chi) {
  if (chi < 2) throw ValidationError("hierarchical channels require chi >= 2");
  FamilyGeo geo = channel_geometry(tag);
  const std::int64_t w = geo.w, b = geo.b;
  const std::int64_t nconf = std::int64_t(1) << w;
  const std::int64_t a = chi, n = ipow(chi, b);
  const double denom = static_cast<double>(n * n - 1);
  const double alpha = (static_cast<double>(a * a) - static_cast<double>(a) / n) / denom;
  const double beta = (static_cast<double>(a) - static_cast<double>(a * a) / n) / denom;
  const double gamma = static_cast<double>(chi) / (static_cast<double>(chi * chi) + 1.0);
  const double c_same = 1.0 / denom;
  const double c_cross = -1.0 / (static_cast<double>(n) * denom);

  // C[sigma', Q]: per-site isometry-twirl functionals. Acting on a spin input
  // this reduces to the 2x2 transfer (alpha, beta) per site, which the tests
  // cross-check against the dense twirl.
  (void)alpha;
  (void)beta;
  DenseTensor cmat({nconf, nconf});
  for (std::int64_t sp = 0; sp < nconf; ++sp)
    for (std::int64_t q = 0; q < nconf; ++q) {
      double c = 1.0;
      for (std::int64_t t = 0; t < w; ++t) {
        const int spt = static_cast<int>((sp >> t) & 1), qt = static_cast<int>((q >> t) & 1);
        c *= (spt == qt) ? c_same : c_cross;
      }
      cmat[sp * nconf + q] = c;
    }

  // downstream transfer K[rho_out, sigma'] over {I, W}^w
  const std::int64_t nf = w * b;
  DenseTensor kavg({nconf, nconf});
  for (const auto& mv : geo.moves) {
    for (std::int64_t sp = 0; sp < nconf; ++sp) {
      std::vector<std::pair<std::vector<int>, double>> configs;
      std::vector<int> fine(static_cast<std::size_t>(nf));
      for (std::int64_t t = 0; t < w; ++t)
        for (std::int64_t r = 0; r < b; ++r)
          fine[static_cast<std::size_t>(t * b + r)] = static_cast<int>((sp >> t) & 1);
      configs.push_back({fine, 1.0});
      for (const auto& [p, q] : geo.dslots) {
        std::vector<std::pair<std::vector<int>, double>> next;
        for (auto& [cfg, wt] : configs) {
          if (cfg[static_cast<std::size_t>(p)] == cfg[static_cast<std::size_t>(q)]) {
            next.push_back({cfg, wt});
          } else {
            for (int val = 0; val < 2; ++val) {
              auto c2 = cfg;
              c2[static_cast<std::size_t>(p)] = val;
              c2[static_cast<std::size_t>(q)] = val;
              next.push_back({c2, wt * gamma});
            }
          }
        }
        configs = std::move(next);
      }
      for (const auto& [cfg, wt] : configs) {
        double f = wt;
        std::int64_t outc = 0, oi = 0;
        for (std::int64_t s = 0; s < nf; ++s) {
          const bool keep = std::find(mv.begin(), mv.end(), s) != mv.end();
          if (keep) {
            outc |= static_cast<std::int64_t>(cfg[static_cast<std::size_t>(s)]) << oi;
            ++oi;
          } else {
            f *= cfg[static_cast<std::size_t>(s)] ? static_cast<double>(chi)
                                                  : static_cast<double>(chi * chi);
          }
        }
        kavg[outc * nconf + sp] += f;
      }
    }
  }
  kavg *= 1.0 / static_cast<double>(geo.moves.size());

  SuperOperatorMatrix ch;
  ch.tag = tag;
  ch.chi = chi;
  ch.d = chi;
  ch.operand_dim = ipow(chi, w) * ipow(chi, w);  // doubled cone dimension
  const std::int64_t d2 = ch.operand_dim * ch.operand_dim;
  ch.out = DenseTensor({d2, nconf});
  ch.func = DenseTensor({nconf, d2});
  for (std::int64_t c = 0; c < nconf; ++c) {
    std::vector<int> cfg(static_cast<std::size_t>(w));
    for (std::int64_t t = 0; t < w; ++t) cfg[static_cast<std::size_t>(t)] = static_cast<int>((c >> t) & 1);
    DenseTensor p = spin_product_op(cfg, chi);
    for (std::int64_t i = 0; i < d2; ++i) {
      ch.out[i * nconf + c] = p[i];
      ch.func[c * d2 + i] = p[i];  // real symmetric products
    }
  }
  ch.core = matmul(kavg, cmat);
  return ch;
}

}  // namespace

SuperOperatorMatrix build_doubled_channel(ChannelTag tag, std::int64_t chi, std::int64_t d) {
  if (tag == ChannelTag::MpsSite) return build_mps_channel(chi, d);
  return build_spin_channel(tag, chi);
}

std::vector<cplx> SuperOperatorMatrix::apply(const std::vector<cplx>& x) const {
  const std::int64_t d2 = out.dim(0), r = core.dim(0);
  if (static_cast<std::int64_t>(x.size()) != d2) throw ShapeError("channel apply size mismatch");
  std::vector<cplx> f(static_cast<std::size_t>(r), cplx(0, 0));
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t i = 0; i < d2; ++i) f[static_cast<std::size_t>(k)] += func[k * d2 + i] * x[static_cast<std::size_t>(i)];
  std::vector<cplx> g(static_cast<std::size_t>(r), cplx(0, 0));
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t l = 0; l < r; ++l) g[static_cast<std::size_t>(k)] += core[k * r + l] * f[static_cast<std::size_t>(l)];
  std::vector<cplx> y(static_cast<std::size_t>(d2), cplx(0, 0));
  for (std::int64_t i = 0; i < d2; ++i)
    for (std::int64_t k = 0; k < r; ++k) y[static_cast<std::size_t>(i)] += out[i * r + k] * g[static_cast<std::size_t>(k)];
  return y;
}

std::vector<cplx> SuperOperatorMatrix::apply_adjoint(const std::vector<cplx>& x) const {
  const std::int64_t d2 = out.dim(0), r = core.dim(0);
  if (static_cast<std::int64_t>(x.size()) != d2) throw ShapeError("channel apply size mismatch");
  std::vector<cplx> f(static_cast<std::size_t>(r), cplx(0, 0));
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t i = 0; i < d2; ++i)
      f[static_cast<std::size_t>(k)] += std::conj(out[i * r + k]) * x[static_cast<std::size_t>(i)];
  std::vector<cplx> g(static_cast<std::size_t>(r), cplx(0, 0));
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t l = 0; l < r; ++l)
      g[static_cast<std::size_t>(k)] += std::conj(core[l * r + k]) * f[static_cast<std::size_t>(l)];
  std::vector<cplx> y(static_cast<std::size_t>(d2), cplx(0, 0));
  for (std::int64_t i = 0; i < d2; ++i)
    for (std::int64_t k = 0; k < r; ++k)
      y[static_cast<std::size_t>(i)] += std::conj(func[k * d2 + i]) * g[static_cast<std::size_t>(k)];
  return y;
}

DenseTensor SuperOperatorMatrix::dense() const {
  return matmul(matmul(out, core), func);
}

std::vector<cplx> SuperOperatorMatrix::reduced_eigenvalues() const {
  // nonzero spectrum of out*core*func equals that of core*(func*out)
  DenseTensor small = matmul(core, matmul(func, out));
  const std::int64_t r = small.dim(0);
  std::vector<cplx> a(static_cast<std::size_t>(r * r));
  for (std::int64_t i = 0; i < r * r; ++i) a[static_cast<std::size_t>(i)] = small[i];
  std::vector<cplx> w(static_cast<std::size_t>(r));
  const int info = LAPACKE_zgeev(LAPACK_ROW_MAJOR, 'N', 'N', static_cast<int>(r),
                                 reinterpret_cast<lapack_complex_double*>(a.data()),
                                 static_cast<int>(r),
                                 reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1,
                                 nullptr, 1);
  if (info != 0) throw NumericalError("zgeev failed on reduced channel matrix");
  std::sort(w.begin(), w.end(), [](cplx x, cplx y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) > std::abs(y);
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return w;
}

// ---- sampled transition maps (Monte Carlo consistency) ----

DenseTensor sample_transition_superop(ChannelTag tag, std::int64_t chi, std::int64_t d,
                                      RngStream& rng, std::int64_t move) {
  if (tag == ChannelTag::MpsSite) {
    DenseTensor u = haar_unitary(chi * d, rng);
    DenseTensor v({chi * d, chi});
    for (std::int64_t r = 0; r < chi * d; ++r)
      for (std::int64_t bnd = 0; bnd < chi; ++bnd) v[r * chi + bnd] = u[r * chi * d + bnd * d];
    DenseTensor m({chi * chi, chi * chi});
    for (std::int64_t bas = 0; bas < chi * chi; ++bas) {
      DenseTensor e({chi, chi});
      e[bas] = 1.0;
      DenseTensor me = mps_transition(v, e, chi, d);
      for (std::int64_t i = 0; i < chi * chi; ++i) m[i * chi * chi + bas] = me[i];
    }
    return m;
  }
  FamilyGeo geo = channel_geometry(tag);
  const std::int64_t b = geo.b, w = geo.w, nf = w * b;
  std::vector<DenseTensor> isos, dis;
  const std::int64_t ref = ipow(chi, b - 1);
  for (std::int64_t g = 0; g < w; ++g) {
    DenseTensor u = haar_unitary(ipow(chi, b), rng);
    DenseTensor v({ipow(chi, b), chi});
    for (std::int64_t r = 0; r < ipow(chi, b); ++r)
      for (std::int64_t c = 0; c < chi; ++c) v[r * chi + c] = u[r * ipow(chi, b) + c * ref];
    isos.push_back(v);
  }
  for (std::size_t idx = 0; idx < geo.dslots.size(); ++idx) dis.push_back(haar_unitary(chi * chi, rng));
  const std::size_t mv_idx = (move >= 0) ? static_cast<std::size_t>(move)
                                         : static_cast<std::size_t>(rng.next_u64() %
                                                                    geo.moves.size());
  const auto& kept = geo.moves.at(mv_idx);
  const std::int64_t dc = ipow(chi, w);
  DenseTensor m({dc * dc, dc * dc});
  for (std::int64_t bas = 0; bas < dc * dc; ++bas) {
    DenseTensor e({dc, dc});
    e[bas] = 1.0;
    DenseTensor r = e;
    std::int64_t ns = w;
    for (std::int64_t g = w - 1; g >= 0; --g) {
      r = op_apply_iso(r, isos[static_cast<std::size_t>(g)], g, ns, chi);
      ns += b - 1;
    }
    for (std::size_t idx = 0; idx < geo.dslots.size(); ++idx)
      r = op_apply_gate(r, dis[idx], {geo.dslots[idx].first, geo.dslots[idx].second}, nf, chi);
    DenseTensor red = op_ptrace_sites(r, kept, nf, chi);
    for (std::int64_t i = 0; i < dc * dc; ++i) m[i * dc * dc + bas] = red[i];
  }
  return m;
}

std::vector<cplx> doubled_apply(const DenseTensor& superop, const std::vector<cplx>& x,
                                std::int64_t cone_dim) {
  const std::int64_t dc = cone_dim;
  // x indexes [(a1 a2), (b1 b2)]; regroup to [(a1 b1), (a2 b2)], apply M
  // on both sides, regroup back.
  DenseTensor xt({dc, dc, dc, dc});
  for (std::int64_t i = 0; i < dc * dc * dc * dc; ++i) xt[i] = x[static_cast<std::size_t>(i)];
  DenseTensor xp = xt.permute({0, 2, 1, 3}).reshape({dc * dc, dc * dc});
  DenseTensor y = matmul(matmul(superop, xp), superop.reshape({dc * dc, dc * dc}).permute({1, 0}));
  DenseTensor yt = y.reshape({dc, dc, dc, dc}).permute({0, 2, 1, 3});
  std::vector<cplx> outv(static_cast<std::size_t>(dc * dc * dc * dc));
  for (std::int64_t i = 0; i < dc * dc * dc * dc; ++i) outv[static_cast<std::size_t>(i)] = yt[i];
  return outv;
}

// ---- spectra ----

namespace {

double vec_norm(const std::vector<cplx>& v) {
  double s = 0;
  for (auto z : v) s += std::norm(z);
  return std::sqrt(s);
}

cplx vec_dot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  cplx s(0, 0);
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

void vec_scale(std::vector<cplx>& v, cplx s) {
  for (auto& z : v) z *= s;
}

void vec_axpy(std::vector<cplx>& y, cplx a, const std::vector<cplx>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// deflated power iteration for the pair at the given eigenvalue estimate
struct PowerResult {
  cplx value;
  std::vector<cplx> right, left;
  double residual;
};

PowerResult power_pair(const SuperOperatorMatrix& ch, const std::vector<PowerResult>& found,
                       RngStream& rng, int max_iter = 2000, double tol = 1e-12) {
  const std::int64_t n = ch.rows();
  std::vector<cplx> v(static_cast<std::size_t>(n)), u(static_cast<std::size_t>(n));
  for (auto& z : v) z = rng.gaussian_complex();
  if (found.empty()) {
    // seed the left iterate with the known lambda_1 left eigenvector, the
    // identity functional (trace preservation)
    const std::int64_t dd = ch.operand_dim;
    std::fill(u.begin(), u.end(), cplx(0, 0));
    for (std::int64_t i = 0; i < dd; ++i) u[static_cast<std::size_t>(i * dd + i)] = 1.0;
  } else {
    for (auto& z : u) z = rng.gaussian_complex();
  }
  auto deflate_right = [&](std::vector<cplx>& x) {
    for (const auto& f : found) {
      cplx c = vec_dot(f.left, x);  // <<l|x>> with <<l|r>>=1
      vec_axpy(x, -c, f.right);
    }
  };
  auto deflate_left = [&](std::vector<cplx>& x) {
    for (const auto& f : found) {
      cplx c = vec_dot(f.right, x);
      vec_axpy(x, -c, f.left);
    }
  };
  deflate_right(v);
  deflate_left(u);
  vec_scale(v, 1.0 / vec_norm(v));
  vec_scale(u, 1.0 / vec_norm(u));
  cplx lam(0, 0);
  double res = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    auto mv = ch.apply(v);
    deflate_right(mv);
    auto mu = ch.apply_adjoint(u);
    deflate_left(mu);
    const double nv = vec_norm(mv), nu = vec_norm(mu);
    if (nv < 1e-300 || nu < 1e-300) {
      lam = 0;
      v = mv;
      u = mu;
      res = 0;
      break;
    }
    vec_scale(mv, 1.0 / nv);
    vec_scale(mu, 1.0 / nu);
    v = std::move(mv);
    u = std::move(mu);
    auto av = ch.apply(v);
    lam = vec_dot(u, av) / vec_dot(u, v);
    std::vector<cplx> r = av;
    vec_axpy(r, -lam, v);
    res = vec_norm(r);
    if (res < tol * std::max(1.0, std::abs(lam))) break;
  }
  // normalize <<l|r>> = 1
  cplx ov = vec_dot(u, v);
  if (std::abs(ov) > 1e-300) vec_scale(u, std::conj(cplx(1.0, 0) / ov));
  return {lam, v, u, res};
}

}  // namespace

SpectrumResult spectrum(const SuperOperatorMatrix& ch, std::int64_t top_k,
                        std::int64_t dense_threshold) {
  const std::int64_t n = ch.rows();
  SpectrumResult out;
  if (n <= dense_threshold) {
    DenseTensor m = ch.dense();
    std::vector<cplx> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n * n; ++i) a[static_cast<std::size_t>(i)] = m[i];
    std::vector<cplx> w(static_cast<std::size_t>(n));
    const bool want_vectors = n <= 1500;
    std::vector<cplx> vl, vr;
    int info = 0;
    if (want_vectors) {
      vl.resize(a.size());
      vr.resize(a.size());
      // pass the row-major buffer as column-major (the transpose): its right
      // eigenvectors are our left ones (conjugated) and vice versa
      info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'V', 'V', static_cast<int>(n),
                           reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<int>(n),
                           reinterpret_cast<lapack_complex_double*>(w.data()),
                           reinterpret_cast<lapack_complex_double*>(vl.data()), static_cast<int>(n),
                           reinterpret_cast<lapack_complex_double*>(vr.data()), static_cast<int>(n));
    } else {
      info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', static_cast<int>(n),
                           reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<int>(n),
                           reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1, nullptr,
                           1);
    }
    if (info != 0) throw NumericalError("zgeev failed (info=" + std::to_string(info) + ")");
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
      const cplx ax = w[static_cast<std::size_t>(x)], ay = w[static_cast<std::size_t>(y)];
      if (std::abs(ax) != std::abs(ay)) return std::abs(ax) > std::abs(ay);
      if (ax.real() != ay.real()) return ax.real() > ay.real();
      return ax.imag() > ay.imag();
    });
    for (auto idx : order) out.eigenvalues.push_back(w[static_cast<std::size_t>(idx)]);
    if (want_vectors) {
      for (std::int64_t k = 0; k < std::min<std::int64_t>(top_k, n); ++k) {
        const std::int64_t idx = order[static_cast<std::size_t>(k)];
        EigenPair p;
        p.value = w[static_cast<std::size_t>(idx)];
        p.right.resize(static_cast<std::size_t>(n));
        p.left.resize(static_cast<std::size_t>(n));
        // col-major columns of VL/VR at idx
        for (std::int64_t i = 0; i < n; ++i) {
          p.right[static_cast<std::size_t>(i)] = std::conj(vl[static_cast<std::size_t>(idx * n + i)]);
          p.left[static_cast<std::size_t>(i)] = std::conj(vr[static_cast<std::size_t>(idx * n + i)]);
        }
        cplx ov = vec_dot(p.left, p.right);
        if (std::abs(ov) > 1e-300) {
          const cplx c = std::conj(cplx(1.0, 0) / ov);
          for (auto& z : p.left) z *= c;
        }
        auto av = ch.apply(p.right);
        std::vector<cplx> r = av;
        vec_axpy(r, -p.value, p.right);
        p.residual = vec_norm(r);
        out.pairs.push_back(std::move(p));
      }
    } else {
      RngStream rng(12345);
      std::vector<PowerResult> found;
      for (std::int64_t k = 0; k < top_k; ++k) {
        PowerResult pr = power_pair(ch, found, rng);
        found.push_back(pr);
        EigenPair p;
        p.value = out.eigenvalues[static_cast<std::size_t>(k)];  // dense values are authoritative
        p.right = pr.right;
        p.left = pr.left;
        p.residual = pr.residual;
        out.pairs.push_back(std::move(p));
      }
    }
  } else {
    RngStream rng(12345);
    std::vector<PowerResult> found;
    // seed with the known lambda_1 pair: left = identity functional
    for (std::int64_t k = 0; k < top_k; ++k) {
      PowerResult pr = power_pair(ch, found, rng);
      if (pr.residual > 1e-8 * std::max(1.0, std::abs(pr.value)))
        throw NumericalError("power iteration did not converge (residual " +
                             std::to_string(pr.residual) + ")");
      found.push_back(pr);
      EigenPair p;
      p.value = pr.value;
      p.right = pr.right;
      p.left = pr.left;
      p.residual = pr.residual;
      out.eigenvalues.push_back(pr.value);
      out.pairs.push_back(std::move(p));
    }
  }
  // degeneracy annotations
  for (std::size_t k = 0; k + 1 < out.pairs.size(); ++k) {
    if (std::abs(std::abs(out.pairs[k].value) - std::abs(out.pairs[k + 1].value)) < 1e-10) {
      out.pairs[k].degenerate = true;
      out.pairs[k + 1].degenerate = true;
    }
  }
  return out;
}

std::string spectrum_to_json(const SuperOperatorMatrix& ch, const SpectrumResult& sp) {
  nlohmann::json j;
  AnsatzSpec fam = channel_family_spec(ch.tag, ch.chi, ch.d);
  j["family"] = fam.family_tag();
  j["tag"] = channel_tag_to_string(ch.tag);
  j["chi"] = ch.chi;
  j["d"] = ch.d;
  nlohmann::json evs = nlohmann::json::array();
  for (auto v : sp.eigenvalues) evs.push_back({{"re", v.real()}, {"im", v.imag()}});
  j["eigenvalues"] = evs;
  try {
    const double eta = analytic_eta(fam.family_tag(), ch.chi, ch.d);
    j["analytic_eta"] = eta;
    j["b_eta"] = static_cast<double>(fam.branching) * eta;
  } catch (const ValidationError&) {
    j["analytic_eta"] = nullptr;
    j["b_eta"] = nullptr;
  }
  return j.dump(2);
}

// ---- closed-form predictions ----

double mps_eta(std::int64_t chi, std::int64_t d) {
  if (chi == 1) return 0.0;
  const double c2 = static_cast<double>(chi * chi);
  const double dd = static_cast<double>(d);
  return (1.0 - 1.0 / c2) / (dd - 1.0 / (c2 * dd));
}

EtaEntry analytic_eta_entry(const std::string& family, std::int64_t chi, std::int64_t d) {
  const double c = static_cast<double>(chi);
  if (family == "mps") return {mps_eta(chi, d), true};
  if (family == "ttns2") return {c / (1 + c * c), true};
  if (family == "ttns3") return {c * c / (1 + c * c + c * c * c * c), true};
  if (family == "mera2") {
    EtaEntry e{c * c * std::pow(1 + c, 4) / (2 * std::pow(1 + c * c, 4)), true};
    e.lambda3 = c * c * std::pow(1 + c, 2) / (2 * std::pow(1 + c * c, 3));
    e.has_lambda3 = true;
    return e;
  }
  if (family == "mera3") return {1.0 / (3 * c * c), false};
  if (family == "mera2d33") return {1.0 / (9 * std::pow(c, 8)), false};
  throw ValidationError("unknown family tag '" + family + "' for analytic eta");
}

double analytic_eta(const std::string& family, std::int64_t chi, std::int64_t d) {
  return analytic_eta_entry(family, chi, d).eta;
}

double predicted_layer_scaling(const std::string& family, std::int64_t chi) {
  std::int64_t b = 0;
  if (family == "mps") b = 1;
  else if (family == "ttns2" || family == "mera2") b = 2;
  else if (family == "ttns3" || family == "mera3") b = 3;
  else if (family == "mera2d33") b = 9;
  else throw ValidationError("unknown family tag '" + family + "'");
  return static_cast<double>(b) * analytic_eta(family, chi, chi);
}

double predicted_mps_variance_bulk(std::int64_t chi, std::int64_t d, double trh2) {
  const double c2 = static_cast<double>(chi * chi);
  const double dd = static_cast<double>(d);
  return 2.0 * trh2 * (c2 * dd * dd - 1.0) / (dd * (dd - 1.0) * std::pow(c2 * dd + 1.0, 2));
}

double predicted_mps_variance(std::int64_t chi, std::int64_t d, double trh2, std::int64_t j,
                              std::int64_t L) {
  if (j < 0 || j >= L) throw ValidationError("site out of range");
  const double eta = mps_eta(chi, d);
  const double pref = 2.0 * trh2 / (static_cast<double>(d) * (static_cast<double>(chi * chi * d) + 1.0));
  if (eta == 0.0) return pref;
  return pref * (1.0 - std::pow(eta, static_cast<double>(j + 1))) / (1.0 - eta);
}

}  // namespace isotns
