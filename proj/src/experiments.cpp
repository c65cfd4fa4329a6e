#include "isotns/experiments.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <atomic>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace isotns {

namespace {

std::int64_t ipow(std::int64_t b, std::int64_t e) {
  std::int64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* code_version() { return "0.1.0"; }

std::int64_t ExperimentConfig::interaction_width() const {
  if (width > 0) return width;
  return (spec.family == Family::Mps) ? 1 : spec.cone_width();
}

std::vector<std::int64_t> ExperimentConfig::probe_positions() const {
  if (!positions.empty()) return positions;
  std::vector<std::int64_t> out;
  if (spec.family == Family::Mps) {
    for (std::int64_t j = 0; j < spec.size; ++j) out.push_back(j);
  } else {
    for (std::int64_t t = 1; t <= spec.layers(); ++t) out.push_back(t);
  }
  return out;
}

void ExperimentConfig::validate() const {
  spec.validate();
  std::vector<std::string> errs;
  if (n_samples < 2) errs.push_back("samples must be >= 2");
  if (workers < 1) errs.push_back("workers must be >= 1");
  const std::int64_t w = interaction_width();
  if (spec.family == Family::Mps) {
    if (w < 1 || w > 2) errs.push_back("mps scans support width 1 or 2");
    if (w > spec.size) errs.push_back("interaction wider than the chain");
    for (auto p : positions)
      if (p < 0 || p >= spec.size) errs.push_back("site " + std::to_string(p) + " out of range");
  } else {
    if (w != spec.cone_width())
      errs.push_back("interaction width must match the family causal cone (" +
                     std::to_string(spec.cone_width()) + ")");
    for (auto p : positions)
      if (p < 1 || p > spec.layers()) errs.push_back("layer " + std::to_string(p) + " out of range");
    const std::int64_t T = spec.layers();
    if (fit_lo < 1 || fit_lo > T) errs.push_back("fit window start outside [1, T]");
    if (fit_hi >= 0 && (fit_hi > T || fit_hi < fit_lo)) errs.push_back("invalid fit window");
  }
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid experiment config:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw ValidationError(os.str());
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "branching=" << spec.branching << "\n";
  os << "chi=" << spec.chi << "\n";
  os << "d=" << spec.d << "\n";
  os << "family=" << family_to_string(spec.family) << "\n";
  os << "fit_hi=" << fit_hi << "\n";
  os << "fit_lo=" << fit_lo << "\n";
  os << "homogeneous=" << (spec.homogeneous ? 1 : 0) << "\n";
  os << "positions=";
  for (std::size_t k = 0; k < positions.size(); ++k) os << (k ? "," : "") << positions[k];
  os << "\n";
  os << "samples=" << n_samples << "\n";
  os << "seed=" << seed << "\n";
  os << "size=" << spec.size << "\n";
  os << "trotter=" << spec.trotter << "\n";
  os << "width=" << width << "\n";
  os << "workers=" << workers << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  // FNV-1a over the canonical key=value text
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::pair<double, double> mean_stderr(const std::vector<double>& values) {
  const std::size_t n = values.size();
  double mean = 0.0, m2 = 0.0;
  std::int64_t cnt = 0;
  for (double v : values) {
    ++cnt;
    const double delta = v - mean;
    mean += delta / static_cast<double>(cnt);
    m2 += delta * (v - mean);
  }
  const double var = (n > 1) ? m2 / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

std::vector<double> parallel_samples(std::int64_t count, std::int64_t workers,
                                     const std::function<double(std::int64_t)>& fn) {
  std::vector<double> values(static_cast<std::size_t>(count));
  if (workers <= 1) {
    for (std::int64_t k = 0; k < count; ++k) values[static_cast<std::size_t>(k)] = fn(k);
    return values;
  }
  std::vector<std::thread> pool;
  std::atomic<std::int64_t> next{0};
  for (std::int64_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t k = next.fetch_add(1);
        if (k >= count) break;
        values[static_cast<std::size_t>(k)] = fn(k);
      }
    });
  }
  for (auto& th : pool) th.join();
  return values;
}

// ---- mps per-sample evaluator (one right-to-left and one left-to-right sweep) ----

namespace {

std::vector<double> mps_sample_values(const TNSInstance& inst, const LocalOperator& proto,
                                      const std::vector<std::int64_t>& positions) {
  const AnsatzSpec& sp = inst.spec();
  const std::int64_t chi = sp.chi, d = sp.d, L = sp.size, n = chi * d;
  const std::int64_t w = proto.width;
  std::vector<DenseTensor> iso(static_cast<std::size_t>(L));
  for (std::int64_t j = 0; j < L; ++j) iso[static_cast<std::size_t>(j)] = inst.isometry({j, 0, TensorKind::Isometry});

  std::vector<DenseTensor> rho_in(static_cast<std::size_t>(L));
  rho_in[static_cast<std::size_t>(L - 1)] = DenseTensor::basis_projector(chi, 0);
  for (std::int64_t j = L - 2; j >= 0; --j)
    rho_in[static_cast<std::size_t>(j)] =
        mps_transition(iso[static_cast<std::size_t>(j + 1)], rho_in[static_cast<std::size_t>(j + 1)], chi, d);

  const DenseTensor id_chi = DenseTensor::identity(chi);
  const DenseTensor id_d = DenseTensor::identity(d);
  const DenseTensor fresh = DenseTensor::basis_projector(d, 0);
  std::vector<DenseTensor> below(static_cast<std::size_t>(L));  // ascended sum of fully-below terms
  if (w == 1) {
    DenseTensor acc({chi, chi});
    for (std::int64_t k = 0; k < L; ++k) {
      if (k > 0) acc = mps_transition_adj(iso[static_cast<std::size_t>(k)], acc, chi, d);
      DenseTensor lh = matmul(matmul(iso[static_cast<std::size_t>(k)].adjoint(), kron(id_chi, proto.op)),
                              iso[static_cast<std::size_t>(k)]);
      acc += lh;
      below[static_cast<std::size_t>(k)] = acc;  // all terms i <= k ascended to bond k
    }
  } else {
    DenseTensor acc({chi, chi});
    for (std::int64_t k = 1; k < L; ++k) {
      acc = mps_transition_adj(iso[static_cast<std::size_t>(k)], acc, chi, d);
      // term starting at i = k-1 enters at bond k
      if (k - 1 + w - 1 < L) {
        DenseTensor wmat = matmul(kron(iso[static_cast<std::size_t>(k - 1)], id_d),
                                  iso[static_cast<std::size_t>(k)]);
        acc += matmul(matmul(wmat.adjoint(), kron(id_chi, proto.op)), wmat);
      }
      below[static_cast<std::size_t>(k)] = acc;
    }
    below[0] = DenseTensor({chi, chi});
  }

  std::vector<double> out;
  out.reserve(positions.size());
  for (std::int64_t j : positions) {
    DenseTensor g({n, n});
    // terms strictly below the tensor plus (width 1) the on-site term: M = 1
    DenseTensor ya({n, n});
    bool have_a = false;
    if (w == 1) {
      DenseTensor core = (j > 0) ? mps_transition_adj(iso[static_cast<std::size_t>(j)],
                                                      below[static_cast<std::size_t>(j - 1)], chi, d)
                                 : DenseTensor({chi, chi});
      ya = kron(core, id_d) + kron(id_chi, proto.op);
      have_a = true;
    } else if (j >= 1) {
      DenseTensor core = mps_transition_adj(iso[static_cast<std::size_t>(j)],
                                            below[static_cast<std::size_t>(j - 1)], chi, d);
      // plus the term at i = j-1 (tensor on the upper end of its support)
      DenseTensor vfull = kron(iso[static_cast<std::size_t>(j - 1)], id_d);
      ya = kron(core, id_d) + matmul(matmul(vfull.adjoint(), kron(id_chi, proto.op)), vfull);
      have_a = true;
    }
    if (have_a) {
      Environment env{kron(rho_in[static_cast<std::size_t>(j)], fresh), ya, n, 1};
      g += riemannian_gradient(env, inst.parent({j, 0, TensorKind::Isometry}));
    }
    if (w == 2 && j + 1 < L) {
      // term at i = j: one physical spectator site
      DenseTensor sigma = matmul(matmul(iso[static_cast<std::size_t>(j + 1)],
                                        rho_in[static_cast<std::size_t>(j + 1)]),
                                 iso[static_cast<std::size_t>(j + 1)].adjoint());
      DenseTensor xb = kron(sigma, fresh)
                           .reshape({chi, d, d, chi, d, d})
                           .permute({0, 2, 1, 3, 5, 4})
                           .reshape({n * d, n * d});
      Environment env{std::move(xb), kron(id_chi, proto.op), n, d};
      g += riemannian_gradient(env, inst.parent({j, 0, TensorKind::Isometry}));
    }
    out.push_back(hs_inner(g, g).real() / static_cast<double>(n));
  }
  return out;
}

// ---- hierarchical per-sample evaluator with memoized cone states ----

struct HierEval {
  const TNSInstance& inst;
  const LocalOperator& proto;
  std::int64_t t0, T, L, chi, b, wd;
  std::vector<DenseTensor> full_rho;                       // level t0..T
  std::vector<std::map<std::int64_t, DenseTensor>> memo;   // per level <= t0

  HierEval(const TNSInstance& in, const LocalOperator& p)
      : inst(in), proto(p) {
    const AnsatzSpec& sp = inst.spec();
    t0 = cone_top_level(sp);
    T = sp.layers();
    L = sp.sites();
    chi = sp.chi;
    b = sp.branching;
    wd = sp.cone_width();
    memo.resize(static_cast<std::size_t>(t0 + 1));
    full_rho.resize(static_cast<std::size_t>(T + 1));
    for (std::int64_t t = T; t >= t0; --t) full_rho[static_cast<std::size_t>(t)] = full_level_state(inst, t);
  }

  const DenseTensor& cone_rho(std::int64_t t, std::int64_t w) {
    auto& m = memo[static_cast<std::size_t>(t)];
    auto it = m.find(w);
    if (it != m.end()) return it->second;
    DenseTensor r;
    if (t == t0) {
      const std::int64_t ns = inst.spec().level_sites(t0);
      std::vector<std::int64_t> keep;
      for (std::int64_t q = 0; q < wd; ++q) keep.push_back((w + q) % ns);
      r = op_ptrace_sites(full_rho[static_cast<std::size_t>(t0)], keep, ns, chi);
    } else {
      ConeMove mv = cone_move(inst.spec(), w, inst.spec().level_sites(t + 1));
      const DenseTensor& up = cone_rho(t + 1, mv.coarse_start);
      r = cone_step_down(inst, up, t + 1, mv.coarse_start, mv.kept);
    }
    return m.emplace(w, std::move(r)).first->second;
  }

  // accumulate gradients of the extensive Hamiltonian into per-key slots
  void accumulate(std::map<TensorKey, DenseTensor>& grads,
                  const std::vector<std::int64_t>& layers_wanted) {
    const AnsatzSpec& sp = inst.spec();
    std::vector<bool> want(static_cast<std::size_t>(T + 1), false);
    for (auto t : layers_wanted) want[static_cast<std::size_t>(t)] = true;
    const auto dslots = cone_disentangler_slots(sp);
    for (std::int64_t i = 0; i < L; ++i) {
      ConePath path = cone_path(sp, i);
      DenseTensor asc = proto.op;  // ascended to the fine side of the next layer
      DenseTensor ofull;           // full-level embedded (used above t0)
      bool have_full = false;
      for (std::int64_t tau = 1; tau <= T; ++tau) {
        if (tau <= t0) {
          if (want[static_cast<std::size_t>(tau)]) {
            const std::int64_t w = path.window[static_cast<std::size_t>(tau)];
            const auto& kept = path.kept[static_cast<std::size_t>(tau - 1)];
            const DenseTensor& rho = cone_rho(tau, w);
            const std::int64_t Lt = sp.level_sites(tau);
            for (std::int64_t g = 0; g < wd; ++g) {
              TensorKey key{tau, (w + g) % Lt, TensorKind::Isometry};
              Environment env = hier_cone_environment(inst, tau, w, kept, key, rho, asc);
              add_grad(grads, key, env);
            }
            for (std::size_t g = 0; g < dslots.size(); ++g) {
              TensorKey key{tau, (w + static_cast<std::int64_t>(g)) % Lt,
                            TensorKind::Disentangler};
              Environment env = hier_cone_environment(inst, tau, w, kept, key, rho, asc);
              add_grad(grads, key, env);
            }
          }
          if (tau < T)
            asc = cone_step_up(inst, asc, tau, path.window[static_cast<std::size_t>(tau)],
                               path.kept[static_cast<std::size_t>(tau - 1)]);
        } else {
          if (!have_full) {
            const std::int64_t lvl = std::min(tau - 1, t0);
            const std::int64_t nl = sp.level_sites(lvl);
            std::vector<std::int64_t> osites;
            for (std::int64_t r = 0; r < wd; ++r)
              osites.push_back((path.window[static_cast<std::size_t>(lvl)] + r) % nl);
            ofull = op_embed(asc, osites, nl, chi);
            have_full = true;
          }
          if (want[static_cast<std::size_t>(tau)]) {
            for (const auto& key : inst.layer_keys(tau)) {
              Environment env =
                  hier_full_environment(inst, key, full_rho[static_cast<std::size_t>(tau)], ofull);
              add_grad(grads, key, env);
            }
          }
          if (tau < T) ofull = full_layer_ascend(ofull, tau);
        }
      }
    }
  }

  DenseTensor full_layer_ascend(const DenseTensor& o, std::int64_t t) {
    const AnsatzSpec& sp = inst.spec();
    const std::int64_t ntc = sp.level_sites(t), ntf = sp.level_sites(t - 1);
    DenseTensor y = o;
    if (sp.has_disentanglers()) {
      for (std::int64_t kk = 0; kk < ntc; ++kk) {
        const std::int64_t p = (b * kk + b - 1) % ntf, q = (b * kk + b) % ntf;
        y = op_apply_gate(y, inst.parent({t, kk, TensorKind::Disentangler}).adjoint(), {p, q}, ntf,
                          chi);
      }
    }
    DenseTensor wmat = DenseTensor::identity(1);
    for (std::int64_t kk = 0; kk < ntc; ++kk)
      wmat = kron(wmat, inst.isometry({t, kk, TensorKind::Isometry}));
    return matmul(matmul(wmat.adjoint(), y), wmat);
  }

  void add_grad(std::map<TensorKey, DenseTensor>& grads, const TensorKey& key,
                const Environment& env) {
    TensorKey slot = key;
    if (inst.spec().homogeneous) slot.pos = 0;  // shared tensor per (layer, kind)
    DenseTensor g = riemannian_gradient(env, inst.parent(key));
    auto it = grads.find(slot);
    if (it == grads.end())
      grads.emplace(slot, std::move(g));
    else
      it->second += g;
  }
};

std::vector<double> hier_sample_values(const TNSInstance& inst, const LocalOperator& proto,
                                       const std::vector<std::int64_t>& layers) {
  HierEval ev(inst, proto);
  std::map<TensorKey, DenseTensor> grads;
  ev.accumulate(grads, layers);
  std::vector<double> out;
  out.reserve(layers.size());
  for (std::int64_t tau : layers) {
    double sum = 0.0;
    std::int64_t cnt = 0;
    for (const auto& [key, g] : grads) {
      if (key.layer != tau) continue;
      sum += hs_inner(g, g).real() / static_cast<double>(g.dim(0));
      ++cnt;
    }
    out.push_back(cnt ? sum / static_cast<double>(cnt) : 0.0);
  }
  return out;
}

std::vector<std::vector<double>> scan_values_impl(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto positions = cfg.probe_positions();
  const LocalOperator proto = build_interaction(
      (cfg.spec.family == Family::Mps) ? cfg.spec.d : cfg.spec.chi, cfg.interaction_width(), 0);
  const std::int64_t np = static_cast<std::int64_t>(positions.size());
  std::vector<std::vector<double>> values(static_cast<std::size_t>(np));
  for (auto& v : values) v.resize(static_cast<std::size_t>(cfg.n_samples));
  // one flat task per sample; all positions are computed in one pass
  std::vector<std::vector<double>> per_sample(static_cast<std::size_t>(cfg.n_samples));
  parallel_samples(cfg.n_samples, cfg.workers, [&](std::int64_t s) {
    const std::uint64_t inst_seed = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(s)).next_u64();
    TNSInstance inst = sample_instance(cfg.spec, inst_seed);
    per_sample[static_cast<std::size_t>(s)] =
        (cfg.spec.family == Family::Mps) ? mps_sample_values(inst, proto, positions)
                                         : hier_sample_values(inst, proto, positions);
    return 0.0;
  });
  for (std::int64_t s = 0; s < cfg.n_samples; ++s)
    for (std::int64_t p = 0; p < np; ++p)
      values[static_cast<std::size_t>(p)][static_cast<std::size_t>(s)] =
          per_sample[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)];
  return values;
}

std::vector<VarianceRecord> scan_records(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto positions = cfg.probe_positions();
  auto values = scan_values_impl(cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  std::vector<VarianceRecord> recs;
  for (std::size_t p = 0; p < positions.size(); ++p) {
    auto [mean, se] = mean_stderr(values[p]);
    VarianceRecord r;
    r.family = cfg.spec.family_tag();
    r.chi = cfg.spec.chi;
    r.d = cfg.spec.d;
    r.size = cfg.spec.size;
    r.position = positions[p];
    r.homogeneous = cfg.spec.homogeneous;
    r.trotter = cfg.spec.trotter;
    r.n_samples = cfg.n_samples;
    r.mean = mean;
    r.stderr_mean = se;
    r.seed = cfg.seed;
    r.wall_seconds = wall;
    recs.push_back(std::move(r));
  }
  return recs;
}

}  // namespace

std::vector<std::vector<double>> scan_sample_values(const ExperimentConfig& cfg) {
  return scan_values_impl(cfg);
}

std::vector<VarianceRecord> run_mps_scan(const ExperimentConfig& cfg) {
  if (cfg.spec.family != Family::Mps) throw ValidationError("run_mps_scan requires family=mps");
  return scan_records(cfg);
}

std::vector<VarianceRecord> run_layer_scan(const ExperimentConfig& cfg) {
  if (cfg.spec.family == Family::Mps)
    throw ValidationError("run_layer_scan requires a hierarchical family");
  return scan_records(cfg);
}

DecayFit fit_decay(const std::vector<VarianceRecord>& records, std::int64_t lo, std::int64_t hi) {
  std::vector<double> xs, ys, ws;
  for (const auto& r : records) {
    if (r.position < lo || r.position > hi) continue;
    if (r.mean <= 0.0)
      throw FitDomainError("nonpositive mean variance at position " + std::to_string(r.position) +
                           " inside the fit window");
    xs.push_back(static_cast<double>(r.position));
    ys.push_back(std::log(r.mean));
    const double sln = r.stderr_mean / r.mean;  // delta method
    ws.push_back(sln > 0 ? 1.0 / (sln * sln) : 1.0);
  }
  if (xs.size() < 3)
    throw FitDomainError("fit window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "] contains fewer than 3 points");
  double sw = 0, swx = 0, swy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sw += ws[k];
    swx += ws[k] * xs[k];
    swy += ws[k] * ys[k];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += ws[k] * (xs[k] - xbar) * (xs[k] - xbar);
    sxy += ws[k] * (xs[k] - xbar) * (ys[k] - ybar);
  }
  const double slope = sxy / sxx;
  const double se_slope = std::sqrt(1.0 / sxx);
  double ss_res = 0, ss_tot = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double pred = ybar + slope * (xs[k] - xbar);
    ss_res += ws[k] * (ys[k] - pred) * (ys[k] - pred);
    ss_tot += ws[k] * (ys[k] - ybar) * (ys[k] - ybar);
  }
  DecayFit f;
  f.factor = std::exp(slope);
  f.ci_low = std::exp(slope - 1.96 * se_slope);
  f.ci_high = std::exp(slope + 1.96 * se_slope);
  f.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
  f.window_lo = lo;
  f.window_hi = hi;
  f.n_points = static_cast<std::int64_t>(xs.size());
  return f;
}

std::vector<ChiScanRow> run_chi_scan(const ExperimentConfig& base,
                                     const std::vector<std::int64_t>& chis) {
  std::vector<ChiScanRow> rows;
  for (auto chi : chis) {
    ExperimentConfig cfg = base;
    cfg.spec.chi = chi;
    cfg.spec.d = chi;  // d = chi convention for hierarchical scans
    cfg.validate();
    auto recs = run_layer_scan(cfg);
    const std::int64_t T = cfg.spec.layers();
    const std::int64_t hi = (cfg.fit_hi >= 0) ? cfg.fit_hi : std::max<std::int64_t>(T - 2, cfg.fit_lo + 2);
    ChiScanRow row;
    row.chi = chi;
    row.fit = fit_decay(recs, cfg.fit_lo, hi);
    for (const auto& r : recs)
      if (r.position == 1) {
        row.tau1_mean = r.mean;
        row.tau1_stderr = r.stderr_mean;
      }
    rows.push_back(row);
  }
  return rows;
}

std::string records_to_csv(const std::vector<VarianceRecord>& records) {
  std::ostringstream os;
  os << "family,chi,d,size,tau_or_site,homogeneous,trotter_t,n_samples,mean_var,stderr,seed\n";
  for (const auto& r : records) {
    os << r.family << "," << r.chi << "," << r.d << "," << r.size << "," << r.position << ","
       << (r.homogeneous ? 1 : 0) << "," << r.trotter << "," << r.n_samples << ","
       << fmt_double(r.mean) << "," << fmt_double(r.stderr_mean) << "," << r.seed << "\n";
  }
  return os.str();
}

std::vector<VarianceRecord> records_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty CSV");
  const std::string expect =
      "family,chi,d,size,tau_or_site,homogeneous,trotter_t,n_samples,mean_var,stderr,seed";
  if (line != expect) throw ValidationError("unexpected CSV header: " + line);
  std::vector<VarianceRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto c = line.find(',', pos);
      f.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    if (f.size() != 11) throw ValidationError("bad CSV row: " + line);
    VarianceRecord r;
    r.family = f[0];
    r.chi = std::stoll(f[1]);
    r.d = std::stoll(f[2]);
    r.size = std::stoll(f[3]);
    r.position = std::stoll(f[4]);
    r.homogeneous = f[5] == "1";
    r.trotter = std::stoll(f[6]);
    r.n_samples = std::stoll(f[7]);
    r.mean = std::stod(f[8]);
    r.stderr_mean = std::stod(f[9]);
    r.seed = std::stoull(f[10]);
    out.push_back(std::move(r));
  }
  return out;
}

void emit_records(const std::vector<VarianceRecord>& records, const std::string& format,
                  const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  if (format == "csv") {
    os << records_to_csv(records);
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
      arr.push_back({{"family", r.family},
                     {"chi", r.chi},
                     {"d", r.d},
                     {"size", r.size},
                     {"tau_or_site", r.position},
                     {"homogeneous", r.homogeneous},
                     {"trotter_t", r.trotter},
                     {"n_samples", r.n_samples},
                     {"mean_var", r.mean},
                     {"stderr", r.stderr_mean},
                     {"seed", r.seed}});
    }
    os << arr.dump(2) << "\n";
  } else {
    throw ValidationError("unknown output format '" + format + "' (csv|json)");
  }
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

std::string manifest_json(const ExperimentConfig& cfg, double wall_seconds,
                          std::int64_t n_records) {
  nlohmann::json j;
  j["config"] = nlohmann::json::object();
  std::istringstream is(cfg.canonical_text());
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) j["config"][line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config_hash"] = cfg.config_hash();
  j["code_version"] = code_version();
  j["master_seed"] = cfg.seed;
  j["wall_seconds"] = wall_seconds;
  j["n_records"] = n_records;
  return j.dump(2);
}

}  // namespace isotns
