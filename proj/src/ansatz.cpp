#include "isotns/ansatz.hpp"

#include "isotns/basis.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isotns {

Family family_from_string(const std::string& s) {
  if (s == "mps") return Family::Mps;
  if (s == "ttns") return Family::Ttns;
  if (s == "mera") return Family::Mera;
  throw ValidationError("unknown family '" + s + "' (expected mps|ttns|mera)");
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::Mps: return "mps";
    case Family::Ttns: return "ttns";
    case Family::Mera: return "mera";
  }
  return "?";
}

void AnsatzSpec::validate() const {
  std::vector<std::string> errs;
  if (chi < 1) errs.push_back("chi must be >= 1");
  if (d < 2) errs.push_back("d must be >= 2");
  if (family == Family::Mps) {
    if (branching != 1) errs.push_back("mps requires branching 1");
    if (size < 1) errs.push_back("mps requires L >= 1");
    if (homogeneous) errs.push_back("homogeneous sampling is defined for hierarchical families only");
  } else {
    if (branching != 2 && branching != 3) errs.push_back("branching must be 2 or 3");
    if (size < 1) errs.push_back("layer count T must be >= 1");
    if (d != chi) errs.push_back("hierarchical families use d = chi");
    if (chi < 2) errs.push_back("hierarchical families require chi >= 2");
  }
  if (trotter < 0) errs.push_back("trotter must be >= 0");
  if (trotter > 0 && !is_power_of_two(chi))
    errs.push_back("trotterized tensors require chi = 2^q");
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid ansatz spec:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw ValidationError(os.str());
  }
}

std::int64_t AnsatzSpec::sites() const {
  if (family == Family::Mps) return size;
  std::int64_t L = 1;
  for (std::int64_t t = 0; t < size; ++t) L *= branching;
  return L;
}

std::int64_t AnsatzSpec::layers() const { return family == Family::Mps ? 0 : size; }

std::int64_t AnsatzSpec::level_sites(std::int64_t level) const {
  std::int64_t L = sites();
  for (std::int64_t t = 0; t < level; ++t) L /= branching;
  return L;
}

std::int64_t AnsatzSpec::cone_width() const {
  if (family == Family::Mps) return 1;
  if (family == Family::Mera && branching == 2) return 3;
  return 2;
}

std::string AnsatzSpec::family_tag() const {
  if (family == Family::Mps) return "mps";
  return family_to_string(family) + std::to_string(branching);
}

std::string key_to_string(const TensorKey& k) {
  std::ostringstream os;
  os << (k.kind == TensorKind::Isometry ? "V" : "D") << "(" << k.layer << "," << k.pos << ")";
  return os.str();
}

// ---- instance ----

TNSInstance::TNSInstance(AnsatzSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
}

std::int64_t TNSInstance::storage_index(const TensorKey& key) const {
  if (spec_.family == Family::Mps) {
    if (key.kind != TensorKind::Isometry || key.pos != 0 || key.layer < 0 ||
        key.layer >= spec_.size)
      throw ValidationError("invalid mps tensor key " + key_to_string(key));
    return key.layer;
  }
  const std::int64_t T = spec_.layers();
  if (key.layer < 1 || key.layer > T) throw ValidationError("layer out of range in " + key_to_string(key));
  const std::int64_t Lt = spec_.level_sites(key.layer);
  if (key.pos < 0 || key.pos >= Lt) throw ValidationError("position out of range in " + key_to_string(key));
  if (key.kind == TensorKind::Disentangler && !spec_.has_disentanglers())
    throw ValidationError("family has no disentanglers: " + key_to_string(key));

  std::int64_t idx = 0;
  const std::int64_t kinds = spec_.has_disentanglers() ? 2 : 1;
  for (std::int64_t t = 1; t < key.layer; ++t)
    idx += kinds * (spec_.homogeneous ? 1 : spec_.level_sites(t));
  const std::int64_t kslot = (key.kind == TensorKind::Isometry) ? 0 : 1;
  if (spec_.homogeneous) return idx + kslot;
  return idx + kslot * Lt + key.pos;
}

const DenseTensor& TNSInstance::parent(const TensorKey& key) const {
  return tensors_.at(static_cast<std::size_t>(storage_index(key)));
}

std::int64_t TNSInstance::parent_dim(const TensorKey& key) const {
  if (spec_.family == Family::Mps) return spec_.chi * spec_.d;
  if (key.kind == TensorKind::Disentangler) return spec_.chi * spec_.chi;
  std::int64_t n = 1;
  for (std::int64_t i = 0; i < spec_.branching; ++i) n *= spec_.chi;
  return n;
}

DenseTensor TNSInstance::isometry(const TensorKey& key) const {
  if (key.kind != TensorKind::Isometry)
    throw ValidationError("isometry() called on a disentangler key");
  const DenseTensor& u = parent(key);
  const std::int64_t n = u.dim(0);
  const std::int64_t in_dim = spec_.chi;
  const std::int64_t ref_dim = n / in_dim;
  DenseTensor v({n, in_dim});
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t b = 0; b < in_dim; ++b) v[r * in_dim + b] = u[r * n + b * ref_dim];
  return v;
}

std::vector<TensorKey> TNSInstance::keys() const {
  std::vector<TensorKey> out;
  if (spec_.family == Family::Mps) {
    for (std::int64_t j = 0; j < spec_.size; ++j) out.push_back({j, 0, TensorKind::Isometry});
    return out;
  }
  for (std::int64_t t = 1; t <= spec_.layers(); ++t) {
    auto lk = layer_keys(t);
    out.insert(out.end(), lk.begin(), lk.end());
  }
  return out;
}

std::vector<TensorKey> TNSInstance::layer_keys(std::int64_t layer) const {
  std::vector<TensorKey> out;
  if (spec_.family == Family::Mps) {
    out.push_back({layer, 0, TensorKind::Isometry});
    return out;
  }
  const std::int64_t Lt = spec_.level_sites(layer);
  for (std::int64_t k = 0; k < Lt; ++k) out.push_back({layer, k, TensorKind::Isometry});
  if (spec_.has_disentanglers())
    for (std::int64_t k = 0; k < Lt; ++k) out.push_back({layer, k, TensorKind::Disentangler});
  return out;
}

TNSInstance TNSInstance::with_parent(const TensorKey& key, DenseTensor u) const {
  TNSInstance out = *this;
  out.tensors_[static_cast<std::size_t>(storage_index(key))] = std::move(u);
  return out;
}

void TNSInstance::verify_isometries(double tol) const {
  for (const auto& key : keys()) {
    if (key.kind == TensorKind::Disentangler) {
      if (unitarity_residual(parent(key)) > tol)
        throw IntegrityError("unitarity violated at " + key_to_string(key));
      continue;
    }
    DenseTensor v = isometry(key);
    DenseTensor g = matmul(v.adjoint(), v);
    double r = g.dist(DenseTensor::identity(g.dim(0)));
    if (r > tol)
      throw IntegrityError("isometry condition violated at " + key_to_string(key) +
                           " (residual " + std::to_string(r) + ")");
  }
}

TNSInstance sample_instance(const AnsatzSpec& spec, std::uint64_t seed) {
  spec.validate();
  TNSInstance inst(spec, seed);
  std::vector<DenseTensor> store;
  std::uint64_t counter = 0;
  auto draw = [&](std::int64_t n) {
    RngStream rs = RngStream::derive(seed, counter++);
    if (spec.trotter > 0) return trotter_unitary(n, spec.trotter, rs);
    return haar_unitary(n, rs);
  };
  if (spec.family == Family::Mps) {
    for (std::int64_t j = 0; j < spec.size; ++j) store.push_back(draw(spec.chi * spec.d));
  } else {
    const std::int64_t T = spec.layers();
    std::int64_t iso_dim = 1;
    for (std::int64_t i = 0; i < spec.branching; ++i) iso_dim *= spec.chi;
    for (std::int64_t t = 1; t <= T; ++t) {
      const std::int64_t reps = spec.homogeneous ? 1 : spec.level_sites(t);
      for (std::int64_t r = 0; r < reps; ++r) store.push_back(draw(iso_dim));
      if (spec.has_disentanglers())
        for (std::int64_t r = 0; r < reps; ++r) store.push_back(draw(spec.chi * spec.chi));
    }
  }
  // storage order matches storage_index: per layer, isometries then disentanglers
  inst.adopt(std::move(store));
  return inst;
}

void TNSInstance::adopt(std::vector<DenseTensor> tensors) { tensors_ = std::move(tensors); }

DenseTensor trotter_unitary(std::int64_t n_dim, std::int64_t steps, RngStream& rng) {
  std::int64_t nq = 0;
  for (std::int64_t m = n_dim; m > 1; m >>= 1) ++nq;
  if ((std::int64_t(1) << nq) != n_dim)
    throw ValidationError("trotter parent dimension must be a power of two");
  DenseTensor u = DenseTensor::identity(n_dim);
  for (std::int64_t s = 0; s < steps; ++s) {
    for (std::int64_t q = (s % 2); q + 1 < nq; q += 2) {
      DenseTensor g = haar_unitary(4, rng);
      DenseTensor full = kron(DenseTensor::identity(std::int64_t(1) << q), g);
      full = kron(full, DenseTensor::identity(std::int64_t(1) << (nq - q - 2)));
      u = matmul(full, u);
    }
  }
  return u;
}

const TNSInstance& mps_left_orthonormal_form(const TNSInstance& inst, double tol) {
  if (inst.spec().family != Family::Mps)
    throw ValidationError("mps_left_orthonormal_form requires an mps instance");
  inst.verify_isometries(tol);
  return inst;
}

// ---- cone geometry ----

ConeMove cone_move(const AnsatzSpec& spec, std::int64_t x, std::int64_t Lt) {
  auto wrap = [Lt](std::int64_t v) { return ((v % Lt) + Lt) % Lt; };
  if (spec.family == Family::Mera && spec.branching == 2) {
    if (x % 2 == 1) return {wrap((x - 1) / 2), {1, 2, 3}};
    return {wrap(x / 2 - 1), {2, 3, 4}};
  }
  if (spec.family == Family::Ttns && spec.branching == 2) {
    if (x % 2 == 0) return {wrap(x / 2), {0, 1}};
    return {wrap((x - 1) / 2), {1, 2}};
  }
  const std::int64_t r = x % 3;
  if (spec.family == Family::Ttns) return {wrap((x - r) / 3), {r, r + 1}};
  // ternary mera
  if (r == 0) return {wrap(x / 3 - 1), {3, 4}};
  if (r == 1) return {wrap((x - 1) / 3), {1, 2}};
  return {wrap((x - 2) / 3), {2, 3}};
}

ConePath cone_path(const AnsatzSpec& spec, std::int64_t i) {
  ConePath p;
  p.window.push_back(i);
  std::int64_t w = i;
  for (std::int64_t t = 1; t <= spec.layers(); ++t) {
    const std::int64_t Lt = std::max<std::int64_t>(spec.level_sites(t), 1);
    ConeMove mv = cone_move(spec, w, Lt);
    w = mv.coarse_start;
    p.window.push_back(w);
    p.kept.push_back(mv.kept);
  }
  return p;
}

std::int64_t cone_top_level(const AnsatzSpec& spec) {
  const std::int64_t need = (spec.family == Family::Mera && spec.branching == 2) ? 3 : 2;
  for (std::int64_t t = spec.layers(); t >= 0; --t)
    if (spec.level_sites(t) >= need) return t;
  return 0;
}

std::vector<std::pair<std::int64_t, std::int64_t>> cone_disentangler_slots(const AnsatzSpec& spec) {
  if (spec.family != Family::Mera) return {};
  if (spec.branching == 2) return {{1, 2}, {3, 4}};
  return {{2, 3}};
}

bool cone_contains(const AnsatzSpec& spec, const TensorKey& key, std::int64_t i,
                   std::int64_t width) {
  if (spec.family == Family::Mps) return i <= key.layer && i + width <= spec.size;
  const std::int64_t t0 = cone_top_level(spec);
  if (key.layer > t0) return true;
  const std::int64_t Lt = spec.level_sites(key.layer);
  ConePath p = cone_path(spec, i);
  const std::int64_t w = p.window[static_cast<std::size_t>(key.layer)];
  const std::int64_t slots = (key.kind == TensorKind::Isometry)
                                 ? spec.cone_width()
                                 : static_cast<std::int64_t>(cone_disentangler_slots(spec).size());
  for (std::int64_t g = 0; g < slots; ++g)
    if ((w + g) % Lt == key.pos) return true;
  return false;
}

std::vector<std::int64_t> causal_cone_sites(const TNSInstance& inst, const TensorKey& key,
                                            std::int64_t width) {
  const AnsatzSpec& spec = inst.spec();
  std::vector<std::int64_t> out;
  if (spec.family == Family::Mps) {
    for (std::int64_t i = 0; i <= key.layer && i + width <= spec.size; ++i) out.push_back(i);
    return out;
  }
  for (std::int64_t i = 0; i < spec.sites(); ++i)
    if (cone_contains(spec, key, i, width)) out.push_back(i);
  return out;
}

// ---- serialization ----

std::string TNSInstance::to_json() const {
  nlohmann::json j;
  j["format"] = "isotns-instance-v1";
  j["spec"] = {{"family", family_to_string(spec_.family)},
               {"branching", spec_.branching},
               {"chi", spec_.chi},
               {"d", spec_.d},
               {"size", spec_.size},
               {"homogeneous", spec_.homogeneous},
               {"trotter", spec_.trotter}};
  j["seed"] = seed_;
  nlohmann::json ts = nlohmann::json::array();
  auto dump_tensor = [](const DenseTensor& t) {
    nlohmann::json e;
    e["shape"] = t.shape();
    std::vector<double> re, im;
    re.reserve(static_cast<std::size_t>(t.size()));
    im.reserve(static_cast<std::size_t>(t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      re.push_back(t[i].real());
      im.push_back(t[i].imag());
    }
    e["re"] = re;
    e["im"] = im;
    return e;
  };
  for (const auto& t : tensors_) ts.push_back(dump_tensor(t));
  j["tensors"] = ts;
  return j.dump();
}

TNSInstance TNSInstance::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "isotns-instance-v1")
    throw ValidationError("unrecognized instance container format");
  AnsatzSpec spec;
  const auto& js = j.at("spec");
  spec.family = family_from_string(js.at("family").get<std::string>());
  spec.branching = js.at("branching").get<std::int64_t>();
  spec.chi = js.at("chi").get<std::int64_t>();
  spec.d = js.at("d").get<std::int64_t>();
  spec.size = js.at("size").get<std::int64_t>();
  spec.homogeneous = js.at("homogeneous").get<bool>();
  spec.trotter = js.at("trotter").get<std::int64_t>();
  TNSInstance inst(spec, j.at("seed").get<std::uint64_t>());
  std::vector<DenseTensor> store;
  for (const auto& e : j.at("tensors")) {
    std::vector<std::int64_t> shape = e.at("shape").get<std::vector<std::int64_t>>();
    std::vector<double> re = e.at("re").get<std::vector<double>>();
    std::vector<double> im = e.at("im").get<std::vector<double>>();
    if (re.size() != im.size()) throw ValidationError("corrupt tensor entry");
    std::vector<cplx> data(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) data[i] = cplx(re[i], im[i]);
    store.emplace_back(shape, std::move(data));
  }
  inst.adopt(std::move(store));
  return inst;
}

}  // namespace isotns
