#ifndef ISOTNS_ANSATZ_HPP
#define ISOTNS_ANSATZ_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isotns/rng.hpp"
#include "isotns/tensor.hpp"

namespace isotns {

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& m) : std::runtime_error(m) {}
};

enum class Family { Mps, Ttns, Mera };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

/// Immutable description of an isometric tensor network family.
///  - mps: size = number of sites L, branching = 1, bond chi, physical d;
///  - ttns/mera: size = number of layers T, branching b in {2,3}, d = chi,
///    L = b^T sites with periodic layer geometry.
/// trotter = 0 samples full Haar tensors; t >= 1 builds each parent unitary
/// as a brickwall circuit of t rows of Haar two-qubit gates (chi = 2^q).
struct AnsatzSpec {
  Family family = Family::Mps;
  std::int64_t branching = 1;
  std::int64_t chi = 2;
  std::int64_t d = 2;
  std::int64_t size = 8;  // L for mps, T for hierarchical
  bool homogeneous = false;
  std::int64_t trotter = 0;

  void validate() const;
  std::int64_t sites() const;       // physical site count L
  std::int64_t layers() const;      // T (0 for mps)
  std::int64_t level_sites(std::int64_t level) const;  // L / b^level
  bool hierarchical() const { return family != Family::Mps; }
  /// Interaction width matching the family causal cone (1 free for mps).
  std::int64_t cone_width() const;
  bool has_disentanglers() const { return family == Family::Mera; }
  std::string family_tag() const;  // "mps", "ttns2", "ttns3", "mera2", "mera3"
};

enum class TensorKind { Isometry, Disentangler };

/// Position of a tensor: mps uses layer = site, pos = 0, kind = Isometry;
/// hierarchical TNS use (layer tau in 1..T, renormalized site pos, kind).
struct TensorKey {
  std::int64_t layer = 0;
  std::int64_t pos = 0;
  TensorKind kind = TensorKind::Isometry;

  bool operator<(const TensorKey& o) const {
    if (layer != o.layer) return layer < o.layer;
    if (pos != o.pos) return pos < o.pos;
    return static_cast<int>(kind) < static_cast<int>(o.kind);
  }
  bool operator==(const TensorKey& o) const {
    return layer == o.layer && pos == o.pos && kind == o.kind;
  }
};

std::string key_to_string(const TensorKey& k);

/// A sampled network. Tensors are stored as parent unitaries; isometries are
/// the parent applied to (1 x |0>), i.e. the columns at stride chi^(b-1).
/// Homogeneous instances store one parent per (layer, kind), shared by all
/// positions of that layer.
class TNSInstance {
 public:
  TNSInstance(AnsatzSpec spec, std::uint64_t seed);

  const AnsatzSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  /// Parent unitary of the tensor at `key`.
  const DenseTensor& parent(const TensorKey& key) const;
  /// Isometry tensor V = U (1 x |0>) for isometry keys.
  DenseTensor isometry(const TensorKey& key) const;
  /// Dimension of the parent unitary at `key`.
  std::int64_t parent_dim(const TensorKey& key) const;

  std::vector<TensorKey> keys() const;
  std::vector<TensorKey> layer_keys(std::int64_t layer) const;

  /// Copy with the tensor at `key` replaced (all equivalent positions for
  /// homogeneous instances). The replacement is not re-validated; used by
  /// tests and by rotation-angle evaluations.
  TNSInstance with_parent(const TensorKey& key, DenseTensor u) const;

  /// Checks V^dag V = 1 for every tensor; throws IntegrityError naming the
  /// first offending position. For mps this is the left-orthonormal check.
  void verify_isometries(double tol = 1e-10) const;

  std::string to_json() const;
  static TNSInstance from_json(const std::string& text);

 private:
  TNSInstance() = default;
  std::int64_t storage_index(const TensorKey& key) const;
  void adopt(std::vector<DenseTensor> tensors);
  friend TNSInstance sample_instance(const AnsatzSpec& spec, std::uint64_t seed);

  AnsatzSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<DenseTensor> tensors_;
};

/// Deterministic sampling: identical (spec, seed) give bitwise-identical
/// instances; each tensor draws from its own counter-derived stream.
TNSInstance sample_instance(const AnsatzSpec& spec, std::uint64_t seed);

/// Brickwall parent unitary on log2(N) qubits with t alternating rows of
/// Haar two-qubit gates (even rows pair (0,1),(2,3),.., odd rows (1,2),..).
DenseTensor trotter_unitary(std::int64_t n_dim, std::int64_t steps, RngStream& rng);

/// Verifier for the mps left-orthonormal gauge; sampled instances satisfy it
/// by construction, so this asserts and returns the instance unchanged.
const TNSInstance& mps_left_orthonormal_form(const TNSInstance& inst, double tol = 1e-10);

// ---- causal-cone geometry (single source of truth) ----

/// One renormalization move of the cone window: the coarse window start and
/// the kept fine slots inside the layer's local window of cone_width * b
/// fine sites.
struct ConeMove {
  std::int64_t coarse_start = 0;
  std::vector<std::int64_t> kept;
};

ConeMove cone_move(const AnsatzSpec& spec, std::int64_t fine_start, std::int64_t coarse_sites);

/// Windows w_t (cone start per level t = 0..T) and kept slots per layer.
struct ConePath {
  std::vector<std::int64_t> window;
  std::vector<std::vector<std::int64_t>> kept;
};

ConePath cone_path(const AnsatzSpec& spec, std::int64_t i);

/// Highest level at which cone windows are wrap-free; layers above it are
/// evaluated on whole levels.
std::int64_t cone_top_level(const AnsatzSpec& spec);

/// Disentangler slot pairs inside the local fine window of a layer.
std::vector<std::pair<std::int64_t, std::int64_t>> cone_disentangler_slots(const AnsatzSpec& spec);

/// True when the expectation of a width-`width` term starting at i depends on
/// the tensor at `key`.
bool cone_contains(const AnsatzSpec& spec, const TensorKey& key, std::int64_t i,
                   std::int64_t width);

/// All interaction positions i whose expectation value depends on the tensor
/// at `key`. For left-orthonormal mps with width-n terms these are the starts
/// i <= site; for hierarchical TNS they follow the cone geometry.
std::vector<std::int64_t> causal_cone_sites(const TNSInstance& inst, const TensorKey& key,
                                            std::int64_t interaction_width);

}  // namespace isotns

#endif
