#ifndef ISOTNS_CHANNELS_HPP
#define ISOTNS_CHANNELS_HPP

#include <complex>
#include <string>
#include <vector>

#include "isotns/ansatz.hpp"
#include "isotns/tensor.hpp"

namespace isotns {

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

// ---- k = 2 Haar (Weingarten) integration over U(n) ----

double wg_identity(std::int64_t n);  // 1 / (n^2 - 1)
double wg_swap(std::int64_t n);      // -1 / (n (n^2 - 1))

/// Swap operator on C^n x C^n.
DenseTensor swap_operator(std::int64_t n);

/// Exact second-moment twirl E[(U x U) A (U x U)^dag] for Haar U on U(n):
/// the k = 2 Weingarten formula in closed form. Requires n >= 2.
DenseTensor weingarten_twirl(std::int64_t n, const DenseTensor& a);

// ---- exact Haar-averaged doubled transition channels ----

enum class ChannelTag {
  MpsSite,
  MeraBinaryLeft,
  MeraBinaryRight,
  MeraBinaryAverage,
  TtnsBinary,
  TtnsTernary,
  MeraTernary,
};

ChannelTag channel_tag_from_string(const std::string& s);
std::string channel_tag_to_string(ChannelTag t);
/// The family that a tag belongs to, as an AnsatzSpec skeleton.
AnsatzSpec channel_family_spec(ChannelTag tag, std::int64_t chi, std::int64_t d);

/// Exact Avg M x M in a rank-factorized form: dense() = out * core * func.
/// The operand space is the doubled cone (dimension D); the matrix acts on
/// operators over it, flattened row-major, i.e. shape [D^2, D^2].
struct SuperOperatorMatrix {
  ChannelTag tag;
  std::int64_t chi = 0, d = 0;
  std::int64_t operand_dim = 0;  // D

  DenseTensor out;   // [D^2, r]
  DenseTensor core;  // [r, r]
  DenseTensor func;  // [r, D^2]

  std::int64_t rows() const { return operand_dim * operand_dim; }
  std::int64_t rank_bound() const { return core.dim(0); }

  /// Action on a flattened operator, and adjoint action.
  std::vector<cplx> apply(const std::vector<cplx>& x) const;
  std::vector<cplx> apply_adjoint(const std::vector<cplx>& x) const;
  /// Materialized [D^2, D^2] matrix.
  DenseTensor dense() const;
  /// Exact nonzero spectrum via the rank-reduced eigenproblem.
  std::vector<cplx> reduced_eigenvalues() const;
};

SuperOperatorMatrix build_doubled_channel(ChannelTag tag, std::int64_t chi, std::int64_t d);

/// One Haar draw of the single-copy transition superoperator (matrix acting
/// on flattened cone operators), for Monte Carlo consistency tests.
/// move < 0 picks the move uniformly at random.
DenseTensor sample_transition_superop(ChannelTag tag, std::int64_t chi, std::int64_t d,
                                      RngStream& rng, std::int64_t move = -1);
/// Apply a sampled single-copy superoperator to both copies of a doubled
/// operator x (flattened over [D, D] with D = operand_dim).
std::vector<cplx> doubled_apply(const DenseTensor& superop, const std::vector<cplx>& x,
                                std::int64_t cone_dim);

// ---- spectra ----

struct EigenPair {
  cplx value;
  std::vector<cplx> right;
  std::vector<cplx> left;   // normalized so <<l|r>> = 1
  double residual = 0.0;
  bool degenerate = false;  // |value| ties its neighbor within tolerance
};

struct SpectrumResult {
  std::vector<cplx> eigenvalues;  // all computed, sorted by modulus desc
  std::vector<EigenPair> pairs;   // top_k biorthogonal pairs
};

/// Top eigenvalues by modulus. Dense general eigensolver up to
/// `dense_threshold` rows; above it, power iteration with deflation seeded by
/// the known lambda_1 = 1 pair (left eigenvector 1).
SpectrumResult spectrum(const SuperOperatorMatrix& channel, std::int64_t top_k,
                        std::int64_t dense_threshold = 4200);

/// JSON export: {family, chi, d, eigenvalues, analytic_eta, b_eta}.
std::string spectrum_to_json(const SuperOperatorMatrix& channel, const SpectrumResult& spec);

// ---- closed-form predictions ----

/// Families: "mps", "ttns2", "ttns3", "mera2", "mera3", "mera2d33".
/// For mera3 and mera2d33 only the leading order in 1/chi is known.
struct EtaEntry {
  double eta;
  bool exact;
  double lambda3 = 0.0;
  bool has_lambda3 = false;
};

EtaEntry analytic_eta_entry(const std::string& family_tag, std::int64_t chi, std::int64_t d);
double analytic_eta(const std::string& family_tag, std::int64_t chi, std::int64_t d);
/// b * eta: predicted per-layer decay factor of the gradient variance.
double predicted_layer_scaling(const std::string& family_tag, std::int64_t chi);
/// Bulk (system-size independent) mps gradient variance for single-site
/// terms: 2 Tr(h^2) (chi^2 d^2 - 1) / (d (d-1) (chi^2 d + 1)^2).
double predicted_mps_variance_bulk(std::int64_t chi, std::int64_t d, double trh2);
/// Finite-chain value at site j (0-based): the bulk geometric sum truncated
/// to the j+1 terms left of the site.
double predicted_mps_variance(std::int64_t chi, std::int64_t d, double trh2, std::int64_t j,
                              std::int64_t L);
double mps_eta(std::int64_t chi, std::int64_t d);

}  // namespace isotns

#endif
