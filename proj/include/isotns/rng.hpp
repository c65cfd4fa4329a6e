#ifndef ISOTNS_RNG_HPP
#define ISOTNS_RNG_HPP

#include <cstdint>

#include "isotns/tensor.hpp"

namespace isotns {

/// Counter-seeded random stream. Streams derived from the same master seed
/// and distinct counters are statistically independent; sampling is fully
/// deterministic and platform-independent (no libc distributions involved).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  /// Stream for task `counter` under `master`. Never share a stream between
  /// workers; derive one per (master, counter) instead.
  static RngStream derive(std::uint64_t master, std::uint64_t counter);

  std::uint64_t next_u64();
  double uniform();         // [0, 1)
  double gaussian();        // standard normal, Box-Muller
  cplx gaussian_complex();  // Re, Im independent N(0, 1/2); E|z|^2 = 1

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-distributed unitary on U(n): QR of a complex Ginibre matrix with the
/// R-diagonal phase correction (plain QR alone is not Haar).
DenseTensor haar_unitary(std::int64_t n, RngStream& rng);

/// Max-norm residual of U^dag U - 1.
double unitarity_residual(const DenseTensor& u);

}  // namespace isotns

#endif
