#include "isotns/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace isotns {

namespace {

// splitmix64 (Vigna); used both as the generator and for stream derivation.
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream RngStream::derive(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t x = master;
  std::uint64_t a = splitmix64(x);
  x ^= counter * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(x);
  return RngStream(a ^ (b + 0x9e3779b97f4a7c15ULL));
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
  // 53-bit mantissa in [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * M_PI * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

cplx RngStream::gaussian_complex() {
  const double re = gaussian(), im = gaussian();
  return cplx(re, im) * M_SQRT1_2;
}

DenseTensor haar_unitary(std::int64_t n, RngStream& rng) {
  if (n < 1) throw ShapeError("haar_unitary requires n >= 1");
  using EMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  EMat z(n, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) z(i, j) = rng.gaussian_complex();
  Eigen::HouseholderQR<EMat> qr(z);
  EMat q = qr.householderQ() * EMat::Identity(n, n);
  EMat r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (std::int64_t j = 0; j < n; ++j) {
    cplx d = r(j, j);
    const double a = std::abs(d);
    cplx ph = a > 0 ? d / a : cplx(1, 0);
    q.col(j) *= ph;
  }
  DenseTensor out({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] = q(i, j);
  return out;
}

double unitarity_residual(const DenseTensor& u) {
  DenseTensor g = matmul(u.adjoint(), u);
  const std::int64_t n = g.dim(0);
  double r = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      r = std::max(r, std::abs(g[i * n + j] - (i == j ? cplx(1, 0) : cplx(0, 0))));
  return r;
}

}  // namespace isotns
