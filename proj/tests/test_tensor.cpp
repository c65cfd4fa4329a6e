#include "doctest.h"

#include "isotns/tensor.hpp"

using namespace isotns;

TEST_CASE("reshape and permute preserve entries") {
  DenseTensor t({2, 3});
  for (std::int64_t i = 0; i < 6; ++i) t[i] = cplx(static_cast<double>(i), 0);
  DenseTensor r = t.reshape({3, 2});
  CHECK(r[5] == t[5]);
  DenseTensor p = t.permute({1, 0});
  CHECK(p.shape() == std::vector<std::int64_t>({3, 2}));
  CHECK(p.at({2, 1}) == t.at({1, 2}));
  CHECK_THROWS_AS(t.reshape({4, 2}), ShapeError);
  CHECK_THROWS_AS(t.permute({0, 0}), ShapeError);
}

TEST_CASE("identity contraction returns the vector") {
  DenseTensor id = DenseTensor::identity(4);
  DenseTensor v({4});
  for (std::int64_t i = 0; i < 4; ++i) v[i] = cplx(1.0 + i, -0.5 * i);
  DenseTensor w = contract(id, v, {{1, 0}});
  CHECK(w.shape() == std::vector<std::int64_t>({4}));
  CHECK(w.dist(v) < 1e-15);
}

TEST_CASE("contract reports offending legs") {
  DenseTensor a({2, 3});
  DenseTensor b({4, 2});
  CHECK_THROWS_WITH_AS(contract(a, b, {{1, 0}}), doctest::Contains("legs (1,0)"), ShapeError);
}

TEST_CASE("partial trace of a product factorizes") {
  DenseTensor rho({2, 2});
  rho[0] = 0.25;
  rho[1] = cplx(0.1, 0.2);
  rho[2] = cplx(0.1, -0.2);
  rho[3] = 0.75;
  DenseTensor sigma({3, 3});
  sigma[0] = 0.5;
  sigma[4] = 0.25;
  sigma[8] = 0.25;
  DenseTensor prod = kron(rho, sigma);
  DenseTensor red = partial_trace(prod, {2, 3}, {1});
  CHECK(red.dist(rho * trace(sigma)) < 1e-14);
}

TEST_CASE("kron of sigma_z with itself has diagonal (1,-1,-1,1)") {
  DenseTensor z({2, 2});
  z[0] = 1.0;
  z[3] = -1.0;
  DenseTensor zz = kron(z, z);
  CHECK(zz[0] == cplx(1, 0));
  CHECK(zz[5] == cplx(-1, 0));
  CHECK(zz[10] == cplx(-1, 0));
  CHECK(zz[15] == cplx(1, 0));
}

TEST_CASE("matmul against hand-computed product") {
  DenseTensor a({2, 2}), b({2, 2});
  a[0] = cplx(1, 1);
  a[1] = 2.0;
  a[2] = 0.0;
  a[3] = cplx(0, -1);
  b[0] = 1.0;
  b[1] = 0.0;
  b[2] = cplx(0, 1);
  b[3] = 3.0;
  DenseTensor c = matmul(a, b);
  CHECK(std::abs(c[0] - cplx(1, 3)) < 1e-15);
  CHECK(std::abs(c[1] - cplx(6, 0)) < 1e-15);
  CHECK(std::abs(c[2] - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(c[3] - cplx(0, -3)) < 1e-15);
}
