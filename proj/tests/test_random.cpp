#include "reflectsim/parallel.hpp"
#include "reflectsim/random.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

using namespace reflectsim;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32(0)(B{0, 0, 0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32(0xffffffffffffffffull)(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32(0x299f31d0a4093822ull)(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniforms lie in (0, 1) with the right mean") {
  const RandomStream rng(42, 3);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(i);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normals have unit variance and zero mean") {
  const RandomStream rng(7, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(i);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("random access, bulk fill and sequential reads agree") {
  const RandomStream rng(11, 5);
  for (std::uint64_t first : {0ull, 1ull, 6ull, 9ull}) {
    std::vector<double> bulk(13);
    rng.fill_normals(bulk, first);
    NormalSequence seq(11, 5, first);
    for (std::size_t k = 0; k < bulk.size(); ++k) {
      CHECK(bulk[k] == rng.normal(first + k));
      CHECK(seq.next() == rng.normal(first + k));
    }
  }
}

TEST_CASE("streams and derived seeds are distinct") {
  CHECK(RandomStream(1, 0).normal(0) != RandomStream(1, 1).normal(0));
  CHECK(RandomStream(1, 0).normal(0) != RandomStream(2, 0).normal(0));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t tag = 0; tag < 64; ++tag) seeds.insert(derive_seed(20240611, tag));
  CHECK(seeds.size() == 64);
  CHECK(derive_seed(5, 1) == derive_seed(5, 1));
}

TEST_CASE("parallel_map keeps index order for any worker count") {
  auto f = [](std::size_t i) { return RandomStream(3, i).normal(0) + static_cast<double>(i); };
  const auto ref = parallel_map(37, 1, f);
  for (int w : {2, 3, 8, 64}) CHECK(parallel_map(37, w, f) == ref);
  CHECK(parallel_map(0, 4, f).empty());
}

TEST_CASE("parallel_map rethrows worker exceptions") {
  auto f = [](std::size_t i) -> int {
    if (i == 17) throw std::runtime_error("boom");
    return static_cast<int>(i);
  };
  CHECK_THROWS_AS(parallel_map(40, 4, f), std::runtime_error);
}
