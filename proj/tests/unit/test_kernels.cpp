#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ccgm/kernels.hpp"
#include "ccgm/loglinear.hpp"
#include "support.hpp"

using namespace ccgm;

namespace {

struct Inputs {
  std::vector<double> a, b;
  std::vector<std::uint32_t> index;
  std::vector<double> ratio;
};

Inputs make_inputs(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m - 1));
  Inputs in;
  for (std::size_t i = 0; i < n; ++i) {
    in.a.push_back(u(rng));
    in.b.push_back(u(rng) + 0.1);
    in.index.push_back(pick(rng));
  }
  for (std::size_t j = 0; j < m; ++j) in.ratio.push_back(u(rng));
  return in;
}

}  // namespace

TEST_CASE("scalar kernels on small inputs") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(kernels::scalar::sum(x) == 15.0);
  const std::vector<double> y{1, 2, 2.5, 4, 9};
  CHECK(kernels::scalar::max_abs_diff(x, y) == 4.0);
  std::vector<double> cells{1, 1, 1, 1};
  const std::vector<std::uint32_t> idx{0, 1, 0, 1};
  std::vector<double> margin(2, 0.0);
  kernels::scalar::accumulate(cells, idx, margin);
  CHECK(margin == std::vector<double>{2, 2});
  kernels::scalar::scale_gathered(cells, idx, std::vector<double>{3, 5});
  CHECK(cells == std::vector<double>{3, 5, 3, 5});
}

#if defined(CCGM_HAVE_AVX2)
TEST_CASE("AVX2 kernels agree with the scalar path") {
  if (!kernels::backend_available(kernels::Backend::avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  std::mt19937_64 rng(17);
  for (std::size_t n : {1UL, 3UL, 4UL, 7UL, 64UL, 1000UL, 4099UL}) {
    const auto in = make_inputs(rng, n, 13);
    CAPTURE(n);
    CHECK(kernels::avx2::sum(in.a) == doctest::Approx(kernels::scalar::sum(in.a)).epsilon(1e-12));
    CHECK(kernels::avx2::max_abs_diff(in.a, in.b) == kernels::scalar::max_abs_diff(in.a, in.b));
    CHECK(kernels::avx2::pearson_sum(in.a, in.b) ==
          doctest::Approx(kernels::scalar::pearson_sum(in.a, in.b)).epsilon(1e-12));
    std::vector<double> s(in.a), v(in.a);
    kernels::scalar::scale_gathered(s, in.index, in.ratio);
    kernels::avx2::scale_gathered(v, in.index, in.ratio);
    CHECK(s == v);
  }
}
#endif

TEST_CASE("IPF gives the same fit under every available backend") {
  std::mt19937_64 rng(23);
  const auto t = testing::random_table(rng, testing::names(6));
  const LoglinearSpec spec(t.schema(), {{"A", "B", "C"}, {"C", "D"}, {"D", "E", "F"}, {"A", "F"}});
  const auto before = kernels::active_backend();
  REQUIRE(kernels::set_backend(kernels::Backend::scalar));
  const auto ref = fit_ipf(t, spec);
  if (kernels::set_backend(kernels::Backend::avx2)) {
    const auto fast = fit_ipf(t, spec);
    CHECK(fast.iterations == ref.iterations);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(fast.fitted[i] == doctest::Approx(ref.fitted[i]).epsilon(1e-10));
  }
  kernels::set_backend(before);
}
