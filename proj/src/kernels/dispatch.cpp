#include "ccgm/kernels.hpp"

#include <atomic>

namespace ccgm::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CCGM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend>& selected() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

Backend active_backend() { return selected().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  selected().store(b, std::memory_order_relaxed);
  return true;
}

#if defined(CCGM_HAVE_AVX2)
#define CCGM_DISPATCH(fn, ...)                                                 \
  (active_backend() == Backend::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define CCGM_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double sum(std::span<const double> x) { return CCGM_DISPATCH(sum, x); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return CCGM_DISPATCH(max_abs_diff, a, b);
}

double pearson_sum(std::span<const double> obs, std::span<const double> fit) {
  return CCGM_DISPATCH(pearson_sum, obs, fit);
}

void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                    std::span<const double> ratio) {
  CCGM_DISPATCH(scale_gathered, cells, index, ratio);
}

// Scatter-add has no profitable AVX2 form (conflicting lanes); scalar only.
void accumulate(std::span<const double> cells, std::span<const std::uint32_t> index,
                std::span<double> margin) {
  scalar::accumulate(cells, index, margin);
}

}  // namespace ccgm::kernels
