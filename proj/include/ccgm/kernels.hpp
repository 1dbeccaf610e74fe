#pragma once

// Cell-wise arithmetic over dense count arrays. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant. The dispatching
// entry points pick the widest variant the running CPU supports.

#include <cstdint>
#include <span>
#include <string_view>

namespace ccgm::kernels {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
/// Forces a backend. Returns false, leaving the selection unchanged, when
/// the CPU or the build does not support it.
bool set_backend(Backend b);

double sum(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
/// Σ (obs - fit)^2 / fit over cells with fit > 0.
double pearson_sum(std::span<const double> obs, std::span<const double> fit);
/// cells[i] *= ratio[index[i]]
void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                    std::span<const double> ratio);
/// margin[index[i]] += cells[i]; margin is not cleared.
void accumulate(std::span<const double> cells, std::span<const std::uint32_t> index,
                std::span<double> margin);

namespace scalar {
double sum(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double pearson_sum(std::span<const double> obs, std::span<const double> fit);
void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                    std::span<const double> ratio);
void accumulate(std::span<const double> cells, std::span<const std::uint32_t> index,
                std::span<double> margin);
}  // namespace scalar

#if defined(CCGM_HAVE_AVX2)
namespace avx2 {
double sum(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double pearson_sum(std::span<const double> obs, std::span<const double> fit);
void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                    std::span<const double> ratio);
}  // namespace avx2
#endif

}  // namespace ccgm::kernels
