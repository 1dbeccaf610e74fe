#include "ccgm/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace ccgm::kernels::scalar {

double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double pearson_sum(std::span<const double> obs, std::span<const double> fit) {
  double s = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (fit[i] > 0.0) {
      const double d = obs[i] - fit[i];
      s += d * d / fit[i];
    }
  }
  return s;
}

void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                    std::span<const double> ratio) {
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] *= ratio[index[i]];
}

void accumulate(std::span<const double> cells, std::span<const std::uint32_t> index,
                std::span<double> margin) {
  for (std::size_t i = 0; i < cells.size(); ++i) margin[index[i]] += cells[i];
}

}  // namespace ccgm::kernels::scalar
