#include <algorithm>
#include <cmath>
#include <limits>

#include "rsim/kernels.hpp"

namespace rsim::kernels {
namespace {

void utilities_scalar(const double* x, const double* z, const double* wlog, const double* w,
                      std::size_t n, double bx, double bz, double bw, double log_coupon, double* out) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = bx * x[i] + bz * z[i] + bw * (wlog[i] + log_coupon * w[i]);
}

double logsumexp_scalar(const double* x, std::size_t n) {
  if (n == 0) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x, x + n);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

void segment_logsumexp_scalar(const double* x, const std::uint32_t* offsets, std::size_t n_segments,
                              double* out) {
  for (std::size_t s = 0; s < n_segments; ++s)
    out[s] = logsumexp_scalar(x + offsets[s], offsets[s + 1] - offsets[s]);
}

void exp_shifted_scalar(const double* x, std::size_t n, double shift, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] - shift);
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{"scalar", utilities_scalar, logsumexp_scalar, segment_logsumexp_scalar,
                                 exp_shifted_scalar};
  return table;
}

}  // namespace rsim::kernels
