#pragma once

// Data-parallel inner loops of the choice model.
//
// Each kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant. The variant is picked once at startup from CPU features; setting
// RSIM_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace rsim::kernels {

struct KernelTable {
  const char* name;

  // out[i] = bx*x[i] + bz*z[i] + bw*(wlog[i] + log_coupon*w[i])
  void (*utilities)(const double* x, const double* z, const double* wlog, const double* w,
                    std::size_t n, double bx, double bz, double bw, double log_coupon, double* out);

  double (*logsumexp)(const double* x, std::size_t n);

  // out[s] = logsumexp(x[offsets[s] .. offsets[s+1]))
  void (*segment_logsumexp)(const double* x, const std::uint32_t* offsets, std::size_t n_segments,
                            double* out);

  // out[i] = exp(x[i] - shift)
  void (*exp_shifted)(const double* x, std::size_t n, double shift, double* out);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table() noexcept;

const KernelTable& active() noexcept;

/// Selects a table by name ("scalar" or "avx2"); returns false if unavailable.
bool select(std::string_view name) noexcept;

// Span front-ends over the active table.

void utilities(std::span<const double> marketing, std::span<const double> unobserved,
               std::span<const double> weighted_log_price, std::span<const double> price_factor,
               double feature_coef, double unobserved_loading, double price_coef, double log_coupon,
               std::span<double> out);

double logsumexp(std::span<const double> x);

void segment_logsumexp(std::span<const double> x, std::span<const std::uint32_t> offsets,
                       std::span<double> out);

void softmax(std::span<const double> x, std::span<double> out);

}  // namespace rsim::kernels
