#pragma once

#include <complex>
#include <vector>

namespace lrd {

// Unnormalized DFT sum_m a[m] exp(-+ 2 pi i k m / n); inverse=true uses the
// plus sign.  Plans are cached per (n, direction) behind a mutex and created
// with deterministic flags.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Row-major n0 x n1 two-dimensional transform, same conventions.
void fft2_inplace(std::vector<std::complex<double>>& a, int n0, int n1,
                  bool inverse);

}  // namespace lrd
