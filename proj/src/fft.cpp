#include "lrdlab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "lrdlab/common.hpp"

namespace lrd {

namespace {

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

fftw_plan plan_1d(int n, int sign) {
  static std::map<std::pair<int, int>, fftw_plan> cache;
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> dummy(n);
  fftw_plan p = fftw_plan_dft_1d(
      n, reinterpret_cast<fftw_complex*>(dummy.data()),
      reinterpret_cast<fftw_complex*>(dummy.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw NumericFailure("fft planner failed");
  cache.emplace(key, p);
  return p;
}

fftw_plan plan_2d(int n0, int n1, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  auto key = std::make_tuple(n0, n1, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> dummy(std::size_t(n0) * n1);
  fftw_plan p = fftw_plan_dft_2d(
      n0, n1, reinterpret_cast<fftw_complex*>(dummy.data()),
      reinterpret_cast<fftw_complex*>(dummy.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw NumericFailure("fft planner failed");
  cache.emplace(key, p);
  return p;
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  if (a.empty()) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_plan p = plan_1d(int(a.size()), inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(a.data()),
                   reinterpret_cast<fftw_complex*>(a.data()));
}

void fft2_inplace(std::vector<std::complex<double>>& a, int n0, int n1,
                  bool inverse) {
  if (a.size() != std::size_t(n0) * n1)
    throw InvalidInput("fft2 buffer size does not match the grid");
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_plan p = plan_2d(n0, n1, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(a.data()),
                   reinterpret_cast<fftw_complex*>(a.data()));
}

}  // namespace lrd
