#include "lpqsm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "lpqsm/errors.hpp"

namespace lpqsm {
namespace {

// The FFTW planner is not re-entrant; plan execution via the new-array
// interface is. Plans are cached per (dims, sign) for the process lifetime.
std::mutex planner_mutex;
std::map<std::tuple<int, int, int, int>, fftw_plan>& plan_cache() {
  static std::map<std::tuple<int, int, int, int>, fftw_plan> cache;
  return cache;
}

fftw_plan plan_for(const GridSpec& grid, int sign, fftw_complex* in, fftw_complex* out) {
  const auto key = std::make_tuple(grid.dims[0], grid.dims[1], grid.dims[2], sign);
  std::scoped_lock lock(planner_mutex);
  auto& cache = plan_cache();
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  // x is the fastest-varying axis in memory, so it is FFTW's last dimension.
  // FFTW_ESTIMATE keeps plan selection deterministic across processes.
  fftw_plan p = fftw_plan_dft_3d(grid.dims[2], grid.dims[1], grid.dims[0], in, out, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (p == nullptr) throw NumericalError("FFTW plan creation failed");
  cache.emplace(key, p);
  return p;
}

ComplexVolume transform(const ComplexVolume& v, int sign) {
  v.grid.validate();
  ComplexVolume out(v.grid);
  auto* in_ptr =
      reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(v.data.data()));
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data.data());
  fftw_plan p = plan_for(v.grid, sign, in_ptr, out_ptr);
  fftw_execute_dft(p, in_ptr, out_ptr);
  return out;
}

}  // namespace

double dft_frequency(int j, int n) {
  if (j <= (n - 1) / 2) return static_cast<double>(j) / n;
  return static_cast<double>(j - n) / n;
}

ComplexVolume fft3(const ComplexVolume& v) { return transform(v, FFTW_FORWARD); }

ComplexVolume fft3(const RealVolume& v) {
  ComplexVolume c(v.grid);
  for (std::size_t i = 0; i < v.data.size(); ++i) c.data[i] = {v.data[i], 0.0};
  return fft3(c);
}

ComplexVolume ifft3(const ComplexVolume& v) {
  ComplexVolume out = transform(v, FFTW_BACKWARD);
  const double inv_n = 1.0 / static_cast<double>(v.grid.voxel_count());
  for (auto& x : out.data) x *= inv_n;
  return out;
}

RealVolume real_part(const ComplexVolume& v) {
  RealVolume r(v.grid);
  for (std::size_t i = 0; i < v.data.size(); ++i) r.data[i] = v.data[i].real();
  return r;
}

}  // namespace lpqsm
