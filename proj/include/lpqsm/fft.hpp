#pragma once

#include "lpqsm/grid.hpp"

namespace lpqsm {

/// Fractional DFT frequency of bin j for an n-point transform, in cycles per
/// sample: j/n for j <= (n-1)/2, (j-n)/n otherwise. The Nyquist bin of even n
/// lands on the negative side (-1/2).
double dft_frequency(int j, int n);

/// Unnormalized forward 3D DFT.
ComplexVolume fft3(const ComplexVolume& v);
ComplexVolume fft3(const RealVolume& v);

/// Inverse 3D DFT with 1/N normalization; ifft3(fft3(v)) == v.
ComplexVolume ifft3(const ComplexVolume& v);

RealVolume real_part(const ComplexVolume& v);

}  // namespace lpqsm
