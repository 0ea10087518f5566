#pragma once

#include <complex>

namespace spfit::fft {

/// Complex DFT of length n, out-of-place. sign -1 applies e^{-2*pi*i*k*n/N}
/// (forward), sign +1 the unnormalized inverse kernel. No 1/N scaling is
/// applied; callers normalize as needed. Thread-safe; plans are cached.
void cdft(const std::complex<double>* in, std::complex<double>* out, int n, int sign);

}  // namespace spfit::fft
