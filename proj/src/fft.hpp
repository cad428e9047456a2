#pragma once

#include <complex>
#include <cstddef>

namespace uwbcount::detail {

/// In-place unitary 2-D DFT of a row-major rows x cols array.
/// `inverse` selects the positive exponent.
void fft2_unitary(std::complex<double>* data, std::size_t rows, std::size_t cols, bool inverse);

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t next_smooth(std::size_t n);

}  // namespace uwbcount::detail
