#pragma once

#include <span>

#include "mrbench/types.hpp"

namespace mrb {

// Centered, orthonormal 2-D DFT. DC sits at (height/2, width/2); both
// directions are scaled by 1/sqrt(height*width) so energy is preserved.
ComplexImage fft2c(const ComplexImage &img);
ComplexImage ifft2c(const ComplexImage &ksp);

// Unchecked in-place variants used inside iterative solvers.
void fft2c_inplace(std::span<cx> data, std::size_t height, std::size_t width);
void ifft2c_inplace(std::span<cx> data, std::size_t height, std::size_t width);

// Applies the transform to every coil plane.
CoilImages fft2c(const CoilImages &img);
CoilImages ifft2c(const CoilImages &ksp);

} // namespace mrb
