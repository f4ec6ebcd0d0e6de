#pragma once

namespace lesion {

// Float width is fixed at build time (LESION_FLOAT32 selects 32-bit).
// Gradient-check tolerances are stated for the 64-bit build.
#ifdef LESION_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

inline constexpr int kScalarBits = static_cast<int>(sizeof(Scalar) * 8);

}  // namespace lesion
