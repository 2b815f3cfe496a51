#pragma once
// Real orthonormal spherical harmonics on the unit sphere.
#include <complex>

namespace lcft::harm {

inline int index(int l, int m) { return l * l + l + m; }

// Y_lm for all l <= L at cos(theta) = x, azimuth phi; out has (L+1)^2 entries in index order
void real_harmonics(int L, double x, double phi, double *out);

// same at the sphere point of chart coordinate u (chart 0 finite, 1 infinity)
void real_harmonics_at(int L, int chart, std::complex<double> u, double *out);

} // namespace lcft::harm
