#include "lcft/harmonics.hpp"

#include "lcft/geometry.hpp"

#include <cmath>

namespace lcft::harm {

// fully normalized associated Legendre recurrences (Condon-Shortley phase included)
void real_harmonics(int L, double x, double phi, double *out)
{
	const double s = std::sqrt(std::max(0.0, 1 - x * x));
	double pmm = std::sqrt(1 / (4 * M_PI));
	const std::complex<double> step = std::polar(1.0, phi);
	std::complex<double> rot = 1;
	for (int m = 0; m <= L; ++m) {
		if (m > 0) {
			pmm *= -std::sqrt((2 * m + 1) / (2.0 * m)) * s;
			rot *= step;
		}
		const double f = m == 0 ? 1 : M_SQRT2;
		auto put = [&](int l, double p) {
			if (m == 0)
				out[index(l, 0)] = p;
			else {
				out[index(l, m)] = f * p * rot.real();
				out[index(l, -m)] = f * p * rot.imag();
			}
		};
		put(m, pmm);
		if (m == L)
			break;
		double p2 = pmm, p1 = std::sqrt(2.0 * m + 3) * x * pmm;
		put(m + 1, p1);
		for (int l = m + 2; l <= L; ++l) {
			const double l2 = double(l) * l, m2 = double(m) * m, k = double(l - 1) * (l - 1);
			const double a = std::sqrt((4 * l2 - 1) / (l2 - m2)), b = std::sqrt((k - m2) / (4 * k - 1));
			const double p = a * (x * p1 - b * p2);
			p2 = p1;
			p1 = p;
			put(l, p);
		}
	}
}

void real_harmonics_at(int L, int chart, std::complex<double> u, double *out)
{
	auto p = geo::to_sphere(chart, u);
	real_harmonics(L, p[2], std::atan2(p[1], p[0]), out);
}

} // namespace lcft::harm
