#pragma once
#include <vector>

namespace lcft {

struct GaussRule {
	std::vector<double> x, w; // on [-1, 1]
};

// Gauss-Legendre rule of order n, nodes ascending. Cached per n.
const GaussRule &gauss_legendre(int n);

} // namespace lcft
