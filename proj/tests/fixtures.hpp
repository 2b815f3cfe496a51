#pragma once
// Shared test fixtures.
#include "lcft/beltrami.hpp"
#include "lcft/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>

namespace fixtures {

using lcft::beltrami::cplx;
using lcft::beltrami::Grid;
using lcft::beltrami::RGrid;

// smooth bump of height 1 supported in |z - c| < R
inline double smooth_bump(cplx z, cplx c, double R)
{
	const double t = std::norm(z - c) / (R * R);
	return t < 1 ? std::exp(1 - 1 / (1 - t)) : 0.0;
}

inline RGrid sample(const Grid &g, const std::function<double(cplx)> &f)
{
	RGrid out(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i)
			out[size_t(j) * g.n + i] = f(g.node(i, j));
	return out;
}

// generic inverse-metric perturbation with all three components, supported in |z| < 1.9
inline lcft::beltrami::Perturbation generic_perturbation(const Grid &g)
{
	lcft::beltrami::Perturbation p;
	p.grid = g;
	p.fxx = sample(g, [](cplx z) { return smooth_bump(z, {0.2, 0.1}, 1.2); });
	p.fyy = sample(g, [](cplx z) { return -0.6 * smooth_bump(z, {-0.1, 0.3}, 1.4); });
	p.fxy = sample(g, [](cplx z) { return 0.5 * smooth_bump(z, {0.3, -0.4}, 1.0); });
	return p;
}

// eps with sup |mu| = k for the generic perturbation, by bisection
inline double calibrate(const lcft::beltrami::ConformalMetric &hat, const lcft::beltrami::Perturbation &p, double k)
{
	double lo = 0, hi = 0.05;
	auto sup = [&](double eps) {
		try {
			return lcft::beltrami::coefficient_from_metric(hat, p, eps).sup_norm;
		} catch (const lcft::Error &) {
			return 1.0;
		}
	};
	while (sup(hi) < k)
		hi *= 2;
	for (int it = 0; it < 60; ++it) {
		const double mid = 0.5 * (lo + hi);
		(sup(mid) < k ? lo : hi) = mid;
	}
	return 0.5 * (lo + hi);
}

// int F(x + rho e^{i phi}) rho drho dphi over the plane, adaptive in rho
inline double plane_integral(cplx x, const std::function<double(cplx)> &F, int n_phi = 96)
{
	using boost::math::quadrature::gauss_kronrod;
	auto ring = [&](double rho) {
		double s = 0;
		for (int j = 0; j < n_phi; ++j)
			s += F(x + std::polar(rho, 2 * M_PI * (j + 0.5) / n_phi));
		return s * 2 * M_PI / n_phi * rho;
	};
	double total = 0;
	const double cuts[] = {0, 1e-3, 1e-2, 0.1, 0.5, 1, 2, 4};
	for (int i = 0; i + 1 < 8; ++i)
		total += gauss_kronrod<double, 15>::integrate(ring, cuts[i], cuts[i + 1], 6, 1e-11);
	// rho = 4/s on the tail
	auto tail = [&](double s) {
		if (s == 0)
			return 0.0;
		const double rho = 4 / s;
		return ring(rho) * 4 / (s * s);
	};
	total += gauss_kronrod<double, 15>::integrate(tail, 0.0, 1.0, 6, 1e-11);
	return total;
}

} // namespace fixtures
