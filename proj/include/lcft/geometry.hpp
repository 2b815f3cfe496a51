#pragma once
// Conformal metrics e^sigma |dz|^2 on the Riemann sphere.
#include "lcft/gridio.hpp"

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lcft::geo {

using cplx = std::complex<double>;

enum class MetricKind { RoundSphere, Equator, FlatPatch, GridSigma, ClosedForm };

// sigma, d_z sigma, d_z^2 sigma, d_z d_zbar sigma
struct SigmaJet {
	double s = 0;
	cplx d1, d2;
	double lap = 0;
};

struct Bump {
	double amplitude;
	cplx center;
	double width; // A exp(-|z-c|^2/w^2)
};

struct GridCharts {
	io::GridBlock finite;   // sigma on [-L, L]^2
	io::GridBlock infinity; // sigma~(zeta) = sigma(1/zeta) - 4 ln|zeta|
};

class ConformalMetric {
public:
	using JetFn = std::function<SigmaJet(cplx)>;

	static ConformalMetric round(double curvature = 2.0);
	static ConformalMetric equator();
	static ConformalMetric flat();
	// round metric of the given curvature times exp(sum of Gaussian bumps)
	static ConformalMetric round_with_bumps(const std::vector<Bump> &bumps, double curvature = 2.0);
	static ConformalMetric closed_form(JetFn finite, JetFn infinity, std::string name);
	static ConformalMetric from_grid(GridCharts charts, std::string name = "grid");
	// samples a closed-form metric on both chart grids of n x n nodes over [-L, L]^2
	static ConformalMetric sample_to_grid(const ConformalMetric &m, int n, double half_width = 1.3);

	MetricKind kind() const;
	const std::string &name() const;
	bool is_sphere() const;
	bool is_grid() const;
	double round_curvature() const; // for RoundSphere and round-based closed forms, else 0

	// jet in the finite chart; |z| > 1 goes through the infinity chart
	SigmaJet jet(cplx z) const;
	SigmaJet jet_infinity(cplx zeta) const;
	double sigma(cplx z) const { return jet(z).s; }

	const GridCharts *grid() const;
	// FD derivative fields on grid nodes, chart 0 finite, 1 infinity
	const std::vector<SigmaJet> &grid_jets(int chart) const;

	struct Impl;
	std::shared_ptr<const Impl> impl;
};

struct WeylDirection {
	std::function<double(cplx)> value;
	std::function<cplx(cplx)> dz; // d_z phi in the finite chart
	std::function<cplx(cplx)> d2;    // d_z^2 phi, optional
	std::function<double(cplx)> lap; // d_z d_zbar phi, optional
	static WeylDirection zero();
	static WeylDirection constant(double k);
	static WeylDirection bump(double amplitude, cplx center, double width);
};

// sup of |phi|(1+|z|) and |d phi|(1+|z|)^2 over a polar sample out to radius r_max
struct DecayReport {
	double c0 = 0, c1 = 0;
	bool ok = false;
};
DecayReport check_decay(const WeylDirection &phi, double r_max = 1e3, double bound = 1e3);

// One node of a sphere quadrature: chart coordinate u, point z (infinite at zeta = 0),
// flat area weight dA in the chart and metric weight dv = e^{sigma_chart(u)} dA.
struct QuadNode {
	int chart;
	cplx u, z;
	double dA, dv;
	SigmaJet jet; // chart jet at u
};

// Fixed rule over both charts: Gauss-Legendre in r times trapezoid in theta for closed forms,
// partition-of-unity trapezoid on the chart grids for grid metrics.
std::vector<QuadNode> sphere_quadrature(const ConformalMetric &m, int n_r = 96, int n_theta = 128);

// Adaptive two-chart integral of chart densities f(u) d^2u, split at |z| = 1.
double integrate_charts(const std::function<double(cplx)> &finite, const std::function<double(cplx)> &infinity,
                        double tol = 1e-11);

// Partition of unity between the charts: finite-chart weight at |z| = r.
double chart_weight(double r);

// point of the unit sphere for chart coordinate u (stereographic from the north pole)
std::array<double, 3> to_sphere(int chart, cplx u);

double scalar_curvature(const ConformalMetric &m, cplx z);
cplx t_field(const ConformalMetric &m, cplx z);
double volume(const ConformalMetric &m);
double gauss_bonnet_integral(const ConformalMetric &m);
double anomaly(const ConformalMetric &m, const WeylDirection &phi);
// sigma + phi as a new metric
ConformalMetric weyl_transform(const ConformalMetric &m, const WeylDirection &phi);

} // namespace lcft::geo
