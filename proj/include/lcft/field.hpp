#pragma once
// Gaussian free field on a sphere metric: spectral basis, Green function, samples, chaos measures.
#include "lcft/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

namespace lcft::field {

using geo::cplx;
using geo::ConformalMetric;

// Laplace eigenpairs without the zero mode. Round spheres use real spherical harmonics;
// other metrics use a Rayleigh-Ritz (Galerkin) solve in the harmonics up to degree galerkin_degree.
class SpectralBasis {
public:
	static SpectralBasis build(const ConformalMetric &m, int n_max, int galerkin_degree = 0);

	const ConformalMetric &metric() const { return metric_; }
	int size() const { return int(lambda_.size()); }
	const std::vector<double> &eigenvalues() const { return lambda_; }
	bool closed_form() const { return galerkin_.size() == 0; }
	int harmonic_degree() const { return degree_; }

	// e_1..e_N at chart point u
	void evaluate(int chart, cplx u, double *out) const;
	std::vector<double> evaluate(cplx z) const;
	// row k = basis values at node k
	Eigen::MatrixXd evaluate_nodes(const std::vector<geo::QuadNode> &nodes) const;
	// max |int e_i e_j dv - delta_ij| over the first `count` functions, and max |int e_i dv|
	std::pair<double, double> orthonormality_defect(int count, int n_r = 96, int n_theta = 128) const;

private:
	ConformalMetric metric_;
	std::vector<double> lambda_;
	int degree_ = 0;
	double scale_ = 1; // round: e_n = scale * Y
	Eigen::MatrixXd galerkin_; // harmonic coefficients, one column per eigenfunction
};

// int ln|z - u| dv_g(u) by Fourier series of the angular integrals around the origin
double log_potential(const ConformalMetric &m, cplx z, int n_phi = 128, int n_gauss = 48);

// Green function data for a sphere metric, written as a Weyl shift of the unit round sphere:
// G_g(x, y) = G_0(x, y) - u(x) - u(y) + C, u = m_g(G_0(x, .)), C = m_g(u).
class Green {
public:
	explicit Green(const ConformalMetric &m, int shift_degree = 40);

	const ConformalMetric &metric() const { return metric_; }
	double volume() const { return volume_; }
	double operator()(cplx x, cplx y) const;
	double regular(cplx x, cplx y) const; // h_g(x, y)
	double diagonal(cplx z) const { return regular(z, z); }
	double shift(cplx z) const; // u(z)
	double shift_constant() const { return c_; }
	// curvature convolution int R_g(y) G_g(z, y) dv_g(y)
	double curvature_potential(cplx z) const;
	// int R_g K dv_g with K the curvature potential
	double curvature_energy() const { return curv_energy_; }

private:
	ConformalMetric metric_;
	bool round_ = false;
	double volume_ = 0, c_ = 0, phi_mean_ = 0, k0_ = 0, curv_energy_ = 0;
	int degree_ = 0;
	std::vector<double> coef_; // 2 pi c_lm / (v l(l+1)) for the shift
};

// unit round sphere reference: h_0(x, y) = (ln(1+|x|^2) + ln(1+|y|^2) - 1)/2
double round_regular(cplx x, cplx y);

enum class GreenMethod { Auto, EigenSum, DoubleIntegral };

// G_g(x, y). EigenSum uses n_terms eigenpairs (addition theorem on the round sphere);
// DoubleIntegral evaluates the log kernel plus h_g from the double integral formula.
double green_function(const ConformalMetric &m, cplx x, cplx y, GreenMethod method = GreenMethod::Auto,
                      long n_terms = 400);

// h_g(z, z') = (L(z) + L(z'))/v - J/v^2 with L the log potential and J = int L dv
double double_integral_regular(const ConformalMetric &m, cplx z, cplx zp);

// ----------------------------------------------------------------- sampling

// normals for sample `index` of stream `seed`
std::vector<double> standard_normals(uint64_t seed, uint64_t index, int n);

struct GFFSample {
	std::shared_ptr<const SpectralBasis> basis;
	std::vector<double> a;
	uint64_t seed = 0, index = 0;
	double value(cplx z) const;
	double value(int chart, cplx u) const;
};

GFFSample sample_gff(std::shared_ptr<const SpectralBasis> basis, uint64_t seed, uint64_t index = 0);

// E X_N(z)^2 = 2 pi sum e_n(z)^2 / lambda_n
double truncated_variance(const SpectralBasis &b, cplx z);

// circle average of the truncated field with an n_theta trapezoid
double circle_average(const GFFSample &s, cplx z, double eps, int n_theta = 64);
// exact variance of that circle average
double circle_average_variance(const SpectralBasis &b, cplx z, double eps, int n_theta = 64);

struct Regularization {
	enum Kind { SpectralTruncation, CircleAverage } kind = SpectralTruncation;
	double eps = 0.05;
};

struct ChaosAtom {
	int chart;
	cplx u;
	double weight;
};

struct ChaosMeasure {
	double gamma = 0;
	Regularization reg;
	std::vector<ChaosAtom> atoms;
	double total_mass() const;
	double mass_in_ball(cplx center, double radius) const;
};

// Atoms at the sphere quadrature nodes. include_rho selects M (with rho) or m (without).
ChaosMeasure chaos_measure(const GFFSample &s, double gamma, Regularization reg, int n_r = 96, int n_theta = 128,
                           bool include_rho = true, const Green *green = nullptr);

// Total masses of m_{gamma,g,N} for samples [first, first + count), batched through a matrix product.
std::vector<double> spectral_total_masses(const SpectralBasis &b, double gamma, uint64_t seed, uint64_t first,
                                          int count, int n_r = 64, int n_theta = 96, int threads = 1);

} // namespace lcft::field
