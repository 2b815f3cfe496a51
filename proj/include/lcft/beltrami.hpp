#pragma once
// Beltrami equation on a square grid: Cauchy and Beurling transforms by padded FFT
// (corrected trapezoidal rule), Neumann series for psi = z + u, and the Weyl factor phi.
#include "lcft/geometry.hpp"

#include <array>
#include <memory>
#include <vector>

namespace lcft::beltrami {

using geo::cplx;
using geo::ConformalMetric;
using CGrid = std::vector<cplx>;
using RGrid = std::vector<double>;

// n x n nodes x_i = -L + i h, h = 2L/(n-1), row-major with y outer.
struct Grid {
	int n = 1024;
	double half_width = 4;
	// transforms reject data that is nonzero outside |x|, |y| <= support
	double support = 2;
	double h() const { return 2 * half_width / (n - 1); }
	cplx node(int i, int j) const { return {-half_width + h() * i, -half_width + h() * j}; }
	size_t size() const { return size_t(n) * n; }
};

// Precomputed kernel spectra for one grid. Immutable after construction; safe to share.
class Transforms {
public:
	explicit Transforms(const Grid &g);
	~Transforms();
	Transforms(const Transforms &) = delete;
	Transforms &operator=(const Transforms &) = delete;

	const Grid &grid() const { return grid_; }
	CGrid cauchy(const CGrid &f) const;
	CGrid beurling(const CGrid &f) const;
	void apply(const CGrid &f, CGrid *cauchy, CGrid *beurling) const;

	// cached instance per (n, half_width, support)
	static std::shared_ptr<const Transforms> get(const Grid &g);

private:
	CGrid convolve(const CGrid &f) const;
	CGrid corrected(const CGrid &f) const;
	struct Impl;
	Grid grid_;
	std::unique_ptr<Impl> impl_;
};

// eighth-order central differences; zero on the four outermost node rings
CGrid d_z(const Grid &g, const CGrid &f);
CGrid d_zbar(const Grid &g, const CGrid &f);

CGrid cauchy_transform(const Grid &g, const CGrid &f);
CGrid beurling_transform(const Grid &g, const CGrid &f);

// f^{mu nu}: symmetric perturbation of the inverse metric, compactly supported
struct Perturbation {
	Grid grid;
	RGrid fxx, fxy, fyy;
	static Perturbation zero(const Grid &g);
	// f^{zz} = f (real), f^{z zbar} = 0
	static Perturbation traceless(const Grid &g, const RGrid &f);
};

struct BeltramiCoefficient {
	Grid grid;
	ConformalMetric hat;
	CGrid mu;
	double sup_norm = 0;
	RGrid sigma;        // sigma of the hat metric at the nodes
	RGrid half_log_det; // (1/2) ln det(delta + zeta)
	RGrid gxx, gxy, gyy; // perturbed metric
};

// g^{-1} = hat^{-1} + eps f, mu = gamma_{zbar zbar}/(1/2 + gamma_{z zbar}) with gamma = g / sqrt(det g)
BeltramiCoefficient coefficient_from_metric(const ConformalMetric &hat, const Perturbation &f, double eps);

struct SolveOptions {
	double tol = 1e-10;
	int max_terms = 60;
	int keep_terms = 4; // u_n grids retained; norms are kept for every term
};

struct DiffeoSolution {
	Grid grid;
	CGrid u, du, dbar_u; // psi = z + u; du = d_z u, dbar_u = d_zbar u at the nodes
	RGrid phi;
	std::vector<CGrid> series_terms;
	std::vector<double> term_norms; // sup |C v_n|
	std::vector<double> v_norms;    // L^2 norm of v_n
	int terms_used = 0;
	double sup_norm = 0;
	double residual = 0;            // sup |dbar psi - mu d psi|
	double reconstruction_error = 0; // max relative Frobenius error of e^{phi + sigma o psi} Dpsi^T Dpsi
	double min_jacobian = 0;
	double decay_constant = 0;      // max over the outer ring of |u| (1 + |z|)
};

DiffeoSolution solve(const BeltramiCoefficient &mu, const SolveOptions &opt = {});

// e^{phi + sigma o psi} Dpsi^T Dpsi at node k, as (xx, xy, yy)
std::array<double, 3> reconstructed_metric(const BeltramiCoefficient &mu, const DiffeoSolution &s, size_t k);

struct FirstOrder {
	CGrid u1;   // -(1/4) C(e^sigma f)
	CGrid du1;  // -(1/4) B(e^sigma f)
	CGrid phi1; // -u1 d sigma - d u1; the real Weyl direction of a real symmetric f is 2 Re phi1
};

FirstOrder first_order_data(const ConformalMetric &hat, const Grid &g, const RGrid &f);

} // namespace lcft::beltrami
