#pragma once
// Contour pairings of T-insertions and the functional T-action.
#include "lcft/symbolic.hpp"

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace lcft::vir {

using sym::cplx;
using sym::Expr;
using sym::Rational;

// ---- functional descriptors ----

struct SupportBox {
	double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
	bool contains(cplx z) const { return z.real() >= xmin && z.real() <= xmax && z.imag() >= ymin && z.imag() <= ymax; }
	bool inside(const SupportBox &o) const;
	SupportBox hull(const SupportBox &o) const;
	double max_radius() const;
};

struct TestFunction {
	std::string label;
	SupportBox support;
	std::function<cplx(cplx)> value;
};

struct FunctionalDescriptor {
	TestFunction h0;
	std::vector<TestFunction> factors;
	bool exponent_constraint = false; // Re int h0 > 2Q
	SupportBox support() const;
};

struct ActionTerm {
	std::string kind; // "tau_h0", "rho_h0", "tau_hj", "rho_hj"
	int j = -1;
	cplx scalar = 1.0;            // rho value, or 1
	FunctionalDescriptor desc;   // descriptor multiplying the scalar
};

struct TActionResult {
	cplx z;
	std::vector<ActionTerm> terms;
	SupportBox support() const;
};

// (tau_z h)(x) = -d_x(h(x)/(z-x))
TestFunction tau(const TestFunction &h, cplx z);
// rho_z h = Q/2 int (d sigma/(z-x) + 1/(z-x)^2) h d^2x, tensor Gauss-Legendre on the support box
cplx rho(const TestFunction &h, cplx z, double Q, const std::function<cplx(cplx)> &dsigma, int nodes = 64);
TActionResult t_action(const FunctionalDescriptor &desc, cplx z, double Q,
                       const std::function<cplx(cplx)> &dsigma);

// ---- pairings ----

// Exponents of the nested T-actions on the functional, outermost contour first.
using ModeKey = std::vector<int>;

struct PairingValue {
	std::map<ModeKey, Expr> terms; // coefficients in Q[c]
	bool operator==(const PairingValue &o) const { return terms == o.terms; }
	PairingValue operator+(const PairingValue &o) const;
	PairingValue operator-(const PairingValue &o) const;
	PairingValue operator*(const Rational &q) const;
	bool is_zero() const { return terms.empty(); }
	std::string str() const;
};

// (F, L_{n_1} ... L_{n_k} G) with z_1 on the outermost contour.
PairingValue pairing(const std::vector<int> &modes);

struct PairingSetup {
	double support_radius = 0.5; // supports inside D_r
	std::vector<double> radii;   // contour radii, outermost first
	// t(z) on the annulus; the guard rejects any nonzero value
	std::function<cplx(cplx)> t_field;
};
PairingValue pairing(const PairingSetup &setup, const std::vector<int> &modes);

// numeric value of a formal pairing, given c and the opaque base values
cplx evaluate(const PairingValue &p, double c, const std::function<cplx(const ModeKey &)> &base);

// Direct trapezoid evaluation of the nested contour integrals of the Ward integrand.
// base(key, z-values) supplies the T-action base and its z-derivatives.
cplx pairing_numeric(const std::vector<int> &modes, const std::vector<double> &radii, double c, int points,
                     const std::function<cplx(const sym::BaseKey &, const std::map<sym::VarId, cplx> &)> &base);

// (F, L_n L_m G) - (F, L_m L_n G) as the residue at z_1 = z_2 integrated over the z_2 contour.
PairingValue contour_swap_difference(int n, int m);

struct CommutatorResult {
	int n = 0, m = 0;
	PairingValue lhs, rhs;
	bool equal = false;
	Rational central; // coefficient of c in front of the empty pairing
	std::string lhs_repr, rhs_repr;
};

CommutatorResult commutator_check(int n, int m);

} // namespace lcft::vir
