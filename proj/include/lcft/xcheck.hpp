#pragma once
// Metric derivative of a vertex correlation two ways: finite differences through the
// Beltrami solution, and the Ward identity integrated against the perturbation.
#include "lcft/beltrami.hpp"
#include "lcft/correlator.hpp"
#include "lcft/symbolic.hpp"

#include <cstdint>

namespace lcft::xcheck {

using geo::cplx;

struct XCheckConfig {
	corr::CorrelatorConfig corr;
	beltrami::Grid grid{512, 4, 2};
	beltrami::Perturbation f; // on grid; must vanish near every insertion
	double eps = 0.005;       // finite-difference step in the metric and in the points
	beltrami::SolveOptions solve;
};

struct XCheckReport {
	double fd = 0, fd_error = 0;     // d/d eps of e^{cA} prod e^{-Delta phi(x_i)} <prod V(psi(x_i))>
	double ward = 0, ward_error = 0; // (1/4 pi) int <T_{mu nu} prod V> f^{mu nu} dv
	double sigma_distance = 0;
	double correlator = 0, correlator_error = 0;
	// deterministic parts, per unit correlator
	double fd_log_derivative = 0;   // d/d eps [cA - sum Delta phi(x_i)], fourth-order stencil
	double ward_log_derivative = 0; // coefficient of <prod V> in the Ward side
	double ward_trace = 0;          // trace part of ward_log_derivative
	std::vector<cplx> shift;        // d psi(x_i)/d eps from the Ward side
	double sup_norm = 0;            // ||mu||_inf at eps
	int terms_used = 0;
	double residual = 0;
	long samples = 0;
};

// FD side: L'(0) <prod V> plus a central difference of <prod V(psi_eps(x_i))>, stream seed.
// Ward side runs on an independent stream; sigma_distance uses sqrt(se_fd^2 + se_ward^2).
XCheckReport run(const XCheckConfig &cfg, uint64_t seed);

// A exp(1 - 1/(1 - |z-c|^2/r^2)) inside the disc, 0 outside
beltrami::RGrid compact_bump(const beltrami::Grid &g, double amplitude, cplx center, double radius);

// A(phi, psi^* hat) over the whole plane for a solved perturbation
double pulled_back_anomaly(const beltrami::BeltramiCoefficient &mu, const beltrami::DiffeoSolution &s);

// psi - id and its first two z-derivatives at a point outside the support of mu
struct HolomorphicJet {
	cplx u, du, d2u;
};
HolomorphicJet exterior_jet(const beltrami::BeltramiCoefficient &mu, const beltrami::DiffeoSolution &s, cplx z);

// Numeric values of c, Delta_j, t, d^k sigma and R for symbolic evaluation; points are read from
// `values` at call time, so the map may be updated between evaluations.
sym::SymbolValue metric_symbols(const geo::ConformalMetric &m, double c, const std::vector<double> &weights,
                                const std::map<sym::VarId, cplx> &values);

} // namespace lcft::xcheck
