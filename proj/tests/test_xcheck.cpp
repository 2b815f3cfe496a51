#include <doctest.h>

#include "lcft/errors.hpp"
#include "lcft/xcheck.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace lcft;
using beltrami::Grid;
using geo::cplx;

namespace {

corr::CorrelatorConfig three_point(long samples, int n_max)
{
	corr::CorrelatorConfig c;
	c.gamma = 0.8;
	c.samples = samples;
	c.metric = geo::ConformalMetric::round();
	c.insertions = {{{0.3, 0.1}, 2.0}, {{-0.5, 0.4}, 2.0}, {{0.2, -0.7}, 2.0}};
	c.num.n_max = n_max;
	return c;
}

xcheck::XCheckConfig bump_config(double fxx, double fxy, double fyy, long samples = 16)
{
	xcheck::XCheckConfig cfg;
	cfg.corr = three_point(samples, 80);
	cfg.grid = {256, 4, 2};
	const auto b = xcheck::compact_bump(cfg.grid, 4, {0.9, 0.5}, 0.35);
	cfg.f = beltrami::Perturbation::zero(cfg.grid);
	for (size_t k = 0; k < b.size(); ++k) {
		cfg.f.fxx[k] = fxx * b[k];
		cfg.f.fxy[k] = fxy * b[k];
		cfg.f.fyy[k] = fyy * b[k];
	}
	return cfg;
}

} // namespace

TEST_CASE("compact bump")
{
	const Grid g{64, 4, 2};
	const auto b = xcheck::compact_bump(g, 3, {0.5, 0}, 1.0);
	double mx = 0;
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const double v = b[size_t(j) * g.n + i], r = std::abs(g.node(i, j) - cplx(0.5, 0));
			mx = std::max(mx, v);
			if (r >= 1)
				CHECK(v == 0);
			else
				CHECK(v == doctest::Approx(3 * std::exp(1 - 1 / (1 - r * r))));
		}
	CHECK(mx <= 3);
}

TEST_CASE("anomaly of a compact conformal factor with trivial diffeomorphism")
{
	// psi = id, phi = a exp(-|z|^2/w^2) against the round metric (R = 2, e^sigma = 4/(1+r^2)^2):
	// Dirichlet part int |grad phi|^2 = pi a^2, curvature part 2 int phi e^sigma
	const Grid g{256, 4, 2};
	const double a = 0.7, w = 0.4;
	beltrami::BeltramiCoefficient mu;
	mu.grid = g;
	mu.hat = geo::ConformalMetric::round();
	mu.mu.assign(g.size(), 0);
	beltrami::DiffeoSolution s;
	s.grid = g;
	s.u.assign(g.size(), 0);
	s.du.assign(g.size(), 0);
	s.dbar_u.assign(g.size(), 0);
	s.phi.resize(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i)
			s.phi[size_t(j) * g.n + i] = a * std::exp(-std::norm(g.node(i, j)) / (w * w));
	const double curv = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
	    [&](double r) { return 2 * a * std::exp(-r * r / (w * w)) * 4 / std::pow(1 + r * r, 2) * 2 * M_PI * r; }, 0,
	    12 * w, 10, 1e-14);
	const double want = M_PI * a * a / (96 * M_PI) + curv / (48 * M_PI);
	CHECK(xcheck::pulled_back_anomaly(mu, s) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("exterior jet matches the solved field away from the support")
{
	const auto cfg = bump_config(0.5, 0.3, -0.2);
	const auto mu = beltrami::coefficient_from_metric(cfg.corr.metric, cfg.f, 0.2);
	const auto sol = beltrami::solve(mu);
	const Grid &g = cfg.grid;
	double err_u = 0, err_du = 0, scale = 0;
	for (int j = 8; j < g.n - 8; j += 9)
		for (int i = 8; i < g.n - 8; i += 9) {
			const cplx z = g.node(i, j);
			if (std::abs(z - cplx(0.9, 0.5)) < 0.8)
				continue;
			const size_t k = size_t(j) * g.n + i;
			const auto jet = xcheck::exterior_jet(mu, sol, z);
			err_u = std::max(err_u, std::abs(jet.u - sol.u[k]));
			err_du = std::max(err_du, std::abs(jet.du - sol.du[k]));
			scale = std::max(scale, std::abs(sol.u[k]));
		}
	CHECK(scale > 1e-3);
	CHECK(err_u < 1e-6 * std::max(1.0, scale) + 1e-9);
	CHECK(err_du < 1e-5);
}

TEST_CASE("metric symbol values on the round sphere")
{
	const auto m = geo::ConformalMetric::round();
	std::map<sym::VarId, cplx> values{{sym::zv(0), {0.3, -0.4}}};
	const auto val = xcheck::metric_symbols(m, 51.46, {0.75}, values);
	const cplx z{0.3, -0.4};
	const double q = 1 + std::norm(z);
	CHECK(val(sym::gen_key(sym::Gen::C, 0, 0)).real() == 51.46);
	CHECK(val(sym::gen_key(sym::Gen::Delta, 0, 0)).real() == 0.75);
	const cplx d1 = val(sym::gen_key(sym::Gen::Sigma, 1, uint8_t(sym::zv(0))));
	CHECK(std::abs(d1 - (-2.0 * std::conj(z) / q)) < 1e-12);
	const cplx d2 = val(sym::gen_key(sym::Gen::Sigma, 2, uint8_t(sym::zv(0))));
	CHECK(std::abs(d2 - 2.0 * std::conj(z) * std::conj(z) / (q * q)) < 1e-12);
	// t = d^2 sigma - (d sigma)^2 / 2 vanishes for the round metric
	CHECK(std::abs(val(sym::gen_key(sym::Gen::T, 0, uint8_t(sym::zv(0))))) < 1e-12);
	CHECK(val(sym::gen_key(sym::Gen::R, 0, uint8_t(sym::zv(0)))).real() == doctest::Approx(2));
	// the point is read at call time
	values[sym::zv(0)] = 0;
	CHECK(std::abs(val(sym::gen_key(sym::Gen::Sigma, 1, uint8_t(sym::zv(0))))) < 1e-15);
	CHECK_THROWS_AS(val(sym::gen_key(sym::Gen::Sigma, 1, uint8_t(sym::zv(1)))), Error);
	CHECK_THROWS_AS(val(sym::gen_key(sym::Gen::R, 1, uint8_t(sym::zv(0)))), Error);
}

TEST_CASE("deterministic parts agree for traceless, trace and mixed perturbations")
{
	for (auto [fxx, fxy, fyy] : {std::tuple{0.5, 0.0, -0.5}, std::tuple{1.0, 0.0, 1.0}, std::tuple{0.5, 0.3, -0.2}}) {
		CAPTURE(fxx);
		CAPTURE(fxy);
		CAPTURE(fyy);
		const auto r = xcheck::run(bump_config(fxx, fxy, fyy), 5);
		CHECK(std::abs(r.fd_log_derivative - r.ward_log_derivative) < 1e-5);
		CHECK(std::abs(r.ward_log_derivative) > 1e-3);
		CHECK(r.shift.size() == 3);
		if (fxx == fyy) {
			// pure trace: no point motion
			for (auto s : r.shift)
				CHECK(std::abs(s) < 1e-12);
		} else if (fxx + fyy == 0) {
			CHECK(std::abs(r.ward_trace) < 1e-12);
		}
		CHECK(r.samples == 16);
		CHECK(std::isfinite(r.sigma_distance));
	}
}

TEST_CASE("zero perturbation gives zero derivative on both sides")
{
	auto cfg = bump_config(0, 0, 0);
	const auto r = xcheck::run(cfg, 3);
	CHECK(r.ward == 0);
	CHECK(r.fd == 0);
	CHECK(r.sigma_distance == 0);
}

TEST_CASE("same seed reproduces the report")
{
	const auto cfg = bump_config(0.5, 0.3, -0.2);
	const auto a = xcheck::run(cfg, 9), b = xcheck::run(cfg, 9);
	CHECK(a.fd == b.fd);
	CHECK(a.ward == b.ward);
	CHECK(a.sigma_distance == b.sigma_distance);
}

TEST_CASE("validation")
{
	auto cfg = bump_config(0.5, 0, -0.5);
	cfg.eps = 0;
	CHECK_THROWS_AS(xcheck::run(cfg, 1), Error);

	cfg = bump_config(0.5, 0, -0.5);
	cfg.corr.insertions[0].x = {0.9, 0.5};
	try {
		xcheck::run(cfg, 1);
		FAIL("expected an error");
	} catch (const Error &e) {
		CHECK(e.kind() == "PerturbationAtInsertion");
		CHECK(e.error_class() == ErrorClass::Validation);
	}

	cfg = bump_config(0.5, 0, -0.5);
	cfg.corr.insertions[0].alpha = 0.5;
	CHECK_THROWS_AS(xcheck::run(cfg, 1), Error);

	cfg = bump_config(0.5, 0, -0.5);
	cfg.f.grid.n = 128;
	CHECK_THROWS_AS(xcheck::run(cfg, 1), Error);
}
