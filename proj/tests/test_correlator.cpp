#include "lcft/correlator.hpp"
#include "lcft/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace lcft;
using namespace lcft::corr;
using geo::cplx;

namespace {

CorrelatorConfig three_point(double gamma = 0.8, double alpha = 2.0, long samples = 2000)
{
	CorrelatorConfig c;
	c.gamma = gamma;
	c.insertions = {{{0.3, 0.1}, alpha}, {{-0.5, 0.4}, alpha}, {{0.2, -0.7}, alpha}};
	c.samples = samples;
	return c;
}

// rotation of the round sphere as a Moebius map
cplx rotate(cplx z, cplx a, cplx b) { return (a * z + b) / (-std::conj(b) * z + std::conj(a)); }

// int prod |p - p_i|^{-a_i} dA over the unit sphere in spherical angles
double chordal_power_integral(const std::vector<cplx> &xs, const std::vector<double> &a)
{
	std::vector<std::array<double, 3>> p;
	std::vector<double> th, ph;
	for (auto x : xs) {
		p.push_back(geo::to_sphere(0, x));
		th.push_back(std::acos(std::clamp(p.back()[2], -1.0, 1.0)));
		ph.push_back(std::atan2(p.back()[1], p.back()[0]));
	}
	std::vector<double> tcut{0, M_PI}, pcut{-M_PI, M_PI};
	tcut.insert(tcut.end(), th.begin(), th.end());
	pcut.insert(pcut.end(), ph.begin(), ph.end());
	std::sort(tcut.begin(), tcut.end());
	std::sort(pcut.begin(), pcut.end());
	boost::math::quadrature::tanh_sinh<double> ts(12);
	auto inner = [&](double phi) {
		double s = 0;
		for (size_t k = 0; k + 1 < tcut.size(); ++k) {
			if (tcut[k + 1] - tcut[k] < 1e-14)
				continue;
			s += ts.integrate(
			    [&](double t) {
				    const double q[3] = {std::sin(t) * std::cos(phi), std::sin(t) * std::sin(phi), std::cos(t)};
				    double f = std::sin(t);
				    for (size_t i = 0; i < p.size(); ++i) {
					    const double d = std::hypot(q[0] - p[i][0], q[1] - p[i][1], q[2] - p[i][2]);
					    f *= std::pow(d, -a[i]);
				    }
				    return f;
			    },
			    tcut[k], tcut[k + 1], 1e-12);
		}
		return s;
	};
	double total = 0;
	for (size_t k = 0; k + 1 < pcut.size(); ++k)
		if (pcut[k + 1] - pcut[k] > 1e-14)
			total += ts.integrate(inner, pcut[k], pcut[k + 1], 1e-11);
	return total;
}

} // namespace

TEST_CASE("Seiberg bounds, s, weights")
{
	CorrelatorConfig c;
	c.gamma = 1;
	c.insertions = {{0, 2}, {1, 2}, {{0, 1}, 2}};
	CHECK(c.Q() == 2.5);
	CHECK(c.c() == 1 + 6 * 6.25);
	auto r = seiberg_check(c);
	CHECK(r.ok());
	CHECK(r.slack_first == doctest::Approx(1.0).epsilon(1e-15));
	CHECK(r.slack_second == doctest::Approx(0.5).epsilon(1e-15));
	CHECK(c.s() == doctest::Approx(1.0).epsilon(1e-15));
	CHECK(conformal_weight(2, c.Q()) == 1.5);

	c.insertions.pop_back();
	r = seiberg_check(c);
	CHECK(r.violated == SeibergReport::First);
	CHECK(r.amount == doctest::Approx(1.0).epsilon(1e-15));
	CHECK(r.describe().find("first") != std::string::npos);

	c.insertions = {{0, 2}, {1, 2}, {{0, 1}, 2.5}};
	r = seiberg_check(c);
	CHECK(r.violated == SeibergReport::Second);
	CHECK(r.insertion == 2);
	CHECK(r.amount == 0);

	c.samples = 10;
	c.insertions = {{0, 2}, {1, 2}};
	try {
		moment_estimate(c, 1);
		FAIL("no throw");
	} catch (const Error &e) {
		CHECK(e.kind() == "SeibergViolation");
		CHECK(e.error_class() == ErrorClass::Validation);
	}
}

TEST_CASE("Gauss-Jacobi rules")
{
	std::vector<double> x, w;
	gauss_jacobi(20, 0, 0, x, w);
	boost::math::quadrature::gauss<double, 20> gl;
	for (int k = 0; k < 20; ++k) {
		// boost stores the non-negative half
		const double xk = std::abs(x[k]);
		double best = 1;
		for (size_t j = 0; j < gl.abscissa().size(); ++j)
			best = std::min(best, std::abs(gl.abscissa()[j] - xk));
		CHECK(best < 1e-14);
	}
	// int (1-x)^a (1+x)^{b+k} over [-1, 1] = 2^{a+b+k+1} B(b+k+1, a+1)
	for (auto [a, b] : {std::pair{0.0, -0.6}, {0.0, 0.4}, {0.3, -0.9}, {0.0, -0.2}}) {
		gauss_jacobi(16, a, b, x, w);
		for (int k = 0; k < 32; ++k) {
			const double exact = std::pow(2.0, a + b + k + 1) * boost::math::beta(b + k + 1, a + 1);
			double q = 0;
			for (int i = 0; i < 16; ++i)
				q += w[size_t(i)] * std::pow(1 + x[size_t(i)], k);
			CHECK(std::abs(q - exact) < 1e-12 * exact);
		}
	}
}

TEST_CASE("zero-field mass against a spherical-angle oracle")
{
	auto cfg = three_point();
	std::vector<cplx> pts;
	std::vector<double> a;
	for (auto &v : cfg.insertions) {
		pts.push_back(v.x);
		a.push_back(cfg.gamma * v.alpha);
	}
	MomentSampler S(cfg, {{cfg.metric, pts}});
	const double g = cfg.gamma;
	auto basis = field::SpectralBasis::build(cfg.metric, cfg.num.n_max);
	const double V = field::truncated_variance(basis, {0.2, 0.3});
	const double lnc = g * g / 4 * std::log(4.0) - g * g / 4 - g * g / 2 * V + g * (std::log(2.0) - 0.5) * 6.0;
	const double oracle = std::exp(lnc) * chordal_power_integral(pts, a);
	// the oracle itself moves by ~2e-7 under rotations of the points
	CHECK(std::abs(S.zero_field_mass(0) / oracle - 1) < 3e-6);

	// one insertion far out, in the other chart
	cfg.insertions[2].x = {2.5, -1.5};
	pts[2] = cfg.insertions[2].x;
	MomentSampler S2(cfg, {{cfg.metric, pts}});
	const double oracle2 = std::exp(lnc) * chordal_power_integral(pts, a);
	CHECK(std::abs(S2.zero_field_mass(0) / oracle2 - 1) < 3e-6);
}

TEST_CASE("zero-field mass does not depend on the patch radius")
{
	auto cfg = three_point();
	cfg.num.n_max = 24;
	cfg.num.n_r = 192;
	cfg.num.n_theta = 256;
	cfg.num.patch_radial = 64;
	cfg.num.patch_angular = 96;
	std::vector<cplx> pts;
	for (auto &v : cfg.insertions)
		pts.push_back(v.x);
	std::vector<double> m;
	for (double r : {0.5, 0.3, 0.15}) {
		cfg.num.patch_radius = r;
		m.push_back(MomentSampler(cfg, {{cfg.metric, pts}}).zero_field_mass(0));
	}
	CHECK(std::abs(m[1] / m[0] - 1) < 1e-8);
	CHECK(std::abs(m[2] / m[0] - 1) < 1e-7); // narrowest transition
}

TEST_CASE("permutation, threads and mu scaling")
{
	auto cfg = three_point(0.8, 2.0, 512);
	const auto e1 = moment_estimate(cfg, 7);
	auto perm = cfg;
	std::swap(perm.insertions[0], perm.insertions[2]);
	std::swap(perm.insertions[1], perm.insertions[2]);
	const auto e2 = moment_estimate(perm, 7);
	CHECK(e1.value == e2.value);
	CHECK(e1.std_error == e2.std_error);

	auto thr = cfg;
	thr.num.threads = 3;
	const auto e3 = moment_estimate(thr, 7);
	CHECK(e1.value == e3.value);
	CHECK(e1.per_sample == e3.per_sample);

	auto m2 = cfg;
	m2.mu = 2.7;
	const auto e4 = moment_estimate(m2, 7);
	const double predicted = std::pow(2.7, -cfg.s()) * e1.value;
	CHECK(std::abs(e4.value - predicted) < 3 * e4.std_error);
	CHECK(std::abs(e4.value / predicted - 1) < 1e-12);

	auto z = cfg;
	z.z_mode = ZMode::OpaqueConstant;
	z.z_value = 3.5;
	CHECK(moment_estimate(z, 7).value == doctest::Approx(3.5 * e1.value).epsilon(1e-13));

	auto tight = cfg;
	tight.num.max_rel_error = 1e-6;
	try {
		moment_estimate(tight, 7);
		FAIL("no throw");
	} catch (const Error &e) {
		CHECK(e.kind() == "MCDegenerate");
		CHECK(e.error_class() == ErrorClass::Numerical);
	}
	auto stiff = cfg;
	stiff.gamma = 1;
	CHECK_THROWS_AS(moment_estimate(stiff, 1), Error);
}

TEST_CASE("rotation invariance on the round sphere")
{
	auto cfg = three_point(0.8, 2.0, 2000);
	const auto e1 = moment_estimate(cfg, 11);
	const cplx a = std::polar(std::cos(0.6), 0.3), b = std::polar(std::sin(0.6), -1.1);
	std::vector<cplx> rot;
	for (auto &v : cfg.insertions)
		rot.push_back(rotate(v.x, a, b));
	const auto e2 = moment_estimate_at(cfg, rot, 12);
	const double se = std::hypot(e1.std_error, e2.std_error);
	MESSAGE(e1.value, " ", e2.value, " ", se);
	CHECK(std::abs(e1.value - e2.value) < 3 * se);
}

TEST_CASE("weak chaos: variance falls like 1/n")
{
	CorrelatorConfig cfg;
	cfg.gamma = 0.5;
	cfg.insertions = {{{0.3, 0.1}, 3.0}, {{-0.5, 0.4}, 3.0}, {{0.2, -0.7}, 3.0}};
	cfg.num.n_max = 120;
	cfg.samples = 1000;
	const double v1 = std::pow(moment_estimate(cfg, 3).std_error, 2);
	cfg.samples = 4000;
	const double v2 = std::pow(moment_estimate(cfg, 4).std_error, 2);
	const double ratio = v1 / v2;
	MESSAGE("variance ratio ", ratio);
	CHECK(ratio > 2);
	CHECK(ratio < 8);
}

TEST_CASE("monotone growth toward the second bound")
{
	// gamma alpha_1 must stay below 2, so the ladder climbs toward Q as far as the patches allow
	CorrelatorConfig cfg;
	cfg.gamma = 0.5;
	cfg.insertions = {{{0.3, 0.1}, 3.0}, {{-0.5, 0.4}, 3.0}, {{0.2, -0.7}, 3.0}};
	cfg.num.n_max = 120;
	cfg.samples = 2000;
	double prev = 0, prev_err = 0;
	for (double a1 : {3.0, 3.3, 3.6, 3.9}) {
		cfg.insertions[0].alpha = a1;
		const auto e = moment_estimate(cfg, 21);
		MESSAGE("alpha_1 ", a1, " Q - alpha_1 ", cfg.Q() - a1, " estimate ", e.value, " +- ", e.std_error);
		if (prev > 0)
			CHECK(e.value - prev > -3 * std::hypot(e.std_error, prev_err));
		prev = e.value;
		prev_err = e.std_error;
	}
}

TEST_CASE("Weyl covariance")
{
	auto cfg = three_point(0.8, 2.0, 2000);
	const auto w0 = weyl_covariance_check(cfg, geo::WeylDirection::zero(), 5);
	CHECK(w0.sigma_distance == 0);
	CHECK(w0.lhs == w0.rhs);

	const auto w = weyl_covariance_check(cfg, geo::WeylDirection::bump(0.3, {0.1, 0.2}, 0.5), 5);
	MESSAGE(w.lhs, " ", w.rhs, " ", w.difference_error, " ", w.sigma_distance, " A=", w.anomaly);
	CHECK(w.sigma_distance < 3);
	CHECK(w.difference_error < 0.2 * w.lhs_error);
}
