#include <doctest.h>

#include "fixtures.hpp"
#include "lcft/beltrami.hpp"
#include "lcft/errors.hpp"
#include "lcft/quadrature.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>

using namespace lcft::beltrami;
using fixtures::sample;
using fixtures::smooth_bump;

namespace {

const Grid small{256, 4.0, 2.0};

CGrid complexify(const RGrid &f) { return CGrid(f.begin(), f.end()); }

double sup_diff(const CGrid &a, const CGrid &b)
{
	double m = 0;
	for (size_t k = 0; k < a.size(); ++k)
		m = std::max(m, std::abs(a[k] - b[k]));
	return m;
}

// (1/pi) int_{|w| < r} 1/(z - w) d^2w in polar coordinates about z: -(1/pi) int e^{-i t} (R2 - R1) dt
// where [R1, R2] is the chord of the ray z + R e^{it} inside the disc
cplx disc_cauchy_oracle(cplx z, double r)
{
	const double a = std::abs(z);
	auto chord = [&](double t) {
		const double b = -(std::conj(z) * std::polar(1.0, t)).real(), disc = b * b - a * a + r * r;
		if (disc <= 0)
			return 0.0;
		const double s = std::sqrt(disc);
		return a < r ? b + s : 2 * s;
	};
	if (a < r) {
		const int n = 4096;
		cplx s = 0;
		for (int j = 0; j < n; ++j) {
			const double t = 2 * M_PI * j / n;
			s += std::polar(1.0, -t) * chord(t);
		}
		return -s * (2 * M_PI / n) / M_PI;
	}
	boost::math::quadrature::tanh_sinh<double> ts;
	const double t0 = std::arg(-z), al = std::asin(r / a);
	const double re = ts.integrate([&](double t) { return std::cos(t) * chord(t); }, t0 - al, t0 + al);
	const double im = ts.integrate([&](double t) { return -std::sin(t) * chord(t); }, t0 - al, t0 + al);
	return -cplx(re, im) / M_PI;
}

// fraction of the cell around z inside the disc |w| < r, by sub-sampling
double coverage(cplx z, double h, double r, int sub = 32)
{
	const double d = std::abs(z);
	if (d + h < r)
		return 1;
	if (d - h > r)
		return 0;
	int in = 0;
	for (int a = 0; a < sub; ++a)
		for (int b = 0; b < sub; ++b)
			in += std::norm(z + cplx((a + 0.5) / sub - 0.5, (b + 0.5) / sub - 0.5) * h) < r * r;
	return double(in) / (sub * sub);
}

} // namespace

TEST_CASE("Cauchy transform of a Gaussian")
{
	// C e^{-|w-c|^2/s^2} = s^2 (1 - e^{-|z-c|^2/s^2}) / (z - c)
	const cplx c0{0.2, -0.1};
	const double s2 = 0.09;
	std::vector<double> errs;
	for (int n : {129, 257, 513}) {
		const Grid g{n, 4.0, 2.0};
		CGrid f(g.size()), ex(g.size());
		for (int j = 0; j < n; ++j)
			for (int i = 0; i < n; ++i) {
				const cplx z = g.node(i, j), w = z - c0;
				f[size_t(j) * n + i] = std::abs(w) < 1.7 ? std::exp(-std::norm(w) / s2) : 0.0;
				ex[size_t(j) * n + i] = std::abs(w) == 0 ? 0.0 : s2 * (1 - std::exp(-std::norm(w) / s2)) / w;
			}
		errs.push_back(sup_diff(cauchy_transform(g, f), ex));
	}
	CHECK(errs[0] < 1e-6);
	CHECK(errs[1] < errs[0] / 64);
	CHECK(errs[2] < 1e-12);
}

TEST_CASE("Cauchy transform: trivial cases and support")
{
	CGrid z(small.size(), 0.0);
	for (auto &x : cauchy_transform(small, z))
		CHECK(x == cplx(0, 0));
	auto f = complexify(sample(small, [](cplx w) { return smooth_bump(w, 0.3, 1.0); }));
	auto c1 = cauchy_transform(small, f);
	for (auto &x : f)
		x *= 2;
	auto c2 = cauchy_transform(small, f);
	bool exact = true;
	for (size_t k = 0; k < c1.size(); ++k)
		exact = exact && c2[k] == 2.0 * c1[k];
	CHECK(exact);
	auto big = complexify(sample(small, [](cplx w) { return smooth_bump(w, 1.8, 1.0); }));
	CHECK_THROWS_AS(cauchy_transform(small, big), lcft::Error);
	CHECK_THROWS_AS(beurling_transform(small, big), lcft::Error);
}

TEST_CASE("Cauchy and Beurling transforms of a disc")
{
	const Grid g{512, 4.0, 2.0};
	const double r = 1.0, h = g.h();
	CGrid f(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i)
			f[size_t(j) * g.n + i] = coverage(g.node(i, j), h, r);
	CGrid c, b;
	Transforms::get(g)->apply(f, &c, &b);
	// nodes at least 0.13 away from the rim
	for (auto [i, j] : {std::pair{256, 256}, {300, 230}, {256, 200}, {400, 256}, {100, 100}, {511, 0}, {256, 380}}) {
		const cplx z = g.node(i, j);
		const cplx exact = std::abs(z) <= r ? std::conj(z) : r * r / z;
		const cplx oracle = disc_cauchy_oracle(z, r);
		CHECK(std::abs(oracle - exact) < 1e-10);
		CHECK(std::abs(c[size_t(j) * g.n + i] - exact) < 1e-5);
		const cplx bex = std::abs(z) <= r ? cplx(0) : -r * r / (z * z);
		CHECK(std::abs(b[size_t(j) * g.n + i] - bex) < 3e-4);
	}
}

TEST_CASE("Beurling transform of a derivative, isometry, d-bar inverse")
{
	// h = Gaussian, d_zbar h = -(z - c)/s^2 h, d_z h = -conj(z - c)/s^2 h
	const Grid g{512, 4.0, 2.0};
	const cplx c0{0.2, -0.1};
	const double s2 = 0.09;
	auto gauss = [&](cplx z) { return std::exp(-std::norm(z - c0) / s2) * (std::abs(z - c0) < 1.7); };
	CGrid dbh(g.size()), dh(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const cplx z = g.node(i, j);
			dbh[size_t(j) * g.n + i] = -(z - c0) / s2 * gauss(z);
			dh[size_t(j) * g.n + i] = -std::conj(z - c0) / s2 * gauss(z);
		}
	auto b = beurling_transform(g, dbh);
	double scale = 0;
	for (auto &x : dh)
		scale = std::max(scale, std::abs(x));
	CHECK(sup_diff(b, dh) < 1e-8 * scale);
	double n0 = 0, n1 = 0;
	for (size_t k = 0; k < b.size(); ++k) {
		n0 += std::norm(dbh[k]);
		n1 += std::norm(b[k]);
	}
	CHECK(std::abs(std::sqrt(n1 / n0) - 1) < 1e-4);

	// d_zbar C f = f with eighth-order differences of the grid values
	auto f = complexify(sample(g, [](cplx w) { return smooth_bump(w, {0.1, 0.2}, 1.3); }));
	const double err = sup_diff(d_zbar(g, cauchy_transform(g, f)), f);
	CHECK(err < 1e-5);
}

TEST_CASE("Beltrami coefficient from a perturbed metric")
{
	auto hat = ConformalMetric::round();
	auto zero = coefficient_from_metric(hat, Perturbation::zero(small), 0.3);
	CHECK(zero.sup_norm == 0.0);
	auto p = fixtures::generic_perturbation(small);
	// first order: d_eps mu = -(1/4) e^sigma f^{zz}, f^{zz} = fxx - fyy + 2i fxy
	const double e = 1e-4;
	auto mp = coefficient_from_metric(hat, p, e), mm = coefficient_from_metric(hat, p, -e);
	double err = 0, scale = 0;
	for (int j = 0; j < small.n; ++j)
		for (int i = 0; i < small.n; ++i) {
			const size_t k = size_t(j) * small.n + i;
			const cplx fzz(p.fxx[k] - p.fyy[k], 2 * p.fxy[k]);
			const cplx pred = -0.25 * std::exp(hat.sigma(small.node(i, j))) * fzz;
			err = std::max(err, std::abs((mp.mu[k] - mm.mu[k]) / (2 * e) - pred));
			scale = std::max(scale, std::abs(pred));
		}
	CHECK(err < 1e-6 * scale);
	// pure trace: conformal, mu = 0 at every eps
	Perturbation tr = Perturbation::zero(small);
	tr.fxx = tr.fyy = sample(small, [](cplx z) { return smooth_bump(z, 0.0, 1.5); });
	for (double eps : {0.1, 0.5, 2.0})
		CHECK(coefficient_from_metric(hat, tr, eps).sup_norm < 1e-15);
	// exact Beltrami metric e^sigma |dz + nu dzbar|^2 has coefficient nu
	Perturbation ex = Perturbation::zero(small);
	const cplx nu{0.3, -0.4};
	for (int j = 0; j < small.n; ++j)
		for (int i = 0; i < small.n; ++i) {
			const size_t k = size_t(j) * small.n + i;
			const double b = smooth_bump(small.node(i, j), 0, 1.5);
			if (b == 0)
				continue;
			const cplx nb = nu * b;
			// g/e^sigma = |dz + nb dzbar|^2 as a real matrix, then its inverse minus the identity
			const double gxx = std::norm(1.0 + nb), gyy = std::norm(1.0 - nb), gxy = 2 * nb.imag();
			const double det = gxx * gyy - gxy * gxy, es = std::exp(-hat.sigma(small.node(i, j)));
			ex.fxx[k] = es * (gyy / det - 1);
			ex.fyy[k] = es * (gxx / det - 1);
			ex.fxy[k] = es * (-gxy / det);
		}
	auto mex = coefficient_from_metric(hat, ex, 1.0);
	double merr = 0;
	for (int j = 0; j < small.n; ++j)
		for (int i = 0; i < small.n; ++i)
			merr = std::max(merr, std::abs(mex.mu[size_t(j) * small.n + i] - nu * smooth_bump(small.node(i, j), 0, 1.5)));
	CHECK(merr < 1e-12);
	CHECK_THROWS_AS(coefficient_from_metric(hat, p, -1e3), lcft::Error);
}

TEST_CASE("Neumann series solution")
{
	auto hat = ConformalMetric::round();
	auto s0 = solve(coefficient_from_metric(hat, Perturbation::zero(small), 1.0));
	double m = 0;
	for (size_t k = 0; k < small.size(); ++k)
		m = std::max({m, std::abs(s0.u[k]), std::abs(s0.phi[k])});
	CHECK(m < 1e-15);
	CHECK(s0.terms_used == 1);

	auto p = fixtures::generic_perturbation(small);
	for (double k : {0.1, 0.4, 0.7}) {
		CAPTURE(k);
		auto mu = coefficient_from_metric(hat, p, fixtures::calibrate(hat, p, k));
		CHECK(mu.sup_norm == doctest::Approx(k).epsilon(1e-9));
		auto s = solve(mu, {1e-10, 100, 4});
		CHECK(s.residual <= 1e-8);
		CHECK(s.reconstruction_error <= 1e-6);
		CHECK(s.min_jacobian > 0);
		double worst = 0;
		for (size_t n = 1; n < s.term_norms.size(); ++n)
			worst = std::max(worst, s.term_norms[n] / s.term_norms[n - 1]);
		CHECK(worst <= k * 1.05);
		// independent reconstruction from the derivatives
		double rec = 0;
		for (size_t q = 0; q < small.size(); q += 97) {
			const cplx a = 1.0 + s.du[q], b = s.dbar_u[q];
			const cplx px = a + b, py = cplx(0, 1) * (a - b);
			const cplx z = small.node(int(q % small.n), int(q / small.n));
			const double w = std::exp(s.phi[q] + hat.sigma(z + s.u[q]));
			const double gxx = w * std::norm(px), gyy = w * std::norm(py),
			             gxy = w * (px.real() * py.real() + px.imag() * py.imag());
			const double nrm = std::hypot(mu.gxx[q], mu.gyy[q], std::sqrt(2) * mu.gxy[q]);
			rec = std::max(rec, std::hypot(gxx - mu.gxx[q], gyy - mu.gyy[q], std::sqrt(2) * (gxy - mu.gxy[q])) / nrm);
		}
		CHECK(rec <= 1e-6);
		// derivatives of the grid u agree with the transform identities to differencing accuracy
		const double h = small.h();
		double fd = 0;
		for (int j = 40; j < small.n - 40; j += 7)
			for (int i = 40; i < small.n - 40; i += 7) {
				auto at = [&](int a, int bb) { return s.u[size_t(bb) * small.n + a]; };
				const cplx ux = (at(i + 1, j) - at(i - 1, j)) / (2 * h), uy = (at(i, j + 1) - at(i, j - 1)) / (2 * h);
				fd = std::max(fd, std::abs(0.5 * (ux - cplx(0, 1) * uy) - s.du[size_t(j) * small.n + i]));
			}
		CHECK(fd < 1e-2);
	}
	CHECK_THROWS_AS(solve(coefficient_from_metric(hat, p, fixtures::calibrate(hat, p, 0.7)), {1e-10, 5, 1}),
	                lcft::Error);
}

TEST_CASE("decay of u is stable under grid enlargement")
{
	auto hat = ConformalMetric::round();
	const Grid a{257, 4.0, 2.0}, b{385, 6.0, 2.0}; // same spacing
	CHECK(a.h() == doctest::Approx(b.h()).epsilon(1e-12));
	auto pa = fixtures::generic_perturbation(a), pb = fixtures::generic_perturbation(b);
	const double eps = fixtures::calibrate(hat, pa, 0.4);
	auto sa = solve(coefficient_from_metric(hat, pa, eps)), sb = solve(coefficient_from_metric(hat, pb, eps));
	CHECK(sa.decay_constant == doctest::Approx(sb.decay_constant).epsilon(0.05));
}

TEST_CASE("first-order data")
{
	auto hat = ConformalMetric::round();
	auto f0 = first_order_data(hat, small, RGrid(small.size(), 0.0));
	double m = 0;
	for (size_t k = 0; k < small.size(); ++k)
		m = std::max({m, std::abs(f0.u1[k]), std::abs(f0.phi1[k])});
	CHECK(m == 0.0);
	auto f = sample(small, [](cplx z) { return smooth_bump(z, {0.2, -0.1}, 1.4); });
	auto flat = first_order_data(ConformalMetric::flat(), small, f);
	bool exact = true;
	for (size_t k = 0; k < small.size(); ++k)
		exact = exact && flat.phi1[k] == -flat.du1[k];
	CHECK(exact);

	// central differences of solve in eps converge to the first-order data at order 2
	auto fo = first_order_data(hat, small, f);
	auto p = Perturbation::traceless(small, f);
	auto errs = [&](double e) {
		auto sp = solve(coefficient_from_metric(hat, p, e), {1e-13, 80, 0});
		auto sm = solve(coefficient_from_metric(hat, p, -e), {1e-13, 80, 0});
		double eu = 0, ep = 0;
		for (size_t k = 0; k < small.size(); ++k) {
			eu = std::max(eu, std::abs((sp.u[k] - sm.u[k]) / (2 * e) - fo.u1[k]));
			ep = std::max(ep, std::abs((sp.phi[k] - sm.phi[k]) / (2 * e) - 2 * fo.phi1[k].real()));
		}
		return std::pair{eu, ep};
	};
	auto e1 = errs(0.2), e2 = errs(0.1), e3 = errs(0.05);
	CHECK(e1.first / e2.first == doctest::Approx(4).epsilon(0.3 / 4));
	CHECK(e2.first / e3.first == doctest::Approx(4).epsilon(0.3 / 4));
	CHECK(e1.second / e2.second == doctest::Approx(4).epsilon(0.3 / 4));
	CHECK(e2.second / e3.second == doctest::Approx(4).epsilon(0.3 / 4));
}
