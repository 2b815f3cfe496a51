#include <doctest.h>

#include "lcft/errors.hpp"
#include "lcft/virasoro.hpp"

#include <cmath>

using namespace lcft::vir;
using lcft::sym::BaseKey;
using lcft::sym::index_of;
using lcft::sym::VarId;

namespace {

// toy T-action base: b(z) = sum w/(z-a), poles inside the support disc and outside the unit disc
struct ToyBase {
	std::vector<std::pair<cplx, cplx>> inner{{{0.2, 0.1}, {1.0, 0.5}}, {{-0.15, 0.0}, {-0.7, 0.0}}};
	std::vector<std::pair<cplx, cplx>> outer{{{1.8, 0.4}, {0.3, -0.2}}};

	cplx deriv(cplx z, int d) const
	{
		cplx s = 0;
		double f = std::tgamma(d + 1.0) * (d % 2 ? -1 : 1);
		for (auto *set : {&inner, &outer})
			for (auto &[a, w] : *set)
				s += w * f / std::pow(z - a, d + 1);
		return s;
	}
	cplx beta(int e) const
	{
		cplx s = 0;
		if (e >= 0)
			for (auto &[a, w] : inner)
				s += w * std::pow(a, e);
		else
			for (auto &[a, w] : outer)
				s -= w * std::pow(a, e);
		return s;
	}
	cplx base(const BaseKey &k, const std::map<VarId, cplx> &vals) const
	{
		cplx v = 1;
		for (int i = 0; i < 32; ++i)
			if ((k.tcal >> i) & 1u) {
				int d = 0;
				for (auto &[var, o] : k.deriv)
					if (index_of(var) == i)
						d = o;
				v *= deriv(vals.at(lcft::sym::zv(i)), d);
			}
		return v;
	}
	cplx opaque(const ModeKey &k) const
	{
		cplx v = 1;
		for (int e : k)
			v *= beta(e);
		return v;
	}
};

// bracket value as L_k coefficients plus identity
struct LComb {
	std::map<int, Expr> l;
	Expr id;
};

LComb as_lcomb(const PairingValue &p)
{
	LComb r;
	for (auto &[k, e] : p.terms) {
		if (k.empty())
			r.id += e;
		else {
			REQUIRE(k.size() == 1);
			r.l[k[0] - 1] += e;
		}
	}
	return r;
}

} // namespace

TEST_CASE("empty and single-mode pairings")
{
	auto e = pairing(std::vector<int>{});
	REQUIRE(e.terms.size() == 1);
	CHECK(e.terms.begin()->first.empty());
	CHECK(e.terms.begin()->second == Expr(1));
	for (int n = -3; n <= 3; ++n) {
		auto p = pairing({n});
		REQUIRE(p.terms.size() == 1);
		CHECK(p.terms.begin()->first == ModeKey{n + 1});
	}
}

TEST_CASE("Virasoro relation, exact")
{
	for (int n = -5; n <= 5; ++n)
		for (int m = -5; m <= 5; ++m) {
			auto r = commutator_check(n, m);
			CHECK_MESSAGE(r.equal, n << "," << m << ": " << r.lhs_repr << " vs " << r.rhs_repr);
		}
	CHECK(commutator_check(2, -2).central == Rational(1, 2));
	CHECK(commutator_check(3, -3).central == Rational(2));
	CHECK(commutator_check(1, -1).central == Rational(0));
	auto r = commutator_check(2, -2);
	CHECK(r.lhs.terms.at({1}) == Expr(4));
	CHECK(r.lhs.terms.at({}) == Expr::c() * Rational(1, 2));
	auto r1 = commutator_check(1, -1);
	CHECK(r1.lhs.terms.size() == 1);
	CHECK(r1.lhs.terms.at({1}) == Expr(2));
	for (int n = -5; n <= 5; ++n)
		CHECK(commutator_check(n, n).lhs.is_zero());
}

TEST_CASE("antisymmetry")
{
	for (int n = -5; n <= 5; ++n)
		for (int m = -5; m <= 5; ++m)
			CHECK(commutator_check(n, m).lhs == commutator_check(m, n).lhs * Rational(-1));
}

TEST_CASE("Jacobi identity on the computed brackets")
{
	auto bracket_l = [](int a, int b) { return as_lcomb(commutator_check(a, b).lhs); };
	for (int a = -3; a <= 3; ++a)
		for (int b = -3; b <= 3; ++b)
			for (int c = -3; c <= 3; ++c) {
				// [[L_a, L_b], L_c] + cyclic; identity terms commute with everything
				LComb total;
				for (auto [x, y, z] : {std::array<int, 3>{a, b, c}, {b, c, a}, {c, a, b}}) {
					LComb inner = bracket_l(x, y);
					for (auto &[k, coef] : inner.l) {
						LComb outer = bracket_l(k, z);
						for (auto &[k2, c2] : outer.l)
							total.l[k2] += coef * c2;
						total.id += coef * outer.id;
					}
				}
				bool zero = total.id.is_zero();
				for (auto &[k, e] : total.l)
					zero = zero && e.is_zero();
				CHECK_MESSAGE(zero, a << "," << b << "," << c);
			}
}

TEST_CASE("residue engine against direct contour quadrature")
{
	ToyBase toy;
	auto base = [&](const BaseKey &k, const std::map<VarId, cplx> &v) { return toy.base(k, v); };
	const double c = 25.7;
	for (auto modes : {std::vector<int>{2}, {-2}, {1, -1}, {2, -3}, {-1, 0}, {3, -2}}) {
		cplx formal = evaluate(pairing(modes), c, [&](const ModeKey &k) { return toy.opaque(k); });
		std::vector<double> radii = modes.size() == 1 ? std::vector<double>{0.8} : std::vector<double>{0.85, 0.6};
		cplx num = pairing_numeric(modes, radii, c, 96, base);
		CHECK_MESSAGE(std::abs(formal - num) < 1e-8 * (1 + std::abs(formal)), formal << " vs " << num);
	}
}

TEST_CASE("contour deformation inside the annulus leaves the value unchanged")
{
	ToyBase toy;
	auto base = [&](const BaseKey &k, const std::map<VarId, cplx> &v) { return toy.base(k, v); };
	cplx a = pairing_numeric({2, -1}, {0.9, 0.55}, 26.0, 96, base);
	cplx b = pairing_numeric({2, -1}, {0.8, 0.5}, 26.0, 96, base);
	CHECK(std::abs(a - b) < 1e-8 * std::abs(a));
}

TEST_CASE("pairing setup guards")
{
	PairingSetup s;
	s.support_radius = 0.4;
	s.radii = {0.8, 0.6};
	s.t_field = [](cplx) { return cplx(0); };
	CHECK_NOTHROW(pairing(s, {1, 2}));
	s.radii = {0.6, 0.8};
	CHECK_THROWS_AS(pairing(s, {1, 2}), lcft::Error);
	s.radii = {0.8, 0.3};
	CHECK_THROWS_AS(pairing(s, {1, 2}), lcft::Error);
	s.radii = {0.8};
	CHECK_THROWS_AS(pairing(s, {1, 2}), lcft::Error);
	s.radii = {0.8, 0.6};
	s.t_field = [](cplx z) { return 0.1 / (z * z); };
	CHECK_THROWS_AS(pairing(s, {1, 2}), lcft::Error);
}

namespace {

TestFunction radial_bump(double s, const std::string &label)
{
	TestFunction h;
	h.label = label;
	h.support = {-s, s, -s, s};
	h.value = [s](cplx x) -> cplx {
		double r2 = std::norm(x) / (s * s);
		return r2 >= 1 ? 0.0 : std::pow(1 - r2, 8);
	};
	return h;
}

} // namespace

TEST_CASE("rho of a radial bump at flat sigma")
{
	const double s = 0.3, Q = 2.5;
	auto h = radial_bump(s, "h");
	// int (1 - r^2/s^2)^8 d^2x = pi s^2 / 9, higher multipoles vanish
	for (cplx z : {cplx(0.7, 0.1), cplx(-0.2, 0.6), cplx(0.0, -0.9)}) {
		cplx want = 0.5 * Q * (M_PI * s * s / 9) / (z * z);
		cplx got = rho(h, z, Q, nullptr, 96);
		CHECK(std::abs(got - want) < 1e-7 * std::abs(want));
	}
}

TEST_CASE("tau and the T-action")
{
	TestFunction zero{"0", {-0.2, 0.2, -0.2, 0.2}, [](cplx) { return cplx(0); }};
	auto tz = tau(zero, {0.7, 0.0});
	CHECK(tz.value({0.1, 0.05}) == cplx(0));

	auto h = radial_bump(0.25, "h0");
	auto g = radial_bump(0.2, "h1");
	FunctionalDescriptor d{h, {g}, true};
	cplx z{0.6, 0.3};
	// tau_z h = -dh/(z-x) - h/(z-x)^2
	auto th = tau(h, z);
	cplx x{0.05, -0.1};
	double r2 = std::norm(x) / 0.0625;
	cplx dh = 8 * std::pow(1 - r2, 7) * (-std::conj(x) / 0.0625);
	cplx want = -dh / (z - x) - h.value(x) / ((z - x) * (z - x));
	CHECK(std::abs(th.value(x) - want) < 1e-8);
	CHECK(th.value({0.3, 0.0}) == cplx(0));

	auto res = t_action(d, z, 2.5, nullptr);
	CHECK(res.terms.size() == 4);
	CHECK(res.support().inside(d.support()));
	// iterate: supports stay inside the original box
	for (auto &t : res.terms) {
		auto again = t_action(t.desc, {-0.5, 0.5}, 2.5, nullptr);
		CHECK(again.support().inside(d.support()));
	}
	CHECK_THROWS_AS(t_action(d, {0.1, 0.0}, 2.5, nullptr), lcft::Error);
}
