#include "lcft/virasoro.hpp"

#include "lcft/errors.hpp"
#include "lcft/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcft::vir {

using namespace lcft::sym;

bool SupportBox::inside(const SupportBox &o) const
{
	return xmin >= o.xmin && xmax <= o.xmax && ymin >= o.ymin && ymax <= o.ymax;
}

SupportBox SupportBox::hull(const SupportBox &o) const
{
	return {std::min(xmin, o.xmin), std::max(xmax, o.xmax), std::min(ymin, o.ymin), std::max(ymax, o.ymax)};
}

double SupportBox::max_radius() const
{
	double r = 0;
	for (double x : {xmin, xmax})
		for (double y : {ymin, ymax})
			r = std::max(r, std::hypot(x, y));
	return r;
}

SupportBox FunctionalDescriptor::support() const
{
	SupportBox s = h0.support;
	for (auto &h : factors)
		s = s.hull(h.support);
	return s;
}

SupportBox TActionResult::support() const
{
	if (terms.empty())
		return {};
	SupportBox s = terms.front().desc.support();
	for (auto &t : terms)
		s = s.hull(t.desc.support());
	return s;
}

static cplx dz_numeric(const std::function<cplx(cplx)> &f, cplx x)
{
	// d_z = (d_a - i d_b)/2, fourth-order central differences
	const double h = 2.5e-4;
	auto d = [&](cplx e) { return (-f(x + 2.0 * e) + 8.0 * f(x + e) - 8.0 * f(x - e) + f(x - 2.0 * e)) / (12.0 * h); };
	return 0.5 * (d(cplx(h, 0)) - cplx(0, 1) * d(cplx(0, h)));
}

TestFunction tau(const TestFunction &h, cplx z)
{
	if (h.support.contains(z))
		throw validation_error("ZInsideSupport", "T-action point lies in the support of " + h.label);
	TestFunction r;
	std::ostringstream os;
	os << "tau[" << z.real() << "," << z.imag() << "](" << h.label << ")";
	r.label = os.str();
	r.support = h.support;
	auto f = h.value;
	SupportBox box = h.support;
	r.value = [f, z, box](cplx x) -> cplx {
		if (!box.contains(x))
			return 0.0;
		auto g = [&](cplx y) { return f(y) / (z - y); };
		return -dz_numeric(g, x);
	};
	return r;
}

cplx rho(const TestFunction &h, cplx z, double Q, const std::function<cplx(cplx)> &dsigma, int nodes)
{
	if (h.support.contains(z))
		throw validation_error("ZInsideSupport", "T-action point lies in the support of " + h.label);
	const auto &g = gauss_legendre(nodes);
	const auto &b = h.support;
	const double ax = 0.5 * (b.xmax - b.xmin), cx = 0.5 * (b.xmax + b.xmin);
	const double ay = 0.5 * (b.ymax - b.ymin), cy = 0.5 * (b.ymax + b.ymin);
	cplx s = 0;
	for (int i = 0; i < nodes; ++i)
		for (int j = 0; j < nodes; ++j) {
			cplx x(cx + ax * g.x[i], cy + ay * g.x[j]);
			cplx k = 1.0 / ((z - x) * (z - x));
			if (dsigma)
				k += dsigma(x) / (z - x);
			s += g.w[i] * g.w[j] * k * h.value(x);
		}
	return 0.5 * Q * s * ax * ay;
}

TActionResult t_action(const FunctionalDescriptor &desc, cplx z, double Q, const std::function<cplx(cplx)> &dsigma)
{
	if (desc.support().contains(z))
		throw validation_error("ZInsideSupport", "T-action point lies in the descriptor support");
	TActionResult r;
	r.z = z;
	{
		ActionTerm t{"tau_h0", -1, 1.0, desc};
		t.desc.factors.push_back(tau(desc.h0, z));
		r.terms.push_back(t);
		r.terms.push_back({"rho_h0", -1, rho(desc.h0, z, Q, dsigma), desc});
	}
	for (size_t j = 0; j < desc.factors.size(); ++j) {
		ActionTerm t{"tau_hj", int(j), 1.0, desc};
		t.desc.factors[j] = tau(desc.factors[j], z);
		r.terms.push_back(t);
		ActionTerm u{"rho_hj", int(j), rho(desc.factors[j], z, Q, dsigma), desc};
		u.desc.factors.erase(u.desc.factors.begin() + long(j));
		r.terms.push_back(u);
	}
	return r;
}

// ---------------------------------------------------------------- pairings

PairingValue PairingValue::operator+(const PairingValue &o) const
{
	PairingValue r = *this;
	for (auto &[k, e] : o.terms) {
		auto &slot = r.terms[k];
		slot += e;
		if (slot.is_zero())
			r.terms.erase(k);
	}
	return r;
}

PairingValue PairingValue::operator-(const PairingValue &o) const { return *this + o * Rational(-1); }

PairingValue PairingValue::operator*(const Rational &q) const
{
	PairingValue r;
	if (q == 0)
		return r;
	for (auto &[k, e] : terms)
		r.terms[k] = e * q;
	return r;
}

std::string PairingValue::str() const
{
	if (terms.empty())
		return "0";
	std::ostringstream os;
	bool first = true;
	for (auto &[k, e] : terms) {
		os << (first ? "" : " + ") << "(" << e.str() << ")*O[";
		for (size_t i = 0; i < k.size(); ++i)
			os << (i ? "," : "") << k[i];
		os << "]";
		first = false;
	}
	return os.str();
}

// e (e-1) ... (e-k+1) / k!, any integer e
static Rational binomial(long e, long k)
{
	Rational r = 1;
	for (long i = 0; i < k; ++i) {
		r *= Rational(e - i);
		r /= Rational(i + 1);
	}
	return r;
}

namespace {

struct State {
	BaseKey key;
	ModeKey modes;
	auto operator<=>(const State &) const = default;
};

using StateMap = std::map<State, Expr>;

enum class Contour { Enclosing, PointResidue };

// Integrates z_id over its contour. Enclosing: all poles inside the contour (partners and 0).
// PointResidue: residue at the partner only; terms regular there are dropped.
StateMap integrate(const StateMap &cur, int id, Contour mode)
{
	const VarId v = zv(id);
	StateMap next;
	for (auto &[st, p] : cur) {
		const bool dep = (st.key.tcal >> id) & 1u;
		int d = 0;
		for (auto &[var, o] : st.key.deriv)
			if (var == v)
				d = o;
		State ns = st;
		if (dep) {
			ns.key.tcal &= ~(1u << id);
			ns.key.deriv.erase(
			    std::remove_if(ns.key.deriv.begin(), ns.key.deriv.end(), [&](auto &q) { return q.first == v; }),
			    ns.key.deriv.end());
		}
		for (auto &[m, q] : p.terms()) {
			int e = 0, pw = 0;
			int partner = -1;
			Monomial rest;
			for (auto &[g, ex] : m) {
				if (gen_type(g) == Gen::Pow && gen_a(g) == v)
					e = ex;
				else if (gen_type(g) == Gen::InvDiff && gen_a(g) == v) {
					if (partner >= 0)
						throw numerical_error("ResidueFailure", "two partners below one contour variable");
					partner = gen_b(g);
					pw = ex;
				} else if (gen_type(g) == Gen::InvDiff && gen_b(g) == v)
					throw numerical_error("ResidueFailure", "outer variable left after integration");
				else
					rest.emplace_back(g, ex);
			}
			if (dep && partner >= 0)
				throw numerical_error("ResidueFailure", "pole and T-action share one contour variable");
			Expr out;
			if (mode == Contour::PointResidue) {
				if (partner < 0)
					continue;
				// res_{z=a} z^e/(z-a)^p = C(e, p-1) a^{e-p+1}
				out.add_term(rest, q * binomial(e, pw - 1));
				out = out * Expr::power(VarId(partner), e - pw + 1);
			} else if (partner >= 0) {
				const int ex = e - pw + 1;
				if (ex < 0)
					continue;
				out.add_term(rest, q * binomial(e, pw - 1));
				out = out * Expr::power(VarId(partner), ex);
			} else if (dep) {
				// integrate by parts onto z^e
				Rational f = q;
				for (int i = 0; i < d; ++i)
					f *= -(e - i);
				if (f == 0)
					continue;
				out.add_term(rest, f);
				State s2 = ns;
				s2.modes.push_back(e - d);
				next[s2] += out;
				continue;
			} else {
				if (e != -1)
					continue;
				out.add_term(rest, q);
			}
			next[ns] += out;
		}
	}
	StateMap clean;
	for (auto &[s, p] : next)
		if (!p.is_zero())
			clean.emplace(s, p);
	return clean;
}

PairingValue collect(const StateMap &cur)
{
	PairingValue r;
	for (auto &[s, p] : cur) {
		if (s.key.tcal != 0 || !s.key.deriv.empty())
			throw numerical_error("ResidueFailure", "base dependence left after integration");
		auto &slot = r.terms[s.modes];
		slot += p;
		if (slot.is_zero())
			r.terms.erase(s.modes);
	}
	return r;
}

StateMap integrand(const std::vector<int> &modes)
{
	const int k = int(modes.size());
	if (k > 30)
		throw validation_error("TooManyModes", "at most 30 modes");
	std::vector<int> zs;
	for (int i = 0; i < k; ++i)
		zs.push_back(k - 1 - i);
	auto corr = ward_expand(zs, 0, MetricMode::Flat, TConvention::Normalized, BaseKind::Functional);
	Expr weight(1);
	for (int i = 0; i < k; ++i)
		weight = weight * Expr::power(zv(k - 1 - i), modes[i] + 1);
	StateMap cur;
	for (auto &[key, p] : corr.terms)
		cur[State{key, {}}] += p * weight;
	return cur;
}

} // namespace

PairingValue pairing(const std::vector<int> &modes)
{
	StateMap cur = integrand(modes);
	for (int id = int(modes.size()) - 1; id >= 0; --id)
		cur = integrate(cur, id, Contour::Enclosing);
	return collect(cur);
}

PairingValue contour_swap_difference(int n, int m)
{
	// (F, L_n L_m G) - (F, L_m L_n G): the z_1 contour is pulled through z_2, leaving the residue at z_1 = z_2
	StateMap cur = integrand({n, m});
	cur = integrate(cur, 1, Contour::PointResidue);
	cur = integrate(cur, 0, Contour::Enclosing);
	return collect(cur);
}

PairingValue pairing(const PairingSetup &setup, const std::vector<int> &modes)
{
	if (setup.radii.size() != modes.size())
		throw validation_error("RadiusOrderViolation", "one contour radius per mode required");
	if (!(setup.support_radius > 0 && setup.support_radius < 1))
		throw validation_error("SupportViolation", "supports must lie in a disc of radius < 1");
	double prev = 1.0;
	for (double r : setup.radii) {
		if (!(r < prev && r > setup.support_radius))
			throw validation_error("RadiusOrderViolation", "contour radii must decrease strictly inside (r, 1)");
		prev = r;
	}
	if (setup.t_field) {
		for (double r : setup.radii)
			for (int i = 0; i < 64; ++i) {
				cplx z = std::polar(r, 2 * M_PI * i / 64);
				if (std::abs(setup.t_field(z)) > 1e-12)
					throw validation_error("CurvedAnnulus", "t does not vanish on the contour annulus");
			}
	}
	return pairing(modes);
}

static cplx eval_c(const Expr &e, double c)
{
	return sym::evaluate(e, {}, [c](GenKey g) -> cplx {
		if (gen_type(g) == Gen::C)
			return c;
		throw validation_error("MissingValue", "unexpected symbol " + gen_name(g));
	});
}

cplx evaluate(const PairingValue &p, double c, const std::function<cplx(const ModeKey &)> &base)
{
	cplx s = 0;
	for (auto &[k, e] : p.terms)
		s += eval_c(e, c) * base(k);
	return s;
}

cplx pairing_numeric(const std::vector<int> &modes, const std::vector<double> &radii, double c, int points,
                     const std::function<cplx(const BaseKey &, const std::map<VarId, cplx> &)> &base)
{
	const int k = int(modes.size());
	if (int(radii.size()) != k)
		throw validation_error("RadiusOrderViolation", "one contour radius per mode required");
	std::vector<int> zs;
	for (int i = 0; i < k; ++i)
		zs.push_back(k - 1 - i);
	auto corr = ward_expand(zs, 0, MetricMode::Flat, TConvention::Normalized, BaseKind::Functional);
	auto sym = [c](GenKey g) -> cplx { return gen_type(g) == Gen::C ? cplx(c) : cplx(0); };
	std::vector<int> idx(k, 0);
	cplx total = 0;
	long count = 1;
	for (int i = 0; i < k; ++i)
		count *= points;
	for (long it = 0; it < count; ++it) {
		long rem = it;
		std::map<VarId, cplx> vals;
		cplx w = 1;
		for (int i = 0; i < k; ++i) {
			int j = int(rem % points);
			rem /= points;
			cplx z = std::polar(radii[i], 2 * M_PI * j / points);
			vals[zv(k - 1 - i)] = z;
			// dz/(2 pi i) = z dtheta/(2 pi)
			w *= std::pow(z, modes[i] + 1) * z / double(points);
		}
		total += w * sym::evaluate(corr, vals, sym, [&](const BaseKey &key) { return base(key, vals); });
	}
	return total;
}

CommutatorResult commutator_check(int n, int m)
{
	CommutatorResult r;
	r.n = n;
	r.m = m;
	r.lhs = contour_swap_difference(n, m);
	PairingValue rhs;
	if (n != m)
		rhs.terms[{n + m + 1}] = Expr(Rational(n - m));
	r.central = 0;
	if (n == -m) {
		r.central = Rational(n * n * n - n, 12);
		r.central.canonicalize();
		if (r.central != 0)
			rhs = rhs + [&] {
				PairingValue e;
				e.terms[{}] = Expr::c() * r.central;
				return e;
			}();
	}
	r.rhs = rhs;
	r.equal = r.lhs == r.rhs;
	r.lhs_repr = r.lhs.str();
	r.rhs_repr = r.rhs.str();
	return r;
}

} // namespace lcft::vir
