#include "lcft/symbolic.hpp"

#include "lcft/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace lcft::sym {

VarId conj_var(VarId v)
{
	switch (kind_of(v)) {
	case VarKind::Z: return make_var(VarKind::ZBar, index_of(v));
	case VarKind::X: return make_var(VarKind::XBar, index_of(v));
	case VarKind::ZBar: return make_var(VarKind::Z, index_of(v));
	case VarKind::XBar: return make_var(VarKind::X, index_of(v));
	}
	return v;
}

bool is_bar(VarId v) { return kind_of(v) == VarKind::ZBar || kind_of(v) == VarKind::XBar; }

std::string var_name(VarId v)
{
	static const char *prefix[] = {"z", "x", "zb", "xb"};
	return prefix[v / 32] + std::to_string(index_of(v) + 1);
}

GenKey gen_key(Gen g, uint8_t order, uint8_t a, uint8_t b)
{
	return (uint32_t(g) << 24) | (uint32_t(order) << 16) | (uint32_t(a) << 8) | b;
}
Gen gen_type(GenKey k) { return static_cast<Gen>(k >> 24); }
uint8_t gen_order(GenKey k) { return (k >> 16) & 0xff; }
uint8_t gen_a(GenKey k) { return (k >> 8) & 0xff; }
uint8_t gen_b(GenKey k) { return k & 0xff; }

static std::string derivs(int i, int j)
{
	std::string s;
	for (int q = 0; q < i; ++q)
		s += "d";
	for (int q = 0; q < j; ++q)
		s += "db";
	return s;
}

std::string gen_name(GenKey k)
{
	const uint8_t o = gen_order(k), a = gen_a(k);
	switch (gen_type(k)) {
	case Gen::InvDiff: return "1/(" + var_name(a) + "-" + var_name(gen_b(k)) + ")";
	case Gen::C: return "c";
	case Gen::Delta: return "D" + std::to_string(a + 1);
	case Gen::T: return (is_bar(a) ? std::string("tb") : std::string("t")) + std::string(o, '\'') + "(" + var_name(a) + ")";
	case Gen::Sigma: return (is_bar(a) ? std::string("db") : std::string("d")) + std::to_string(o) + "sigma(" + var_name(a) + ")";
	case Gen::R: return "R" + std::string(o, '\'') + "(" + var_name(a) + ")";
	case Gen::Pi: return "pi";
	case Gen::Phi: return derivs(o & 15, o >> 4) + "phi(" + var_name(a) + ")";
	case Gen::H: return derivs(o & 15, o >> 4) + "h(" + var_name(a) + ")";
	case Gen::Pow: return var_name(a);
	}
	return "?";
}

// ---------------------------------------------------------------- monomials

static Monomial mono_mul(const Monomial &x, const Monomial &y)
{
	Monomial out;
	out.reserve(x.size() + y.size());
	size_t i = 0, j = 0;
	while (i < x.size() || j < y.size()) {
		if (j == y.size() || (i < x.size() && x[i].first < y[j].first))
			out.push_back(x[i++]);
		else if (i == x.size() || y[j].first < x[i].first)
			out.push_back(y[j++]);
		else {
			int32_t e = x[i].second + y[j].second;
			if (e != 0)
				out.emplace_back(x[i].first, e);
			++i;
			++j;
		}
	}
	return out;
}

static void mono_bump(Monomial &m, GenKey k, int32_t de)
{
	auto it = std::lower_bound(m.begin(), m.end(), k,
	                           [](const auto &p, GenKey key) { return p.first < key; });
	if (it != m.end() && it->first == k) {
		it->second += de;
		if (it->second == 0)
			m.erase(it);
	} else if (de != 0)
		m.insert(it, {k, de});
}

static int32_t mono_exp(const Monomial &m, GenKey k)
{
	auto it = std::lower_bound(m.begin(), m.end(), k,
	                           [](const auto &p, GenKey key) { return p.first < key; });
	return (it != m.end() && it->first == k) ? it->second : 0;
}

struct MonoHash {
	size_t operator()(const Monomial &m) const
	{
		size_t h = 1469598103934665603ull;
		for (auto &[k, e] : m) {
			h ^= k + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
			h ^= uint32_t(e) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
		}
		return h;
	}
};

using Reduced = std::vector<std::pair<Monomial, long>>;

// Partial fractions on the inverse-difference part: 1/((m-b)(m-c)) = 1/(b-c) (1/(m-b) - 1/(m-c)).
static const Reduced &reduce_dpart(const Monomial &d)
{
	thread_local std::unordered_map<Monomial, Reduced, MonoHash> memo;
	if (auto it = memo.find(d); it != memo.end())
		return it->second;

	int m = -1, b = -1, c = -1;
	for (size_t i = 0; i < d.size(); ++i) {
		const int hi = gen_a(d[i].first);
		for (size_t j = i + 1; j < d.size(); ++j) {
			if (gen_a(d[j].first) != hi)
				continue;
			const int lo1 = gen_b(d[i].first), lo2 = gen_b(d[j].first);
			if (hi > m || (hi == m && std::max(lo1, lo2) > b)) {
				m = hi;
				b = std::max(lo1, lo2);
				c = std::min(lo1, lo2);
			}
		}
	}
	Reduced out;
	if (m < 0) {
		out.emplace_back(d, 1);
	} else {
		const GenKey mb = gen_key(Gen::InvDiff, 0, m, b), mc = gen_key(Gen::InvDiff, 0, m, c),
		             bc = gen_key(Gen::InvDiff, 0, b, c);
		Monomial d1 = d, d2 = d;
		mono_bump(d1, mc, -1);
		mono_bump(d1, bc, 1);
		mono_bump(d2, mb, -1);
		mono_bump(d2, bc, 1);
		std::map<Monomial, long> acc;
		for (auto &[mono, q] : reduce_dpart(d1))
			acc[mono] += q;
		for (auto &[mono, q] : reduce_dpart(d2))
			acc[mono] -= q;
		for (auto &[mono, q] : acc)
			if (q != 0)
				out.emplace_back(mono, q);
	}
	return memo.emplace(d, std::move(out)).first->second;
}

static void add_reduced(std::map<Monomial, Rational> &terms, const Monomial &m, const Rational &q)
{
	if (q == 0)
		return;
	Monomial dpart, rest;
	for (auto &p : m)
		(gen_type(p.first) == Gen::InvDiff ? dpart : rest).push_back(p);
	for (auto &[dm, k] : reduce_dpart(dpart)) {
		Monomial full = mono_mul(dm, rest);
		auto &slot = terms[full];
		slot += q * k;
		if (slot == 0)
			terms.erase(full);
	}
}

// ---------------------------------------------------------------- Expr

Expr::Expr(const Rational &q)
{
	if (q != 0)
		terms_[{}] = q;
}

Expr Expr::generator(GenKey k, int32_t e)
{
	Expr r;
	if (e == 0)
		r.terms_[{}] = 1;
	else
		r.terms_[{{k, e}}] = 1;
	return r;
}

Expr Expr::c() { return generator(gen_key(Gen::C, 0, 0)); }
Expr Expr::delta(int j) { return generator(gen_key(Gen::Delta, 0, uint8_t(j))); }
Expr Expr::t(VarId w, int k) { return generator(gen_key(Gen::T, uint8_t(k), w)); }
Expr Expr::dsigma(VarId w, int k) { return generator(gen_key(Gen::Sigma, uint8_t(k), w)); }
Expr Expr::curvature(VarId w, int k) { return generator(gen_key(Gen::R, uint8_t(k), w)); }
Expr Expr::pi(int e) { return generator(gen_key(Gen::Pi, 0, 0), e); }
Expr Expr::phi(VarId w, int i, int j) { return generator(gen_key(Gen::Phi, uint8_t(i | (j << 4)), w)); }
Expr Expr::h(VarId w, int i, int j) { return generator(gen_key(Gen::H, uint8_t(i | (j << 4)), w)); }
Expr Expr::power(VarId w, int e) { return generator(gen_key(Gen::Pow, 0, w), e); }

Expr Expr::inv_diff(VarId a, VarId b, int p)
{
	if (a == b)
		throw validation_error("PoleHit", "inverse difference of a variable with itself");
	if (p == 0)
		return Expr(1);
	if (a > b)
		return generator(gen_key(Gen::InvDiff, 0, a, b), p);
	Expr r = generator(gen_key(Gen::InvDiff, 0, b, a), p);
	return (p % 2) ? -r : r;
}

void Expr::add_term(const Monomial &m, const Rational &q) { add_reduced(terms_, m, q); }

Expr Expr::operator+(const Expr &o) const
{
	Expr r = *this;
	r += o;
	return r;
}

Expr &Expr::operator+=(const Expr &o)
{
	for (auto &[m, q] : o.terms_) {
		auto &slot = terms_[m];
		slot += q;
		if (slot == 0)
			terms_.erase(m);
	}
	return *this;
}

Expr &Expr::operator-=(const Expr &o)
{
	for (auto &[m, q] : o.terms_) {
		auto &slot = terms_[m];
		slot -= q;
		if (slot == 0)
			terms_.erase(m);
	}
	return *this;
}

Expr Expr::operator-(const Expr &o) const
{
	Expr r = *this;
	r -= o;
	return r;
}

Expr Expr::operator-() const { return Expr() - *this; }

Expr Expr::operator*(const Expr &o) const
{
	Expr r;
	for (auto &[m1, q1] : terms_)
		for (auto &[m2, q2] : o.terms_)
			add_reduced(r.terms_, mono_mul(m1, m2), q1 * q2);
	return r;
}

Expr Expr::operator*(const Rational &q) const
{
	Expr r;
	if (q == 0)
		return r;
	for (auto &[m, c] : terms_)
		r.terms_[m] = c * q;
	return r;
}

std::string Expr::str() const
{
	if (terms_.empty())
		return "0";
	std::ostringstream os;
	bool first = true;
	for (auto &[m, q] : terms_) {
		if (!first)
			os << (q > 0 ? " + " : " - ");
		else if (q < 0)
			os << "-";
		first = false;
		Rational a = abs(q);
		bool wrote = false;
		if (a != 1 || m.empty()) {
			os << a.get_str();
			wrote = true;
		}
		for (auto &[k, e] : m) {
			os << (wrote ? "*" : "") << gen_name(k);
			if (e != 1)
				os << "^" << e;
			wrote = true;
		}
	}
	return os.str();
}

static std::string latex_gen(GenKey k)
{
	const uint8_t a = gen_a(k), o = gen_order(k);
	auto v = [](VarId w) {
		std::string base = (kind_of(w) == VarKind::Z || kind_of(w) == VarKind::ZBar) ? "z" : "x";
		std::string s = base + "_{" + std::to_string(index_of(w) + 1) + "}";
		return is_bar(w) ? "\\bar " + s : s;
	};
	switch (gen_type(k)) {
	case Gen::InvDiff: return "(" + v(a) + "-" + v(gen_b(k)) + ")";
	case Gen::C: return "c";
	case Gen::Delta: return "\\Delta_{" + std::to_string(a + 1) + "}";
	case Gen::T: return std::string(is_bar(a) ? "\\bar t" : "t") + std::string(o, '\'') + "(" + v(a) + ")";
	case Gen::Sigma: return std::string(is_bar(a) ? "\\bar\\partial" : "\\partial") + "^{" + std::to_string(o) + "}\\sigma(" + v(a) + ")";
	case Gen::R: return "R" + std::string(o, '\'') + "(" + v(a) + ")";
	case Gen::Pi: return "\\pi";
	case Gen::Phi: return "\\partial^{" + std::to_string(o & 15) + "}\\bar\\partial^{" + std::to_string(o >> 4) + "}\\varphi(" + v(a) + ")";
	case Gen::H: return "\\partial^{" + std::to_string(o & 15) + "}\\bar\\partial^{" + std::to_string(o >> 4) + "}h(" + v(a) + ")";
	case Gen::Pow: return v(a);
	}
	return "?";
}

std::string Expr::latex() const
{
	if (terms_.empty())
		return "0";
	std::ostringstream os;
	bool first = true;
	for (auto &[m, q] : terms_) {
		os << (q < 0 ? " - " : (first ? "" : " + "));
		first = false;
		std::string num, den;
		Rational a = abs(q);
		num = a.get_num().get_str();
		if (a.get_den() != 1)
			den = a.get_den().get_str();
		for (auto &[k, e] : m) {
			const bool denom = gen_type(k) == Gen::InvDiff ? e > 0 : e < 0;
			const int ae = std::abs(e);
			std::string g = latex_gen(k) + (ae != 1 ? "^{" + std::to_string(ae) + "}" : "");
			std::string &dst = denom ? den : num;
			dst += (dst.empty() || dst == "1" ? (dst == "1" ? (dst.clear(), "") : "") : " ") + g;
		}
		if (num.empty())
			num = "1";
		os << (den.empty() ? num : "\\frac{" + num + "}{" + den + "}");
	}
	return os.str();
}

Expr canonical(const Expr &e)
{
	Expr r;
	for (auto &[m, q] : e.terms())
		r.add_term(m, q);
	return r;
}

Expr derivative(const Expr &e, VarId w)
{
	Expr r;
	for (auto &[m, q] : e.terms()) {
		for (size_t i = 0; i < m.size(); ++i) {
			const GenKey k = m[i].first;
			const int32_t ex = m[i].second;
			const Gen g = gen_type(k);
			Monomial nm = m;
			switch (g) {
			case Gen::InvDiff: {
				int sgn = (gen_a(k) == w) ? -1 : (gen_b(k) == w ? 1 : 0);
				if (!sgn)
					continue;
				nm[i].second += 1;
				r.add_term(nm, q * (sgn * ex));
				break;
			}
			case Gen::T:
			case Gen::Sigma:
			case Gen::R: {
				if (gen_a(k) != w)
					continue;
				mono_bump(nm, k, -1);
				mono_bump(nm, gen_key(g, gen_order(k) + 1, gen_a(k)), 1);
				r.add_term(nm, q * ex);
				break;
			}
			case Gen::Phi:
			case Gen::H: {
				const uint8_t o = gen_order(k);
				uint8_t no;
				if (gen_a(k) == w)
					no = uint8_t(((o & 15) + 1) | (o & 0xf0));
				else if (conj_var(gen_a(k)) == w)
					no = uint8_t((o & 15) | (((o >> 4) + 1) << 4));
				else
					continue;
				mono_bump(nm, k, -1);
				mono_bump(nm, gen_key(g, no, gen_a(k)), 1);
				r.add_term(nm, q * ex);
				break;
			}
			case Gen::Pow: {
				if (gen_a(k) != w)
					continue;
				nm[i].second -= 1;
				if (nm[i].second == 0)
					nm.erase(nm.begin() + long(i));
				r.add_term(nm, q * ex);
				break;
			}
			default: break;
			}
		}
	}
	return r;
}

static GenKey map_key(GenKey k, const std::function<VarId(VarId)> &f, int &sign, int32_t e)
{
	const Gen g = gen_type(k);
	switch (g) {
	case Gen::InvDiff: {
		VarId a = f(gen_a(k)), b = f(gen_b(k));
		if (a < b) {
			std::swap(a, b);
			if (e % 2)
				sign = -sign;
		}
		return gen_key(g, 0, a, b);
	}
	case Gen::T:
	case Gen::Sigma:
	case Gen::R:
	case Gen::Phi:
	case Gen::H:
	case Gen::Pow: return gen_key(g, gen_order(k), f(gen_a(k)));
	default: return k;
	}
}

static Expr map_vars(const Expr &e, const std::function<VarId(VarId)> &f)
{
	Expr r;
	for (auto &[m, q] : e.terms()) {
		Monomial nm;
		int sign = 1;
		for (auto &[k, ex] : m)
			nm.emplace_back(map_key(k, f, sign, ex), ex);
		std::sort(nm.begin(), nm.end());
		r.add_term(nm, q * sign);
	}
	return r;
}

Expr rename(const Expr &e, const std::map<VarId, VarId> &perm)
{
	return map_vars(e, [&](VarId v) {
		auto it = perm.find(v);
		return it == perm.end() ? v : it->second;
	});
}

Expr conjugate(const Expr &e)
{
	Expr r;
	for (auto &[m, q] : e.terms()) {
		Monomial nm;
		int sign = 1;
		for (auto &[k, ex] : m) {
			const Gen g = gen_type(k);
			if (g == Gen::Phi || g == Gen::H) {
				const uint8_t o = gen_order(k);
				nm.emplace_back(gen_key(g, uint8_t((o >> 4) | ((o & 15) << 4)), gen_a(k)), ex);
			} else
				nm.emplace_back(map_key(k, conj_var, sign, ex), ex);
		}
		std::sort(nm.begin(), nm.end());
		r.add_term(nm, q * sign);
	}
	return r;
}

Expr flatten(const Expr &e)
{
	Expr r;
	for (auto &[m, q] : e.terms()) {
		bool keep = true;
		for (auto &[k, ex] : m) {
			Gen g = gen_type(k);
			if (g == Gen::T || g == Gen::Sigma || g == Gen::R)
				keep = false;
		}
		if (keep)
			r.add_term(m, q);
	}
	return r;
}

bool has_generator(const Expr &e, Gen g)
{
	for (auto &[m, q] : e.terms())
		for (auto &[k, ex] : m)
			if (gen_type(k) == g)
				return true;
	return false;
}

int pole_order(const Expr &e, VarId a, VarId b)
{
	// put w_a on top of the variable order: the partial-fraction basis in w_a is then unique
	constexpr VarId top = 127;
	Expr moved = rename(e, {{a, top}, {top, a}});
	const GenKey key = gen_key(Gen::InvDiff, 0, top, b);
	int best = 0;
	for (auto &[m, q] : moved.terms())
		best = std::max(best, mono_exp(m, key));
	return best;
}

cplx evaluate(const Expr &e, const std::map<VarId, cplx> &values, const SymbolValue &sym)
{
	auto val = [&](VarId v) {
		auto it = values.find(v);
		if (it != values.end())
			return it->second;
		auto jt = values.find(conj_var(v));
		if (jt != values.end())
			return std::conj(jt->second);
		throw validation_error("MissingValue", "no value assigned to " + var_name(v));
	};
	cplx total = 0;
	for (auto &[m, q] : e.terms()) {
		cplx term = q.get_d();
		for (auto &[k, ex] : m) {
			cplx base;
			switch (gen_type(k)) {
			case Gen::InvDiff: {
				cplx d = val(gen_a(k)) - val(gen_b(k));
				if (std::abs(d) == 0)
					throw validation_error("PoleHit", "coinciding points " + var_name(gen_a(k)) + ", " + var_name(gen_b(k)));
				base = 1.0 / d;
				break;
			}
			case Gen::Pow: base = val(gen_a(k)); break;
			case Gen::Pi: base = M_PI; break;
			default: base = sym(k); break;
			}
			term *= (ex >= 0) ? std::pow(base, ex) : 1.0 / std::pow(base, -ex);
		}
		total += term;
	}
	return total;
}

// ---------------------------------------------------------------- correlations

int BaseKey::total_order() const
{
	int s = 0;
	for (auto &p : deriv)
		s += p.second;
	return s;
}

SymbolicCorrelation SymbolicCorrelation::operator+(const SymbolicCorrelation &o) const
{
	SymbolicCorrelation r = *this;
	for (auto &[k, p] : o.terms) {
		auto &slot = r.terms[k];
		slot += p;
		if (slot.is_zero())
			r.terms.erase(k);
	}
	return r;
}

SymbolicCorrelation SymbolicCorrelation::operator*(const Expr &p) const
{
	SymbolicCorrelation r = *this;
	r.terms.clear();
	for (auto &[k, q] : terms) {
		Expr prod = q * p;
		if (!prod.is_zero())
			r.terms[k] = prod;
	}
	return r;
}

namespace {

using TermMap = std::map<BaseKey, Expr>;

void accumulate(TermMap &out, const BaseKey &k, const Expr &p)
{
	if (p.is_zero())
		return;
	auto &slot = out[k];
	slot += p;
	if (slot.is_zero())
		out.erase(k);
}

bool base_depends(const BaseKey &k, VarId v, BaseKind base)
{
	if (base == BaseKind::Vertices)
		return kind_of(v) == VarKind::X || kind_of(v) == VarKind::XBar;
	return kind_of(v) == VarKind::Z && ((k.tcal >> index_of(v)) & 1u);
}

TermMap apply_derivative(const TermMap &in, VarId v, BaseKind base)
{
	TermMap out;
	for (auto &[k, p] : in) {
		accumulate(out, k, derivative(p, v));
		if (base_depends(k, v, base)) {
			BaseKey nk = k;
			auto it = std::find_if(nk.deriv.begin(), nk.deriv.end(), [&](auto &q) { return q.first == v; });
			if (it == nk.deriv.end()) {
				nk.deriv.emplace_back(v, 1);
				std::sort(nk.deriv.begin(), nk.deriv.end());
			} else
				it->second += 1;
			accumulate(out, nk, p);
		}
	}
	return out;
}

struct Piece {
	Expr prefactor;
	std::vector<int> rest;
	uint32_t tcal;
	int dvar = -1;
};

class WardEngine {
public:
	WardEngine(int n_vertices, MetricMode mode, TConvention conv, BaseKind base)
	    : nv_(n_vertices), mode_(mode), conv_(conv), base_(base) {}

	const TermMap &expand(const std::vector<int> &zs, uint32_t tcal)
	{
		auto key = std::make_pair(zs, tcal);
		if (auto it = memo_.find(key); it != memo_.end())
			return it->second;
		TermMap out;
		if (zs.empty()) {
			out[BaseKey{tcal, {}}] = Expr(1);
		} else {
			for (auto &pc : insert_one(zs.front(), std::vector<int>(zs.begin() + 1, zs.end()), tcal)) {
				TermMap sub = expand(pc.rest, pc.tcal);
				if (pc.dvar >= 0)
					sub = apply_derivative(sub, VarId(pc.dvar), base_);
				for (auto &[k, p] : sub)
					accumulate(out, k, pc.prefactor * p);
			}
		}
		return memo_.emplace(key, std::move(out)).first->second;
	}

private:
	std::vector<Piece> insert_one(int z1, const std::vector<int> &rest, uint32_t tcal)
	{
		const bool symbolic = mode_ == MetricMode::Symbolic;
		const VarId w1 = zv(z1);
		std::vector<Piece> out;
		if (conv_ == TConvention::Raw && symbolic)
			out.push_back({Expr::c() * Rational(-1, 12) * Expr::t(w1), rest, tcal});
		for (size_t k = 0; k < rest.size(); ++k) {
			const VarId wk = zv(rest[k]);
			std::vector<int> without = rest;
			without.erase(without.begin() + long(k));
			Expr central = Expr::c() * Rational(1, 2) * Expr::inv_diff(w1, wk, 4);
			if (conv_ == TConvention::Raw && symbolic)
				central += Expr::c() * Rational(1, 12) *
				           (Expr(2) * Expr::t(wk) * Expr::inv_diff(w1, wk, 2) + Expr::t(wk, 1) * Expr::inv_diff(w1, wk, 1));
			out.push_back({central, without, tcal});
			out.push_back({Expr(2) * Expr::inv_diff(w1, wk, 2), rest, tcal});
			out.push_back({Expr::inv_diff(w1, wk, 1), rest, tcal, int(wk)});
		}
		if (base_ == BaseKind::Vertices) {
			for (int j = 0; j < nv_; ++j) {
				const VarId xj = xv(j);
				Expr vt = Expr::delta(j) * Expr::inv_diff(w1, xj, 2);
				if (symbolic)
					vt += Expr::delta(j) * Expr::dsigma(xj, 1) * Expr::inv_diff(w1, xj, 1);
				out.push_back({vt, rest, tcal});
				out.push_back({Expr::inv_diff(w1, xj, 1), rest, tcal, int(xj)});
			}
		} else {
			out.push_back({Expr(1), rest, tcal | (1u << z1)});
		}
		return out;
	}

	int nv_;
	MetricMode mode_;
	TConvention conv_;
	BaseKind base_;
	std::map<std::pair<std::vector<int>, uint32_t>, TermMap> memo_;
};

} // namespace

SymbolicCorrelation base_correlation(int n_vertices, MetricMode mode, TConvention conv, BaseKind base)
{
	SymbolicCorrelation r;
	r.n_vertices = n_vertices;
	r.mode = mode;
	r.conv = conv;
	r.base = base;
	r.terms[BaseKey{}] = Expr(1);
	return r;
}

SymbolicCorrelation ward_expand(const std::vector<int> &zs, int n_vertices, MetricMode mode, TConvention conv,
                                BaseKind base)
{
	for (size_t i = 0; i < zs.size(); ++i)
		for (size_t j = i + 1; j < zs.size(); ++j)
			if (zs[i] == zs[j])
				throw validation_error("VariableCollision", "z" + std::to_string(zs[i] + 1) + " inserted twice");
	if (n_vertices > 31 || zs.size() > 31)
		throw validation_error("TooManyVariables", "at most 31 insertions of each kind");
	WardEngine eng(n_vertices, mode, conv, base);
	SymbolicCorrelation r = base_correlation(n_vertices, mode, conv, base);
	r.zs = zs;
	r.terms = eng.expand(zs, 0);
	return r;
}

SymbolicCorrelation ward_insert(const SymbolicCorrelation &corr, int z_index)
{
	return ward_insert(corr, z_index, corr.mode);
}

SymbolicCorrelation ward_insert(const SymbolicCorrelation &corr, int z_index, MetricMode mode)
{
	if (std::find(corr.zs.begin(), corr.zs.end(), z_index) != corr.zs.end())
		throw validation_error("VariableCollision", "z" + std::to_string(z_index + 1) + " already occurs");
	std::vector<int> zs{z_index};
	zs.insert(zs.end(), corr.zs.begin(), corr.zs.end());
	return ward_expand(zs, corr.n_vertices, mode, corr.conv, corr.base);
}

SymbolicCorrelation rename_z(const SymbolicCorrelation &corr, const std::map<int, int> &perm)
{
	auto mapz = [&](int i) {
		auto it = perm.find(i);
		return it == perm.end() ? i : it->second;
	};
	std::map<VarId, VarId> vp;
	for (auto &[a, b] : perm) {
		vp[zv(a)] = zv(b);
		vp[conj_var(zv(a))] = conj_var(zv(b));
	}
	SymbolicCorrelation r = corr;
	r.terms.clear();
	for (auto &z : r.zs)
		z = mapz(z);
	for (auto &[k, p] : corr.terms) {
		BaseKey nk;
		for (int i = 0; i < 32; ++i)
			if ((k.tcal >> i) & 1u)
				nk.tcal |= 1u << mapz(i);
		for (auto &[v, o] : k.deriv) {
			auto it = vp.find(v);
			nk.deriv.emplace_back(it == vp.end() ? v : it->second, o);
		}
		std::sort(nk.deriv.begin(), nk.deriv.end());
		accumulate(r.terms, nk, rename(p, vp));
	}
	return r;
}

bool permutation_symmetrize_check(const SymbolicCorrelation &corr)
{
	const auto &zs = corr.zs;
	for (size_t i = 0; i < zs.size(); ++i)
		for (size_t j = i + 1; j < zs.size(); ++j) {
			SymbolicCorrelation sw = rename_z(corr, {{zs[i], zs[j]}, {zs[j], zs[i]}});
			if (!(sw.terms == corr.terms))
				return false;
		}
	return true;
}

SymbolicCorrelation conjugate_correlation(const SymbolicCorrelation &corr)
{
	SymbolicCorrelation r = corr;
	r.terms.clear();
	r.conjugated = !corr.conjugated;
	for (auto &[k, p] : corr.terms) {
		BaseKey nk = k;
		for (auto &d : nk.deriv)
			d.first = conj_var(d.first);
		std::sort(nk.deriv.begin(), nk.deriv.end());
		accumulate(r.terms, nk, conjugate(p));
	}
	return r;
}

SymbolicCorrelation trace_insertion(const SymbolicCorrelation &corr, int z_index)
{
	if (corr.mode == MetricMode::Flat) {
		SymbolicCorrelation r = corr;
		r.terms.clear();
		return r;
	}
	return corr * (Expr::c() * Rational(1, 48) * Expr::curvature(zv(z_index)));
}

SymbolicCorrelation flatten(const SymbolicCorrelation &corr)
{
	SymbolicCorrelation r = corr;
	r.terms.clear();
	r.mode = MetricMode::Flat;
	for (auto &[k, p] : corr.terms)
		accumulate(r.terms, k, flatten(p));
	return r;
}

SymbolicCorrelation canonical(const SymbolicCorrelation &corr)
{
	SymbolicCorrelation r = corr;
	r.terms.clear();
	for (auto &[k, p] : corr.terms)
		accumulate(r.terms, k, canonical(p));
	return r;
}

SymbolicCorrelation raw_from_normalized(const std::vector<int> &zs, int n_vertices)
{
	const size_t n = zs.size();
	SymbolicCorrelation total = base_correlation(n_vertices, MetricMode::Symbolic, TConvention::Raw);
	total.zs = zs;
	total.terms.clear();
	for (uint32_t mask = 0; mask < (1u << n); ++mask) {
		std::vector<int> kept;
		Expr factor(1);
		for (size_t i = 0; i < n; ++i) {
			if ((mask >> i) & 1u)
				factor = factor * (Expr::c() * Rational(-1, 12) * Expr::t(zv(zs[i])));
			else
				kept.push_back(zs[i]);
		}
		SymbolicCorrelation part = ward_expand(kept, n_vertices, MetricMode::Symbolic);
		for (auto &[k, p] : part.terms)
			accumulate(total.terms, k, p * factor);
	}
	return total;
}

AnomalyMatrix anomaly_variation(VarId z, MetricMode mode, bool phi_zero, AnomalyConvention conv)
{
	AnomalyMatrix a;
	if (phi_zero)
		return a;
	const bool curved = mode == MetricMode::Symbolic;
	Expr p10 = Expr::phi(z, 1, 0), p01 = Expr::phi(z, 0, 1);
	Expr zzb = -Expr::phi(z, 1, 1);
	if (curved)
		zzb += (Expr::dsigma(z, 1) * p01 + Expr::dsigma(conj_var(z), 1) * p10) * Rational(1, 2);
	Expr zz;
	if (conv == AnomalyConvention::Paper) {
		zz = p10 * p10 - Expr::phi(z, 2, 0);
		if (curved)
			zz += Expr::dsigma(z, 1) * p10;
		const Expr pref = Expr::c() * Rational(1, 24) * Expr::pi(-1);
		a.zz = pref * zz;
		a.zzbar = pref * zzb;
	} else {
		zz = p10 * p10 - Expr(2) * Expr::phi(z, 2, 0);
		if (curved)
			zz += Expr(2) * Expr::dsigma(z, 1) * p10;
		a.zz = Expr::c() * Rational(1, 24) * zz;
		a.zzbar = Expr::c() * Rational(1, 24) * Expr::pi(-1) * zzb;
	}
	a.zbarzbar = conjugate(a.zz);
	return a;
}

Expr phi_degree_part(const Expr &e, int degree)
{
	Expr r;
	for (auto &[m, q] : e.terms()) {
		int d = 0;
		for (auto &[k, ex] : m)
			if (gen_type(k) == Gen::Phi)
				d += ex;
		if (d == degree)
			r.add_term(m, q);
	}
	return r;
}

// delta of a metric symbol under sigma -> sigma + eps phi
static Expr vary_generator(GenKey k)
{
	const Gen g = gen_type(k);
	const VarId a = gen_a(k);
	const int o = gen_order(k);
	const bool bar = is_bar(a);
	const VarId w = bar ? conj_var(a) : a;
	auto hol = [&](int i) { return bar ? Expr::phi(w, 0, i) : Expr::phi(w, i, 0); };
	switch (g) {
	case Gen::Sigma: return hol(o);
	case Gen::T: {
		// dt = d^2 phi - d sigma d phi
		Expr dt = bar ? Expr::phi(w, 0, 2) - Expr::dsigma(a, 1) * Expr::phi(w, 0, 1)
		              : Expr::phi(w, 2, 0) - Expr::dsigma(a, 1) * Expr::phi(w, 1, 0);
		for (int i = 0; i < o; ++i)
			dt = derivative(dt, a);
		return dt;
	}
	case Gen::R: throw validation_error("UnsupportedVariation", "curvature symbols have no polynomial Weyl variation");
	default: return Expr();
	}
}

static Expr vary(const Expr &e)
{
	Expr r;
	for (auto &[m, q] : e.terms())
		for (size_t i = 0; i < m.size(); ++i) {
			Expr dg = vary_generator(m[i].first);
			if (dg.is_zero())
				continue;
			Monomial rest = m;
			rest[i].second -= 1;
			if (rest[i].second == 0)
				rest.erase(rest.begin() + long(i));
			Expr pre;
			pre.add_term(rest, q * m[i].second);
			r += pre * dg;
		}
	return r;
}

SymbolicCorrelation weyl_first_order(const SymbolicCorrelation &corr)
{
	if (corr.base != BaseKind::Vertices)
		throw validation_error("UnsupportedBase", "Weyl variation needs a vertex base");
	SymbolicCorrelation r = corr;
	r.terms.clear();
	Expr gshift;
	for (int j = 0; j < corr.n_vertices; ++j)
		gshift -= Expr::delta(j) * Expr::phi(xv(j), 0, 0);
	for (auto &[k, p] : corr.terms) {
		accumulate(r.terms, k, vary(p));
		// d^k (G F) - G d^k F
		TermMap tm;
		tm[BaseKey{k.tcal, {}}] = gshift;
		for (auto &[v, o] : k.deriv)
			for (int i = 0; i < o; ++i)
				tm = apply_derivative(tm, v, corr.base);
		accumulate(tm, k, -gshift);
		for (auto &[k2, p2] : tm)
			accumulate(r.terms, k2, p * p2);
	}
	return r;
}

Expr curvature_variation(VarId z, MetricMode mode)
{
	Expr r = -Expr::h(z, 2, 0);
	if (mode == MetricMode::Symbolic)
		r += Expr::dsigma(z, 1) * Expr::h(z, 1, 0);
	return r;
}

Expr b_coefficient(VarId z, VarId x, MetricMode mode)
{
	Expr k = Expr(6) * Expr::inv_diff(z, x, 4);
	if (mode == MetricMode::Symbolic)
		k += Expr(2) * Expr::t(x) * Expr::inv_diff(z, x, 2) + Expr::t(x, 1) * Expr::inv_diff(z, x, 1);
	return Expr::c() * Rational(1, 48) * Expr::pi(-1) * k;
}

PoleCheck pole_structure(const SymbolicCorrelation &corr)
{
	PoleCheck pc;
	for (auto &[k, p] : corr.terms) {
		for (auto &[m, q] : p.terms())
			for (auto &[g, e] : m)
				if ((gen_type(g) == Gen::Pow && e < 0) ||
				    (gen_type(g) == Gen::InvDiff && (gen_a(g) == gen_b(g))))
					pc.only_differences = false;
		const bool underived = k.total_order() == 0 && k.tcal == 0;
		for (size_t i = 0; i < corr.zs.size(); ++i) {
			const VarId zi = zv(corr.zs[i]);
			for (size_t j = i + 1; j < corr.zs.size(); ++j) {
				int o = pole_order(p, zi, zv(corr.zs[j]));
				if (underived)
					pc.max_zz = std::max(pc.max_zz, o);
			}
			for (int j = 0; j < corr.n_vertices; ++j) {
				int o = pole_order(p, zi, xv(j));
				if (underived)
					pc.max_zx = std::max(pc.max_zx, o);
				else
					pc.max_derived_zx = std::max(pc.max_derived_zx, o);
			}
		}
		if (k.total_order() > int(corr.zs.size()))
			pc.only_differences = false;
	}
	pc.ok = pc.only_differences && pc.max_zz <= 4 && pc.max_zx <= 2 && pc.max_derived_zx <= 2;
	return pc;
}

cplx evaluate(const SymbolicCorrelation &corr, const std::map<VarId, cplx> &values, const SymbolValue &sym,
              const BaseValue &base)
{
	cplx total = 0;
	for (auto &[k, p] : corr.terms) {
		cplx b = base(k);
		if (b == cplx(0))
			continue;
		total += evaluate(p, values, sym) * b;
	}
	return total;
}

static nlohmann::json expr_json(const Expr &e)
{
	nlohmann::json arr = nlohmann::json::array();
	for (auto &[m, q] : e.terms()) {
		nlohmann::json num = nlohmann::json::array(), den = nlohmann::json::array();
		for (auto &[k, ex] : m) {
			if (gen_type(k) == Gen::InvDiff)
				den.push_back({{"factor", var_name(gen_a(k)) + "-" + var_name(gen_b(k))}, {"power", ex}});
			else
				num.push_back({{"symbol", gen_name(k)}, {"power", ex}});
		}
		arr.push_back({{"coefficient", q.get_str()}, {"numerator", num}, {"denominator", den}});
	}
	return arr;
}

std::string to_json(const SymbolicCorrelation &corr)
{
	nlohmann::json j;
	j["insertions"] = corr.zs;
	j["n_vertices"] = corr.n_vertices;
	j["mode"] = corr.mode == MetricMode::Flat ? "flat" : "symbolic";
	j["convention"] = corr.conv == TConvention::Normalized ? "T" : "T_zz";
	j["conjugated"] = corr.conjugated;
	nlohmann::json terms = nlohmann::json::array();
	for (auto &[k, p] : corr.terms) {
		nlohmann::json d = nlohmann::json::array();
		for (auto &[v, o] : k.deriv)
			d.push_back({var_name(v), o});
		nlohmann::json tc = nlohmann::json::array();
		for (int i = 0; i < 32; ++i)
			if ((k.tcal >> i) & 1u)
				tc.push_back(var_name(zv(i)));
		terms.push_back({{"derivative", d}, {"functional_actions", tc}, {"prefactor", expr_json(p)}});
	}
	j["terms"] = terms;
	return j.dump(2);
}

std::string to_latex(const SymbolicCorrelation &corr)
{
	std::ostringstream os;
	bool first = true;
	for (auto &[k, p] : corr.terms) {
		os << (first ? "" : "\n+ ") << "\\left(" << p.latex() << "\\right)";
		first = false;
		for (auto &[v, o] : k.deriv) {
			os << "\\partial_{" << (kind_of(v) == VarKind::X || kind_of(v) == VarKind::XBar ? "x" : "z") << "_{"
			   << index_of(v) + 1 << "}}";
			if (o > 1)
				os << "^{" << o << "}";
		}
		os << " F";
	}
	if (first)
		os << "0";
	return os.str();
}

} // namespace lcft::sym
