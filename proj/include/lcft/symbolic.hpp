#pragma once
// Exact rational-function engine for stress-tensor correlations.
#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lcft::sym {

using Rational = mpq_class;
using cplx = std::complex<double>;

// Indeterminates: 32 slots per kind.
enum class VarKind : uint8_t { Z = 0, X = 1, ZBar = 2, XBar = 3 };
using VarId = uint8_t;

constexpr VarId make_var(VarKind k, int index) { return static_cast<VarId>(int(k) * 32 + index); }
constexpr VarId zv(int i) { return make_var(VarKind::Z, i); }
constexpr VarId xv(int j) { return make_var(VarKind::X, j); }
inline VarKind kind_of(VarId v) { return static_cast<VarKind>(v / 32); }
inline int index_of(VarId v) { return v % 32; }
VarId conj_var(VarId v);
bool is_bar(VarId v);
std::string var_name(VarId v);

// Generators of the coefficient algebra. InvDiff(a,b) with a > b is 1/(w_a - w_b).
enum class Gen : uint8_t {
	InvDiff = 0,
	C = 1,     // central charge
	Delta = 2, // conformal weight of vertex j
	T = 3,     // d^k t(w)
	Sigma = 4, // d^k sigma(w), k >= 1
	R = 5,     // d^k R(w)
	Pi = 6,    // pi, signed exponent
	Phi = 7,   // d^i dbar^j phi(w)
	H = 8,     // d^i dbar^j h(w)
	Pow = 9,   // w^e, signed exponent
};

using GenKey = uint32_t;
GenKey gen_key(Gen g, uint8_t order, uint8_t a, uint8_t b = 0);
Gen gen_type(GenKey k);
uint8_t gen_order(GenKey k);
uint8_t gen_a(GenKey k);
uint8_t gen_b(GenKey k);
std::string gen_name(GenKey k);

using Monomial = std::vector<std::pair<GenKey, int32_t>>;

class Expr {
public:
	Expr() = default;
	explicit Expr(const Rational &q);
	static Expr constant(const Rational &q) { return Expr(q); }
	static Expr generator(GenKey k, int32_t e = 1);
	static Expr c();
	static Expr delta(int j);
	static Expr t(VarId w, int k = 0);
	static Expr dsigma(VarId w, int k = 1);
	static Expr curvature(VarId w, int k = 0);
	static Expr pi(int e);
	static Expr phi(VarId w, int i, int j);
	static Expr h(VarId w, int i, int j);
	static Expr power(VarId w, int e);
	// (w_a - w_b)^{-p}
	static Expr inv_diff(VarId a, VarId b, int p = 1);

	Expr operator+(const Expr &o) const;
	Expr operator-(const Expr &o) const;
	Expr operator-() const;
	Expr operator*(const Expr &o) const;
	Expr operator*(const Rational &q) const;
	Expr &operator+=(const Expr &o);
	Expr &operator-=(const Expr &o);
	bool operator==(const Expr &o) const { return terms_ == o.terms_; }
	bool operator!=(const Expr &o) const { return !(*this == o); }
	bool is_zero() const { return terms_.empty(); }

	const std::map<Monomial, Rational> &terms() const { return terms_; }
	void add_term(const Monomial &m, const Rational &q);
	std::string str() const;
	std::string latex() const;

private:
	std::map<Monomial, Rational> terms_;
};

// Canonical forest form: every variable keeps at most one inverse-difference partner below it.
Expr canonical(const Expr &e);
Expr derivative(const Expr &e, VarId w);
Expr rename(const Expr &e, const std::map<VarId, VarId> &perm);
Expr conjugate(const Expr &e);
// sigma flat: drops every monomial containing t, d^k sigma or R.
Expr flatten(const Expr &e);
// Order of the pole along w_a = w_b.
int pole_order(const Expr &e, VarId a, VarId b);
bool has_generator(const Expr &e, Gen g);

using SymbolValue = std::function<cplx(GenKey)>;
cplx evaluate(const Expr &e, const std::map<VarId, cplx> &values, const SymbolValue &sym);

// ---- correlations ----

enum class MetricMode { Flat, Symbolic };
enum class TConvention { Normalized, Raw };
enum class BaseKind { Vertices, Functional };

struct BaseKey {
	uint32_t tcal = 0; // z indices carrying a functional T-action
	std::vector<std::pair<VarId, int>> deriv;
	auto operator<=>(const BaseKey &) const = default;
	int total_order() const;
};

struct SymbolicCorrelation {
	std::vector<int> zs; // insertion order, outermost first
	int n_vertices = 0;
	MetricMode mode = MetricMode::Flat;
	TConvention conv = TConvention::Normalized;
	BaseKind base = BaseKind::Vertices;
	bool conjugated = false;
	std::map<BaseKey, Expr> terms;

	bool operator==(const SymbolicCorrelation &o) const { return terms == o.terms; }
	SymbolicCorrelation operator+(const SymbolicCorrelation &o) const;
	SymbolicCorrelation operator*(const Expr &p) const;
};

SymbolicCorrelation base_correlation(int n_vertices, MetricMode mode,
                                     TConvention conv = TConvention::Normalized,
                                     BaseKind base = BaseKind::Vertices);
SymbolicCorrelation ward_expand(const std::vector<int> &zs, int n_vertices, MetricMode mode,
                                TConvention conv = TConvention::Normalized,
                                BaseKind base = BaseKind::Vertices);
// Adds T(z_index) as the new outermost insertion.
SymbolicCorrelation ward_insert(const SymbolicCorrelation &corr, int z_index);
SymbolicCorrelation ward_insert(const SymbolicCorrelation &corr, int z_index, MetricMode mode);

SymbolicCorrelation rename_z(const SymbolicCorrelation &corr, const std::map<int, int> &perm);
bool permutation_symmetrize_check(const SymbolicCorrelation &corr);
SymbolicCorrelation conjugate_correlation(const SymbolicCorrelation &corr);
SymbolicCorrelation trace_insertion(const SymbolicCorrelation &corr, int z_index);
SymbolicCorrelation flatten(const SymbolicCorrelation &corr);
SymbolicCorrelation canonical(const SymbolicCorrelation &corr);
// raw T_zz correlation rebuilt from normalized ones: T_zz = T - (c/12) t
SymbolicCorrelation raw_from_normalized(const std::vector<int> &zs, int n_vertices);

struct AnomalyMatrix {
	Expr zz, zzbar, zbarzbar;
};
// Paper: c/(24 pi)(...) as printed. Definition: 4 pi c dA/dg^{zz} recomputed from A, zz and zbar-zbar only.
enum class AnomalyConvention { Paper, Definition };
AnomalyMatrix anomaly_variation(VarId z, MetricMode mode, bool phi_zero = false,
                                AnomalyConvention conv = AnomalyConvention::Paper);
// First-order variation under sigma -> sigma + eps phi, with the common factor e^{cA} prod e^{-Delta phi(x)} removed.
SymbolicCorrelation weyl_first_order(const SymbolicCorrelation &corr);
// Part of e that is homogeneous of the given degree in the phi symbols.
Expr phi_degree_part(const Expr &e, int degree);
Expr curvature_variation(VarId z, MetricMode mode);
// c/(48 pi) [6/(z-x)^4 + 2 t(x)/(z-x)^2 + dt(x)/(z-x)]
Expr b_coefficient(VarId z, VarId x, MetricMode mode);

struct PoleCheck {
	bool only_differences = true;
	int max_zz = 0; // underived base terms
	int max_zx = 0;
	int max_derived_zx = 0; // derived base terms
	bool ok = true;
};
PoleCheck pole_structure(const SymbolicCorrelation &corr);

using BaseValue = std::function<cplx(const BaseKey &)>;
cplx evaluate(const SymbolicCorrelation &corr, const std::map<VarId, cplx> &values,
              const SymbolValue &sym, const BaseValue &base);

std::string to_json(const SymbolicCorrelation &corr);
std::string to_latex(const SymbolicCorrelation &corr);

} // namespace lcft::sym
