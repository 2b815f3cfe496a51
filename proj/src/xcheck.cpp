#include "lcft/xcheck.hpp"

#include "lcft/errors.hpp"
#include "lcft/symbolic.hpp"

#include <cmath>

namespace lcft::xcheck {

using beltrami::CGrid;
using beltrami::Grid;
using beltrami::RGrid;

namespace {

// C^infinity step: 1 for r <= a, 0 for r >= b
double smooth_step(double r, double a, double b)
{
	if (r <= a)
		return 1;
	if (r >= b)
		return 0;
	const double t = (r - a) / (b - a);
	const double p = std::exp(-1 / (1 - t)), q = std::exp(-1 / t);
	return p / (p + q);
}

// point sources of dbar u = mu (1 + d u), pre-scaled by h^2 / pi
struct Exterior {
	std::vector<cplx> y, w;
	double reach = 0; // max |y|

	Exterior(const beltrami::BeltramiCoefficient &mu, const beltrami::DiffeoSolution &s)
	{
		const Grid &g = mu.grid;
		const double scale = g.h() * g.h() / M_PI;
		for (int j = 0; j < g.n; ++j)
			for (int i = 0; i < g.n; ++i) {
				const size_t k = size_t(j) * g.n + i;
				if (mu.mu[k] == cplx(0))
					continue;
				y.push_back(g.node(i, j));
				w.push_back(scale * mu.mu[k] * (1.0 + s.du[k]));
				reach = std::max(reach, std::abs(y.back()));
			}
	}

	HolomorphicJet at(cplx z) const
	{
		HolomorphicJet r{0, 0, 0};
		for (size_t k = 0; k < y.size(); ++k) {
			const cplx d = 1.0 / (z - y[k]);
			const cplx a = w[k] * d;
			r.u += a;
			r.du -= a * d;
			r.d2u += 2.0 * a * d * d;
		}
		return r;
	}
};

// nearest node with nonzero perturbation, in units of h
double clearance(const beltrami::Perturbation &f, cplx x)
{
	const Grid &g = f.grid;
	double best = INFINITY;
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			if (f.fxx[k] != 0 || f.fxy[k] != 0 || f.fyy[k] != 0)
				best = std::min(best, std::abs(g.node(i, j) - x));
		}
	return best / g.h();
}

struct Side {
	double value = 0, error = 0;
};

} // namespace

beltrami::RGrid compact_bump(const Grid &g, double amplitude, cplx center, double radius)
{
	RGrid f(g.size(), 0.0);
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const double t = std::norm(g.node(i, j) - center) / (radius * radius);
			if (t < 1)
				f[size_t(j) * g.n + i] = amplitude * std::exp(1 - 1 / (1 - t));
		}
	return f;
}

HolomorphicJet exterior_jet(const beltrami::BeltramiCoefficient &mu, const beltrami::DiffeoSolution &s, cplx z)
{
	return Exterior(mu, s).at(z);
}

double pulled_back_anomaly(const beltrami::BeltramiCoefficient &mu, const beltrami::DiffeoSolution &s)
{
	const Grid &g = mu.grid;
	const auto &hat = mu.hat;
	const double h = g.h();
	// grid part inside r_in, tail from the exterior expansion beyond it
	const double r_in = 0.6 * g.half_width, r_out = 0.85 * g.half_width;
	const Exterior ext(mu, s);
	if (ext.reach > 0.9 * r_in)
		throw validation_error("PerturbationTooWide", "perturbation reaches the anomaly cutoff radius");

	CGrid phic(g.size());
	for (size_t k = 0; k < g.size(); ++k)
		phic[k] = s.phi[k];
	const CGrid dphi = beltrami::d_z(g, phic);

	double dir = 0, curv = 0;
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const cplx z = g.node(i, j);
			const double w = smooth_step(std::abs(z), r_in, r_out);
			if (w == 0)
				continue;
			const size_t k = size_t(j) * g.n + i;
			const cplx pz = 1.0 + s.du[k], pzb = s.dbar_u[k];
			const cplx px = pz + pzb, py = cplx(0, 1) * (pz - pzb);
			const double J = std::norm(pz) - std::norm(pzb);
			const double m11 = std::norm(px), m22 = std::norm(py), m12 = (std::conj(px) * py).real();
			const double fx = 2 * dphi[k].real(), fy = -2 * dphi[k].imag();
			dir += w * (m22 * fx * fx - 2 * m12 * fx * fy + m11 * fy * fy) / J;
			const cplx psi = z + s.u[k];
			curv += w * geo::scalar_curvature(hat, psi) * s.phi[k] * std::exp(hat.sigma(psi)) * J;
		}
	dir *= h * h;
	curv *= h * h;

	// r = 1 / rho, d^2 z = rho^-3 d rho d theta
	std::vector<double> xr, wr;
	corr::gauss_jacobi(48, 0, 0, xr, wr);
	const int n_theta = 96;
	const double rho_max = 1 / r_in;
	double dir_t = 0, curv_t = 0;
	for (size_t a = 0; a < xr.size(); ++a) {
		const double rho = 0.5 * rho_max * (xr[a] + 1), wrho = 0.5 * rho_max * wr[a];
		const double r = 1 / rho;
		const double w = 1 - smooth_step(r, r_in, r_out);
		if (w == 0)
			continue;
		for (int b = 0; b < n_theta; ++b) {
			const cplx z = std::polar(r, 2 * M_PI * (b + 0.5) / n_theta);
			const HolomorphicJet jt = ext.at(z);
			const cplx psi = z + jt.u, dpsi = 1.0 + jt.du;
			const geo::SigmaJet sz = hat.jet(z), sp = hat.jet(psi);
			const double phi = sz.s - sp.s - std::log(std::norm(dpsi));
			const cplx dzphi = sz.d1 - sp.d1 * dpsi - jt.d2u / dpsi;
			const double wt = w * wrho * (2 * M_PI / n_theta) / (rho * rho * rho);
			dir_t += wt * 4 * std::norm(dzphi);
			curv_t += wt * geo::scalar_curvature(hat, psi) * phi * std::exp(sp.s) * std::norm(dpsi);
		}
	}
	return (dir + dir_t) / (96 * M_PI) + (curv + curv_t) / (48 * M_PI);
}

sym::SymbolValue metric_symbols(const geo::ConformalMetric &m, double c, const std::vector<double> &weights,
                                const std::map<sym::VarId, cplx> &values)
{
	auto point = [&values](sym::VarId v) {
		const bool bar = sym::is_bar(v);
		const auto it = values.find(bar ? sym::conj_var(v) : v);
		if (it == values.end())
			throw validation_error("MissingValue", "no value assigned to " + sym::var_name(v));
		return std::make_pair(it->second, bar);
	};
	return [&m, c, weights, point](sym::GenKey k) -> cplx {
		const int ord = sym::gen_order(k);
		switch (sym::gen_type(k)) {
		case sym::Gen::C: return c;
		case sym::Gen::Delta:
			if (sym::gen_a(k) < weights.size())
				return weights[sym::gen_a(k)];
			break;
		case sym::Gen::T:
			if (ord == 0) {
				auto [p, bar] = point(sym::gen_a(k));
				const cplx t = geo::t_field(m, p);
				return bar ? std::conj(t) : t;
			}
			break;
		case sym::Gen::Sigma:
			if (ord == 1 || ord == 2) {
				auto [p, bar] = point(sym::gen_a(k));
				const geo::SigmaJet j = m.jet(p);
				const cplx d = ord == 1 ? j.d1 : j.d2;
				return bar ? std::conj(d) : d;
			}
			break;
		case sym::Gen::R:
			if (ord == 0)
				return geo::scalar_curvature(m, point(sym::gen_a(k)).first);
			break;
		default: break;
		}
		throw numerical_error("UnsupportedSymbol", "no numeric value for " + sym::gen_name(k));
	};
}

XCheckReport run(const XCheckConfig &cfg, uint64_t seed)
{
	const auto &cc = cfg.corr;
	const auto &hat = cc.metric;
	const Grid &g = cfg.grid;
	const beltrami::Perturbation &f = cfg.f;
	if (f.grid.n != g.n || f.grid.half_width != g.half_width || f.fxx.size() != g.size())
		throw validation_error("InvalidGrid", "perturbation is not sampled on the check grid");
	if (!(cfg.eps > 0))
		throw validation_error("BadStep", "eps must be positive");
	const auto rep = corr::seiberg_check(cc);
	if (!rep.ok())
		throw validation_error("SeibergViolation", rep.describe());
	const size_t N = cc.insertions.size();
	std::vector<cplx> x(N);
	std::vector<double> weight(N);
	for (size_t i = 0; i < N; ++i) {
		x[i] = cc.insertions[i].x;
		weight[i] = corr::conformal_weight(cc.insertions[i].alpha, cc.Q());
		if (std::abs(x[i].real()) > g.support || std::abs(x[i].imag()) > g.support)
			throw validation_error("BadInsertion", "insertions must lie inside the grid support");
		if (clearance(f, x[i]) < 4)
			throw validation_error("PerturbationAtInsertion", "perturbation must vanish near every insertion");
	}
	const double c = cc.c();
	XCheckReport out;
	out.samples = cc.samples;

	// ---- finite differences: g_eps = e^phi psi^* hat
	// L = cA - sum Delta phi(x_i) at eps, 2 eps, -eps, -2 eps; the points move only at +-eps
	const double steps[4] = {cfg.eps, -cfg.eps, 2 * cfg.eps, -2 * cfg.eps};
	std::vector<cplx> moved[2];
	double log_factor[4];
	for (int m = 0; m < 4; ++m) {
		const auto mu = beltrami::coefficient_from_metric(hat, f, steps[m]);
		const auto sol = beltrami::solve(mu, cfg.solve);
		if (m == 0) {
			out.sup_norm = mu.sup_norm;
			out.terms_used = sol.terms_used;
			out.residual = sol.residual;
		}
		const Exterior ext(mu, sol);
		double lf = c * pulled_back_anomaly(mu, sol);
		std::vector<cplx> pts(N);
		for (size_t i = 0; i < N; ++i) {
			const HolomorphicJet jt = ext.at(x[i]);
			pts[i] = x[i] + jt.u;
			const double phi = hat.sigma(x[i]) - hat.sigma(pts[i]) - std::log(std::norm(1.0 + jt.du));
			lf -= weight[i] * phi;
		}
		if (m < 2)
			moved[m] = pts;
		log_factor[m] = lf;
	}
	out.fd_log_derivative =
	    (8 * (log_factor[0] - log_factor[1]) - (log_factor[2] - log_factor[3])) / (12 * cfg.eps);

	// ---- Ward side: raw T_zz correlation with one insertion, plus the trace part
	const auto tzz = sym::raw_from_normalized({0}, int(N));
	const auto trace = sym::trace_insertion(sym::base_correlation(int(N), sym::MetricMode::Symbolic), 0);
	std::map<sym::VarId, cplx> values;
	for (size_t i = 0; i < N; ++i)
		values[sym::xv(int(i))] = x[i];
	const sym::SymbolValue symbols = metric_symbols(hat, c, weight, values);
	cplx w0 = 0;
	double wtrace = 0;
	std::vector<cplx> wd(N, 0.0);
	const double h2 = g.h() * g.h();
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			const cplx fzz(f.fxx[k] - f.fyy[k], 2 * f.fxy[k]);
			const double fzzb = f.fxx[k] + f.fyy[k];
			if (fzz == cplx(0) && fzzb == 0)
				continue;
			const cplx zval = g.node(i, j);
			values[sym::zv(0)] = zval;
			const double dv = std::exp(hat.sigma(zval)) * h2;
			for (auto &[key, p] : tzz.terms) {
				const cplx coef = sym::evaluate(p, values, symbols) * fzz * dv;
				if (key.deriv.empty())
					w0 += coef;
				else if (key.deriv.size() == 1 && key.deriv[0].second == 1 &&
				         sym::kind_of(key.deriv[0].first) == sym::VarKind::X)
					wd[sym::index_of(key.deriv[0].first)] += coef;
				else
					throw numerical_error("UnsupportedTerm", "unexpected derivative term in the T_zz correlation");
			}
			// T_{z zbar} lowered against f^{z zbar}: the metric factor of the trace is -e^sigma
			for (auto &[key, p] : trace.terms)
				wtrace += -(sym::evaluate(p, values, symbols) * std::exp(hat.sigma(zval))).real() * fzzb * dv;
		}
	// (1/4 pi)(int T_zz f^zz + conjugate + 2 T_{z zbar} f^{z zbar})
	out.ward_trace = 2 * wtrace / (4 * M_PI);
	out.ward_log_derivative = 2 * w0.real() / (4 * M_PI) + out.ward_trace;
	// 2 Re(w d_x F) / 4 pi is the derivative of F along x + h w / 4 pi
	out.shift.resize(N);
	for (size_t i = 0; i < N; ++i)
		out.shift[i] = wd[i] / (4 * M_PI);

	// ---- Monte Carlo, independent streams for the two sides
	auto sampled = [&](const std::vector<cplx> &a, const std::vector<cplx> &b, uint64_t s, double h, double base) {
		corr::MomentSampler sampler(cc, {{hat, a}, {hat, b}});
		const auto m = sampler.run(s, cc.samples);
		const double pa = std::exp(sampler.log_prefactor(0)), pb = std::exp(sampler.log_prefactor(1));
		std::vector<double> d(cc.samples), mid(cc.samples);
		for (long n = 0; n < cc.samples; ++n) {
			const double fa = pa * m[0][n], fb = pb * m[1][n];
			d[n] = (fa - fb) / (2 * h) + base * 0.5 * (fa + fb);
			mid[n] = 0.5 * (fa + fb);
		}
		const auto [v, e] = corr::mean_and_error(d);
		const auto [mv, me] = corr::mean_and_error(mid);
		return std::make_tuple(Side{v, e}, mv, me);
	};
	const auto [fd, fmid, fmid_e] = sampled(moved[0], moved[1], seed, cfg.eps, out.fd_log_derivative);
	std::vector<cplx> xp(N), xm(N);
	for (size_t i = 0; i < N; ++i) {
		xp[i] = x[i] + cfg.eps * out.shift[i];
		xm[i] = x[i] - cfg.eps * out.shift[i];
	}
	const uint64_t ward_seed = seed ^ 0x9e3779b97f4a7c15ull;
	const auto [wd_side, wmid, wmid_e] = sampled(xp, xm, ward_seed, cfg.eps, out.ward_log_derivative);
	(void)fmid;
	(void)fmid_e;
	out.fd = fd.value;
	out.fd_error = fd.error;
	out.ward = wd_side.value;
	out.ward_error = wd_side.error;
	out.correlator = wmid;
	out.correlator_error = wmid_e;
	const double se = std::hypot(out.fd_error, out.ward_error);
	const double diff = std::abs(out.fd - out.ward);
	out.sigma_distance = diff == 0 ? 0 : (se > 0 ? diff / se : INFINITY);
	return out;
}

} // namespace lcft::xcheck
