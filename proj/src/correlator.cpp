#include "lcft/correlator.hpp"
#include "lcft/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace lcft::corr {

using field::Green;
using field::SpectralBasis;
using geo::QuadNode;

double CorrelatorConfig::alpha_sum() const
{
	double s = 0;
	for (auto &v : insertions)
		s += v.alpha;
	return s;
}

double conformal_weight(double alpha, double Q) { return alpha / 2 * (Q - alpha / 2); }

std::string SeibergReport::describe() const
{
	std::ostringstream o;
	switch (violated) {
	case None:
		o << "ok";
		break;
	case First:
		o << "first Seiberg bound violated: sum alpha - 2Q = " << slack_first << " must be positive";
		break;
	case Second:
		o << "second Seiberg bound violated at insertion " << insertion << ": alpha - Q = " << amount
		  << " must be negative";
		break;
	}
	return o.str();
}

SeibergReport seiberg_check(const CorrelatorConfig &cfg)
{
	SeibergReport r;
	const double Q = cfg.Q();
	r.slack_first = cfg.alpha_sum() - 2 * Q;
	r.slack_second = std::numeric_limits<double>::infinity();
	for (size_t i = 0; i < cfg.insertions.size(); ++i) {
		const double sl = Q - cfg.insertions[i].alpha;
		if (sl < r.slack_second) {
			r.slack_second = sl;
			r.insertion = int(i);
		}
	}
	if (r.slack_first <= 0) {
		r.violated = SeibergReport::First;
		r.amount = -r.slack_first;
		r.insertion = -1;
	} else if (r.slack_second <= 0) {
		r.violated = SeibergReport::Second;
		r.amount = -r.slack_second;
	} else
		r.insertion = -1;
	return r;
}

void gauss_jacobi(int n, double a, double b, std::vector<double> &x, std::vector<double> &w)
{
	if (n < 1 || a <= -1 || b <= -1)
		throw validation_error("BadQuadrature", "Gauss-Jacobi needs n >= 1 and exponents above -1");
	Eigen::VectorXd diag(n), off(std::max(n - 1, 1));
	const double ab = a + b;
	diag[0] = (b - a) / (ab + 2);
	for (int k = 1; k < n; ++k) {
		const double t = 2 * k + ab;
		diag[k] = (b * b - a * a) / (t * (t + 2));
		const double num = 4 * k * (k + a) * (k + b) * (k + ab);
		off[k - 1] = std::sqrt(k == 1 ? 4 * (1 + a) * (1 + b) / ((2 + ab) * (2 + ab) * (3 + ab))
		                              : num / (t * t * (t + 1) * (t - 1)));
	}
	x.assign(n, 0);
	w.assign(n, 0);
	const double mu0 = std::exp((ab + 1) * std::log(2.0) + std::lgamma(a + 1) + std::lgamma(b + 1) - std::lgamma(ab + 2));
	if (n == 1) {
		x[0] = diag[0];
		w[0] = mu0;
		return;
	}
	Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
	es.computeFromTridiagonal(diag, off.head(n - 1));
	for (int k = 0; k < n; ++k) {
		x[k] = es.eigenvalues()[k];
		const double v = es.eigenvectors()(0, k);
		w[k] = mu0 * v * v;
	}
}

namespace {

double pairwise_sum(const double *v, size_t n)
{
	if (n <= 8) {
		double s = 0;
		for (size_t i = 0; i < n; ++i)
			s += v[i];
		return s;
	}
	const size_t h = n / 2;
	return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

// C-infinity step: 1 on [0, 1/5], 0 on [1, inf)
double cutoff(double t)
{
	if (t <= 0.2)
		return 1;
	if (t >= 1)
		return 0;
	const double x = (1 - t) / 0.8; // in (0, 1)
	const double a = std::exp(-1 / x), b = std::exp(-1 / (1 - x));
	return a / (a + b);
}

cplx chart_coord(int chart, cplx z)
{
	if (chart == 0)
		return z;
	if (std::isinf(z.real()) || std::isinf(z.imag()))
		return 0;
	return 1.0 / z;
}

} // namespace

std::pair<double, double> mean_and_error(const std::vector<double> &v)
{
	const size_t n = v.size();
	if (n == 0)
		return {0, 0};
	const double mean = pairwise_sum(v.data(), n) / double(n);
	if (n == 1)
		return {mean, 0};
	std::vector<double> d(n);
	for (size_t i = 0; i < n; ++i)
		d[i] = (v[i] - mean) * (v[i] - mean);
	const double var = pairwise_sum(d.data(), n) / double(n - 1);
	return {mean, std::sqrt(var / double(n))};
}

struct Patch {
	int chart;
	cplx center; // chart coordinate
	double radius;
	double exponent; // gamma alpha
};

struct MomentSampler::Impl {
	double gamma = 0, s = 0;
	int N = 0;
	Eigen::MatrixXd C;          // nodes x N, sqrt(2 pi / lambda) e_n
	std::vector<Eigen::VectorXd> lw; // per view log weights (-inf: inactive)
	std::vector<Eigen::VectorXd> proj; // per view mean of the scaled modes
	std::vector<double> log_pref;
	int threads = 1;
};

namespace {

struct NodeInfo {
	int chart;
	cplx u;
	double log_area; // ln of the chart area element
	int patch = -1;  // owning patch (global index) or -1
};

struct ViewData {
	std::vector<double> alpha;
	std::vector<cplx> x;
	std::vector<Patch> patches;
	std::vector<int> patch_ids; // into the global patch list
};

std::shared_ptr<const Green> green_for(const ConformalMetric &m, int degree,
                                       std::map<const void *, std::shared_ptr<const Green>> &cache)
{
	auto &g = cache[m.impl.get()];
	if (!g)
		g = std::make_shared<Green>(m, degree);
	return g;
}

double chart_sigma(const ConformalMetric &m, int chart, cplx u)
{
	return chart == 0 ? m.jet(u).s : m.jet_infinity(u).s;
}

} // namespace

MomentSampler::MomentSampler(const CorrelatorConfig &cfg, std::vector<View> views) : impl_(std::make_unique<Impl>())
{
	auto &I = *impl_;
	const int n_ins = int(cfg.insertions.size());
	if (cfg.gamma <= 0 || cfg.gamma >= 2)
		throw validation_error("BadGamma", "gamma must lie in (0, 2)");
	if (cfg.mu <= 0)
		throw validation_error("BadMu", "mu must be positive");
	const auto sb = seiberg_check(cfg);
	if (!sb.ok())
		throw validation_error("SeibergViolation", sb.describe());
	if (!cfg.metric.is_sphere())
		throw validation_error("NotASphere", cfg.metric.name() + " is an open surface");
	I.gamma = cfg.gamma;
	I.s = cfg.s();
	I.threads = std::max(1, cfg.num.threads);
	const double g = cfg.gamma, Q = cfg.Q();
	for (auto &v : cfg.insertions)
		if (g * v.alpha >= 2)
			throw validation_error("StiffInsertion", "gamma alpha must be below 2 for the patch quadrature");

	// canonical order per view: (alpha, Re x, Im x)
	std::vector<ViewData> vd(views.size());
	for (size_t v = 0; v < views.size(); ++v) {
		if (int(views[v].points.size()) != n_ins)
			throw validation_error("BadView", "point count differs from the insertion count");
		std::vector<int> idx(n_ins);
		std::iota(idx.begin(), idx.end(), 0);
		auto key = [&](int i) {
			return std::make_tuple(cfg.insertions[i].alpha, views[v].points[i].real(), views[v].points[i].imag());
		};
		std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) < key(b); });
		for (int i : idx) {
			const cplx x = views[v].points[i];
			if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
				throw validation_error("BadInsertion", "insertion points must be finite");
			vd[v].alpha.push_back(cfg.insertions[i].alpha);
			vd[v].x.push_back(x);
		}
		for (int i = 0; i < n_ins; ++i)
			for (int j = 0; j < i; ++j)
				if (vd[v].x[i] == vd[v].x[j])
					throw validation_error("CoincidentPoints", "insertion points coincide");
	}

	// patches
	std::vector<Patch> patches;
	for (auto &d : vd) {
		const int n = int(d.x.size());
		std::vector<Patch> ps(n);
		for (int i = 0; i < n; ++i) {
			ps[i].chart = std::abs(d.x[i]) <= 1 ? 0 : 1;
			ps[i].center = chart_coord(ps[i].chart, d.x[i]);
			ps[i].exponent = g * d.alpha[i];
			double r = cfg.num.patch_radius;
			for (int j = 0; j < n; ++j)
				if (j != i)
					r = std::min(r, 0.45 * std::abs(chart_coord(ps[i].chart, d.x[j]) - ps[i].center));
			ps[i].radius = r;
		}
		// shrink until no patch reaches into another
		for (int it = 0; it < 40; ++it) {
			bool clash = false;
			for (int i = 0; i < n; ++i)
				for (int j = 0; j < n; ++j) {
					if (i == j)
						continue;
					for (int k = 0; k < 64 && !clash; ++k) {
						const cplx u = ps[i].center + std::polar(ps[i].radius, 2 * M_PI * k / 64);
						const cplx z = ps[i].chart == 0 ? u : 1.0 / u;
						if (std::abs(chart_coord(ps[j].chart, z) - ps[j].center) < ps[j].radius)
							clash = true;
					}
					if (clash) {
						ps[i].radius *= 0.8;
						ps[j].radius *= 0.8;
						break;
					}
				}
			if (!clash)
				break;
		}
		for (auto &p : ps) {
			d.patch_ids.push_back(int(patches.size()));
			patches.push_back(p);
		}
		d.patches = std::move(ps);
	}

	// nodes: global rule of the basis metric, then every patch
	auto basis = std::make_shared<const SpectralBasis>(SpectralBasis::build(cfg.metric, cfg.num.n_max));
	std::vector<NodeInfo> info;
	std::vector<QuadNode> qn;
	for (auto &q : geo::sphere_quadrature(cfg.metric, cfg.num.n_r, cfg.num.n_theta)) {
		info.push_back({q.chart, q.u, std::log(q.dA), -1});
		qn.push_back(q);
	}
	{
		std::vector<double> xr, wr;
		for (size_t p = 0; p < patches.size(); ++p) {
			const auto &P = patches[p];
			gauss_jacobi(cfg.num.patch_radial, 0, 1 - P.exponent, xr, wr);
			const double scale = std::pow(P.radius / 2, 2 - P.exponent);
			for (int a = 0; a < cfg.num.patch_radial; ++a) {
				const double r = P.radius * (1 + xr[a]) / 2;
				const double la = std::log(scale * wr[a] * 2 * M_PI / cfg.num.patch_angular) + P.exponent * std::log(r);
				for (int t = 0; t < cfg.num.patch_angular; ++t) {
					const cplx u = P.center + std::polar(r, 2 * M_PI * (t + 0.5 * (a % 2)) / cfg.num.patch_angular);
					info.push_back({P.chart, u, la, int(p)});
					QuadNode q{};
					q.chart = P.chart;
					q.u = u;
					q.z = P.chart == 0 ? u : 1.0 / u;
					qn.push_back(q);
				}
			}
		}
	}
	const Eigen::Index K = Eigen::Index(info.size());
	I.N = basis->size();
	I.C = basis->evaluate_nodes(qn);
	for (int n = 0; n < I.N; ++n)
		I.C.col(n) *= std::sqrt(2 * M_PI / basis->eigenvalues()[n]);
	const Eigen::VectorXd var = I.C.rowwise().squaredNorm();

	std::map<const void *, std::shared_ptr<const Green>> greens;
	std::map<const void *, Eigen::VectorXd> projections;
	const double lnZ = cfg.z_mode == ZMode::OpaqueConstant ? std::log(cfg.z_value) : 0.0;
	if (cfg.z_mode == ZMode::OpaqueConstant && !(cfg.z_value > 0))
		throw validation_error("BadZ", "the opaque partition constant must be positive");

	for (size_t v = 0; v < views.size(); ++v) {
		const ConformalMetric &m = views[v].metric;
		if (!m.is_sphere())
			throw validation_error("NotASphere", m.name() + " is an open surface");
		const auto G = green_for(m, cfg.num.shift_degree, greens);
		const auto &d = vd[v];
		const int n = int(d.x.size());

		Eigen::VectorXd p = Eigen::VectorXd::Zero(I.N);
		if (m.impl != cfg.metric.impl) {
			auto it = projections.find(m.impl.get());
			if (it == projections.end()) {
				auto nodes = geo::sphere_quadrature(m, 96, 128);
				Eigen::MatrixXd E = basis->evaluate_nodes(nodes);
				Eigen::VectorXd dv(nodes.size());
				for (size_t k = 0; k < nodes.size(); ++k)
					dv[Eigen::Index(k)] = nodes[k].dv;
				Eigen::VectorXd mean = E.transpose() * dv / dv.sum();
				for (int k = 0; k < I.N; ++k)
					mean[k] *= std::sqrt(2 * M_PI / basis->eigenvalues()[k]);
				it = projections.emplace(m.impl.get(), mean).first;
			}
			p = it->second;
		}
		const Eigen::VectorXd Cp = I.C * p;
		const double pp = p.squaredNorm();

		Eigen::VectorXd lw(K);
		for (Eigen::Index k = 0; k < K; ++k) {
			const auto &nd = info[size_t(k)];
			double part;
			if (nd.patch < 0) {
				const cplx z = qn[size_t(k)].z;
				part = 1;
				for (auto &P : d.patches)
					part -= cutoff(std::abs(chart_coord(P.chart, z) - P.center) / P.radius);
			} else {
				auto pos = std::find(d.patch_ids.begin(), d.patch_ids.end(), nd.patch);
				if (pos == d.patch_ids.end())
					part = 0;
				else {
					const Patch &P = patches[size_t(nd.patch)];
					part = cutoff(std::abs(nd.u - P.center) / P.radius);
				}
			}
			if (part <= 0 || std::isinf(nd.log_area)) {
				lw[k] = -std::numeric_limits<double>::infinity();
				continue;
			}
			// evaluation point, pulled off infinity
			cplx ue = nd.u;
			if (nd.chart == 1 && std::abs(ue) < 1e-9)
				ue = 1e-9;
			const cplx z = nd.chart == 0 ? ue : 1.0 / ue;
			const double sc = chart_sigma(m, nd.chart, ue);
			const double sz = nd.chart == 0 ? sc : sc + 4 * std::log(std::abs(ue));
			double gh = -Q / (4 * M_PI) * G->curvature_potential(z);
			for (int i = 0; i < n; ++i)
				gh += d.alpha[i] * (*G)(z, d.x[i]);
			const double vk = var[k] - 2 * Cp[k] + pp;
			lw[k] = std::log(part) + nd.log_area + sc + g * gh + g * g / 4 * sz + g * g / 2 * G->regular(z, z) -
			        g * g / 2 * vk;
		}
		I.lw.push_back(std::move(lw));
		I.proj.push_back(std::move(p));

		double lp = -std::log(g) - I.s * std::log(cfg.mu) + std::lgamma(I.s) + lnZ;
		for (int i = 0; i < n; ++i) {
			for (int j = 0; j < i; ++j)
				lp += d.alpha[i] * d.alpha[j] * (*G)(d.x[i], d.x[j]);
			lp -= Q / (4 * M_PI) * d.alpha[i] * G->curvature_potential(d.x[i]);
			lp += d.alpha[i] * d.alpha[i] * (m.sigma(d.x[i]) / 4 + G->regular(d.x[i], d.x[i]) / 2);
		}
		lp += 0.5 * std::pow(Q / (4 * M_PI), 2) * G->curvature_energy();
		I.log_pref.push_back(lp);
	}
}

MomentSampler::~MomentSampler() = default;

int MomentSampler::views() const { return int(impl_->lw.size()); }

double MomentSampler::log_prefactor(int view) const { return impl_->log_pref.at(size_t(view)); }

double MomentSampler::zero_field_mass(int view) const { return impl_->lw.at(size_t(view)).array().exp().sum(); }

int MomentSampler::nodes() const { return int(impl_->C.rows()); }

std::vector<std::vector<double>> MomentSampler::run(uint64_t seed, long count) const
{
	const auto &I = *impl_;
	const size_t V = I.lw.size();
	std::vector<std::vector<double>> out(V, std::vector<double>(size_t(std::max(0L, count))));
	const long chunk = 64;
	const long n_chunks = (count + chunk - 1) / chunk;
	auto work = [&](long c0, long stride) {
		for (long c = c0; c < n_chunks; c += stride) {
			const long lo = c * chunk, hi = std::min(count, lo + chunk);
			Eigen::MatrixXd A(I.N, hi - lo);
			for (long i = lo; i < hi; ++i) {
				auto a = field::standard_normals(seed, uint64_t(i), I.N);
				A.col(i - lo) = Eigen::Map<Eigen::VectorXd>(a.data(), I.N);
			}
			const Eigen::MatrixXd X = I.C * A;
			for (size_t v = 0; v < V; ++v) {
				const Eigen::VectorXd shift = A.transpose() * I.proj[v];
				for (long i = lo; i < hi; ++i) {
					const auto x = X.col(i - lo).array();
					const double M = (I.lw[v].array() + I.gamma * (x - shift[i - lo])).exp().sum();
					out[v][size_t(i)] = std::exp(-I.s * std::log(M));
				}
			}
		}
	};
	if (I.threads == 1 || n_chunks < 2)
		work(0, 1);
	else {
		std::vector<std::thread> pool;
		for (int t = 0; t < I.threads; ++t)
			pool.emplace_back(work, long(t), long(I.threads));
		for (auto &t : pool)
			t.join();
	}
	return out;
}

namespace {

Estimate finish(const MomentSampler &S, int view, std::vector<double> y, const CorrelatorConfig &cfg)
{
	Estimate e;
	e.s = cfg.s();
	e.samples = long(y.size());
	e.log_prefactor = S.log_prefactor(view);
	std::tie(e.moment, e.moment_std_error) = mean_and_error(y);
	const double P = std::exp(e.log_prefactor);
	e.value = P * e.moment;
	e.std_error = P * e.moment_std_error;
	for (auto &v : y)
		v *= P;
	e.per_sample = std::move(y);
	if (!(e.moment > 0) || !std::isfinite(e.value) || e.std_error > cfg.num.max_rel_error * e.value)
		throw numerical_error("MCDegenerate", "relative standard error " + std::to_string(e.std_error / e.value) +
		                                          " exceeds the cap " + std::to_string(cfg.num.max_rel_error));
	return e;
}

} // namespace

Estimate moment_estimate_at(const CorrelatorConfig &cfg, const std::vector<cplx> &points, uint64_t seed)
{
	MomentSampler S(cfg, {{cfg.metric, points}});
	return finish(S, 0, std::move(S.run(seed, cfg.samples)[0]), cfg);
}

Estimate moment_estimate(const CorrelatorConfig &cfg, uint64_t seed)
{
	std::vector<cplx> pts;
	for (auto &v : cfg.insertions)
		pts.push_back(v.x);
	return moment_estimate_at(cfg, pts, seed);
}

WeylCheck weyl_covariance_check(const CorrelatorConfig &cfg, const geo::WeylDirection &phi, uint64_t seed)
{
	std::vector<cplx> pts;
	for (auto &v : cfg.insertions)
		pts.push_back(v.x);
	bool zero = true;
	for (auto &x : pts)
		zero = zero && phi.value(x) == 0;
	for (auto &q : geo::sphere_quadrature(cfg.metric, 96, 128))
		zero = zero && (q.chart == 1 && q.u == cplx(0) ? true : phi.value(q.z) == 0);
	const ConformalMetric gp = zero ? cfg.metric : geo::weyl_transform(cfg.metric, phi);

	MomentSampler S(cfg, {{cfg.metric, pts}, {gp, pts}});
	auto y = S.run(seed, cfg.samples);
	const Estimate base = finish(S, 0, std::move(y[0]), cfg);
	const Estimate moved = finish(S, 1, std::move(y[1]), cfg);

	WeylCheck w;
	w.anomaly = zero ? 0.0 : geo::anomaly(cfg.metric, phi);
	w.log_factor = (cfg.c() - 1) * w.anomaly;
	for (auto &v : cfg.insertions)
		w.log_factor -= conformal_weight(v.alpha, cfg.Q()) * phi.value(v.x);
	const double R = std::exp(w.log_factor);
	w.lhs = moved.value;
	w.lhs_error = moved.std_error;
	w.rhs = R * base.value;
	w.rhs_error = R * base.std_error;
	std::vector<double> d(base.per_sample.size());
	for (size_t k = 0; k < d.size(); ++k)
		d[k] = moved.per_sample[k] - R * base.per_sample[k];
	w.difference_error = mean_and_error(d).second;
	const double diff = w.lhs - w.rhs;
	w.sigma_distance = diff == 0 ? 0.0 : std::abs(diff) / w.difference_error;
	return w;
}

} // namespace lcft::corr
