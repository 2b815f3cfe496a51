#include "lcft/beltrami.hpp"

#include "lcft/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace lcft::beltrami {

namespace {

std::mutex &fftw_mutex()
{
	static std::mutex m;
	return m;
}

// Z(1) for P(m) = conj(m)^4 over the square lattice: 6 G_4(i) / pi^3, G_4(i) = Gamma(1/4)^8 / (960 pi^2)
double lattice_constant()
{
	const double g4 = std::pow(std::tgamma(0.25), 8) / (960 * M_PI * M_PI);
	return 6 * g4 / (M_PI * M_PI * M_PI);
}

// eighth-order central first differences along x (dir 0) or y (dir 1)
CGrid diff(const CGrid &f, int n, double h, int dir)
{
	static const double c[4] = {4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
	CGrid out(f.size(), 0.0);
	for (int j = 4; j < n - 4; ++j)
		for (int i = 4; i < n - 4; ++i) {
			cplx s = 0;
			for (int k = 1; k <= 4; ++k) {
				const size_t p = dir == 0 ? size_t(j) * n + i + k : size_t(j + k) * n + i;
				const size_t m = dir == 0 ? size_t(j) * n + i - k : size_t(j - k) * n + i;
				s += c[k - 1] * (f[p] - f[m]);
			}
			out[size_t(j) * n + i] = s / h;
		}
	return out;
}

} // namespace

CGrid d_z(const Grid &g, const CGrid &f)
{
	auto fx = diff(f, g.n, g.h(), 0), fy = diff(f, g.n, g.h(), 1);
	for (size_t k = 0; k < f.size(); ++k)
		fx[k] = 0.5 * (fx[k] - cplx(0, 1) * fy[k]);
	return fx;
}

CGrid d_zbar(const Grid &g, const CGrid &f)
{
	auto fx = diff(f, g.n, g.h(), 0), fy = diff(f, g.n, g.h(), 1);
	for (size_t k = 0; k < f.size(); ++k)
		fx[k] = 0.5 * (fx[k] + cplx(0, 1) * fy[k]);
	return fx;
}

struct Transforms::Impl {
	int P = 0;
	fftw_complex *k = nullptr; // spectrum of h^2/(pi d), d != 0, divided by P^2
	fftw_plan fwd = nullptr, bwd = nullptr;
	~Impl()
	{
		std::lock_guard lock(fftw_mutex());
		fftw_destroy_plan(fwd);
		fftw_destroy_plan(bwd);
		fftw_free(k);
	}
};

Transforms::Transforms(const Grid &g) : grid_(g), impl_(std::make_unique<Impl>())
{
	if (g.n < 32 || g.half_width <= 0 || g.support <= 0 || g.support + 16 * g.h() >= g.half_width)
		throw validation_error("InvalidGrid", "Beltrami grid needs n >= 32 and a margin of 16 nodes around the support");
	const int n = g.n, P = 2 * n;
	const double h = g.h();
	impl_->P = P;
	const size_t PP = size_t(P) * P;
	{
		std::lock_guard lock(fftw_mutex());
		impl_->k = fftw_alloc_complex(PP);
		impl_->fwd = fftw_plan_dft_2d(P, P, impl_->k, impl_->k, FFTW_FORWARD, FFTW_ESTIMATE);
		impl_->bwd = fftw_plan_dft_2d(P, P, impl_->k, impl_->k, FFTW_BACKWARD, FFTW_ESTIMATE);
	}
	for (size_t q = 0; q < PP; ++q)
		impl_->k[q][0] = impl_->k[q][1] = 0;
	for (int j = -(n - 1); j <= n - 1; ++j)
		for (int i = -(n - 1); i <= n - 1; ++i) {
			if (i == 0 && j == 0)
				continue;
			const cplx c = h * h / (M_PI * cplx(i * h, j * h));
			const size_t q = size_t((j + P) % P) * P + size_t((i + P) % P);
			impl_->k[q][0] = c.real() / double(PP);
			impl_->k[q][1] = c.imag() / double(PP);
		}
	fftw_execute_dft(impl_->fwd, impl_->k, impl_->k);
}

Transforms::~Transforms() = default;

CGrid Transforms::convolve(const CGrid &f) const
{
	const int n = grid_.n, P = impl_->P;
	const size_t PP = size_t(P) * P;
	fftw_complex *a = fftw_alloc_complex(PP);
	for (size_t q = 0; q < PP; ++q)
		a[q][0] = a[q][1] = 0;
	for (int j = 0; j < n; ++j)
		for (int i = 0; i < n; ++i) {
			const size_t q = size_t(j) * P + i;
			a[q][0] = f[size_t(j) * n + i].real();
			a[q][1] = f[size_t(j) * n + i].imag();
		}
	fftw_execute_dft(impl_->fwd, a, a);
	for (size_t q = 0; q < PP; ++q) {
		const cplx v = cplx(a[q][0], a[q][1]) * cplx(impl_->k[q][0], impl_->k[q][1]);
		a[q][0] = v.real();
		a[q][1] = v.imag();
	}
	fftw_execute_dft(impl_->bwd, a, a);
	CGrid out(grid_.size());
	for (int j = 0; j < n; ++j)
		for (int i = 0; i < n; ++i) {
			const size_t q = size_t(j) * P + i;
			out[size_t(j) * n + i] = cplx(a[q][0], a[q][1]);
		}
	fftw_free(a);
	return out;
}

// punctured trapezoidal rule plus the local lattice corrections -(h^2/pi) d f + (c h^4 / 6 pi) dbar^3 f
CGrid Transforms::corrected(const CGrid &f) const
{
	const double h = grid_.h();
	CGrid out = convolve(f);
	const CGrid df = d_z(grid_, f), d3 = d_zbar(grid_, d_zbar(grid_, d_zbar(grid_, f)));
	const double c2 = h * h / M_PI, c4 = std::pow(h, 4) * lattice_constant() / (6 * M_PI);
	for (size_t q = 0; q < out.size(); ++q)
		out[q] += -c2 * df[q] + c4 * d3[q];
	return out;
}

void Transforms::apply(const CGrid &f, CGrid *cauchy, CGrid *beurling) const
{
	const int n = grid_.n;
	if (f.size() != grid_.size())
		throw validation_error("InvalidGrid", "grid function has the wrong size");
	const double S = grid_.support * (1 + 1e-12);
	for (int j = 0; j < n; ++j)
		for (int i = 0; i < n; ++i) {
			const cplx z = grid_.node(i, j);
			if (f[size_t(j) * n + i] != 0.0 && (std::abs(z.real()) > S || std::abs(z.imag()) > S))
				throw validation_error("SupportOverflow", "grid function is nonzero outside the support box");
		}
	if (cauchy)
		*cauchy = corrected(f);
	if (beurling)
		*beurling = corrected(d_z(grid_, f));
}

CGrid Transforms::cauchy(const CGrid &f) const
{
	CGrid out;
	apply(f, &out, nullptr);
	return out;
}

CGrid Transforms::beurling(const CGrid &f) const
{
	CGrid out;
	apply(f, nullptr, &out);
	return out;
}

std::shared_ptr<const Transforms> Transforms::get(const Grid &g)
{
	static std::mutex m;
	static std::map<std::tuple<int, double, double>, std::weak_ptr<const Transforms>> cache;
	std::lock_guard lock(m);
	auto key = std::make_tuple(g.n, g.half_width, g.support);
	if (auto p = cache[key].lock())
		return p;
	auto p = std::make_shared<const Transforms>(g);
	cache[key] = p;
	return p;
}

CGrid cauchy_transform(const Grid &g, const CGrid &f) { return Transforms::get(g)->cauchy(f); }

CGrid beurling_transform(const Grid &g, const CGrid &f) { return Transforms::get(g)->beurling(f); }

Perturbation Perturbation::zero(const Grid &g)
{
	return {g, RGrid(g.size(), 0.0), RGrid(g.size(), 0.0), RGrid(g.size(), 0.0)};
}

Perturbation Perturbation::traceless(const Grid &g, const RGrid &f)
{
	Perturbation p = zero(g);
	for (size_t k = 0; k < g.size(); ++k) {
		p.fxx[k] = 0.5 * f[k];
		p.fyy[k] = -0.5 * f[k];
	}
	return p;
}

BeltramiCoefficient coefficient_from_metric(const ConformalMetric &hat, const Perturbation &f, double eps)
{
	const Grid &g = f.grid;
	const size_t N = g.size();
	if (f.fxx.size() != N || f.fxy.size() != N || f.fyy.size() != N)
		throw validation_error("InvalidGrid", "perturbation components have the wrong size");
	BeltramiCoefficient out{g, hat, CGrid(N), 0, RGrid(N), RGrid(N), RGrid(N), RGrid(N), RGrid(N)};
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			const double s = hat.sigma(g.node(i, j)), es = std::exp(-s);
			// inverse metric
			const double ixx = es + eps * f.fxx[k], ixy = eps * f.fxy[k], iyy = es + eps * f.fyy[k];
			const double idet = ixx * iyy - ixy * ixy;
			if (!(ixx > 0 && idet > 0))
				throw validation_error("NotPositiveDefinite", "perturbed inverse metric is not positive definite");
			const double gxx = iyy / idet, gxy = -ixy / idet, gyy = ixx / idet, sq = 1 / std::sqrt(idet);
			const double cxx = gxx / sq, cxy = gxy / sq, cyy = gyy / sq; // gamma, det gamma = 1
			const cplx zbzb(0.25 * (cxx - cyy), 0.5 * cxy);
			const double zzb = 0.25 * (cxx + cyy);
			out.mu[k] = zbzb / (0.5 + zzb);
			out.sigma[k] = s;
			// det(delta + zeta) = det g e^{-2 sigma}
			out.half_log_det[k] = std::log(sq) - s;
			out.gxx[k] = gxx;
			out.gxy[k] = gxy;
			out.gyy[k] = gyy;
			out.sup_norm = std::max(out.sup_norm, std::abs(out.mu[k]));
		}
	if (out.sup_norm >= 1)
		throw numerical_error("SupercriticalCoefficient", "Beltrami coefficient has sup norm >= 1");
	return out;
}

namespace {

double sup(const CGrid &f)
{
	double m = 0;
	for (auto &x : f)
		m = std::max(m, std::abs(x));
	return m;
}

} // namespace

std::array<double, 3> reconstructed_metric(const BeltramiCoefficient &mu, const DiffeoSolution &s, size_t k)
{
	const cplx dpsi = 1.0 + s.du[k], dbpsi = s.dbar_u[k];
	const cplx px = dpsi + dbpsi, py = cplx(0, 1) * (dpsi - dbpsi);
	const size_t n = size_t(mu.grid.n);
	const cplx z = mu.grid.node(int(k % n), int(k / n)) + s.u[k];
	const double w = std::exp(s.phi[k] + mu.hat.sigma(z));
	auto dot = [](cplx a, cplx b) { return a.real() * b.real() + a.imag() * b.imag(); };
	return {w * dot(px, px), w * dot(px, py), w * dot(py, py)};
}

DiffeoSolution solve(const BeltramiCoefficient &mu, const SolveOptions &opt)
{
	const Grid &g = mu.grid;
	if (mu.sup_norm >= 1)
		throw validation_error("SupercriticalCoefficient", "Beltrami coefficient has sup norm >= 1");
	auto T = Transforms::get(g);
	const size_t N = g.size();
	DiffeoSolution out;
	out.grid = g;
	out.sup_norm = mu.sup_norm;
	out.u.assign(N, 0.0);
	out.du.assign(N, 0.0);
	out.dbar_u.assign(N, 0.0);
	const double h = g.h();
	// v_0 = mu, u_n = C v_n, v_{n+1} = mu B v_n
	CGrid v = mu.mu, cv, bv;
	bool converged = false;
	for (int n = 0; n < opt.max_terms; ++n) {
		T->apply(v, &cv, &bv);
		double l2 = 0;
		for (size_t k = 0; k < N; ++k) {
			out.u[k] += cv[k];
			out.du[k] += bv[k];
			out.dbar_u[k] += v[k];
			l2 += std::norm(v[k]);
		}
		out.v_norms.push_back(std::sqrt(l2) * h);
		out.term_norms.push_back(sup(cv));
		if (n < opt.keep_terms)
			out.series_terms.push_back(cv);
		out.terms_used = n + 1;
		if (out.term_norms.back() < opt.tol && sup(v) < opt.tol) {
			converged = true;
			break;
		}
		for (size_t k = 0; k < N; ++k)
			v[k] = mu.mu[k] * bv[k];
	}
	if (!converged)
		throw numerical_error("NoConvergence", "Neumann series did not reach the tolerance in " +
		                                           std::to_string(opt.max_terms) + " terms");
	out.phi.assign(N, 0.0);
	out.min_jacobian = INFINITY;
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			const double J = std::norm(1.0 + out.du[k]) - std::norm(out.dbar_u[k]);
			out.min_jacobian = std::min(out.min_jacobian, J);
			out.residual = std::max(out.residual, std::abs(out.dbar_u[k] - mu.mu[k] * (1.0 + out.du[k])));
			if (J <= 0)
				continue;
			const cplx psi = g.node(i, j) + out.u[k];
			out.phi[k] = mu.sigma[k] - mu.hat.sigma(psi) + mu.half_log_det[k] - std::log(J);
		}
	if (!(out.min_jacobian > 0))
		throw numerical_error("NotInjective", "psi has a non-positive Jacobian on the grid");
	for (size_t k = 0; k < N; ++k) {
		const auto r = reconstructed_metric(mu, out, k);
		const double dx = r[0] - mu.gxx[k], dy = r[1] - mu.gxy[k], dz = r[2] - mu.gyy[k];
		const double nrm = std::sqrt(mu.gxx[k] * mu.gxx[k] + 2 * mu.gxy[k] * mu.gxy[k] + mu.gyy[k] * mu.gyy[k]);
		out.reconstruction_error =
		    std::max(out.reconstruction_error, std::sqrt(dx * dx + 2 * dy * dy + dz * dz) / nrm);
	}
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i)
			if (i == 0 || j == 0 || i == g.n - 1 || j == g.n - 1)
				out.decay_constant = std::max(out.decay_constant,
				                              std::abs(out.u[size_t(j) * g.n + i]) * (1 + std::abs(g.node(i, j))));
	return out;
}

FirstOrder first_order_data(const ConformalMetric &hat, const Grid &g, const RGrid &f)
{
	if (f.size() != g.size())
		throw validation_error("InvalidGrid", "perturbation has the wrong size");
	CGrid w(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			w[k] = f[k] == 0 ? 0.0 : -0.25 * std::exp(hat.sigma(g.node(i, j))) * f[k];
		}
	FirstOrder out;
	Transforms::get(g)->apply(w, &out.u1, &out.du1);
	out.phi1.resize(g.size());
	for (int j = 0; j < g.n; ++j)
		for (int i = 0; i < g.n; ++i) {
			const size_t k = size_t(j) * g.n + i;
			out.phi1[k] = -out.u1[k] * hat.jet(g.node(i, j)).d1 - out.du1[k];
		}
	return out;
}

} // namespace lcft::beltrami
