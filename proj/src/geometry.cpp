#include "lcft/geometry.hpp"

#include "lcft/errors.hpp"
#include "lcft/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace lcft::geo {

namespace {

SigmaJet round_jet(cplx z, double curvature)
{
	const double r2 = std::norm(z), d = 1 + r2;
	SigmaJet j;
	j.s = std::log(8.0 / curvature) - 2 * std::log(d);
	j.d1 = -2.0 * std::conj(z) / d;
	j.d2 = 2.0 * std::conj(z) * std::conj(z) / (d * d);
	j.lap = -2.0 / (d * d);
	return j;
}

SigmaJet bump_jet(cplx z, const Bump &b)
{
	const cplx u = z - b.center;
	const double w2 = b.width * b.width;
	const double v = b.amplitude * std::exp(-std::norm(u) / w2);
	const cplx a = -std::conj(u) / w2;
	return {v, a * v, a * a * v, v * (std::norm(u) / (w2 * w2) - 1 / w2)};
}

// jet of a function (no log term) moved to the other chart, w = 1/z
SigmaJet swap_chart(const SigmaJet &j, cplx z)
{
	SigmaJet r;
	r.s = j.s;
	r.d1 = -z * z * j.d1;
	r.d2 = j.d2 * z * z * z * z + 2.0 * j.d1 * z * z * z;
	r.lap = j.lap * std::norm(z) * std::norm(z);
	return r;
}

SigmaJet operator+(SigmaJet a, const SigmaJet &b)
{
	a.s += b.s;
	a.d1 += b.d1;
	a.d2 += b.d2;
	a.lap += b.lap;
	return a;
}

// finite-chart jet of sigma at z from the infinity-chart jet at zeta = 1/z
SigmaJet from_infinity(const SigmaJet &t, cplx zeta)
{
	SigmaJet r;
	const cplx z = 1.0 / zeta;
	r.s = t.s - 4 * std::log(std::abs(z));
	r.d1 = -zeta * zeta * t.d1 - 2.0 / z;
	r.d2 = t.d2 * std::pow(zeta, 4) + 2.0 * t.d1 * std::pow(zeta, 3) + 2.0 * zeta * zeta;
	r.lap = t.lap * std::norm(zeta) * std::norm(zeta);
	return r;
}

double smooth_step(double t)
{
	auto f = [](double x) { return x > 0 ? std::exp(-1 / x) : 0.0; };
	if (t <= 0)
		return 0;
	if (t >= 1)
		return 1;
	return f(t) / (f(t) + f(1 - t));
}

struct Cubic {
	// Catmull-Rom weights
	static void weights(double t, double w[4])
	{
		const double t2 = t * t, t3 = t2 * t;
		w[0] = -0.5 * t3 + t2 - 0.5 * t;
		w[1] = 1.5 * t3 - 2.5 * t2 + 1;
		w[2] = -1.5 * t3 + 2 * t2 + 0.5 * t;
		w[3] = 0.5 * t3 - 0.5 * t2;
	}
};

std::vector<SigmaJet> fd_jets(const io::GridBlock &g)
{
	const int nx = int(g.nx), ny = int(g.ny);
	const double h = g.h();
	std::vector<SigmaJet> out(size_t(nx) * ny);
	auto f = [&](int i, int j) { return g.at(uint32_t(i), uint32_t(j)); };
	for (int j = 0; j < ny; ++j)
		for (int i = 0; i < nx; ++i) {
			double fx, fy, fxx, fyy, fxy;
			const bool inner = i >= 2 && i < nx - 2 && j >= 2 && j < ny - 2;
			if (inner) {
				auto d1 = [&](int di, int dj) {
					return (-f(i + 2 * di, j + 2 * dj) + 8 * f(i + di, j + dj) - 8 * f(i - di, j - dj) +
					        f(i - 2 * di, j - 2 * dj)) /
					       (12 * h);
				};
				auto d2 = [&](int di, int dj) {
					return (-f(i + 2 * di, j + 2 * dj) + 16 * f(i + di, j + dj) - 30 * f(i, j) + 16 * f(i - di, j - dj) -
					        f(i - 2 * di, j - 2 * dj)) /
					       (12 * h * h);
				};
				fx = d1(1, 0);
				fy = d1(0, 1);
				fxx = d2(1, 0);
				fyy = d2(0, 1);
				// fourth-order mixed derivative from the tensor stencil
				const double c[5] = {1, -8, 0, 8, -1};
				fxy = 0;
				for (int a = 0; a < 5; ++a)
					for (int b = 0; b < 5; ++b)
						if (c[a] != 0 && c[b] != 0)
							fxy += c[a] * c[b] * f(i + a - 2, j + b - 2);
				fxy /= 144 * h * h;
			} else {
				const int ic = std::clamp(i, 1, nx - 2), jc = std::clamp(j, 1, ny - 2);
				fx = (f(ic + 1, j) - f(ic - 1, j)) / (2 * h);
				fy = (f(i, jc + 1) - f(i, jc - 1)) / (2 * h);
				fxx = (f(ic + 1, j) - 2 * f(ic, j) + f(ic - 1, j)) / (h * h);
				fyy = (f(i, jc + 1) - 2 * f(i, jc) + f(i, jc - 1)) / (h * h);
				fxy = (f(ic + 1, jc + 1) - f(ic + 1, jc - 1) - f(ic - 1, jc + 1) + f(ic - 1, jc - 1)) / (4 * h * h);
			}
			SigmaJet &s = out[size_t(j) * nx + i];
			s.s = f(i, j);
			s.d1 = 0.5 * cplx(fx, -fy);
			s.d2 = 0.25 * cplx(fxx - fyy, -2 * fxy);
			s.lap = 0.25 * (fxx + fyy);
		}
	return out;
}

SigmaJet interpolate(const io::GridBlock &g, const std::vector<SigmaJet> &jets, cplx u)
{
	const double h = g.h();
	const double fx = (u.real() + g.half_width) / h, fy = (u.imag() + g.half_width) / h;
	int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
	i0 = std::clamp(i0, 1, int(g.nx) - 3);
	j0 = std::clamp(j0, 1, int(g.ny) - 3);
	double wx[4], wy[4];
	Cubic::weights(fx - i0, wx);
	Cubic::weights(fy - j0, wy);
	SigmaJet r;
	for (int b = 0; b < 4; ++b)
		for (int a = 0; a < 4; ++a) {
			const SigmaJet &s = jets[size_t(j0 - 1 + b) * g.nx + size_t(i0 - 1 + a)];
			const double w = wx[a] * wy[b];
			r.s += w * s.s;
			r.d1 += w * s.d1;
			r.d2 += w * s.d2;
			r.lap += w * s.lap;
		}
	return r;
}

} // namespace

struct ConformalMetric::Impl {
	MetricKind kind;
	std::string name;
	double curvature = 0;
	JetFn finite, infinity;
	std::shared_ptr<GridCharts> grid;
	std::vector<SigmaJet> jets[2];
};

ConformalMetric ConformalMetric::round(double curvature)
{
	if (!(curvature > 0))
		throw validation_error("BadCurvature", "round curvature must be positive");
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::RoundSphere;
	im->name = "round";
	im->curvature = curvature;
	im->finite = [curvature](cplx z) { return round_jet(z, curvature); };
	im->infinity = im->finite;
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::equator()
{
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::Equator;
	im->name = "equator";
	im->finite = [](cplx) { return SigmaJet{}; };
	im->infinity = im->finite;
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::flat()
{
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::FlatPatch;
	im->name = "flat";
	im->finite = [](cplx) { return SigmaJet{}; };
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::round_with_bumps(const std::vector<Bump> &bumps, double curvature)
{
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::ClosedForm;
	im->name = "round+bumps";
	im->curvature = curvature;
	im->finite = [bumps, curvature](cplx z) {
		SigmaJet j = round_jet(z, curvature);
		for (auto &b : bumps)
			j = j + bump_jet(z, b);
		return j;
	};
	im->infinity = [bumps, curvature](cplx zeta) {
		SigmaJet j = round_jet(zeta, curvature);
		if (zeta == cplx(0))
			return j;
		const cplx z = 1.0 / zeta;
		for (auto &b : bumps)
			j = j + swap_chart(bump_jet(z, b), z);
		return j;
	};
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::closed_form(JetFn finite, JetFn infinity, std::string name)
{
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::ClosedForm;
	im->name = std::move(name);
	im->finite = std::move(finite);
	im->infinity = std::move(infinity);
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::from_grid(GridCharts charts, std::string name)
{
	auto im = std::make_shared<Impl>();
	im->kind = MetricKind::GridSigma;
	im->name = std::move(name);
	if (charts.infinity.data.empty()) {
		// no infinity block: round continuation near infinity
		charts.infinity = charts.finite;
		for (uint32_t j = 0; j < charts.infinity.ny; ++j)
			for (uint32_t i = 0; i < charts.infinity.nx; ++i)
				charts.infinity.at(i, j) = round_jet({charts.infinity.x(i), charts.infinity.y(j)}, 2.0).s;
	}
	const double L = charts.finite.half_width;
	if (L < 1.26)
		throw validation_error("GridFormat", "chart grids must cover [-1.26, 1.26]^2");
	im->grid = std::make_shared<GridCharts>(std::move(charts));
	im->jets[0] = fd_jets(im->grid->finite);
	im->jets[1] = fd_jets(im->grid->infinity);
	const Impl *raw = im.get();
	im->finite = [raw](cplx z) { return interpolate(raw->grid->finite, raw->jets[0], z); };
	im->infinity = [raw](cplx z) { return interpolate(raw->grid->infinity, raw->jets[1], z); };
	ConformalMetric m;
	m.impl = im;
	return m;
}

ConformalMetric ConformalMetric::sample_to_grid(const ConformalMetric &m, int n, double half_width)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", "only sphere metrics can be sampled on both charts");
	GridCharts c;
	for (io::GridBlock *b : {&c.finite, &c.infinity}) {
		b->nx = b->ny = uint32_t(n);
		b->half_width = float(half_width);
		b->data.resize(size_t(n) * n);
	}
	for (int j = 0; j < n; ++j)
		for (int i = 0; i < n; ++i) {
			cplx u(c.finite.x(uint32_t(i)), c.finite.y(uint32_t(j)));
			c.finite.at(uint32_t(i), uint32_t(j)) = m.impl->finite(u).s;
			c.infinity.at(uint32_t(i), uint32_t(j)) = m.impl->infinity(u).s;
		}
	return from_grid(std::move(c), m.name() + "@grid");
}

MetricKind ConformalMetric::kind() const { return impl->kind; }
const std::string &ConformalMetric::name() const { return impl->name; }
bool ConformalMetric::is_sphere() const { return impl->kind != MetricKind::FlatPatch; }
bool ConformalMetric::is_grid() const { return impl->kind == MetricKind::GridSigma; }
double ConformalMetric::round_curvature() const { return impl->curvature; }
const GridCharts *ConformalMetric::grid() const { return impl->grid.get(); }

const std::vector<SigmaJet> &ConformalMetric::grid_jets(int chart) const
{
	if (!impl->grid)
		throw validation_error("UnsupportedMetric", "not a grid metric");
	return impl->jets[chart];
}

SigmaJet ConformalMetric::jet(cplx z) const
{
	if (impl->kind == MetricKind::Equator) {
		SigmaJet j;
		if (std::abs(z) > 1) {
			j.s = -4 * std::log(std::abs(z));
			j.d1 = -2.0 / z;
			j.d2 = 2.0 / (z * z);
		}
		return j;
	}
	if (std::abs(z) <= 1 || !impl->infinity)
		return impl->finite(z);
	return from_infinity(impl->infinity(1.0 / z), 1.0 / z);
}

SigmaJet ConformalMetric::jet_infinity(cplx zeta) const
{
	if (!impl->infinity)
		throw validation_error("NotASphere", impl->name + " has no chart at infinity");
	return impl->infinity(zeta);
}

// ---------------------------------------------------------------- Weyl directions

WeylDirection WeylDirection::zero() { return constant(0); }

WeylDirection WeylDirection::constant(double k)
{
	return {[k](cplx) { return k; }, [](cplx) { return cplx(0); }, [](cplx) { return cplx(0); },
	        [](cplx) { return 0.0; }};
}

WeylDirection WeylDirection::bump(double amplitude, cplx center, double width)
{
	Bump b{amplitude, center, width};
	return {[b](cplx z) { return bump_jet(z, b).s; }, [b](cplx z) { return bump_jet(z, b).d1; },
	        [b](cplx z) { return bump_jet(z, b).d2; }, [b](cplx z) { return bump_jet(z, b).lap; }};
}

DecayReport check_decay(const WeylDirection &phi, double r_max, double bound)
{
	// envelopes |phi|(1+r) and |d phi|(1+r)^2 must stay bounded and stop growing over the last decade
	DecayReport r;
	double env[2][2] = {{0, 0}, {0, 0}};
	for (int k = 0; k <= 200; ++k) {
		const double rad = std::expm1(std::log1p(r_max) * k / 200.0);
		const int outer = rad > r_max / 10;
		for (int a = 0; a < 32; ++a) {
			const cplx z = std::polar(rad, 2 * M_PI * a / 32);
			env[outer][0] = std::max(env[outer][0], std::abs(phi.value(z)) * (1 + rad));
			if (phi.dz)
				env[outer][1] = std::max(env[outer][1], std::abs(phi.dz(z)) * (1 + rad) * (1 + rad));
		}
	}
	r.c0 = std::max(env[0][0], env[1][0]);
	r.c1 = std::max(env[0][1], env[1][1]);
	r.ok = r.c0 <= bound && r.c1 <= bound && env[1][0] <= 2 * env[0][0] + 1e-12 && env[1][1] <= 2 * env[0][1] + 1e-12;
	return r;
}

// ---------------------------------------------------------------- quadrature

double chart_weight(double r) { return 1 - smooth_step((r - 0.8) / 0.45); }

std::array<double, 3> to_sphere(int chart, cplx u)
{
	const double n = std::norm(u);
	if (chart == 0)
		return {2 * u.real() / (1 + n), 2 * u.imag() / (1 + n), (n - 1) / (1 + n)};
	return {2 * u.real() / (1 + n), -2 * u.imag() / (1 + n), (1 - n) / (1 + n)};
}

std::vector<QuadNode> sphere_quadrature(const ConformalMetric &m, int n_r, int n_theta)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is not a sphere metric");
	std::vector<QuadNode> nodes;
	if (m.is_grid()) {
		const GridCharts &g = *m.grid();
		for (int chart = 0; chart < 2; ++chart) {
			const io::GridBlock &b = chart ? g.infinity : g.finite;
			const auto &jets = m.grid_jets(chart);
			const double h = b.h();
			for (uint32_t j = 0; j < b.ny; ++j)
				for (uint32_t i = 0; i < b.nx; ++i) {
					const cplx u(b.x(i), b.y(j));
					const double r = std::abs(u);
					double w = chart == 0 ? chart_weight(r) : (r == 0 ? 1.0 : 1 - chart_weight(1 / r));
					if (w <= 0)
						continue;
					const SigmaJet &s = jets[size_t(j) * b.nx + i];
					QuadNode q{chart, u, chart == 0 ? u : (r == 0 ? cplx(INFINITY, 0) : 1.0 / u), w * h * h, 0, s};
					q.dv = std::exp(s.s) * q.dA;
					nodes.push_back(q);
				}
		}
		return nodes;
	}
	const auto &gl = gauss_legendre(n_r);
	for (int chart = 0; chart < 2; ++chart)
		for (int a = 0; a < n_r; ++a) {
			const double r = 0.5 * (gl.x[a] + 1), wr = 0.5 * gl.w[a];
			for (int t = 0; t < n_theta; ++t) {
				const cplx u = std::polar(r, 2 * M_PI * (t + 0.5 * chart) / n_theta);
				SigmaJet s = chart == 0 ? m.impl->finite(u) : m.impl->infinity(u);
				if (m.kind() == MetricKind::Equator)
					s = SigmaJet{};
				QuadNode q{chart, u, chart == 0 ? u : 1.0 / u, wr * r * 2 * M_PI / n_theta, 0, s};
				q.dv = std::exp(s.s) * q.dA;
				nodes.push_back(q);
			}
		}
	return nodes;
}

static double theta_integral(const std::function<double(cplx)> &f, double r, double tol)
{
	int n = 64;
	auto sum = [&](int k, int off, int stride) {
		double s = 0;
		for (int t = off; t < k; t += stride)
			s += f(std::polar(r, 2 * M_PI * t / k));
		return s;
	};
	double total = sum(n, 0, 1);
	double prev = total * 2 * M_PI / n;
	while (n < 16384) {
		// refine: add midpoints
		total += sum(2 * n, 1, 2);
		n *= 2;
		double cur = total * 2 * M_PI / n;
		if (std::abs(cur - prev) <= tol * (1 + std::abs(cur)))
			return cur;
		prev = cur;
	}
	return prev;
}

double integrate_charts(const std::function<double(cplx)> &finite, const std::function<double(cplx)> &infinity,
                        double tol)
{
	using boost::math::quadrature::gauss_kronrod;
	double total = 0;
	for (auto *f : {&finite, &infinity}) {
		double err = 0;
		auto radial = [&](double r) { return r * theta_integral(*f, r, tol * 0.1); };
		total += gauss_kronrod<double, 31>::integrate(radial, 0.0, 1.0, 12, tol, &err);
		if (err > 100 * tol * (1 + std::abs(total)))
			throw numerical_error("QuadratureFailure", "two-chart integral did not converge");
	}
	return total;
}

// ---------------------------------------------------------------- operations

double scalar_curvature(const ConformalMetric &m, cplx z)
{
	if (m.kind() == MetricKind::Equator) {
		if (std::abs(std::abs(z) - 1) < 1e-12)
			throw validation_error("NonSmoothPoint", "curvature of the equator metric is a delta on |z| = 1");
		return 0;
	}
	if (std::abs(z) > 1 && m.is_sphere()) {
		SigmaJet t = m.jet_infinity(1.0 / z);
		return -4 * std::exp(-t.s) * t.lap;
	}
	SigmaJet j = m.jet(z);
	return -4 * std::exp(-j.s) * j.lap;
}

cplx t_field(const ConformalMetric &m, cplx z)
{
	if (m.kind() == MetricKind::Equator && std::abs(std::abs(z) - 1) < 1e-12)
		throw validation_error("NonSmoothPoint", "sigma is not differentiable on |z| = 1");
	SigmaJet j = m.jet(z);
	return j.d2 - 0.5 * j.d1 * j.d1;
}

double volume(const ConformalMetric &m)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is not a sphere metric");
	if (m.kind() == MetricKind::RoundSphere)
		return 8 * M_PI / m.round_curvature();
	if (m.is_grid()) {
		double s = 0;
		for (auto &q : sphere_quadrature(m))
			s += q.dv;
		return s;
	}
	if (m.kind() == MetricKind::Equator)
		return 2 * M_PI;
	return integrate_charts([&](cplx u) { return std::exp(m.impl->finite(u).s); },
	                        [&](cplx u) { return std::exp(m.impl->infinity(u).s); });
}

double gauss_bonnet_integral(const ConformalMetric &m)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is an open surface");
	if (m.kind() == MetricKind::Equator) {
		// R dv = 4 delta(|z|-1) |dz| d|z|
		const int n = 256;
		double s = 0;
		for (int k = 0; k < n; ++k)
			s += 4.0 * (2 * M_PI / n);
		return s;
	}
	if (m.is_grid()) {
		double s = 0;
		for (auto &q : sphere_quadrature(m))
			s += -4 * q.jet.lap * q.dA;
		return s;
	}
	return integrate_charts([&](cplx u) { return -4 * m.impl->finite(u).lap; },
	                        [&](cplx u) { return -4 * m.impl->infinity(u).lap; }, 1e-12);
}

double anomaly(const ConformalMetric &m, const WeylDirection &phi)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is an open surface");
	if (!phi.dz)
		throw validation_error("MissingDerivative", "Weyl direction needs d_z phi");
	// |grad phi|^2 dv = 4 |d phi|^2 d^2z in either chart; 2 R phi dv = -8 lap(sigma) phi d^2z
	auto grad_inf = [&](cplx zeta) {
		if (zeta == cplx(0))
			return 0.0;
		const cplx z = 1.0 / zeta;
		return 4 * std::norm(phi.dz(z) * z * z);
	};
	double grad, curv;
	if (m.is_grid()) {
		grad = curv = 0;
		for (auto &q : sphere_quadrature(m)) {
			const bool inf = q.chart == 1;
			if (inf && q.u == cplx(0))
				continue;
			grad += (inf ? grad_inf(q.u) : 4 * std::norm(phi.dz(q.z))) * q.dA;
			curv += -8 * q.jet.lap * phi.value(q.z) * q.dA;
		}
	} else {
		grad = integrate_charts([&](cplx z) { return 4 * std::norm(phi.dz(z)); }, grad_inf);
		if (m.kind() == MetricKind::Equator) {
			const int n = 512;
			curv = 0;
			for (int k = 0; k < n; ++k)
				curv += 2 * 4 * phi.value(std::polar(1.0, 2 * M_PI * k / n)) * (2 * M_PI / n);
		} else {
			curv = integrate_charts(
			    [&](cplx u) { return -8 * m.impl->finite(u).lap * phi.value(u); },
			    [&](cplx u) {
				    const double p = u == cplx(0) ? phi.value(cplx(1e300, 0)) : phi.value(1.0 / u);
				    return -8 * m.impl->infinity(u).lap * p;
			    });
		}
	}
	return (grad + curv) / (96 * M_PI);
}

ConformalMetric weyl_transform(const ConformalMetric &m, const WeylDirection &phi)
{
	if (m.is_grid()) {
		GridCharts c = *m.grid();
		for (uint32_t j = 0; j < c.finite.ny; ++j)
			for (uint32_t i = 0; i < c.finite.nx; ++i) {
				const cplx u(c.finite.x(i), c.finite.y(j));
				c.finite.at(i, j) += phi.value(u);
				c.infinity.at(i, j) += u == cplx(0) ? phi.value(cplx(1e300, 0)) : phi.value(1.0 / u);
			}
		return ConformalMetric::from_grid(std::move(c), m.name() + "+phi");
	}
	if (!phi.d2 || !phi.lap)
		throw validation_error("MissingDerivative", "closed-form Weyl transform needs second derivatives of phi");
	auto pj = [phi](cplx z) { return SigmaJet{phi.value(z), phi.dz(z), phi.d2(z), phi.lap(z)}; };
	auto base = m;
	ConformalMetric::JetFn fin = [base, pj](cplx z) { return base.jet(z) + pj(z); };
	ConformalMetric::JetFn inf = [base, pj](cplx zeta) {
		SigmaJet j = base.jet_infinity(zeta);
		if (zeta == cplx(0))
			return j + SigmaJet{pj(cplx(1e300, 0)).s, 0, 0, 0};
		return j + swap_chart(pj(1.0 / zeta), 1.0 / zeta);
	};
	auto r = ConformalMetric::closed_form(fin, inf, m.name() + "+phi");
	auto im = std::const_pointer_cast<ConformalMetric::Impl>(r.impl);
	im->curvature = 0;
	return r;
}

} // namespace lcft::geo
