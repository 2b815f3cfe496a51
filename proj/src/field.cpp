#include "lcft/field.hpp"

#include "lcft/errors.hpp"
#include "lcft/harmonics.hpp"
#include "lcft/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <random>
#include <thread>

namespace lcft::field {

namespace {

int degree_for(int count) { return int(std::ceil(std::sqrt(double(count) + 1))) - 1; }

double unit_round_sigma(cplx z) { return std::log(4.0) - 2 * std::log1p(std::norm(z)); }

// sigma of the metric minus sigma of the unit round sphere, in chart coordinates
double weyl_factor(const geo::SigmaJet &chart_jet, cplx u) { return chart_jet.s - unit_round_sigma(u); }

} // namespace

// ---------------------------------------------------------------- basis

SpectralBasis SpectralBasis::build(const ConformalMetric &m, int n_max, int galerkin_degree)
{
	if (n_max < 1)
		throw validation_error("BadTruncation", "n_max must be positive");
	if (!m.is_sphere())
		throw validation_error("UnsupportedMetric", m.name() + " is not a sphere metric");
	SpectralBasis b;
	b.metric_ = m;
	if (m.kind() == geo::MetricKind::RoundSphere) {
		const double r0 = m.round_curvature();
		b.scale_ = std::sqrt(r0 / 2);
		b.degree_ = degree_for(n_max);
		for (int l = 1; int(b.lambda_.size()) < n_max; ++l)
			for (int k = -l; k <= l && int(b.lambda_.size()) < n_max; ++k)
				b.lambda_.push_back(l * (l + 1) * r0 / 2);
		return b;
	}
	int deg = galerkin_degree > 0 ? galerkin_degree : std::clamp(degree_for(2 * n_max) + 4, 8, 40);
	const int H = (deg + 1) * (deg + 1);
	if (H - 1 < n_max)
		throw validation_error("BadTruncation", "Galerkin space too small for n_max");
	b.degree_ = deg;
	const int n_theta = std::max(128, 4 * deg + 8);
	auto nodes = geo::sphere_quadrature(m, std::max(96, 2 * deg + 16), n_theta);
	Eigen::MatrixXd Y(nodes.size(), H);
	std::vector<double> buf(H);
	Eigen::VectorXd w(nodes.size());
	for (size_t k = 0; k < nodes.size(); ++k) {
		harm::real_harmonics_at(deg, nodes[k].chart, nodes[k].u, buf.data());
		for (int i = 0; i < H; ++i)
			Y(Eigen::Index(k), i) = buf[i];
		w[Eigen::Index(k)] = nodes[k].dv;
	}
	Eigen::MatrixXd M = Y.transpose() * w.asDiagonal() * Y;
	// Dirichlet energy is conformally invariant, so the stiffness matrix is diagonal in harmonics
	Eigen::MatrixXd K = Eigen::MatrixXd::Zero(H, H);
	for (int l = 0; l <= deg; ++l)
		for (int k = -l; k <= l; ++k)
			K(harm::index(l, k), harm::index(l, k)) = l * (l + 1);
	Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
	if (es.info() != Eigen::Success)
		throw numerical_error("EigensolverFailure", "generalized eigensolver failed");
	if (std::abs(es.eigenvalues()[0]) > 1e-8 || es.eigenvalues()[1] < 1e-6)
		throw numerical_error("EigensolverFailure", "zero mode is not isolated");
	b.galerkin_ = es.eigenvectors().middleCols(1, n_max);
	for (int n = 1; n <= n_max; ++n)
		b.lambda_.push_back(es.eigenvalues()[n]);
	return b;
}

void SpectralBasis::evaluate(int chart, cplx u, double *out) const
{
	const int H = (degree_ + 1) * (degree_ + 1);
	std::vector<double> y(H);
	harm::real_harmonics_at(degree_, chart, u, y.data());
	if (closed_form()) {
		for (int n = 0; n < size(); ++n)
			out[n] = scale_ * y[n + 1];
		return;
	}
	Eigen::Map<const Eigen::VectorXd> yv(y.data(), H);
	Eigen::Map<Eigen::VectorXd>(out, size()) = galerkin_.transpose() * yv;
}

std::vector<double> SpectralBasis::evaluate(cplx z) const
{
	std::vector<double> v(size());
	if (std::abs(z) <= 1)
		evaluate(0, z, v.data());
	else
		evaluate(1, 1.0 / z, v.data());
	return v;
}

Eigen::MatrixXd SpectralBasis::evaluate_nodes(const std::vector<geo::QuadNode> &nodes) const
{
	const int H = (degree_ + 1) * (degree_ + 1);
	Eigen::MatrixXd Y(nodes.size(), H);
	std::vector<double> buf(H);
	for (size_t k = 0; k < nodes.size(); ++k) {
		harm::real_harmonics_at(degree_, nodes[k].chart, nodes[k].u, buf.data());
		for (int i = 0; i < H; ++i)
			Y(Eigen::Index(k), i) = buf[i];
	}
	if (closed_form())
		return scale_ * Y.middleCols(1, size());
	return Y * galerkin_;
}

std::pair<double, double> SpectralBasis::orthonormality_defect(int count, int n_r, int n_theta) const
{
	count = std::min(count, size());
	auto nodes = geo::sphere_quadrature(metric_, n_r, n_theta);
	Eigen::MatrixXd E = evaluate_nodes(nodes).leftCols(count);
	Eigen::VectorXd w(nodes.size());
	for (size_t k = 0; k < nodes.size(); ++k)
		w[Eigen::Index(k)] = nodes[k].dv;
	Eigen::MatrixXd gram = E.transpose() * w.asDiagonal() * E;
	Eigen::VectorXd mean = E.transpose() * w;
	return {(gram - Eigen::MatrixXd::Identity(count, count)).cwiseAbs().maxCoeff(), mean.cwiseAbs().maxCoeff()};
}

// ---------------------------------------------------------------- Green function

double round_regular(cplx x, cplx y) { return 0.5 * (std::log1p(std::norm(x)) + std::log1p(std::norm(y)) - 1); }

double log_potential(const ConformalMetric &m, cplx z, int n_phi, int n_gauss)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " has infinite volume");
	const double r = std::abs(z), th = std::arg(z);
	const auto &gl = gauss_legendre(n_gauss);
	std::vector<double> f(n_phi);
	std::vector<cplx> tw(n_phi);
	for (int j = 0; j < n_phi; ++j)
		tw[j] = std::polar(1.0, 2 * M_PI * j / n_phi);
	// one ring: int_0^{2pi} ln|z - rho e^{i phi}| f(phi) dphi, with f the density times the radial Jacobian
	auto ring = [&](double rho) {
		const double big = std::max(r, rho), q = std::min(r, rho) / big;
		double c0 = 0;
		for (int j = 0; j < n_phi; ++j)
			c0 += f[j];
		c0 /= n_phi;
		double s = c0 * std::log(big);
		double qk = 1;
		for (int k = 1; k <= n_phi / 2; ++k) {
			qk *= q;
			if (qk < 1e-17)
				break;
			cplx ck = 0;
			for (int j = 0; j < n_phi; ++j)
				ck += f[j] * tw[(k * j) % n_phi];
			s -= qk / k * (ck * std::polar(1.0, -k * th)).real() / n_phi;
		}
		return 2 * M_PI * s;
	};
	// nodes graded as tau^3 toward x ln x endpoints: rho = r, and rho = 0 or infinity where ln rho enters
	auto graded = [&](double a, double b, bool kink_at_a, bool kink_at_b, auto &&body) {
		if (kink_at_a && kink_at_b) {
			const double c = 0.5 * (a + b);
			// both ends: split
			for (int i = 0; i < n_gauss; ++i) {
				const double t = 0.5 * (gl.x[i] + 1), w = 0.5 * gl.w[i] * 3 * t * t;
				body(a + (c - a) * t * t * t, w * (c - a));
				body(b - (b - c) * t * t * t, w * (b - c));
			}
			return;
		}
		for (int i = 0; i < n_gauss; ++i) {
			const double t = 0.5 * (gl.x[i] + 1);
			if (kink_at_a)
				body(a + (b - a) * t * t * t, 0.5 * gl.w[i] * 3 * t * t * (b - a));
			else if (kink_at_b)
				body(b - (b - a) * t * t * t, 0.5 * gl.w[i] * 3 * t * t * (b - a));
			else
				body(a + (b - a) * t, 0.5 * gl.w[i] * (b - a));
		}
	};
	double total = 0;
	// inner part rho in [0, 1], split at r
	std::vector<std::pair<double, double>> inner{{0.0, 1.0}}, outer{{0.0, 1.0}};
	if (r > 0 && r < 1)
		inner = {{0.0, r}, {r, 1.0}};
	if (r > 1)
		outer = {{0.0, 1 / r}, {1 / r, 1.0}};
	auto kink = [&](double x, double at) { return r > 0 && std::abs(x - at) <= 1e-15 * std::max(1.0, at); };
	for (auto [a, b] : inner)
		graded(a, b, kink(a, r) || (r == 0 && a == 0), kink(b, r), [&](double rho, double w) {
			for (int j = 0; j < n_phi; ++j)
				f[j] = std::exp(m.jet(std::polar(rho, 2 * M_PI * j / n_phi)).s) * rho;
			total += w * ring(rho);
		});
	// rho = 1/s: e^sigma rho drho = e^{sigma + 4 ln rho} s ds
	for (auto [a, b] : outer)
		graded(a, b, a == 0 || (r > 0 && kink(a, 1 / r)), r > 0 && kink(b, 1 / r), [&](double s, double w) {
			for (int j = 0; j < n_phi; ++j) {
				const cplx zeta = std::polar(s, -2 * M_PI * j / n_phi);
				f[j] = std::exp(m.jet_infinity(zeta).s) * s;
			}
			total += w * ring(1 / s);
		});
	return total;
}

double double_integral_regular(const ConformalMetric &m, cplx z, cplx zp)
{
	const double v = geo::volume(m);
	// J = int L dv; in the infinity chart L(1/zeta) + v ln|zeta| is smooth and the log part is integrated radially
	auto nodes = geo::sphere_quadrature(m, 40, 48);
	double J = 0;
	for (auto &q : nodes) {
		if (q.chart == 0)
			J += log_potential(m, q.z, 64, 32) * q.dv;
		else
			J += (log_potential(m, 1.0 / q.u, 64, 32) + v * std::log(std::abs(q.u))) * q.dv;
	}
	using boost::math::quadrature::gauss_kronrod;
	auto radial = [&](double rho) {
		if (rho == 0)
			return 0.0;
		double s = 0;
		const int n = 128;
		for (int j = 0; j < n; ++j)
			s += std::exp(m.jet_infinity(std::polar(rho, 2 * M_PI * j / n)).s);
		return rho * std::log(rho) * s * 2 * M_PI / n;
	};
	J -= v * gauss_kronrod<double, 61>::integrate(radial, 0.0, 1.0, 15, 1e-13);
	return (log_potential(m, z) + log_potential(m, zp)) / v - J / (v * v);
}

Green::Green(const ConformalMetric &m, int shift_degree) : metric_(m)
{
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is not a sphere metric");
	if (m.kind() == geo::MetricKind::Equator)
		throw validation_error("UnsupportedMetric", "the equator metric has singular curvature");
	volume_ = geo::volume(m);
	if (m.kind() == geo::MetricKind::RoundSphere) {
		round_ = true;
		return;
	}
	degree_ = shift_degree;
	const int H = (degree_ + 1) * (degree_ + 1);
	auto nodes = geo::sphere_quadrature(m, std::max(96, 2 * degree_ + 16), std::max(128, 4 * degree_ + 8));
	std::vector<double> c(H, 0.0), y(H);
	double phi_mean = 0;
	for (auto &q : nodes) {
		harm::real_harmonics_at(degree_, q.chart, q.u, y.data());
		for (int i = 0; i < H; ++i)
			c[i] += y[i] * q.dv;
		const double dv0 = std::exp(unit_round_sigma(q.u)) * q.dA;
		phi_mean += weyl_factor(q.jet, q.u) * dv0;
	}
	phi_mean_ = phi_mean / (4 * M_PI);
	coef_.assign(H, 0.0);
	for (int l = 1; l <= degree_; ++l)
		for (int k = -l; k <= l; ++k)
			coef_[harm::index(l, k)] = 2 * M_PI * c[harm::index(l, k)] / (volume_ * l * (l + 1));
	double cu = 0, ru = 0, rphi = 0;
	for (auto &q : nodes) {
		harm::real_harmonics_at(degree_, q.chart, q.u, y.data());
		double u = 0;
		for (int i = 0; i < H; ++i)
			u += coef_[i] * y[i];
		cu += u * q.dv;
		const double rdv = -4 * q.jet.lap * q.dA;
		ru += u * rdv;
		rphi += weyl_factor(q.jet, q.u) * rdv;
	}
	c_ = cu / volume_;
	k0_ = -ru + 8 * M_PI * c_;
	// int R K dv with K = 2 pi (phi - <phi>_0) - 8 pi u + K0 and int R dv = 8 pi
	curv_energy_ = 2 * M_PI * (rphi - 8 * M_PI * phi_mean_) - 8 * M_PI * ru + 8 * M_PI * k0_;
}

double Green::shift(cplx z) const
{
	if (round_)
		return 0;
	std::vector<double> y(coef_.size());
	if (std::abs(z) <= 1)
		harm::real_harmonics_at(degree_, 0, z, y.data());
	else
		harm::real_harmonics_at(degree_, 1, 1.0 / z, y.data());
	double u = 0;
	for (size_t i = 0; i < y.size(); ++i)
		u += coef_[i] * y[i];
	return u;
}

double Green::regular(cplx x, cplx y) const
{
	if (round_)
		return round_regular(x, y);
	return round_regular(x, y) - shift(x) - shift(y) + c_;
}

double Green::operator()(cplx x, cplx y) const
{
	if (x == y)
		throw validation_error("CoincidentPoints", "Green function is singular on the diagonal");
	return -std::log(std::abs(x - y)) + regular(x, y);
}

double Green::curvature_potential(cplx z) const
{
	if (round_)
		return 0;
	const double phi = metric_.sigma(z) - unit_round_sigma(z);
	return 2 * M_PI * (phi - phi_mean_) - 8 * M_PI * shift(z) + k0_;
}

double green_function(const ConformalMetric &m, cplx x, cplx y, GreenMethod method, long n_terms)
{
	if (x == y)
		throw validation_error("CoincidentPoints", "x and y coincide");
	if (!m.is_sphere())
		throw validation_error("NotASphere", m.name() + " is not a sphere metric");
	switch (method) {
	case GreenMethod::Auto:
		return Green(m)(x, y);
	case GreenMethod::DoubleIntegral:
		return -std::log(std::abs(x - y)) + double_integral_regular(m, x, y);
	case GreenMethod::EigenSum:
		break;
	}
	if (n_terms < 1)
		throw validation_error("BadTruncation", "n_terms must be positive");
	if (m.kind() == geo::MetricKind::RoundSphere) {
		// addition theorem over full shells, explicit harmonics for the partial one
		auto px = geo::to_sphere(0, x), py = geo::to_sphere(0, y);
		const double ct = std::clamp(px[0] * py[0] + px[1] * py[1] + px[2] * py[2], -1.0, 1.0);
		long used = 0;
		double s = 0, p_prev = 1, p = ct;
		int l = 1;
		for (; used + 2 * l + 1 <= n_terms; ++l) {
			if (l > 1) {
				double next = boost::math::legendre_next(unsigned(l - 1), ct, p, p_prev);
				p_prev = p;
				p = next;
			}
			s += (2.0 * l + 1) / (2.0 * l * (l + 1)) * p;
			used += 2 * l + 1;
		}
		if (used < n_terms) {
			std::vector<double> yx((l + 1) * (l + 1)), yy((l + 1) * (l + 1));
			harm::real_harmonics_at(l, 0, x, yx.data());
			harm::real_harmonics_at(l, 0, y, yy.data());
			for (int k = -l; used < n_terms; ++k, ++used)
				s += 2 * M_PI * yx[harm::index(l, k)] * yy[harm::index(l, k)] / (l * (l + 1));
		}
		return s;
	}
	auto b = SpectralBasis::build(m, int(n_terms));
	auto ex = b.evaluate(x), ey = b.evaluate(y);
	double s = 0;
	for (int n = 0; n < b.size(); ++n)
		s += 2 * M_PI * ex[n] * ey[n] / b.eigenvalues()[n];
	return s;
}

// ---------------------------------------------------------------- sampling

std::vector<double> standard_normals(uint64_t seed, uint64_t index, int n)
{
	std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(index), uint32_t(index >> 32)};
	std::mt19937_64 gen(seq);
	std::normal_distribution<double> nd;
	std::vector<double> a(n);
	for (auto &x : a)
		x = nd(gen);
	return a;
}

GFFSample sample_gff(std::shared_ptr<const SpectralBasis> basis, uint64_t seed, uint64_t index)
{
	GFFSample s;
	s.a = standard_normals(seed, index, basis->size());
	s.basis = std::move(basis);
	s.seed = seed;
	s.index = index;
	return s;
}

double GFFSample::value(int chart, cplx u) const
{
	std::vector<double> e(basis->size());
	basis->evaluate(chart, u, e.data());
	double x = 0;
	for (int n = 0; n < basis->size(); ++n)
		x += a[n] * e[n] / std::sqrt(basis->eigenvalues()[n]);
	return std::sqrt(2 * M_PI) * x;
}

double GFFSample::value(cplx z) const { return std::abs(z) <= 1 ? value(0, z) : value(1, 1.0 / z); }

double truncated_variance(const SpectralBasis &b, cplx z)
{
	auto e = b.evaluate(z);
	double s = 0;
	for (int n = 0; n < b.size(); ++n)
		s += e[n] * e[n] / b.eigenvalues()[n];
	return 2 * M_PI * s;
}

double circle_average(const GFFSample &s, cplx z, double eps, int n_theta)
{
	if (!(eps > 0))
		throw validation_error("BadRadius", "circle radius must be positive");
	double sum = 0;
	for (int j = 0; j < n_theta; ++j)
		sum += s.value(z + std::polar(eps, 2 * M_PI * j / n_theta));
	return sum / n_theta;
}

double circle_average_variance(const SpectralBasis &b, cplx z, double eps, int n_theta)
{
	std::vector<double> avg(b.size(), 0.0);
	for (int j = 0; j < n_theta; ++j) {
		auto e = b.evaluate(z + std::polar(eps, 2 * M_PI * j / n_theta));
		for (int n = 0; n < b.size(); ++n)
			avg[n] += e[n] / n_theta;
	}
	double s = 0;
	for (int n = 0; n < b.size(); ++n)
		s += avg[n] * avg[n] / b.eigenvalues()[n];
	return 2 * M_PI * s;
}

double ChaosMeasure::total_mass() const
{
	double s = 0;
	for (auto &a : atoms)
		s += a.weight;
	return s;
}

double ChaosMeasure::mass_in_ball(cplx center, double radius) const
{
	double s = 0;
	for (auto &a : atoms) {
		const cplx z = a.chart == 0 ? a.u : (a.u == cplx(0) ? cplx(INFINITY) : 1.0 / a.u);
		if (std::abs(z - center) < radius)
			s += a.weight;
	}
	return s;
}

ChaosMeasure chaos_measure(const GFFSample &s, double gamma, Regularization reg, int n_r, int n_theta,
                           bool include_rho, const Green *green)
{
	if (!(gamma > 0) && gamma != 0)
		throw validation_error("BadGamma", "gamma must be nonnegative");
	if (gamma >= 2)
		throw validation_error("SupercriticalGamma", "gamma must be below 2");
	const auto &m = s.basis->metric();
	std::unique_ptr<Green> own;
	if (include_rho && reg.kind == Regularization::SpectralTruncation && !green) {
		own = std::make_unique<Green>(m);
		green = own.get();
	}
	ChaosMeasure cm;
	cm.gamma = gamma;
	cm.reg = reg;
	const double Q = gamma > 0 ? 2 / gamma + gamma / 2 : 0;
	for (auto &q : geo::sphere_quadrature(m, n_r, n_theta)) {
		double w;
		if (reg.kind == Regularization::SpectralTruncation) {
			const double x = s.value(q.chart, q.u);
			std::vector<double> e(s.basis->size());
			s.basis->evaluate(q.chart, q.u, e.data());
			double var = 0;
			for (int n = 0; n < s.basis->size(); ++n)
				var += e[n] * e[n] / s.basis->eigenvalues()[n];
			var *= 2 * M_PI;
			w = std::exp(gamma * x - gamma * gamma / 2 * var) * q.dv;
			if (include_rho && gamma > 0) {
				// rho in chart coordinates: sigma~ and h~(u,u) = h(z,z) + 2 ln|zeta| on the infinity chart
				double h;
				if (q.chart == 0)
					h = green->diagonal(q.u);
				else
					h = std::log1p(std::norm(q.u)) - 0.5 - 2 * green->shift(q.z) + green->shift_constant();
				w *= std::exp(gamma * gamma / 4 * q.jet.s + gamma * gamma / 2 * h);
			}
		} else {
			if (!(reg.eps > 0))
				throw validation_error("BadRadius", "circle radius must be positive");
			// circle average in chart coordinates
			double sum = 0;
			const int nt = 64;
			for (int j = 0; j < nt; ++j)
				sum += s.value(q.chart, q.u + std::polar(reg.eps, 2 * M_PI * j / nt));
			const double xe = sum / nt;
			w = gamma > 0 ? std::exp(gamma * Q / 2 * q.jet.s + gamma * gamma / 2 * std::log(reg.eps) + gamma * xe) * q.dA
			              : q.dv;
		}
		cm.atoms.push_back({q.chart, q.u, w});
	}
	return cm;
}

std::vector<double> spectral_total_masses(const SpectralBasis &b, double gamma, uint64_t seed, uint64_t first,
                                          int count, int n_r, int n_theta, int threads)
{
	if (gamma >= 2)
		throw validation_error("SupercriticalGamma", "gamma must be below 2");
	auto nodes = geo::sphere_quadrature(b.metric(), n_r, n_theta);
	const int N = b.size();
	Eigen::MatrixXd E = b.evaluate_nodes(nodes);
	for (int n = 0; n < N; ++n)
		E.col(n) *= std::sqrt(2 * M_PI / b.eigenvalues()[n]);
	Eigen::VectorXd base(nodes.size());
	for (size_t k = 0; k < nodes.size(); ++k)
		base[Eigen::Index(k)] = nodes[k].dv * std::exp(-gamma * gamma / 2 * E.row(Eigen::Index(k)).squaredNorm());
	std::vector<double> out(count);
	const int chunk = 64;
	const int n_chunks = (count + chunk - 1) / chunk;
	auto work = [&](int c0, int stride) {
		for (int c = c0; c < n_chunks; c += stride) {
			const int lo = c * chunk, hi = std::min(count, lo + chunk);
			Eigen::MatrixXd A(N, hi - lo);
			for (int i = lo; i < hi; ++i) {
				auto a = standard_normals(seed, first + uint64_t(i), N);
				A.col(i - lo) = Eigen::Map<Eigen::VectorXd>(a.data(), N);
			}
			Eigen::MatrixXd X = E * A;
			for (int i = lo; i < hi; ++i)
				out[i] = base.dot((gamma * X.col(i - lo)).array().exp().matrix());
		}
	};
	threads = std::max(1, threads);
	if (threads == 1)
		work(0, 1);
	else {
		std::vector<std::thread> pool;
		for (int t = 0; t < threads; ++t)
			pool.emplace_back(work, t, threads);
		for (auto &t : pool)
			t.join();
	}
	return out;
}

} // namespace lcft::field
