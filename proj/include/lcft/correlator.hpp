#pragma once
// Monte Carlo vertex correlations through the negative-moment formula.
#include "lcft/field.hpp"
#include "lcft/geometry.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace lcft::corr {

using geo::cplx;
using geo::ConformalMetric;

struct VertexInsertion {
	cplx x;
	double alpha = 0;
};

enum class ZMode { RatioCancel, OpaqueConstant };

struct Numerics {
	int n_max = 440;       // field modes
	int n_r = 64, n_theta = 96; // global sphere rule
	int patch_radial = 24, patch_angular = 48;
	double patch_radius = 0.5; // chart radius, shrunk for close insertions
	int shift_degree = 40;     // Green function of non-round metrics
	double max_rel_error = 0.25; // MCDegenerate cap on std_error / value
	int threads = 1;
};

struct CorrelatorConfig {
	double gamma = 0.8;
	double mu = 1;
	std::vector<VertexInsertion> insertions;
	ConformalMetric metric = ConformalMetric::round();
	long samples = 10000;
	ZMode z_mode = ZMode::RatioCancel;
	double z_value = 1; // OpaqueConstant

	Numerics num;

	double Q() const { return 2 / gamma + gamma / 2; }
	double c() const { return 1 + 6 * Q() * Q(); }
	double alpha_sum() const;
	double s() const { return (alpha_sum() - 2 * Q()) / gamma; }
};

double conformal_weight(double alpha, double Q);

struct SeibergReport {
	enum Bound { None, First, Second } violated = None;
	int insertion = -1; // index for the second bound
	double amount = 0;  // by how much the violated bound fails (>= 0)
	double slack_first = 0;  // sum alpha - 2Q
	double slack_second = 0; // min_i (Q - alpha_i)
	bool ok() const { return violated == None; }
	std::string describe() const;
};

SeibergReport seiberg_check(const CorrelatorConfig &cfg);

struct Estimate {
	double value = 0, std_error = 0;
	double log_prefactor = 0; // ln of gamma^-1 mu^-s Gamma(s) Z e^{(h,Gh)/2} prod rho
	double moment = 0, moment_std_error = 0; // E[M(e^{gamma G h})^{-s}]
	double s = 0;
	long samples = 0;
	std::vector<double> per_sample; // prefactor * M^{-s}, sample order
};

// Throws SeibergViolation (validation), MCDegenerate (numerical).
Estimate moment_estimate(const CorrelatorConfig &cfg, uint64_t seed);

// Same, with insertion points replaced; samples are coupled with any other call using the same seed.
Estimate moment_estimate_at(const CorrelatorConfig &cfg, const std::vector<cplx> &points, uint64_t seed);

struct WeylCheck {
	double lhs = 0, rhs = 0;
	double lhs_error = 0, rhs_error = 0;
	double difference_error = 0; // paired standard error of lhs - rhs
	double sigma_distance = 0;
	double anomaly = 0;          // A(phi, g)
	double log_factor = 0;       // (c - 1) A - sum Delta_i phi(x_i)
};

// <prod V>_{e^phi g} against e^{cA} prod e^{-Delta phi(x_i)} <prod V>_g with coupled samples.
// Z(e^phi g)/Z(g) = e^{A} cancels the 1 in c.
WeylCheck weyl_covariance_check(const CorrelatorConfig &cfg, const geo::WeylDirection &phi, uint64_t seed);

// Sampler shared by a family of metrics that differ by Weyl factors and insertion points.
// Field draws come from the spectral basis of cfg.metric; every view re-centres them for its own metric.
class MomentSampler {
public:
	struct View {
		ConformalMetric metric;
		std::vector<cplx> points; // paired with cfg.insertions[i].alpha
	};
	MomentSampler(const CorrelatorConfig &cfg, std::vector<View> views);
	~MomentSampler();

	int views() const;
	double log_prefactor(int view) const;
	// M(e^{gamma G h}) of the zero field: the deterministic quadrature alone
	double zero_field_mass(int view) const;
	int nodes() const;
	// M^{-s} for samples [0, count) of stream seed, one vector per view
	std::vector<std::vector<double>> run(uint64_t seed, long count) const;

	struct Impl;

private:
	std::unique_ptr<Impl> impl_;
};

// n-node Gauss-Jacobi rule for weight (1-x)^a (1+x)^b on [-1, 1]
void gauss_jacobi(int n, double a, double b, std::vector<double> &x, std::vector<double> &w);

// mean and standard error with a pairwise sum
std::pair<double, double> mean_and_error(const std::vector<double> &v);

} // namespace lcft::corr
