#include "lcft/cli.hpp"

#include "lcft/beltrami.hpp"
#include "lcft/errors.hpp"
#include "lcft/field.hpp"
#include "lcft/gridio.hpp"
#include "lcft/symbolic.hpp"
#include "lcft/virasoro.hpp"
#include "lcft/xcheck.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace lcft::cli {

using json = nlohmann::json;
using geo::cplx;

namespace {

struct Globals {
	uint64_t seed = 0;
	int threads = 1;
	bool deterministic = false;
	std::string profile = "default";
};

std::vector<std::string> split(const std::string &s, char sep)
{
	std::vector<std::string> out;
	std::string cur;
	std::istringstream in(s);
	while (std::getline(in, cur, sep))
		if (!cur.empty())
			out.push_back(cur);
	return out;
}

double number(const std::string &s, const std::string &what)
{
	try {
		size_t used = 0;
		const double v = std::stod(s, &used);
		if (used == s.size())
			return v;
	} catch (const std::exception &) {
	}
	throw validation_error("BadNumber", what + ": cannot parse '" + s + "'");
}

// "re,im"
cplx complex_arg(const std::string &s, const std::string &what)
{
	const auto p = split(s, ',');
	if (p.size() != 2)
		throw validation_error("BadPoint", what + ": expected re,im but got '" + s + "'");
	return {number(p[0], what), number(p[1], what)};
}

// "re,im;re,im;..."
std::vector<cplx> point_list(const std::string &s, const std::string &what)
{
	std::vector<cplx> out;
	for (auto &item : split(s, ';'))
		out.push_back(complex_arg(item, what));
	return out;
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

json read_json_file(const std::string &path)
{
	std::ifstream in(path);
	if (!in)
		throw validation_error("IOError", "cannot open " + path);
	try {
		return json::parse(in);
	} catch (const json::exception &e) {
		throw validation_error("ConfigSyntax", path + ": " + e.what());
	}
}

void check_keys(const json &j, const std::set<std::string> &allowed, const std::string &where)
{
	if (!j.is_object())
		throw validation_error("ConfigType", where + " must be an object");
	for (auto it = j.begin(); it != j.end(); ++it)
		if (!allowed.count(it.key()))
			throw validation_error("UnknownKey", where + ": unknown key '" + it.key() + "'");
}

void check_schema(const json &j)
{
	if (!j.contains("schema"))
		throw validation_error("SchemaVersion", "config has no schema field; expected \"" + std::string(kSchema) + "\"");
	if (j["schema"] != kSchema)
		throw validation_error("SchemaVersion", "unsupported schema " + j["schema"].dump() + "; expected \"" +
		                                            std::string(kSchema) + "\"");
}

template <class T> T get_or(const json &j, const char *key, T fallback)
{
	return j.contains(key) ? j.at(key).get<T>() : fallback;
}

json envelope(const std::string &command, const json &config, const Globals &g)
{
	json j;
	j["schema"] = kSchema;
	j["command"] = command;
	json c = config;
	c["seed"] = g.seed;
	c["threads"] = g.threads;
	c["deterministic"] = g.deterministic;
	c["tolerance_profile"] = g.profile;
	j["config"] = c;
	return j;
}

void emit(std::ostream &out, const json &j) { out << j.dump(2) << "\n"; }

void write_text(const std::string &path, const std::string &text)
{
	std::ofstream f(path, std::ios::binary);
	if (!f)
		throw validation_error("IOError", "cannot write " + path);
	f << text;
}

std::string fmt(double v)
{
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

class Timer {
public:
	double seconds() const
	{
		return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
	}

private:
	std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void stamp(json &j, const Globals &g, const Timer &t)
{
	if (!g.deterministic)
		j["elapsed_seconds"] = t.seconds();
}

// ------------------------------------------------------------------ metric

json canonical_metric(const json &spec)
{
	json m = {{"kind", "round"}, {"curvature", 2.0}, {"bumps", json::array()}, {"grid_path", ""}, {"resolution", 0}};
	if (spec.is_string()) {
		const std::string s = spec.get<std::string>();
		const auto colon = s.find(':');
		const std::string kind = s.substr(0, colon), rest = colon == std::string::npos ? "" : s.substr(colon + 1);
		m["kind"] = kind;
		if (kind == "round" && !rest.empty())
			m["curvature"] = number(rest, "metric curvature");
		else if (kind == "grid")
			m["grid_path"] = rest;
		else if (!rest.empty() || (kind != "round" && kind != "equator" && kind != "flat"))
			throw validation_error("BadMetric", "unknown metric spec '" + s + "'");
		if (kind != "round")
			m["curvature"] = 0.0;
		return m;
	}
	check_keys(spec, {"kind", "curvature", "bumps", "grid_path", "resolution"}, "metric");
	for (auto it = spec.begin(); it != spec.end(); ++it)
		m[it.key()] = it.value();
	const std::string kind = m["kind"];
	if (kind != "round" && kind != "round_with_bumps" && kind != "equator" && kind != "flat" && kind != "grid")
		throw validation_error("BadMetric", "unknown metric kind '" + kind + "'");
	if (kind == "equator" || kind == "flat" || kind == "grid")
		m["curvature"] = 0.0;
	return m;
}

} // namespace

json metric_json(const std::string &spec)
{
	if (!spec.empty() && spec.front() == '{') {
		try {
			return canonical_metric(json::parse(spec));
		} catch (const json::exception &e) {
			throw validation_error("BadMetric", std::string("metric JSON: ") + e.what());
		}
	}
	return canonical_metric(json(spec));
}

geo::ConformalMetric parse_metric(const json &spec)
{
	const json m = canonical_metric(spec);
	const std::string kind = m["kind"];
	geo::ConformalMetric out = geo::ConformalMetric::round();
	if (kind == "round")
		out = geo::ConformalMetric::round(m["curvature"].get<double>());
	else if (kind == "equator")
		out = geo::ConformalMetric::equator();
	else if (kind == "flat")
		out = geo::ConformalMetric::flat();
	else if (kind == "round_with_bumps") {
		std::vector<geo::Bump> bumps;
		for (auto &b : m["bumps"]) {
			check_keys(b, {"amplitude", "center", "width"}, "metric bump");
			bumps.push_back({b.at("amplitude").get<double>(), {b.at("center")[0].get<double>(), b.at("center")[1].get<double>()},
			                 b.at("width").get<double>()});
		}
		out = geo::ConformalMetric::round_with_bumps(bumps, m["curvature"].get<double>());
	} else {
		const std::string path = m["grid_path"];
		auto blocks = io::read_grid(path, io::kSigmaMagic);
		if (blocks.size() > 2)
			throw validation_error("GridFormat", path + ": a sigma file holds one or two blocks");
		geo::GridCharts charts;
		charts.finite = blocks[0];
		if (blocks.size() == 2)
			charts.infinity = blocks[1];
		out = geo::ConformalMetric::from_grid(std::move(charts), path);
	}
	const int res = m["resolution"].get<int>();
	if (res > 0 && kind != "grid")
		out = geo::ConformalMetric::sample_to_grid(out, res);
	return out;
}

Profile tolerance_profile(const std::string &name)
{
	if (name == "default")
		return {};
	if (name == "strict")
		return {"strict", 1e-12, 600, 1024};
	if (name == "fast")
		return {"fast", 1e-8, 200, 256};
	throw validation_error("BadProfile", "tolerance profile must be strict, default or fast");
}

corr::CorrelatorConfig correlator_config(const json &j, const Profile &p, int threads)
{
	corr::CorrelatorConfig cfg;
	cfg.num.n_max = p.n_max;
	cfg.num.threads = threads;
	cfg.gamma = get_or(j, "gamma", cfg.gamma);
	cfg.mu = get_or(j, "mu", cfg.mu);
	cfg.samples = get_or(j, "samples", cfg.samples);
	cfg.metric = parse_metric(j.contains("metric") ? j["metric"] : json("round"));
	if (!j.contains("insertions") || !j["insertions"].is_array())
		throw validation_error("MissingKey", "config needs an insertions list");
	for (auto &v : j["insertions"]) {
		check_keys(v, {"x_re", "x_im", "alpha"}, "insertion");
		cfg.insertions.push_back({{v.at("x_re").get<double>(), v.at("x_im").get<double>()}, v.at("alpha").get<double>()});
	}
	const std::string zm = get_or<std::string>(j, "z_mode", "ratio_cancel");
	if (zm == "ratio_cancel")
		cfg.z_mode = corr::ZMode::RatioCancel;
	else if (zm == "opaque_constant")
		cfg.z_mode = corr::ZMode::OpaqueConstant;
	else
		throw validation_error("BadZMode", "z_mode must be ratio_cancel or opaque_constant");
	cfg.z_value = get_or(j, "z_value", cfg.z_value);
	if (j.contains("numerics")) {
		const json &n = j["numerics"];
		check_keys(n, {"n_max", "n_r", "n_theta", "patch_radial", "patch_angular", "patch_radius", "shift_degree",
		               "max_rel_error"},
		           "numerics");
		cfg.num.n_max = get_or(n, "n_max", cfg.num.n_max);
		cfg.num.n_r = get_or(n, "n_r", cfg.num.n_r);
		cfg.num.n_theta = get_or(n, "n_theta", cfg.num.n_theta);
		cfg.num.patch_radial = get_or(n, "patch_radial", cfg.num.patch_radial);
		cfg.num.patch_angular = get_or(n, "patch_angular", cfg.num.patch_angular);
		cfg.num.patch_radius = get_or(n, "patch_radius", cfg.num.patch_radius);
		cfg.num.shift_degree = get_or(n, "shift_degree", cfg.num.shift_degree);
		cfg.num.max_rel_error = get_or(n, "max_rel_error", cfg.num.max_rel_error);
	}
	if (cfg.samples < 2)
		throw validation_error("BadSamples", "samples must be at least 2");
	return cfg;
}

json correlator_echo(const json &metric, const corr::CorrelatorConfig &cfg)
{
	json ins = json::array();
	for (auto &v : cfg.insertions)
		ins.push_back({{"x_re", v.x.real()}, {"x_im", v.x.imag()}, {"alpha", v.alpha}});
	return {{"schema", kSchema},
	        {"gamma", cfg.gamma},
	        {"mu", cfg.mu},
	        {"samples", cfg.samples},
	        {"metric", canonical_metric(metric)},
	        {"insertions", ins},
	        {"z_mode", cfg.z_mode == corr::ZMode::RatioCancel ? "ratio_cancel" : "opaque_constant"},
	        {"z_value", cfg.z_value},
	        {"numerics",
	         {{"n_max", cfg.num.n_max},
	          {"n_r", cfg.num.n_r},
	          {"n_theta", cfg.num.n_theta},
	          {"patch_radial", cfg.num.patch_radial},
	          {"patch_angular", cfg.num.patch_angular},
	          {"patch_radius", cfg.num.patch_radius},
	          {"shift_degree", cfg.num.shift_degree},
	          {"max_rel_error", cfg.num.max_rel_error}}}};
}

namespace {

const std::set<std::string> kCorrelatorKeys = {"schema",  "gamma",  "mu",     "samples", "metric",
                                               "insertions", "z_mode", "z_value", "numerics"};

// ------------------------------------------------------------------ subcommands

int cmd_green(const Globals &g, const std::string &metric, const std::string &xs, const std::string &ys,
              const std::string &method, long terms, std::ostream &out)
{
	Timer t;
	const json mj = metric_json(metric);
	const auto m = parse_metric(mj);
	const cplx x = complex_arg(xs, "--x"), y = complex_arg(ys, "--y");
	field::GreenMethod gm = field::GreenMethod::Auto;
	if (method == "eigen")
		gm = field::GreenMethod::EigenSum;
	else if (method == "double")
		gm = field::GreenMethod::DoubleIntegral;
	else if (method != "auto")
		throw validation_error("BadMethod", "method must be auto, eigen or double");
	json j = envelope("green", {{"metric", mj}, {"x", cjson(x)}, {"y", cjson(y)}, {"method", method}, {"terms", terms}}, g);
	j["green"] = field::green_function(m, x, y, gm, terms);
	if (m.is_sphere()) {
		field::Green G(m);
		j["regular"] = G.regular(x, y);
		j["volume"] = G.volume();
	}
	stamp(j, g, t);
	emit(out, j);
	return 0;
}

struct Ball {
	cplx center;
	double radius;
};

int cmd_gmc(const Globals &g, double gamma, const std::string &metric, long samples, const std::string &path,
            const std::vector<std::string> &ball_args, int n_max, const std::string &reg_name, double circle_eps,
            int n_r, int n_theta, bool with_rho, std::ostream &out)
{
	Timer t;
	const json mj = metric_json(metric);
	const auto m = parse_metric(mj);
	if (samples < 2)
		throw validation_error("BadSamples", "samples must be at least 2");
	std::vector<Ball> balls;
	json bj = json::array();
	for (auto &b : ball_args) {
		const auto p = split(b, ',');
		if (p.size() != 3)
			throw validation_error("BadBall", "--ball expects re,im,radius");
		balls.push_back({{number(p[0], "--ball"), number(p[1], "--ball")}, number(p[2], "--ball")});
		bj.push_back({{"center", cjson(balls.back().center)}, {"radius", balls.back().radius}});
	}
	field::Regularization reg;
	if (reg_name == "circle") {
		reg.kind = field::Regularization::CircleAverage;
		reg.eps = circle_eps;
	} else if (reg_name != "spectral")
		throw validation_error("BadRegularization", "regularization must be spectral or circle");
	const json config = {{"gamma", gamma},          {"metric", mj},        {"samples", samples},
	                     {"balls", bj},             {"n_max", n_max},      {"regularization", reg_name},
	                     {"circle_eps", circle_eps}, {"n_r", n_r},          {"n_theta", n_theta},
	                     {"with_rho", with_rho},    {"out", path}};
	auto basis = std::make_shared<const field::SpectralBasis>(field::SpectralBasis::build(m, n_max));
	std::vector<std::vector<double>> cols(1 + balls.size(), std::vector<double>(size_t(samples)));
	if (balls.empty() && reg.kind == field::Regularization::SpectralTruncation && !with_rho) {
		cols[0] = field::spectral_total_masses(*basis, gamma, g.seed, 0, int(samples), n_r, n_theta, g.threads);
	} else {
		std::unique_ptr<field::Green> green;
		if (with_rho)
			green = std::make_unique<field::Green>(m);
		for (long n = 0; n < samples; ++n) {
			const auto s = field::sample_gff(basis, g.seed, uint64_t(n));
			const auto cm = field::chaos_measure(s, gamma, reg, n_r, n_theta, with_rho, green.get());
			cols[0][size_t(n)] = cm.total_mass();
			for (size_t b = 0; b < balls.size(); ++b)
				cols[b + 1][size_t(n)] = cm.mass_in_ball(balls[b].center, balls[b].radius);
		}
	}
	json j = envelope("gmc", config, g);
	std::ostringstream csv;
	csv << "# config: " << j["config"].dump() << "\n";
	csv << "sample,total_mass";
	for (size_t b = 0; b < balls.size(); ++b)
		csv << ",ball_" << b;
	csv << "\n";
	for (long n = 0; n < samples; ++n) {
		csv << n;
		for (auto &c : cols)
			csv << "," << fmt(c[size_t(n)]);
		csv << "\n";
	}
	write_text(path, csv.str());
	const auto [mean, se] = corr::mean_and_error(cols[0]);
	j["total_mass"] = {{"mean", mean}, {"std_error", se}};
	if (m.is_sphere())
		j["volume"] = geo::volume(m);
	json bo = json::array();
	for (size_t b = 0; b < balls.size(); ++b) {
		const auto [bm, bse] = corr::mean_and_error(cols[b + 1]);
		bo.push_back({{"center", cjson(balls[b].center)}, {"radius", balls[b].radius}, {"mean", bm}, {"std_error", bse}});
	}
	j["balls"] = bo;
	j["csv"] = path;
	stamp(j, g, t);
	write_text(path + ".json", j.dump(2) + "\n");
	emit(out, j);
	return 0;
}

int cmd_correlator(const Globals &g, const std::string &config_path, std::ostream &out)
{
	Timer t;
	const json cj = read_json_file(config_path);
	check_schema(cj);
	check_keys(cj, kCorrelatorKeys, "config");
	const Profile p = tolerance_profile(g.profile);
	const auto cfg = correlator_config(cj, p, g.threads);
	const auto rep = corr::seiberg_check(cfg);
	if (!rep.ok())
		throw validation_error(rep.violated == corr::SeibergReport::First ? "SeibergFirstBound" : "SeibergSecondBound",
		                       rep.describe());
	const auto est = corr::moment_estimate(cfg, g.seed);
	json j = envelope("correlator", correlator_echo(cj.contains("metric") ? cj["metric"] : json("round"), cfg), g);
	j["estimate"] = est.value;
	j["std_error"] = est.std_error;
	j["s"] = est.s;
	j["Q"] = cfg.Q();
	j["c"] = cfg.c();
	j["seiberg_slack"] = {{"first", rep.slack_first}, {"second", rep.slack_second}};
	j["moment"] = est.moment;
	j["moment_std_error"] = est.moment_std_error;
	j["log_prefactor"] = est.log_prefactor;
	stamp(j, g, t);
	emit(out, j);
	return 0;
}

beltrami::Perturbation perturbation_from_file(const std::string &path, double support)
{
	auto blocks = io::read_grid(path, io::kPerturbationMagic);
	const auto &b0 = blocks[0];
	if (b0.nx != b0.ny)
		throw validation_error("GridFormat", path + ": perturbation grids must be square");
	beltrami::Grid grid{int(b0.nx), double(b0.half_width), support > 0 ? support : 0.5 * double(b0.half_width)};
	if (blocks.size() == 1)
		return beltrami::Perturbation::traceless(grid, b0.data);
	if (blocks.size() != 3)
		throw validation_error("GridFormat", path + ": expected 1 block (f^zz) or 3 blocks (fxx, fxy, fyy)");
	return {grid, blocks[0].data, blocks[1].data, blocks[2].data};
}

io::GridBlock block_of(const beltrami::Grid &g, std::vector<double> data)
{
	io::GridBlock b;
	b.nx = b.ny = uint32_t(g.n);
	b.half_width = float(g.half_width);
	b.data = std::move(data);
	return b;
}

int cmd_beltrami(const Globals &g, const std::string &metric, const std::string &pert, double eps,
                 const std::string &dir, double support, int max_terms, std::ostream &out)
{
	Timer t;
	const json mj = metric_json(metric);
	const auto m = parse_metric(mj);
	const auto f = perturbation_from_file(pert, support);
	if (float(f.grid.half_width) != float(f.grid.half_width) || f.grid.n < 16)
		throw validation_error("GridFormat", "perturbation grid is too small");
	beltrami::SolveOptions opt;
	opt.tol = tolerance_profile(g.profile).beltrami_tol;
	opt.max_terms = max_terms;
	const json config = {{"metric", mj},       {"perturbation", pert}, {"eps", eps},       {"out", dir},
	                     {"grid_n", f.grid.n}, {"half_width", f.grid.half_width},       {"support", f.grid.support},
	                     {"tol", opt.tol},     {"max_terms", opt.max_terms}};
	const auto mu = beltrami::coefficient_from_metric(m, f, eps);
	const auto sol = beltrami::solve(mu, opt);
	std::filesystem::create_directories(dir);
	std::vector<double> ure(sol.u.size()), uim(sol.u.size()), res(sol.u.size());
	for (size_t k = 0; k < sol.u.size(); ++k) {
		ure[k] = sol.u[k].real();
		uim[k] = sol.u[k].imag();
		res[k] = std::abs(sol.dbar_u[k] - mu.mu[k] * (1.0 + sol.du[k]));
	}
	io::write_grid(dir + "/u.grid", io::kFieldMagic, {block_of(f.grid, ure), block_of(f.grid, uim)});
	io::write_grid(dir + "/phi.grid", io::kFieldMagic, {block_of(f.grid, sol.phi)});
	io::write_grid(dir + "/residual.grid", io::kFieldMagic, {block_of(f.grid, res)});
	json j = envelope("beltrami", config, g);
	j["sup_norm"] = sol.sup_norm;
	j["terms_used"] = sol.terms_used;
	j["residual"] = sol.residual;
	j["reconstruction_error"] = sol.reconstruction_error;
	j["min_jacobian"] = sol.min_jacobian;
	j["decay_constant"] = sol.decay_constant;
	j["term_norms"] = sol.term_norms;
	stamp(j, g, t);
	write_text(dir + "/report.json", j.dump(2) + "\n");
	emit(out, j);
	return 0;
}

int cmd_ward(const Globals &g, int n, const std::string &vertices, const std::string &mode_name,
             const std::string &emit_kind, const std::string &zs_arg, const std::string &alphas_arg, double gamma,
             const std::string &metric, std::ostream &out)
{
	Timer t;
	if (n < 0 || n > 6)
		throw validation_error("BadInsertions", "--n must be between 0 and 6");
	std::vector<cplx> xs;
	int N = 0;
	if (vertices.find(',') == std::string::npos) {
		N = int(number(vertices, "--vertices"));
	} else {
		xs = point_list(vertices, "--vertices");
		N = int(xs.size());
	}
	if (N < 1 || N > 31)
		throw validation_error("BadVertices", "between 1 and 31 vertices");
	sym::MetricMode mode;
	if (mode_name == "flat")
		mode = sym::MetricMode::Flat;
	else if (mode_name == "symbolic")
		mode = sym::MetricMode::Symbolic;
	else
		throw validation_error("BadMode", "--mode must be flat or symbolic");
	std::vector<int> zs(static_cast<size_t>(n));
	for (int i = 0; i < n; ++i)
		zs[size_t(i)] = i;
	const auto corr = sym::ward_expand(zs, N, mode);
	json config = {{"n", n}, {"vertices", vertices}, {"mode", mode_name}, {"emit", emit_kind}};
	if (emit_kind == "latex") {
		json j = envelope("ward", config, g);
		out << "% config: " << j["config"].dump() << "\n" << sym::to_latex(corr) << "\n";
		return 0;
	}
	if (emit_kind == "json") {
		json j = envelope("ward", config, g);
		j["correlation"] = json::parse(sym::to_json(corr));
		stamp(j, g, t);
		emit(out, j);
		return 0;
	}
	if (emit_kind != "eval")
		throw validation_error("BadEmit", "--emit must be latex, json or eval");
	if (xs.empty())
		throw validation_error("MissingPoints", "--emit eval needs vertex points re,im;re,im;...");
	const auto z = point_list(zs_arg, "--z");
	if (int(z.size()) != n)
		throw validation_error("MissingPoints", "--z needs one point per T insertion");
	std::vector<double> alphas;
	for (auto &a : split(alphas_arg, ','))
		alphas.push_back(number(a, "--alpha"));
	if (int(alphas.size()) != N)
		throw validation_error("MissingWeights", "--alpha needs one value per vertex");
	const json mj = metric_json(metric);
	const auto m = parse_metric(mj);
	const double Q = 2 / gamma + gamma / 2, c = 1 + 6 * Q * Q;
	std::vector<double> weights;
	for (double a : alphas)
		weights.push_back(corr::conformal_weight(a, Q));
	std::map<sym::VarId, cplx> values;
	for (int i = 0; i < n; ++i)
		values[sym::zv(i)] = z[size_t(i)];
	for (int i = 0; i < N; ++i)
		values[sym::xv(i)] = xs[size_t(i)];
	const auto symbols = xcheck::metric_symbols(m, c, weights, values);
	config["z"] = zs_arg;
	config["alpha"] = alphas;
	config["gamma"] = gamma;
	config["metric"] = mj;
	json j = envelope("ward", config, g);
	json terms = json::array();
	for (auto &[key, p] : corr.terms) {
		json d = json::array();
		for (auto &[v, o] : key.deriv)
			d.push_back(json{{"variable", sym::var_name(v)}, {"order", o}});
		terms.push_back(json{{"tcal", key.tcal}, {"derivatives", d}, {"value", cjson(sym::evaluate(p, values, symbols))}});
	}
	j["c"] = c;
	j["terms"] = terms;
	stamp(j, g, t);
	emit(out, j);
	return 0;
}

int cmd_virasoro(const Globals &g, int max_mode, const std::string &emit_kind, std::ostream &out, std::ostream &err)
{
	Timer t;
	if (max_mode < 0 || max_mode > 8)
		throw validation_error("BadMaxMode", "--max-mode must be between 0 and 8");
	if (emit_kind != "table" && emit_kind != "json")
		throw validation_error("BadEmit", "--emit must be table or json");
	json j = envelope("virasoro", {{"max_mode", max_mode}, {"emit", emit_kind}}, g);
	json rows = json::array();
	bool all = true;
	std::ostringstream table;
	table << "# config: " << j["config"].dump() << "\n";
	table << "n\tm\tequal\tcentral\n";
	for (int a = -max_mode; a <= max_mode; ++a)
		for (int b = -max_mode; b <= max_mode; ++b) {
			const auto r = vir::commutator_check(a, b);
			all = all && r.equal;
			rows.push_back({{"n", a}, {"m", b}, {"equal", r.equal}, {"central", r.central.get_str()}});
			table << a << "\t" << b << "\t" << (r.equal ? "true" : "false") << "\t" << r.central.get_str() << "\n";
		}
	if (emit_kind == "table")
		out << table.str();
	else {
		j["rows"] = rows;
		j["all_equal"] = all;
		stamp(j, g, t);
		emit(out, j);
	}
	if (!all) {
		err << json{{"error", "CommutatorMismatch"}, {"message", "structural equality failed for some pair"}, {"exit_code", 2}}.dump()
		    << "\n";
		return 2;
	}
	return 0;
}

beltrami::Perturbation perturbation_from_json(const json &p, const beltrami::Grid &grid)
{
	check_keys(p, {"kind", "amplitude", "center", "radius", "components", "grid_path"}, "perturbation");
	const std::string kind = p.at("kind");
	if (kind == "grid") {
		auto f = perturbation_from_file(p.at("grid_path"), grid.support);
		if (f.grid.n != grid.n || f.grid.half_width != grid.half_width)
			throw validation_error("GridFormat", "perturbation file does not match the check grid");
		return f;
	}
	if (kind != "bump")
		throw validation_error("BadPerturbation", "perturbation kind must be bump or grid");
	const double amp = p.at("amplitude"), radius = p.at("radius");
	const cplx center{p.at("center")[0].get<double>(), p.at("center")[1].get<double>()};
	json comp = get_or<json>(p, "components", json{{"fxx", 0.5}, {"fxy", 0.0}, {"fyy", -0.5}});
	check_keys(comp, {"fxx", "fxy", "fyy"}, "components");
	const auto b = xcheck::compact_bump(grid, amp, center, radius);
	auto f = beltrami::Perturbation::zero(grid);
	const double cxx = get_or(comp, "fxx", 0.0), cxy = get_or(comp, "fxy", 0.0), cyy = get_or(comp, "fyy", 0.0);
	for (size_t k = 0; k < b.size(); ++k) {
		f.fxx[k] = cxx * b[k];
		f.fxy[k] = cxy * b[k];
		f.fyy[k] = cyy * b[k];
	}
	return f;
}

int cmd_xcheck(const Globals &g, const std::string &config_path, std::ostream &out)
{
	Timer t;
	const json cj = read_json_file(config_path);
	check_schema(cj);
	auto keys = kCorrelatorKeys;
	keys.insert({"perturbation", "grid", "eps"});
	check_keys(cj, keys, "config");
	const Profile p = tolerance_profile(g.profile);
	xcheck::XCheckConfig cfg;
	json base = cj;
	for (const char *k : {"perturbation", "grid", "eps"})
		base.erase(k);
	cfg.corr = correlator_config(base, p, g.threads);
	cfg.grid.n = p.xcheck_grid;
	if (cj.contains("grid")) {
		check_keys(cj["grid"], {"n", "half_width", "support"}, "grid");
		cfg.grid.n = get_or(cj["grid"], "n", cfg.grid.n);
		cfg.grid.half_width = get_or(cj["grid"], "half_width", cfg.grid.half_width);
		cfg.grid.support = get_or(cj["grid"], "support", cfg.grid.support);
	}
	cfg.eps = get_or(cj, "eps", cfg.eps);
	cfg.solve.tol = p.beltrami_tol;
	if (!cj.contains("perturbation"))
		throw validation_error("MissingKey", "xcheck config needs a perturbation");
	cfg.f = perturbation_from_json(cj["perturbation"], cfg.grid);
	json echo = correlator_echo(cj.contains("metric") ? cj["metric"] : json("round"), cfg.corr);
	echo["perturbation"] = cj["perturbation"];
	echo["grid"] = {{"n", cfg.grid.n}, {"half_width", cfg.grid.half_width}, {"support", cfg.grid.support}};
	echo["eps"] = cfg.eps;
	const auto r = xcheck::run(cfg, g.seed);
	json j = envelope("xcheck", echo, g);
	j["finite_difference"] = {{"value", r.fd}, {"std_error", r.fd_error}, {"log_derivative", r.fd_log_derivative}};
	json shift = json::array();
	for (auto s : r.shift)
		shift.push_back(cjson(s));
	j["ward"] = {{"value", r.ward},
	             {"std_error", r.ward_error},
	             {"log_derivative", r.ward_log_derivative},
	             {"trace_part", r.ward_trace},
	             {"point_velocity", shift}};
	j["sigma_distance"] = r.sigma_distance;
	j["correlator"] = {{"value", r.correlator}, {"std_error", r.correlator_error}};
	j["beltrami"] = {{"sup_norm", r.sup_norm}, {"terms_used", r.terms_used}, {"residual", r.residual}};
	stamp(j, g, t);
	emit(out, j);
	return 0;
}

void error_json(std::ostream &err, const std::string &kind, const std::string &msg, int code,
                const std::string &usage = "")
{
	json e = {{"error", kind}, {"message", msg}, {"exit_code", code}};
	if (!usage.empty())
		e["usage"] = usage;
	err << e.dump() << "\n";
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
	CLI::App app{"lcft: Liouville correlations, Ward identities and Virasoro checks", "lcft"};
	app.require_subcommand(1);
	app.fallthrough();
	Globals g;
	app.add_option("--seed", g.seed, "master seed");
	app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 256));
	app.add_flag("--deterministic", g.deterministic, "omit timings so outputs are byte-identical");
	app.add_option("--tolerance-profile", g.profile, "strict, default or fast")
	    ->check(CLI::IsMember({"strict", "default", "fast"}));

	std::string metric = "round", xs, ys, method = "auto";
	long terms = 400;
	auto *green = app.add_subcommand("green", "Green function of a sphere metric");
	green->add_option("--metric", metric);
	green->add_option("--x", xs, "re,im")->required();
	green->add_option("--y", ys, "re,im")->required();
	green->add_option("--method", method, "auto, eigen or double");
	green->add_option("--terms", terms);

	double gamma = 0.8;
	long samples = 1000;
	std::string out_path, reg = "spectral";
	std::vector<std::string> balls;
	int n_max = 400, n_r = 64, n_theta = 96;
	double circle_eps = 0.05;
	bool with_rho = false;
	auto *gmc = app.add_subcommand("gmc", "chaos measure samples");
	gmc->add_option("--gamma", gamma)->required();
	gmc->add_option("--metric", metric);
	gmc->add_option("--samples", samples);
	gmc->add_option("--out", out_path, "CSV path; the JSON sidecar is <path>.json")->required();
	gmc->add_option("--ball", balls, "re,im,radius (repeatable)");
	gmc->add_option("--n-max", n_max);
	gmc->add_option("--regularization", reg, "spectral or circle");
	gmc->add_option("--circle-eps", circle_eps);
	gmc->add_option("--n-r", n_r);
	gmc->add_option("--n-theta", n_theta);
	gmc->add_flag("--with-rho", with_rho, "include the rho factor (M instead of m)");

	std::string config;
	auto *correlator = app.add_subcommand("correlator", "Monte Carlo vertex correlation");
	correlator->add_option("--config", config)->required();

	std::string pert, dir;
	double eps = 0, support = 0;
	int max_terms = 60;
	auto *belt = app.add_subcommand("beltrami", "solve the Beltrami equation for a metric perturbation");
	belt->add_option("--metric", metric);
	belt->add_option("--perturbation", pert)->required();
	belt->add_option("--eps", eps)->required();
	belt->add_option("--out", dir)->required();
	belt->add_option("--support", support);
	belt->add_option("--max-terms", max_terms);

	int n = 1;
	std::string vertices = "3", mode = "flat", emit_kind = "json", zarg, alphas;
	auto *ward = app.add_subcommand("ward", "Ward identity expansion");
	ward->add_option("--n", n)->required();
	ward->add_option("--vertices", vertices, "count, or points re,im;re,im;...")->required();
	ward->add_option("--mode", mode, "flat or symbolic");
	ward->add_option("--emit", emit_kind, "latex, json or eval");
	ward->add_option("--z", zarg, "T points re,im;... for eval");
	ward->add_option("--alpha", alphas, "vertex charges a1,a2,... for eval");
	ward->add_option("--gamma", gamma);
	ward->add_option("--metric", metric);

	int max_mode = 5;
	std::string vemit = "table";
	auto *vir = app.add_subcommand("virasoro", "commutator check of the pairings");
	vir->add_option("--max-mode", max_mode);
	vir->add_option("--emit", vemit, "table or json");

	auto *xc = app.add_subcommand("xcheck", "metric derivative against the Ward prediction");
	xc->add_option("--config", config)->required();

	std::vector<std::string> argv_store = args;
	std::vector<char *> argv;
	for (auto &a : argv_store)
		argv.push_back(a.data());
	try {
		app.parse(int(argv.size()), argv.data());
	} catch (const CLI::CallForHelp &) {
		out << app.help();
		return 0;
	} catch (const CLI::ParseError &e) {
		error_json(err, "UsageError", e.what(), 1, app.help());
		return 1;
	}
	try {
		if (*green)
			return cmd_green(g, metric, xs, ys, method, terms, out);
		if (*gmc)
			return cmd_gmc(g, gamma, metric, samples, out_path, balls, n_max, reg, circle_eps, n_r, n_theta, with_rho,
			               out);
		if (*correlator)
			return cmd_correlator(g, config, out);
		if (*belt)
			return cmd_beltrami(g, metric, pert, eps, dir, support, max_terms, out);
		if (*ward)
			return cmd_ward(g, n, vertices, mode, emit_kind, zarg, alphas, gamma, metric, out);
		if (*vir)
			return cmd_virasoro(g, max_mode, vemit, out, err);
		if (*xc)
			return cmd_xcheck(g, config, out);
	} catch (const Error &e) {
		const int code = e.error_class() == ErrorClass::Validation ? 1 : 2;
		error_json(err, e.kind(), e.what(), code);
		return code;
	} catch (const json::exception &e) {
		error_json(err, "ConfigType", e.what(), 1);
		return 1;
	} catch (const std::exception &e) {
		error_json(err, "InternalError", e.what(), 2);
		return 2;
	}
	return 1;
}

int run(int argc, char **argv)
{
	std::vector<std::string> args(argv, argv + argc);
	return run(args, std::cout, std::cerr);
}

} // namespace lcft::cli
