#pragma once
// Command-line front end: subcommands green, gmc, correlator, beltrami, ward, virasoro, xcheck.
#include "lcft/correlator.hpp"
#include "lcft/geometry.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace lcft::cli {

inline constexpr const char *kSchema = "lcft.config/1";

// Exit codes: 0 ok, 1 validation (bad input, unknown flag, Seiberg violation), 2 numerical failure.
int run(int argc, char **argv);
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

// "round", "round:<K>", "equator", "flat", "grid:<path>", or a JSON object
geo::ConformalMetric parse_metric(const nlohmann::json &spec);
nlohmann::json metric_json(const std::string &spec);

struct Profile {
	std::string name = "default";
	double beltrami_tol = 1e-10;
	int n_max = 440;
	int xcheck_grid = 512;
};
Profile tolerance_profile(const std::string &name);

// config file -> correlator config; throws validation errors on unknown keys or a bad schema
corr::CorrelatorConfig correlator_config(const nlohmann::json &j, const Profile &p, int threads);
// fully resolved echo including defaults
nlohmann::json correlator_echo(const nlohmann::json &metric, const corr::CorrelatorConfig &cfg);

} // namespace lcft::cli
