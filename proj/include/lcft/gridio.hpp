#pragma once
// Binary grid files: 16-byte header then float64 blocks, row-major with y outer.
//   bytes 0-3   magic ("LCGS" metric sigma, "LCGP" perturbation, "LCGF" solver output)
//   bytes 4-7   uint32 nx
//   bytes 8-11  uint32 ny
//   bytes 12-15 float32 half-width L; nodes x_i = -L + 2L i/(nx-1)
#include <cstdint>
#include <string>
#include <vector>

namespace lcft::io {

struct GridBlock {
	uint32_t nx = 0, ny = 0;
	float half_width = 0;
	std::vector<double> data;
	double h() const { return 2.0 * half_width / (nx - 1); }
	double x(uint32_t i) const { return -half_width + h() * i; }
	double y(uint32_t j) const { return -half_width + h() * j; }
	double at(uint32_t i, uint32_t j) const { return data[size_t(j) * nx + i]; }
	double &at(uint32_t i, uint32_t j) { return data[size_t(j) * nx + i]; }
};

inline constexpr char kSigmaMagic[4] = {'L', 'C', 'G', 'S'};
inline constexpr char kPerturbationMagic[4] = {'L', 'C', 'G', 'P'};
inline constexpr char kFieldMagic[4] = {'L', 'C', 'G', 'F'}; // solver output

// Writes blocks of identical shape after one header.
void write_grid(const std::string &path, const char magic[4], const std::vector<GridBlock> &blocks);
// Returns all blocks found; block count follows from the file size.
std::vector<GridBlock> read_grid(const std::string &path, const char magic[4]);

} // namespace lcft::io
