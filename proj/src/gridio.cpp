#include "lcft/gridio.hpp"

#include "lcft/errors.hpp"

#include <cstring>
#include <fstream>

namespace lcft::io {

void write_grid(const std::string &path, const char magic[4], const std::vector<GridBlock> &blocks)
{
	if (blocks.empty())
		throw validation_error("EmptyGrid", "nothing to write");
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw validation_error("IOError", "cannot open " + path);
	const auto &b0 = blocks.front();
	out.write(magic, 4);
	out.write(reinterpret_cast<const char *>(&b0.nx), 4);
	out.write(reinterpret_cast<const char *>(&b0.ny), 4);
	out.write(reinterpret_cast<const char *>(&b0.half_width), 4);
	for (auto &b : blocks) {
		if (b.nx != b0.nx || b.ny != b0.ny || b.data.size() != size_t(b.nx) * b.ny)
			throw validation_error("GridShape", "blocks differ in shape");
		out.write(reinterpret_cast<const char *>(b.data.data()), std::streamsize(b.data.size() * sizeof(double)));
	}
}

std::vector<GridBlock> read_grid(const std::string &path, const char magic[4])
{
	std::ifstream in(path, std::ios::binary | std::ios::ate);
	if (!in)
		throw validation_error("IOError", "cannot open " + path);
	const auto size = static_cast<size_t>(in.tellg());
	in.seekg(0);
	if (size < 16)
		throw validation_error("GridFormat", path + ": truncated header");
	char m[4];
	GridBlock b;
	in.read(m, 4);
	in.read(reinterpret_cast<char *>(&b.nx), 4);
	in.read(reinterpret_cast<char *>(&b.ny), 4);
	in.read(reinterpret_cast<char *>(&b.half_width), 4);
	if (std::memcmp(m, magic, 4) != 0)
		throw validation_error("GridFormat", path + ": bad magic");
	if (b.nx < 5 || b.ny < 5 || !(b.half_width > 0))
		throw validation_error("GridFormat", path + ": bad shape");
	const size_t block = size_t(b.nx) * b.ny * sizeof(double);
	if ((size - 16) % block != 0 || size == 16)
		throw validation_error("GridFormat", path + ": size is not a whole number of blocks");
	std::vector<GridBlock> out;
	for (size_t k = 0; k < (size - 16) / block; ++k) {
		GridBlock g = b;
		g.data.resize(size_t(b.nx) * b.ny);
		in.read(reinterpret_cast<char *>(g.data.data()), std::streamsize(block));
		out.push_back(std::move(g));
	}
	return out;
}

} // namespace lcft::io
