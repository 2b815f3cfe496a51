#include "lcft/quadrature.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <map>
#include <mutex>

namespace lcft {

const GaussRule &gauss_legendre(int n)
{
	static std::map<int, GaussRule> cache;
	static std::mutex mu;
	std::lock_guard<std::mutex> lock(mu);
	if (auto it = cache.find(n); it != cache.end())
		return it->second;
	GaussRule r;
	auto zeros = boost::math::legendre_p_zeros<double>(n);
	auto weight = [n](double x) {
		double d = boost::math::legendre_p_prime<double>(n, x);
		return 2.0 / ((1 - x * x) * d * d);
	};
	for (double z : zeros) {
		if (z == 0) {
			r.x.push_back(0);
			r.w.push_back(weight(0));
			continue;
		}
		r.x.push_back(z);
		r.w.push_back(weight(z));
		r.x.push_back(-z);
		r.w.push_back(weight(-z));
	}
	std::vector<size_t> idx(r.x.size());
	for (size_t i = 0; i < idx.size(); ++i)
		idx[i] = i;
	std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return r.x[a] < r.x[b]; });
	GaussRule s;
	for (size_t i : idx) {
		s.x.push_back(r.x[i]);
		s.w.push_back(r.w[i]);
	}
	return cache.emplace(n, std::move(s)).first->second;
}

} // namespace lcft
