#pragma once
#include <stdexcept>
#include <string>

namespace lcft {

// Validation errors map to exit code 1, numerical failures to exit code 2.
enum class ErrorClass { Validation, Numerical };

class Error : public std::runtime_error {
public:
	Error(std::string kind, const std::string &what, ErrorClass cls)
	    : std::runtime_error(what), kind_(std::move(kind)), cls_(cls) {}
	const std::string &kind() const { return kind_; }
	ErrorClass error_class() const { return cls_; }

private:
	std::string kind_;
	ErrorClass cls_;
};

inline Error validation_error(const std::string &kind, const std::string &what)
{
	return Error(kind, what, ErrorClass::Validation);
}

inline Error numerical_error(const std::string &kind, const std::string &what)
{
	return Error(kind, what, ErrorClass::Numerical);
}

} // namespace lcft
