#pragma once

#include <stdexcept>
#include <string>

namespace asymtail {

// configuration / parameter-domain problems (CLI exit code 2)
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// numeric failures: no bracket, quadrature budget, singular constant (CLI exit code 3)
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace asymtail
