#pragma once

#include <stdexcept>
#include <string>

namespace sponge {

/// Invalid scenario, fleet, or window configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mathematical precondition violated (e.g. oracle inputs out of domain).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace sponge
