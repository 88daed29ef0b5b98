#pragma once

#include <stdexcept>
#include <string>

namespace frvm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid topology, pool, schedule, campaign or scenario description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An address pool has no free address for the requested draw.
class AllocationError : public Error {
 public:
  using Error::Error;
};

/// A translation was requested for an endpoint that has no mapping.
/// In the data plane the same condition shows up as a table miss and a drop.
class LookupMiss : public Error {
 public:
  using Error::Error;
};

/// A domain name has no record.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// A flow entry would make table matching ambiguous.
class InstallError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the support of a probability model.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace frvm
