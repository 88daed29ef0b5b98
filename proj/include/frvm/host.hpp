#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "frvm/error.hpp"
#include "frvm/ip.hpp"

namespace frvm {

/// A server host as registered with the controller.
struct HostRecord {
  std::string host_id;
  IpAddress rip;
  std::vector<Port> services;
  std::string domain_name;
};

/// Which nodes may address which hosts by real IP. Deny by default.
class AuthzPolicy {
 public:
  void allow(std::string source, std::string destination) {
    allowed_.emplace(std::move(source), std::move(destination));
  }

  bool permits(const std::string& source, const std::string& destination) const {
    return allowed_.contains({source, destination});
  }

  const std::set<std::pair<std::string, std::string>>& allowed() const { return allowed_; }

 private:
  std::set<std::pair<std::string, std::string>> allowed_;
};

/// Multiplexing interval T and rate theta = 1/T. A static network never remaps.
class MultiplexSchedule {
 public:
  static MultiplexSchedule every(double interval) {
    if (!(interval > 0.0) || !std::isfinite(interval)) {
      throw ConfigError("multiplexing interval must be positive and finite");
    }
    return MultiplexSchedule(interval);
  }

  static MultiplexSchedule never() {
    return MultiplexSchedule(std::numeric_limits<double>::infinity());
  }

  double interval() const { return interval_; }
  double rate() const { return 1.0 / interval_; }
  bool is_static() const { return std::isinf(interval_); }

 private:
  explicit MultiplexSchedule(double interval) : interval_(interval) {}
  double interval_;
};

}  // namespace frvm
