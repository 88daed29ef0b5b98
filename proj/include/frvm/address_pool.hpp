#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "frvm/error.hpp"
#include "frvm/ip.hpp"
#include "frvm/random.hpp"

namespace frvm {

/// A set of disjoint CIDR blocks with a lease book.
///
/// Addresses are indexed by a dense offset in [0, capacity) that walks the
/// blocks in ascending address order. The lease book is a sorted vector of
/// offsets, so drawing the i-th free address is a single merge pass over the
/// leased offsets.
class AddressPool {
 public:
  explicit AddressPool(std::vector<Cidr> ranges) : ranges_(std::move(ranges)) {
    if (ranges_.empty()) throw ConfigError("address pool needs at least one CIDR block");
    std::sort(ranges_.begin(), ranges_.end());
    for (std::size_t i = 1; i < ranges_.size(); ++i) {
      if (ranges_[i - 1].overlaps(ranges_[i])) {
        throw ConfigError("address pool blocks " + ranges_[i - 1].to_string() + " and " +
                          ranges_[i].to_string() + " overlap");
      }
    }
    starts_.reserve(ranges_.size());
    for (const auto& block : ranges_) {
      starts_.push_back(capacity_);
      capacity_ += block.size();
    }
  }

  static AddressPool parse(std::initializer_list<std::string_view> blocks) {
    std::vector<Cidr> ranges;
    for (auto text : blocks) ranges.push_back(Cidr::parse(text));
    return AddressPool(std::move(ranges));
  }

  static AddressPool parse(const std::vector<std::string>& blocks) {
    std::vector<Cidr> ranges;
    for (const auto& text : blocks) ranges.push_back(Cidr::parse(text));
    return AddressPool(std::move(ranges));
  }

  const std::vector<Cidr>& ranges() const { return ranges_; }
  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t allocated_count() const { return allocated_.size(); }
  std::uint64_t free_count() const { return capacity_ - allocated_.size(); }

  bool contains(IpAddress ip) const { return find_range(ip) != ranges_.size(); }

  bool overlaps(const AddressPool& other) const {
    for (const auto& a : ranges_) {
      for (const auto& b : other.ranges_) {
        if (a.overlaps(b)) return true;
      }
    }
    return false;
  }

  bool is_allocated(IpAddress ip) const {
    const auto index = find_range(ip);
    if (index == ranges_.size()) return false;
    return std::binary_search(allocated_.begin(), allocated_.end(), offset_in(index, ip));
  }

  IpAddress at(std::uint64_t offset) const {
    if (offset >= capacity_) throw LookupMiss("pool offset out of range");
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    const auto index = static_cast<std::size_t>(it - starts_.begin()) - 1;
    return IpAddress(ranges_[index].first().value() +
                     static_cast<std::uint32_t>(offset - starts_[index]));
  }

  std::uint64_t offset_of(IpAddress ip) const {
    const auto index = find_range(ip);
    if (index == ranges_.size()) {
      throw LookupMiss("address " + ip.to_string() + " is outside the pool");
    }
    return offset_in(index, ip);
  }

  /// Leases an address drawn uniformly from the unallocated part of the pool.
  IpAddress draw(RandomSource& rng) {
    if (free_count() == 0) throw AllocationError("address pool exhausted");
    auto candidate = rng.below(free_count());
    auto it = allocated_.begin();
    for (; it != allocated_.end() && *it <= candidate; ++it) ++candidate;
    allocated_.insert(it, candidate);
    return at(candidate);
  }

  /// Leases a specific address.
  void allocate(IpAddress ip) {
    const auto offset = offset_of(ip);
    const auto it = std::lower_bound(allocated_.begin(), allocated_.end(), offset);
    if (it != allocated_.end() && *it == offset) {
      throw AllocationError("address " + ip.to_string() + " is already allocated");
    }
    allocated_.insert(it, offset);
  }

  void release(IpAddress ip) {
    const auto offset = offset_of(ip);
    const auto it = std::lower_bound(allocated_.begin(), allocated_.end(), offset);
    if (it == allocated_.end() || *it != offset) {
      throw AllocationError("address " + ip.to_string() + " is not allocated");
    }
    allocated_.erase(it);
  }

  void release_all() { allocated_.clear(); }

 private:
  std::size_t find_range(IpAddress ip) const {
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), ip,
                               [](IpAddress value, const Cidr& block) { return value < block.first(); });
    if (it == ranges_.begin()) return ranges_.size();
    --it;
    return it->contains(ip) ? static_cast<std::size_t>(it - ranges_.begin()) : ranges_.size();
  }

  std::uint64_t offset_in(std::size_t index, IpAddress ip) const {
    return starts_[index] + (ip.value() - ranges_[index].first().value());
  }

  std::vector<Cidr> ranges_;
  std::vector<std::uint64_t> starts_;
  std::uint64_t capacity_ = 0;
  std::vector<std::uint64_t> allocated_;
};

inline std::uint64_t pool_capacity(const AddressPool& pool) { return pool.capacity(); }

inline IpAddress draw_vip(AddressPool& pool, RandomSource& rng) { return pool.draw(rng); }

}  // namespace frvm
