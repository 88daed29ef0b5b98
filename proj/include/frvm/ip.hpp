#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "frvm/error.hpp"

namespace frvm {

using Port = std::uint16_t;

/// IPv4 address held as a host-order 32-bit integer.
class IpAddress {
 public:
  constexpr IpAddress() = default;
  constexpr explicit IpAddress(std::uint32_t value) : value_(value) {}

  static constexpr IpAddress from_octets(std::uint8_t a, std::uint8_t b,
                                         std::uint8_t c, std::uint8_t d) {
    return IpAddress((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) |
                     (std::uint32_t{c} << 8) | std::uint32_t{d});
  }

  /// Parses dotted-quad text. Octets may carry leading zeros ("192.168.00.00").
  static IpAddress parse(std::string_view text) {
    std::uint32_t value = 0;
    std::size_t pos = 0;
    for (int octet = 0; octet < 4; ++octet) {
      if (octet > 0) {
        if (pos >= text.size() || text[pos] != '.') {
          throw ConfigError("malformed IPv4 address '" + std::string(text) + "'");
        }
        ++pos;
      }
      const auto start = pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
      unsigned part = 256;
      const auto digits = pos - start;
      if (digits == 0 || digits > 3 ||
          std::from_chars(text.data() + start, text.data() + pos, part).ec != std::errc{} ||
          part > 255) {
        throw ConfigError("malformed IPv4 address '" + std::string(text) + "'");
      }
      value = (value << 8) | part;
    }
    if (pos != text.size()) {
      throw ConfigError("malformed IPv4 address '" + std::string(text) + "'");
    }
    return IpAddress(value);
  }

  constexpr std::uint32_t value() const { return value_; }

  std::string to_string() const {
    std::string out;
    out.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
      out += std::to_string((value_ >> shift) & 0xFFu);
      if (shift > 0) out += '.';
    }
    return out;
  }

  friend constexpr auto operator<=>(IpAddress, IpAddress) = default;

 private:
  std::uint32_t value_ = 0;
};

/// CIDR block "a.b.c.d/p". The base must have all host bits cleared.
struct Cidr {
  IpAddress base;
  int prefix = 32;

  static Cidr parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
      throw ConfigError("CIDR block '" + std::string(text) + "' lacks a prefix length");
    }
    const auto base = IpAddress::parse(text.substr(0, slash));
    const auto len = text.substr(slash + 1);
    int prefix = -1;
    if (len.empty() ||
        std::from_chars(len.data(), len.data() + len.size(), prefix).ptr != len.data() + len.size() ||
        prefix < 0 || prefix > 32) {
      throw ConfigError("CIDR block '" + std::string(text) + "' has a bad prefix length");
    }
    Cidr block{base, prefix};
    if (block.first() != base) {
      throw ConfigError("CIDR block '" + std::string(text) + "' has host bits set");
    }
    return block;
  }

  constexpr std::uint64_t size() const { return std::uint64_t{1} << (32 - prefix); }

  constexpr std::uint32_t mask() const {
    return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
  }

  constexpr IpAddress first() const { return IpAddress(base.value() & mask()); }
  constexpr IpAddress last() const {
    return IpAddress(first().value() + static_cast<std::uint32_t>(size() - 1));
  }

  constexpr bool contains(IpAddress ip) const { return (ip.value() & mask()) == first().value(); }

  constexpr bool overlaps(const Cidr& other) const {
    return first() <= other.last() && other.first() <= last();
  }

  std::string to_string() const { return base.to_string() + "/" + std::to_string(prefix); }

  friend constexpr auto operator<=>(const Cidr&, const Cidr&) = default;
};

/// Generic (address, port) pair as carried in packet headers.
struct Endpoint {
  IpAddress ip;
  Port port = 0;

  std::string to_string() const { return ip.to_string() + ":" + std::to_string(port); }
  friend constexpr auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// A service as the host itself knows it: real address and listening port.
struct RealEndpoint {
  IpAddress rip;
  Port port = 0;

  constexpr Endpoint endpoint() const { return {rip, port}; }
  std::string to_string() const { return endpoint().to_string(); }
  friend constexpr auto operator<=>(const RealEndpoint&, const RealEndpoint&) = default;
};

/// The short-lived public face of a service.
struct VirtualEndpoint {
  IpAddress vip;
  Port port = 0;

  constexpr Endpoint endpoint() const { return {vip, port}; }
  std::string to_string() const { return endpoint().to_string(); }
  friend constexpr auto operator<=>(const VirtualEndpoint&, const VirtualEndpoint&) = default;
};

}  // namespace frvm

template <>
struct std::hash<frvm::IpAddress> {
  std::size_t operator()(frvm::IpAddress ip) const noexcept {
    return std::hash<std::uint32_t>{}(ip.value());
  }
};
