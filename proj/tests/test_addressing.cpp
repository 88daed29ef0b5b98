#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "frvm/address_pool.hpp"
#include "frvm/multiplex_map.hpp"
#include "frvm/random.hpp"
#include "support.hpp"

using namespace frvm;
using frvm::testing::ip;

TEST(IpAddress, ParsesDottedQuads) {
  EXPECT_EQ(ip("192.168.0.31").value(), 0xC0A8001Fu);
  EXPECT_EQ(ip("192.168.00.00"), ip("192.168.0.0"));
  EXPECT_EQ(ip("10.0.0.100").to_string(), "10.0.0.100");
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.0.0.1", "a.b.c.d", "1..2.3", "1.2.3.4 "}) {
    EXPECT_THROW(IpAddress::parse(bad), ConfigError) << bad;
  }
}

TEST(Cidr, SizeAndContainment) {
  const auto c = Cidr::parse("172.16.0.0/12");
  EXPECT_EQ(c.size(), 1u << 20);
  EXPECT_TRUE(c.contains(ip("172.31.255.255")));
  EXPECT_FALSE(c.contains(ip("172.32.0.0")));
  EXPECT_EQ(Cidr::parse("0.0.0.0/0").size(), std::uint64_t{1} << 32);
  EXPECT_THROW(Cidr::parse("10.0.0.1/24"), ConfigError);
  EXPECT_THROW(Cidr::parse("10.0.0.0/33"), ConfigError);
  EXPECT_TRUE(Cidr::parse("10.0.0.0/8").overlaps(Cidr::parse("10.1.0.0/16")));
  EXPECT_FALSE(Cidr::parse("10.0.0.0/24").overlaps(Cidr::parse("10.0.1.0/24")));
}

TEST(AddressPool, PrivateRangesTotal) {
  const auto pool = AddressPool::parse({"10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"});
  EXPECT_EQ(pool_capacity(pool), 17'891'328u);
  EXPECT_EQ(pool_capacity(pool), (1u << 24) + (1u << 20) + (1u << 16));
}

TEST(AddressPool, RejectsEmptyAndOverlapping) {
  EXPECT_THROW(AddressPool(std::vector<Cidr>{}), ConfigError);
  EXPECT_THROW(AddressPool::parse({"10.0.0.0/16", "10.0.5.0/24"}), ConfigError);
}

TEST(AddressPool, OffsetsRoundTripAcrossBlocks) {
  const auto pool = AddressPool::parse({"192.168.0.0/30", "10.0.0.0/31"});
  EXPECT_EQ(pool.capacity(), 6u);
  std::set<IpAddress> seen;
  for (std::uint64_t i = 0; i < pool.capacity(); ++i) {
    const auto a = pool.at(i);
    EXPECT_TRUE(pool.contains(a));
    EXPECT_EQ(pool.offset_of(a), i);
    seen.insert(a);
  }
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_FALSE(pool.contains(ip("10.0.0.2")));
}

TEST(AddressPool, DrawsEveryAddressOnceThenFails) {
  auto pool = AddressPool::parse({"10.0.0.0/28"});
  RandomSource rng(1);
  std::set<IpAddress> drawn;
  for (int i = 0; i < 16; ++i) drawn.insert(draw_vip(pool, rng));
  EXPECT_EQ(drawn.size(), 16u);
  EXPECT_EQ(pool.free_count(), 0u);
  EXPECT_THROW(pool.draw(rng), AllocationError);
  pool.release(ip("10.0.0.7"));
  EXPECT_EQ(pool.draw(rng), ip("10.0.0.7"));
  EXPECT_THROW(pool.release(ip("10.0.1.0")), LookupMiss);
}

TEST(AddressPool, ExplicitAllocationRejectsDuplicates) {
  auto pool = AddressPool::parse({"10.0.0.0/24"});
  pool.allocate(ip("10.0.0.100"));
  EXPECT_TRUE(pool.is_allocated(ip("10.0.0.100")));
  EXPECT_THROW(pool.allocate(ip("10.0.0.100")), AllocationError);
  EXPECT_THROW(pool.allocate(ip("10.0.1.1")), LookupMiss);
}

// Draws with some addresses leased must be uniform over the free ones.
TEST(AddressPool, DrawIsUniformOverFreeAddresses) {
  auto base = AddressPool::parse({"10.0.0.0/28", "192.168.1.0/29"});  // 24 addresses
  for (auto leased : {"10.0.0.0", "10.0.0.5", "10.0.0.15", "192.168.1.3"}) base.allocate(ip(leased));
  const auto free = base.free_count();
  ASSERT_EQ(free, 20u);
  RandomSource rng(99);
  std::map<IpAddress, int> counts;
  const int draws = 200'000;
  for (int i = 0; i < draws; ++i) {
    auto pool = base;
    const auto a = pool.draw(rng);
    ASSERT_FALSE(base.is_allocated(a));
    ++counts[a];
  }
  ASSERT_EQ(counts.size(), free);
  const double expected = static_cast<double>(draws) / static_cast<double>(free);
  double chi2 = 0.0;
  for (const auto& [addr, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 19 degrees of freedom; 43.8 is the 0.999 quantile.
  EXPECT_LT(chi2, 43.8);
}

TEST(RandomSource, BelowIsInRangeAndDeterministic) {
  RandomSource a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_LT(x, 7u);
    EXPECT_EQ(x, b.below(7));
  }
  EXPECT_NE(derive_seed(5, 1), derive_seed(5, 2));
  EXPECT_EQ(a.split(3).next(), RandomSource(derive_seed(5, 3)).next());
}

class TableTwo : public ::testing::Test {
 protected:
  // Services and vIPs of the de/multiplexing example table.
  void SetUp() override {
    bind(rip1, 23, "10.0.0.100");
    bind(rip1, 80, "192.168.0.31");
    bind(rip1, 25, "10.0.0.103");
    bind(rip2, 21, "192.168.0.31");
    bind(rip2, 25, "10.0.0.100");
    bind(rip3, 80, "10.0.0.103");
  }
  void bind(IpAddress rip, Port port, const char* vip) { map.bind({rip, port}, {ip(vip), port}, space); }

  IpAddress rip1 = ip("203.0.113.1"), rip2 = ip("203.0.113.2"), rip3 = ip("203.0.113.3");
  VirtualSpace space{AddressPool::parse({"10.0.0.0/24", "192.168.0.0/24"})};
  MultiplexMap map;
};

TEST_F(TableTwo, MultiplexAndDemultiplex) {
  EXPECT_EQ(translate(map, {rip1, 80}, Direction::ToVirtual), (Endpoint{ip("192.168.0.31"), 80}));
  EXPECT_EQ(translate(map, {ip("192.168.0.31"), 21}, Direction::ToReal), (Endpoint{rip2, 21}));
  EXPECT_EQ(translate(map, {ip("10.0.0.100"), 23}, Direction::ToReal), (Endpoint{rip1, 23}));
  EXPECT_EQ(translate(map, {ip("10.0.0.100"), 25}, Direction::ToReal), (Endpoint{rip2, 25}));
  EXPECT_EQ(translate(map, {ip("10.0.0.103"), 80}, Direction::ToReal), (Endpoint{rip3, 80}));
  EXPECT_THROW(translate(map, {ip("10.0.0.103"), 22}, Direction::ToReal), LookupMiss);
  EXPECT_TRUE(map.consistent());
}

TEST_F(TableTwo, RoundTripIsIdentity) {
  for (const auto& [real, virt] : map.forward()) {
    const auto v = translate(map, real.endpoint(), Direction::ToVirtual);
    EXPECT_EQ(translate(map, v, Direction::ToReal), real.endpoint());
  }
}

TEST_F(TableTwo, SameVipSamePortIsRejected) {
  EXPECT_THROW(bind(ip("203.0.113.4"), 23, "10.0.0.100"), AllocationError);
  EXPECT_THROW(map.bind({rip3, 80}, {ip("10.0.0.9"), 80}, space), ConfigError);
  EXPECT_THROW(map.bind({rip3, 443}, {ip("10.0.0.9"), 8443}, space), ConfigError);
}

TEST_F(TableTwo, ServicesSharingAVip) {
  const auto at = map.services_at(ip("10.0.0.100"));
  ASSERT_EQ(at.size(), 2u);
  EXPECT_EQ(at[0], (RealEndpoint{rip1, 23}));
  EXPECT_EQ(at[1], (RealEndpoint{rip2, 25}));
}

TEST(MultiplexMap, RemapKeepsUniquenessAndBumpsEpoch) {
  VirtualSpace space(AddressPool::parse({"10.0.0.0/29"}));
  MultiplexMap map;
  RandomSource rng(3);
  for (std::uint8_t h = 1; h <= 8; ++h) {
    for (Port p : {22, 80}) map.bind({IpAddress::from_octets(203, 0, 113, h), p}, space, rng);
  }
  EXPECT_EQ(space.allocated_count(), 16u);
  std::set<std::vector<VirtualEndpoint>> layouts;
  for (int e = 1; e <= 50; ++e) {
    remap_all(map, space, rng);
    EXPECT_EQ(map.epoch(), static_cast<std::uint64_t>(e));
    EXPECT_TRUE(map.consistent());
    EXPECT_EQ(map.size(), 16u);
    EXPECT_EQ(space.allocated_count(), 16u);
    std::vector<VirtualEndpoint> layout;
    for (const auto& [r, v] : map.forward()) layout.push_back(v);
    layouts.insert(layout);
  }
  EXPECT_GT(layouts.size(), 45u);
}

TEST(MultiplexMap, PortCapacityIsEnforced) {
  VirtualSpace space(AddressPool::parse({"10.0.0.0/31"}));
  MultiplexMap map;
  RandomSource rng(3);
  map.bind({ip("203.0.113.1"), 80}, space, rng);
  map.bind({ip("203.0.113.2"), 80}, space, rng);
  EXPECT_THROW(map.bind({ip("203.0.113.3"), 80}, space, rng), AllocationError);
  map.bind({ip("203.0.113.3"), 22}, space, rng);
  map.unbind({ip("203.0.113.1"), 80}, space);
  EXPECT_FALSE(map.find_virtual({ip("203.0.113.1"), 80}));
  EXPECT_THROW(map.unbind({ip("203.0.113.1"), 80}, space), LookupMiss);
}

// With one service and a pool of N, each remap lands on every address with probability 1/N.
TEST(MultiplexMap, RemapIsUniform) {
  VirtualSpace space(frvm::testing::pool_of_size(10));
  MultiplexMap map;
  RandomSource rng(8);
  const RealEndpoint svc{ip("203.0.113.1"), 80};
  map.bind(svc, space, rng);
  std::map<IpAddress, int> counts;
  const int rounds = 100'000;
  for (int i = 0; i < rounds; ++i) {
    remap_all(map, space, rng);
    ++counts[map.to_virtual(svc).vip];
  }
  ASSERT_EQ(counts.size(), 10u);
  double chi2 = 0.0;
  for (const auto& [a, c] : counts) chi2 += (c - 10'000.0) * (c - 10'000.0) / 10'000.0;
  EXPECT_LT(chi2, 27.9);  // 9 dof, 0.999 quantile
}
