#include <random>

#include "capac/memory.hpp"
#include "doctest.h"

using namespace capac;

TEST_SUITE("memory") {
  TEST_CASE("tag_region sets covering granules and returns a tagged pointer") {
    AddressSpace mem;
    REQUIRE(mem.map(0x1000, 0x100).ok());
    auto p = mem.tag_region(0x1000, 32, 3);
    REQUIRE(p.ok());
    CHECK(p->tag() == 3);
    CHECK(p->payload() == 0x1000);
    CHECK(mem.granule_tag(0x1000).value() == 3);
    CHECK(mem.granule_tag(0x1010).value() == 3);
    CHECK(mem.granule_tag(0x1020).value() == 0);
  }

  TEST_CASE("size rounds up to the granule") {
    AddressSpace mem;
    REQUIRE(mem.map(0x1000, 0x100).ok());
    REQUIRE(mem.tag_region(0x1000, 33, 2).ok());
    CHECK(mem.granule_tag(0x1020).value() == 2);
    CHECK(mem.granule_tag(0x1030).value() == 0);
  }

  TEST_CASE("alignment and bounds") {
    AddressSpace mem;
    REQUIRE(mem.map(0x1000, 0x40).ok());
    CHECK(mem.tag_region(0x1008, 16, 1).error().code == Errc::UnalignedAddress);
    CHECK(mem.tag_region(0x1030, 32, 1).error().code == Errc::OutOfBounds);
    CHECK(mem.stzg_region(0x1004, 16).error().code == Errc::UnalignedAddress);
    CHECK(mem.mem_load(SignedValue64(0x9000), 8).error().code == Errc::Unmapped);
    CHECK(mem.mem_load(SignedValue64(0x103c), 8).error().code == Errc::OutOfBounds);
  }

  TEST_CASE("tag 0 region is ambient") {
    AddressSpace mem;
    REQUIRE(mem.map(0x2000, 0x40).ok());
    REQUIRE(mem.store_u64(SignedValue64(0x2000), 0xdead).ok());
    CHECK(mem.load_u64(SignedValue64(0x2000)).value() == 0xdead);
  }

  TEST_CASE("mismatched tag faults") {
    AddressSpace mem;
    REQUIRE(mem.map(0x2000, 0x40).ok());
    auto p = mem.tag_region(0x2000, 16, 3).value();
    REQUIRE(mem.store_u64(p, 7).ok());
    CHECK(mem.load_u64(p).value() == 7);
    CHECK(mem.load_u64(p.with_tag(5)).error().code == Errc::TagMismatch);
    CHECK(mem.load_u64(SignedValue64(0x2000)).error().code == Errc::TagMismatch);
  }

  TEST_CASE("access straddling granules checks every granule") {
    AddressSpace mem;
    REQUIRE(mem.map(0x2000, 0x40).ok());
    REQUIRE(mem.tag_region(0x2000, 16, 4).ok());
    auto r = mem.mem_load(SignedValue64::tagged(0x2008, 4), 16);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().code == Errc::TagMismatch);
    CHECK(r.error().address == 0x2010);
  }

  TEST_CASE("stale tag after recolor faults, granule table is the oracle") {
    AddressSpace mem;
    REQUIRE(mem.map(0x3000, 0x80).ok());
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      const std::uint64_t g = rng() % 8;
      const auto t1 = static_cast<std::uint8_t>(rng() % 16);
      auto t2 = static_cast<std::uint8_t>(rng() % 16);
      if (t2 == t1) t2 = (t2 + 1) % 16;
      auto p = mem.tag_region(0x3000 + 16 * g, 16, t1).value();
      REQUIRE(mem.tag_region(0x3000 + 16 * g, 16, t2).ok());
      auto st = mem.store_u64(p, 1);
      CHECK_FALSE(st.ok());
      CHECK(st.error().code == Errc::TagMismatch);
      CHECK(mem.granule_tag(p.payload()).value() == t2);
    }
  }

  TEST_CASE("stzg zeroes bytes and tags") {
    AddressSpace mem;
    REQUIRE(mem.map(0x4000, 0x40).ok());
    auto p = mem.tag_region(0x4000, 0x40, 9).value();
    for (int i = 0; i < 8; ++i) REQUIRE(mem.store_u64(p.offset(8 * i), ~0ULL).ok());
    REQUIRE(mem.stzg_region(0x4000, 0x40).ok());
    for (int i = 0; i < 4; ++i) CHECK(mem.granule_tag(0x4000 + 16 * i).value() == 0);
    auto bytes = mem.mem_load(SignedValue64(0x4000), 0x40).value();
    for (auto b : bytes) CHECK(b == 0);
    // Idempotent on an already-clear region.
    const std::string before = mem.dump();
    REQUIRE(mem.stzg_region(0x4000, 0x40).ok());
    CHECK(mem.dump() == before);
  }

  TEST_CASE("non-canonical pointers fault as corrupt") {
    AddressSpace mem;
    REQUIRE(mem.map(0x4000, 0x40).ok());
    CHECK(mem.load_u64(SignedValue64(0x4000 | (1ULL << 55))).error().code ==
          Errc::SegmentationOnCorruptPac);
    CHECK(mem.load_u64(SignedValue64(0x4000 | (1ULL << 62))).error().code ==
          Errc::SegmentationOnCorruptPac);
    CHECK(mem.load_u64(SignedValue64(0x4000).with_pac(1)).error().code ==
          Errc::SegmentationOnCorruptPac);
  }

  TEST_CASE("overlapping maps are rejected") {
    AddressSpace mem;
    REQUIRE(mem.map(0x1000, 0x100).ok());
    CHECK_FALSE(mem.map(0x10f0, 0x20).ok());
    CHECK(mem.map(0x1100, 0x20).ok());
  }

  TEST_CASE("dump format") {
    TagGranuleStore s(0x10, 16);
    REQUIRE(s.tag_region(0x10, 16, 0xa).ok());
    CHECK(s.dump() == "000000000010 a 00 00 00 00 00 00 00 00 00 00 00 00 00 00 00 00\n");
  }
}
