#include <cmath>
#include <random>
#include <set>

#include "capac/domain.hpp"
#include "doctest.h"

using namespace capac;

namespace {

struct World {
  DomainManager dm{KeySource(7)};
  std::vector<GateHandle> gates;

  explicit World(int n = 3) {
    for (int i = 1; i <= n; ++i) {
      REQUIRE(dm.register_domain("d" + std::to_string(i), static_cast<DomainId>(i)).ok());
      gates.push_back(dm.mint_gate(static_cast<DomainId>(i)).value());
    }
    dm.seal();
  }
  const GateHandle& gate(DomainId id) const { return gates.at(id - 1); }
};

}  // namespace

TEST_SUITE("domain") {
  TEST_CASE("registration fills distinct DST entries that authenticate under their key") {
    World w;
    std::set<std::uint64_t> seen;
    for (DomainId i = 1; i <= 3; ++i) {
      auto e = w.dm.dst().lookup(i);
      REQUIRE(e.has_value());
      seen.insert(e->raw());
      const Domain* d = w.dm.find(i);
      REQUIRE(d != nullptr);
      CHECK(pac_auth(*e, d->db_key, 0).raw() == i);
      CHECK(d->mte_tag == i);
    }
    CHECK(seen.size() == 3);
    CHECK_FALSE(w.dm.dst().lookup(0).has_value());
  }

  TEST_CASE("registration errors") {
    DomainManager dm{KeySource(1)};
    REQUIRE(dm.register_domain("a", 1).ok());
    CHECK(dm.register_domain("b", 1).error().code == Errc::DuplicateId);
    CHECK(dm.register_domain("a", 2).error().code == Errc::DuplicateId);
    CHECK(dm.register_domain("z", 0).error().code == Errc::UnknownDomain);
    CHECK(dm.register_domain("z", 16).error().code == Errc::UnknownDomain);
    dm.seal();
    CHECK(dm.register_domain("c", 3).error().code == Errc::AfterInitSealed);
    CHECK(dm.mint_gate(1).error().code == Errc::AfterInitSealed);
  }

  TEST_CASE("DST is read-only after seal and digest-stable") {
    World w;
    const auto before = w.dm.dst().digest();
    auto r = w.dm.dst().write(1, SignedValue64(0x55));
    CHECK(r.error().code == Errc::AfterInitSealed);
    CHECK(w.dm.dst().digest() == before);
  }

  TEST_CASE("entry with a valid token switches keys") {
    World w;
    CpuContext ctx = w.dm.make_context();
    const auto token = w.dm.make_entry_token(w.gate(2));
    REQUIRE(w.dm.capac_enter(ctx, token, 2, 0x2a).ok());
    CHECK(ctx.active_db() == w.dm.find(2)->db_key);
    CHECK(ctx.mod_reg() == 0x2a);
    CHECK(ctx.curr_dom() == 2);
    CHECK(ctx.in_domain());

    const SignedValue64 v(0x1000);
    const auto s = pac_sign(v, ctx.active_db(), ctx.mod_reg()).value();
    CHECK(s == pac_sign(v, w.dm.find(2)->db_key, 0x2a).value());
  }

  TEST_CASE("token of one domain replayed for another is denied and terminates") {
    World w;
    CpuContext ctx = w.dm.make_context();
    const auto token = w.dm.make_entry_token(w.gate(2));
    auto r = w.dm.capac_enter(ctx, token, 3, 0);
    CHECK(r.error().code == Errc::EntryDenied);
    CHECK(ctx.terminated());
    CHECK(w.dm.capac_enter(ctx, w.dm.make_entry_token(w.gate(3)), 3, 0).error().code ==
          Errc::ProcessTerminated);
  }

  TEST_CASE("10^4 forged tokens: none granted") {
    World w;
    std::mt19937_64 rng(123);
    int granted = 0;
    for (int i = 0; i < 10000; ++i) {
      CpuContext ctx = w.dm.make_context();
      granted += w.dm.capac_enter(ctx, rng(), 1 + static_cast<DomainId>(i % 3), 0).ok();
    }
    CHECK(granted == 0);
  }

  TEST_CASE("nesting, unknown, exit errors") {
    World w;
    CpuContext ctx = w.dm.make_context();
    REQUIRE(w.dm.enter(ctx, w.gate(1), 0).ok());
    CHECK(w.dm.enter(ctx, w.gate(2), 0).error().code == Errc::NestedEntry);
    REQUIRE(w.dm.capac_exit(ctx).ok());
    CHECK(w.dm.capac_exit(ctx).error().code == Errc::NotInDomain);
    CHECK(w.dm.capac_enter(ctx, 0, 9, 0).error().code == Errc::UnknownDomain);
  }

  TEST_CASE("enter then exit restores the pre-entry context") {
    World w;
    CpuContext ctx = w.dm.make_context();
    const CpuContext before = ctx;
    REQUIRE(w.dm.enter(ctx, w.gate(3), 99).ok());
    REQUIRE(w.dm.authenticate_current_domain(ctx).ok());
    REQUIRE(w.dm.capac_exit(ctx).ok());
    CHECK(ctx == before);
    CHECK(ctx.active_db() == w.dm.da());
  }

  TEST_CASE("pointers signed inside a domain fail after exit") {
    World w;
    CpuContext ctx = w.dm.make_context();
    REQUIRE(w.dm.enter(ctx, w.gate(1), 5).ok());
    std::vector<SignedValue64> signed_ptrs;
    for (std::uint64_t i = 0; i < 200; ++i) {
      signed_ptrs.push_back(
          pac_sign(SignedValue64(0x2000 + 16 * i), ctx.active_db(), ctx.mod_reg()).value());
    }
    REQUIRE(w.dm.capac_exit(ctx).ok());
    int accepted = 0;
    for (auto s : signed_ptrs) accepted += pac_verify(s, ctx.active_db(), ctx.mod_reg());
    // Only 7-bit collisions survive: expectation 200/128.
    CHECK(accepted <= 8);
  }

  TEST_CASE("authenticate_current_domain") {
    World w;
    CpuContext ctx = w.dm.make_context();
    SUBCASE("inside domain 2") {
      REQUIRE(w.dm.enter(ctx, w.gate(2), 0).ok());
      CHECK(w.dm.authenticate_current_domain(ctx).value() == (2ULL << 56));
      CHECK(ctx.tag_reg() == (2ULL << 56));
      w.dm.release_tag_mask(ctx);
      CHECK(ctx.tag_reg() == 0);
    }
    SUBCASE("curr_dom overwritten while DB_2 active") {
      REQUIRE(w.dm.enter(ctx, w.gate(2), 0).ok());
      ctx.overwrite_curr_dom(3);
      auto r = w.dm.authenticate_current_domain(ctx);
      CHECK(r.error().code == Errc::DomainAuthFailure);
      CHECK(ctx.terminated());
      CHECK(ctx.tag_reg() == 0);
    }
    SUBCASE("curr_dom overwritten to an unregistered id") {
      REQUIRE(w.dm.enter(ctx, w.gate(2), 0).ok());
      ctx.overwrite_curr_dom(5);
      CHECK(w.dm.authenticate_current_domain(ctx).error().code == Errc::DomainAuthFailure);
    }
    SUBCASE("ambient context") {
      CHECK(w.dm.authenticate_current_domain(ctx).error().code == Errc::DomainAuthFailure);
    }
    SUBCASE("ambient context claiming a domain") {
      ctx.overwrite_curr_dom(1);
      CHECK(w.dm.authenticate_current_domain(ctx).error().code == Errc::DomainAuthFailure);
    }
  }

  TEST_CASE("key-switch soundness over random traces") {
    World w(4);
    std::mt19937_64 rng(2024);
    struct Signed {
      SignedValue64 v;
      DomainId dom;
      std::uint64_t mod;
    };
    int same_rejected = 0, cross_total = 0, cross_accepted = 0;
    for (int trace = 0; trace < 50; ++trace) {
      CpuContext ctx = w.dm.make_context();
      std::vector<Signed> pool;
      for (int step = 0; step < 40; ++step) {
        switch (rng() % 4) {
          case 0:
            if (!ctx.in_domain()) {
              const auto d = static_cast<DomainId>(1 + rng() % 4);
              REQUIRE(w.dm.enter(ctx, w.gate(d), rng() % 3).ok());
            }
            break;
          case 1:
            if (ctx.in_domain()) REQUIRE(w.dm.capac_exit(ctx).ok());
            break;
          case 2: {
            const SignedValue64 v(0x1000 + 16 * (rng() % 1000));
            pool.push_back({pac_sign(v, ctx.active_db(), ctx.mod_reg()).value(), ctx.curr_dom(),
                            ctx.mod_reg()});
            break;
          }
          default:
            if (!pool.empty()) {
              const auto& s = pool[rng() % pool.size()];
              const bool same = s.dom == ctx.curr_dom() && s.mod == ctx.mod_reg();
              const bool ok = pac_verify(s.v, ctx.active_db(), ctx.mod_reg());
              if (same) {
                same_rejected += !ok;
              } else {
                ++cross_total;
                cross_accepted += ok;
              }
            }
        }
      }
    }
    CHECK(same_rejected == 0);
    REQUIRE(cross_total > 100);
    // 7-bit collisions only: mean cross_total/128, bound at mean + 4 sigma + 1.
    const double mean = cross_total / 128.0;
    CHECK(cross_accepted <= mean + 4 * std::sqrt(mean) + 1);
  }
}
