#include <set>

#include "capac/memiso.hpp"
#include "capac/process.hpp"
#include "capac/refmon.hpp"
#include "doctest.h"

using namespace capac;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

struct Fixture {
  VirtualProcess proc{1234};
  std::vector<GateHandle> gates;

  explicit Fixture(std::vector<FileAssignment> files = {{"/etc/key.pem", 1}}, int domains = 3) {
    for (int i = 1; i <= domains; ++i) {
      REQUIRE(proc.domains().register_domain("d" + std::to_string(i), static_cast<DomainId>(i)).ok());
      gates.push_back(proc.domains().mint_gate(static_cast<DomainId>(i)).value());
    }
    proc.domains().seal();
    REQUIRE(proc.kernel.create_file("/etc/key.pem", bytes_of("0123456789abcdef0123456789abcdef")).ok());
    REQUIRE(proc.kernel.create_file("/tmp/log").ok());
    REQUIRE(proc.kernel.capac_init(files).ok());
  }

  VirtualKernel& k() { return proc.kernel; }
  CpuContext& ctx() { return proc.ctx; }
  void enter(DomainId d, std::uint64_t mod = 0) {
    REQUIRE(proc.domains().enter(proc.ctx, gates.at(d - 1), mod).ok());
  }
  void exit() { REQUIRE(proc.domains().capac_exit(proc.ctx).ok()); }
};

}  // namespace

TEST_SUITE("refmon") {
  TEST_CASE("SignedFd layout") {
    Fixture f;
    auto sfd = f.k().fd_sign(5, kCapRead | kCapWrite, false, f.proc.domains().da()).value();
    CHECK((sfd.raw() & 0x1FFFF) == 5);
    CHECK(((sfd.raw() >> 17) & 0x1F) == 0b00011);
    CHECK(((sfd.raw() >> 22) & 1) == 0);
    CHECK((sfd.raw() >> 31) == 0);
    CHECK(sfd.fd_num() == 5);
    CHECK(f.k().fd_sign(1U << 17, 0, false, f.proc.domains().da()).error().code ==
          Errc::FdRangeExceeded);
  }

  TEST_CASE("encode/decode round trip of fields") {
    for (std::uint32_t n : {0U, 1U, 77U, kMaxFdNum}) {
      for (std::uint8_t caps = 0; caps < 32; ++caps) {
        for (bool d : {false, true}) {
          const auto s = SignedFd::compose(n, caps, d, 0xA5);
          CHECK(s.fd_num() == n);
          CHECK(s.caps() == caps);
          CHECK(s.d_bit() == d);
          CHECK(s.pac() == 0xA5);
          CHECK_FALSE(s.error_bit());
        }
      }
    }
  }

  TEST_CASE("path authentication") {
    Fixture f;
    SUBCASE("owner domain gets a private FD") {
      f.enter(1);
      auto fd = f.k().sys_open(f.ctx(), "/etc/key.pem", &f.proc.log);
      REQUIRE(fd.ok());
      CHECK(fd->d_bit());
      CHECK(fd->caps() == kFileCaps);
    }
    SUBCASE("ambient context is denied") {
      CHECK(f.k().sys_open(f.ctx(), "/etc/key.pem").error().code == Errc::PathAuthDenied);
    }
    SUBCASE("other domain is denied") {
      f.enter(2);
      CHECK(f.k().sys_open(f.ctx(), "/etc/key.pem").error().code == Errc::PathAuthDenied);
    }
    SUBCASE("unlisted files are ambient for everyone") {
      auto a = f.k().sys_open(f.ctx(), "/tmp/log");
      REQUIRE(a.ok());
      CHECK_FALSE(a->d_bit());
      f.enter(3);
      auto b = f.k().sys_open(f.ctx(), "/tmp/log");
      REQUIRE(b.ok());
      CHECK_FALSE(b->d_bit());
    }
    SUBCASE("missing path") {
      CHECK(f.k().sys_open(f.ctx(), "/nope").error().code == Errc::PathResolutionError);
    }
  }

  TEST_CASE("aliases resolve to the canonical inode and stay protected") {
    Fixture f;
    REQUIRE(f.k().create_symlink("/home/key", "/etc/key.pem").ok());
    REQUIRE(f.k().create_symlink("/cfg", "etc").ok());
    const InodeId canon = f.k().resolve("/etc/key.pem").value();
    CHECK(f.k().resolve("/home/key").value() == canon);
    CHECK(f.k().resolve("/cfg/key.pem").value() == canon);
    CHECK(f.k().resolve("/tmp/../etc/./key.pem").value() == canon);
    CHECK(f.k().resolve("etc//key.pem").value() == canon);
    CHECK(f.k().sys_open(f.ctx(), "/home/key").error().code == Errc::PathAuthDenied);
    f.enter(1);
    CHECK(f.k().sys_open(f.ctx(), "/cfg/key.pem").ok());
  }

  TEST_CASE("symlink loops fail resolution") {
    Fixture f;
    REQUIRE(f.k().create_symlink("/a", "/b").ok());
    REQUIRE(f.k().create_symlink("/b", "/a").ok());
    CHECK(f.k().resolve("/a").error().code == Errc::PathResolutionError);
  }

  TEST_CASE("init with empty list leaves everything ambient") {
    Fixture f(std::vector<FileAssignment>{});
    CHECK(f.k().protected_mode());
    CHECK(f.k().sys_open(f.ctx(), "/etc/key.pem").ok());
    f.enter(2);
    CHECK_FALSE(f.k().sys_open(f.ctx(), "/etc/key.pem")->d_bit());
  }

  TEST_CASE("one file, two owners") {
    Fixture f({{"/etc/key.pem", 1}, {"/etc/key.pem", 2}});
    const auto* node = f.k().inode(f.k().resolve("/etc/key.pem").value());
    REQUIRE(node->f_security.has_value());
    CHECK(node->f_security->size() == 2);
    for (DomainId d : {1, 2, 3}) {
      f.enter(d);
      const bool listed = d != 3;
      CHECK(f.k().sys_open(f.ctx(), "/etc/key.pem").ok() == listed);
      f.exit();
    }
  }

  TEST_CASE("init errors") {
    VirtualProcess p(1);
    REQUIRE(p.domains().register_domain("a", 1).ok());
    const std::vector<FileAssignment> bad = {{"/x", 4}};
    CHECK(p.kernel.capac_init(bad).error().code == Errc::UnknownDomain);
    const std::vector<FileAssignment> created = {{"/new/file", 1}};
    CHECK(p.kernel.capac_init(created).ok());
    CHECK(p.kernel.resolve("/new/file").ok());
  }

  TEST_CASE("FD leaked out of its domain is unusable") {
    Fixture f;
    f.enter(1, 7);
    const auto fd = f.k().sys_open(f.ctx(), "/etc/key.pem").value();
    CHECK(f.k().fd_auth(f.ctx(), fd.raw(), kCapRead).ok());
    f.exit();
    CHECK(f.k().fd_auth(f.ctx(), fd.raw(), kCapRead).error().code == Errc::FdAuthDenied);
    f.enter(1, 8);
    CHECK(f.k().fd_auth(f.ctx(), fd.raw(), kCapRead).error().code == Errc::FdAuthDenied);
    f.exit();
    f.enter(1, 7);
    CHECK(f.k().fd_auth(f.ctx(), fd.raw(), kCapRead).ok());
  }

  TEST_CASE("single-bit flips are rejected") {
    Fixture f;
    int accepted = 0, total = 0;
    for (int i = 0; i < 100; ++i) {
      const auto fd = f.k().sys_open(f.ctx(), "/tmp/log").value();
      for (int bit = 0; bit < 32; ++bit) {
        ++total;
        accepted += f.k().fd_auth(f.ctx(), fd.raw() ^ (1U << bit), 0).ok();
      }
    }
    CHECK(total == 3200);
    CHECK(accepted * 256 <= total);
  }

  TEST_CASE("exactly one of 256 PAC values authenticates") {
    Fixture f;
    f.enter(1);
    for (int i = 0; i < 100; ++i) {
      const auto fd = (i % 2 == 0 ? f.k().sys_open(f.ctx(), "/etc/key.pem")
                                  : f.k().sys_open(f.ctx(), "/tmp/log"))
                          .value();
      int valid = 0;
      std::uint32_t found = 0;
      for (std::uint32_t pac = 0; pac < 256; ++pac) {
        const auto cand = SignedFd::compose(fd.fd_num(), fd.caps(), fd.d_bit(),
                                            static_cast<std::uint8_t>(pac));
        if (f.k().fd_auth(f.ctx(), cand.raw(), 0).ok()) {
          ++valid;
          found = pac;
        }
      }
      CHECK(valid == 1);
      CHECK(found == fd.pac());
    }
  }

  TEST_CASE("close reserves the number") {
    Fixture f;
    const auto fd = f.k().sys_open(f.ctx(), "/tmp/log").value();
    REQUIRE(f.k().sys_close(f.ctx(), fd.raw()).ok());
    CHECK(f.k().reserved().contains(fd.fd_num()));
    for (int i = 0; i < 100; ++i) {
      CHECK(f.k().sys_open(f.ctx(), "/tmp/log")->fd_num() != fd.fd_num());
    }
    const auto again = f.k().sys_close(f.ctx(), fd.raw());
    CHECK(again.error().code == Errc::FdReserved);
    const auto& issued = f.k().issued_fd_numbers();
    CHECK(std::set<std::uint32_t>(issued.begin(), issued.end()).size() == issued.size());
  }

  TEST_CASE("ambient FD may be closed from a domain") {
    Fixture f;
    const auto fd = f.k().sys_open(f.ctx(), "/tmp/log").value();
    f.enter(2);
    CHECK(f.k().sys_close(f.ctx(), fd.raw()).ok());
  }

  TEST_CASE("limit_fd") {
    Fixture f;
    f.enter(1);
    const auto fd = f.k().sys_open(f.ctx(), "/etc/key.pem").value();
    SUBCASE("write-only") {
      const auto w = f.k().capac_limit_fd(f.ctx(), fd.raw(), kCapWrite).value();
      CHECK(w.caps() == kCapWrite);
      CHECK(f.k().fd_auth(f.ctx(), w.raw(), kCapRead).error().code == Errc::FdCapDenied);
      CHECK(f.k().fd_auth(f.ctx(), w.raw(), kCapWrite).ok());
    }
    SUBCASE("full mask is identity") {
      const auto same = f.k().capac_limit_fd(f.ctx(), fd.raw(), kCapFieldMask).value();
      CHECK(same == fd);
    }
    SUBCASE("no way back") {
      const auto r = f.k().capac_limit_fd(f.ctx(), fd.raw(), kCapRead).value();
      CHECK(f.k().capac_delegate_fd(f.ctx(), r.raw(), 2, 0, kCapFieldMask).error().code ==
            Errc::FdCapDenied);
      const auto widened = f.k().capac_limit_fd(f.ctx(), r.raw(), kCapFieldMask).value();
      CHECK(widened.caps() == kCapRead);
    }
  }

  TEST_CASE("delegation of a client socket") {
    Fixture f;
    f.enter(1);
    const auto lsock = f.k().sys_socket(f.ctx()).value();
    CHECK(lsock.d_bit());
    CHECK(lsock.caps() == kSocketCaps);
    REQUIRE(f.k().sys_listen(f.ctx(), lsock.raw()).ok());
    REQUIRE(f.k().inject_connection(lsock.fd_num(), bytes_of("GET /")).ok());
    const auto client = f.k().sys_accept(f.ctx(), lsock.raw()).value();
    CHECK(f.k().sys_accept(f.ctx(), lsock.raw()).error().code == Errc::WouldBlock);
    const auto handed = f.k().capac_delegate_fd(f.ctx(), client.raw(), 2, 0, kSocketCaps).value();
    CHECK(handed.fd_num() == client.fd_num());
    CHECK(f.k().fd_auth(f.ctx(), handed.raw(), kCapRead).error().code == Errc::FdAuthDenied);
    f.exit();
    f.enter(2);
    CHECK(f.k().fd_auth(f.ctx(), handed.raw(), kCapRead | kCapSocket).ok());
    CHECK(f.k().fd_auth(f.ctx(), client.raw(), kCapRead).error().code == Errc::FdAuthDenied);
  }

  TEST_CASE("delegation errors") {
    Fixture f;
    f.enter(1);
    const auto sock = f.k().sys_socket(f.ctx()).value();
    const auto forged = SignedFd::compose(sock.fd_num(), kSocketCaps, false, 0x11);
    if (forged.pac() != f.k().fd_sign(sock.fd_num(), kSocketCaps, false, f.proc.domains().da()).value().pac()) {
      CHECK(f.k().capac_delegate_fd(f.ctx(), forged.raw(), 2, 0, kCapFieldMask).error().code ==
            Errc::FdAuthDenied);
    }
    CHECK(f.k().capac_delegate_fd(f.ctx(), sock.raw(), 9, 0, kCapFieldMask).error().code ==
          Errc::UnknownDomain);
    const auto nosock =
        f.k().capac_delegate_fd(f.ctx(), sock.raw(), 2, 0, kFileCaps).value();
    f.exit();
    f.enter(2);
    CHECK(f.k().sys_listen(f.ctx(), nosock.raw()).error().code == Errc::FdCapDenied);
  }

  TEST_CASE("accept without CAP_SOCKET") {
    Fixture f;
    const auto sock = f.k().sys_socket(f.ctx()).value();
    CHECK_FALSE(sock.d_bit());
    REQUIRE(f.k().sys_listen(f.ctx(), sock.raw()).ok());
    const auto limited = f.k().capac_limit_fd(f.ctx(), sock.raw(), kCapRead).value();
    CHECK(f.k().sys_accept(f.ctx(), limited.raw()).error().code == Errc::FdCapDenied);
  }

  TEST_CASE("special descriptors") {
    Fixture f;
    const auto buf = f.proc.heap.allocate(f.proc.mem, 16, 0).value();
    REQUIRE(f.proc.mem.mem_store(buf, bytes_of("hi")).ok());
    const PointerArg arg{pac_sign(buf, f.proc.domains().da(), 0).value(), false};
    for (DomainId d : {0, 1, 2}) {
      if (d != 0) f.enter(d);
      CHECK(f.k().sys_write(f.ctx(), f.proc.mem, 1, arg, 2).ok());
      if (d != 0) f.exit();
    }
    CHECK(std::string(f.k().console(1).begin(), f.k().console(1).end()) == "hihihi");
    REQUIRE(f.k().sys_close(f.ctx(), 2).ok());
    CHECK_FALSE(f.k().reserved().contains(2));
    CHECK(VirtualKernel::special_fd_passthrough(kAtFdcwd).has_value());

    // A signed value naming fd 1 goes through full authentication.
    const auto signed1 = f.k().fd_sign(1, kFileCaps, false, f.proc.domains().da()).value();
    CHECK(signed1.pac() != 0);
    CHECK(f.k().sys_write(f.ctx(), f.proc.mem, signed1.raw(), arg, 2).ok());
    const auto bad1 = SignedFd::compose(1, kFileCaps, false, signed1.pac() ^ 1);
    CHECK(f.k().sys_write(f.ctx(), f.proc.mem, bad1.raw(), arg, 2).error().code ==
          Errc::FdAuthDenied);
  }

  TEST_CASE("read into a private buffer records FD-AUTH then PTR-AUTH") {
    Fixture f;
    f.enter(1, 0x2a);
    const auto fd = f.k().sys_open(f.ctx(), "/etc/key.pem").value();
    const auto buf = capac_malloc(f.ctx(), f.proc.domains(), f.proc.mem, f.proc.heap, 32).value();
    const PointerArg arg{pac_sign(buf, f.ctx().active_db(), f.ctx().mod_reg()).value(), true};
    const auto before = f.proc.log.size();
    CHECK(f.k().sys_read(f.ctx(), f.proc.mem, fd.raw(), arg, 32, &f.proc.log).value() == 32);
    const auto& ev = f.proc.log.events();
    REQUIRE(ev.size() == before + 2);
    CHECK(ev[before].kind == EventKind::FdAuth);
    CHECK(ev[before + 1].kind == EventKind::PtrAuth);
    CHECK(ev[before + 1].field("key") == "DB");
    auto data = f.proc.mem.mem_load(buf, 32).value();
    CHECK(std::string(data.begin(), data.end()) == "0123456789abcdef0123456789abcdef");
  }

  TEST_CASE("read into another domain's buffer") {
    Fixture f({{"/etc/key.pem", 1}, {"/etc/key.pem", 2}});
    f.enter(2);
    const auto foreign = capac_malloc(f.ctx(), f.proc.domains(), f.proc.mem, f.proc.heap, 32).value();
    f.exit();
    f.enter(1);
    const auto fd = f.k().sys_open(f.ctx(), "/etc/key.pem").value();
    // The attacker signs the foreign pointer with its own key; the tag does not match.
    const PointerArg arg{pac_sign(foreign, f.ctx().active_db(), f.ctx().mod_reg()).value(), true};
    CHECK(f.k().sys_read(f.ctx(), f.proc.mem, fd.raw(), arg, 8).error().code == Errc::TagMismatch);
    // The granule table still says domain 2 and the bytes are untouched.
    CHECK(f.proc.mem.granule_tag(foreign.payload()).value() == 2);
  }

  TEST_CASE("R3 for FDs across all domain pairs") {
    Fixture f(std::vector<FileAssignment>{}, 4);
    std::vector<std::pair<DomainId, SignedFd>> issued;
    for (DomainId d = 1; d <= 4; ++d) {
      f.enter(d);
      issued.emplace_back(d, f.k().sys_socket(f.ctx()).value());
      f.exit();
    }
    for (const auto& [owner, fd] : issued) {
      CHECK(f.k().fd_auth(f.ctx(), fd.raw(), 0).error().code == Errc::FdAuthDenied);
      for (DomainId d = 1; d <= 4; ++d) {
        f.enter(d);
        CHECK(f.k().fd_auth(f.ctx(), fd.raw(), kCapSocket).ok() == (d == owner));
        f.exit();
      }
    }
  }

  TEST_CASE("d bit tracks f_security of the opened inode") {
    Fixture f({{"/etc/key.pem", 1}});
    f.enter(1);
    for (const char* path : {"/etc/key.pem", "/tmp/log"}) {
      const auto fd = f.k().sys_open(f.ctx(), path).value();
      CHECK(fd.d_bit() == f.k().inode_of_fd(fd.fd_num())->f_security.has_value());
    }
  }
}
