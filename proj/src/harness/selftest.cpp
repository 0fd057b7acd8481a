#include "capac/harness/selftest.hpp"

#include <algorithm>
#include <random>

#include "capac/harness/attacks.hpp"

namespace capac::harness {

namespace {

constexpr std::string_view kBase = R"(
domain alpha 1
domain beta 2
file /srv/alpha.dat alpha
assign /srv/alpha.dat alpha
init
)";

SelftestCheck pac_round_trip(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KeySource ks(seed);
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const PaKey k = ks.make_key(KeyId::DB);
    const SignedValue64 v = SignedValue64::tagged(rng(), rng() & 0xF);
    const std::uint64_t mod = rng();
    auto s = pac_sign(v, k, mod);
    if (!s || pac_auth(*s, k, mod) != v) ++failures;
  }
  return {"pac_round_trip", failures == 0, std::to_string(failures) + " failures in 10000"};
}

SelftestCheck pac_forgery(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 1);
  KeySource ks(seed + 1);
  const PaKey k = ks.make_key(KeyId::DA);
  std::uint64_t accepted = 0;
  const std::uint64_t n = 10000;
  for (std::uint64_t i = 0; i < n; ++i) {
    const SignedValue64 v = SignedValue64::tagged(rng(), 0).with_pac(rng() & 0x7F);
    accepted += pac_verify(v, k, rng()) ? 1 : 0;
  }
  const double bound = forgery_bound(n, 7);
  return {"pac_forgery_rate", static_cast<double>(accepted) <= bound,
          std::to_string(accepted) + " accepted, bound " + std::to_string(static_cast<int>(bound))};
}

SelftestCheck fd_brute_force(std::uint64_t seed) {
  auto sc = parse_scenario(kBase);
  Runner r(std::make_shared<const Scenario>(sc.value()), RunOptions{seed});
  if (!r.run_all()) return {"fd_brute_force", false, "setup failed"};
  if (!r.enter(1, 5)) return {"fd_brute_force", false, "enter failed"};
  auto& p = r.proc();
  int good = 0;
  for (int i = 0; i < 100; ++i) {
    auto fd = p.kernel.sys_open(p.ctx, "/srv/alpha.dat");
    if (!fd) return {"fd_brute_force", false, fd.error().to_string()};
    int valid = 0;
    for (unsigned pac = 0; pac < 256; ++pac) {
      const auto cand = SignedFd::compose(fd->fd_num(), fd->caps(), fd->d_bit(), static_cast<std::uint8_t>(pac));
      valid += p.kernel.fd_auth(p.ctx, cand.raw(), 0) ? 1 : 0;
    }
    good += valid == 1;
  }
  return {"fd_brute_force", good == 100, std::to_string(good) + "/100 descriptors with a unique code"};
}

SelftestCheck token_forgery(std::uint64_t seed) {
  auto sc = parse_scenario(kBase);
  Runner r(std::make_shared<const Scenario>(sc.value()), RunOptions{seed});
  if (!r.run_all()) return {"entry_token_forgery", false, "setup failed"};
  std::mt19937_64 rng(seed + 2);
  int grants = 0;
  for (int i = 0; i < 10000; ++i) {
    CpuContext c = r.proc().ctx;
    grants += r.proc().domains().capac_enter(c, rng(), 1, 0) ? 1 : 0;
  }
  return {"entry_token_forgery", grants == 0, std::to_string(grants) + " grants in 10000"};
}

SelftestCheck domain_auth(std::uint64_t seed) {
  auto sc = parse_scenario(kBase);
  Runner r(std::make_shared<const Scenario>(sc.value()), RunOptions{seed});
  if (!r.run_all() || !r.enter(1, 0)) return {"domain_auth", false, "setup failed"};
  auto& p = r.proc();
  const bool genuine = static_cast<bool>(p.domains().authenticate_current_domain(p.ctx));
  p.ctx.overwrite_curr_dom(2);
  auto forged = p.domains().authenticate_current_domain(p.ctx);
  const bool denied = !forged && forged.error().code == Errc::DomainAuthFailure;
  return {"domain_auth", genuine && denied, genuine ? "impersonation " + std::string(denied ? "denied" : "granted")
                                                    : "genuine lookup failed"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(std::uint64_t seed, const std::filesystem::path& scenario_dir) {
  std::vector<SelftestCheck> out{pac_round_trip(seed), pac_forgery(seed), fd_brute_force(seed),
                                 token_forgery(seed), domain_auth(seed)};
  if (scenario_dir.empty()) return out;
  std::vector<std::filesystem::path> suites;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(scenario_dir, ec)) {
    if (e.path().extension() == ".atk") suites.push_back(e.path());
  }
  std::sort(suites.begin(), suites.end());
  for (const auto& path : suites) {
    SelftestCheck c{"suite " + path.filename().string(), false, {}};
    auto suite = load_attack_suite(path);
    if (!suite) {
      c.detail = suite.error().to_string();
    } else if (auto sc = load_scenario(path.parent_path() / suite->scenario); !sc) {
      c.detail = sc.error().to_string();
    } else if (auto rep = run_attack_suite(*sc, *suite, RunOptions{seed}); !rep) {
      c.detail = rep.error().to_string();
    } else {
      c.pass = rep->all_defended();
      c.detail = std::to_string(rep->outcomes.size()) + " directives";
      for (const auto& o : rep->outcomes) {
        if (!o.defended) c.detail += ", breached: " + std::string(attack_kind_name(o.directive.kind));
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace capac::harness
