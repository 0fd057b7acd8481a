#pragma once

// Enforcement event log. Line format (stable for golden tests):
//   EVT <seq> <KIND> dom=<id> [key=value ...]

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capac {

enum class EventKind : std::uint8_t {
  PathAuth,
  PathDeny,
  FdSign,
  FdAuth,
  FdDeny,
  FdClose,
  PtrSign,
  PtrAuth,
  DomEnter,
  DomExit,
  DomAuth,
  Delegate,
  Alloc,
  Free,
  Output,
  Fault,
  Attack,
};

std::string_view event_kind_name(EventKind kind);

struct Event {
  std::uint64_t seq = 0;
  EventKind kind{};
  unsigned dom = 0;
  std::vector<std::pair<std::string, std::string>> fields;

  std::string field(std::string_view key) const;
  std::string format() const;
};

std::string hex(std::uint64_t v);

/// Per-category tallies of one run. Every field is derived from the log.
struct EventCounters {
  std::uint64_t domain_switches = 0;
  std::uint64_t auth_syscalls = 0;
  std::uint64_t private_allocs = 0;
  std::uint64_t pac_db = 0;
  std::uint64_t pac_da = 0;
  std::uint64_t aut_db = 0;
  std::uint64_t aut_da = 0;

  friend bool operator==(const EventCounters&, const EventCounters&) = default;
  std::string to_json() const;
};

class EventLog {
 public:
  using Fields = std::vector<std::pair<std::string, std::string>>;

  void record(EventKind kind, unsigned dom, Fields fields = {});
  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  EventCounters counters() const;
  std::string format() const;

 private:
  std::vector<Event> events_;
};

}  // namespace capac
