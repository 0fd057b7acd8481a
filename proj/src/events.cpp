#include "capac/events.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace capac {

std::string_view event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::PathAuth: return "PATH-AUTH";
    case EventKind::PathDeny: return "PATH-DENY";
    case EventKind::FdSign: return "FD-SIGN";
    case EventKind::FdAuth: return "FD-AUTH";
    case EventKind::FdDeny: return "FD-DENY";
    case EventKind::FdClose: return "FD-CLOSE";
    case EventKind::PtrSign: return "PTR-SIGN";
    case EventKind::PtrAuth: return "PTR-AUTH";
    case EventKind::DomEnter: return "DOM-ENTER";
    case EventKind::DomExit: return "DOM-EXIT";
    case EventKind::DomAuth: return "DOM-AUTH";
    case EventKind::Delegate: return "DELEGATE";
    case EventKind::Alloc: return "ALLOC";
    case EventKind::Free: return "FREE";
    case EventKind::Output: return "OUTPUT";
    case EventKind::Fault: return "FAULT";
    case EventKind::Attack: return "ATTACK";
  }
  return "?";
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Event::field(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  return {};
}

std::string Event::format() const {
  std::string out = "EVT " + std::to_string(seq) + " ";
  out += event_kind_name(kind);
  out += " dom=" + std::to_string(dom);
  for (const auto& [k, v] : fields) {
    out += ' ';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

void EventLog::record(EventKind kind, unsigned dom, Fields fields) {
  Event e;
  e.seq = events_.size();
  e.kind = kind;
  e.dom = dom;
  e.fields = std::move(fields);
  events_.push_back(std::move(e));
}

EventCounters EventLog::counters() const {
  EventCounters c;
  for (const auto& e : events_) {
    switch (e.kind) {
      case EventKind::DomEnter: ++c.domain_switches; break;
      case EventKind::PathAuth:
      case EventKind::FdAuth: ++c.auth_syscalls; break;
      case EventKind::Alloc:
        if (!e.field("tag").empty() && e.field("tag") != "0") ++c.private_allocs;
        break;
      case EventKind::PtrSign:
        (e.field("key") == "DB" ? c.pac_db : c.pac_da) += 1;
        break;
      case EventKind::PtrAuth:
        (e.field("key") == "DB" ? c.aut_db : c.aut_da) += 1;
        break;
      default: break;
    }
  }
  return c;
}

std::string EventLog::format() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.format();
    out += '\n';
  }
  return out;
}

std::string EventCounters::to_json() const {
  nlohmann::ordered_json j;
  j["domain_switches"] = domain_switches;
  j["auth_syscalls"] = auth_syscalls;
  j["private_allocs"] = private_allocs;
  j["pac_db"] = pac_db;
  j["pac_da"] = pac_da;
  j["aut_db"] = aut_db;
  j["aut_da"] = aut_da;
  return j.dump(2);
}

}  // namespace capac
