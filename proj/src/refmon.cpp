#include "capac/refmon.hpp"

#include <algorithm>

namespace capac {

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

std::string join_path(const std::vector<std::string>& parts) {
  if (parts.empty()) return "/";
  std::string out;
  for (const auto& p : parts) out += "/" + p;
  return out;
}

std::vector<std::string> normalize(const std::vector<std::string>& parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) {
    if (p == ".") continue;
    if (p == "..") {
      if (!out.empty()) out.pop_back();
      continue;
    }
    out.push_back(p);
  }
  return out;
}

constexpr int kMaxSymlinkHops = 40;

}  // namespace

VirtualKernel::VirtualKernel(std::shared_ptr<const DomainManager> domains,
                             std::uint64_t secret_fd_modifier)
    : domains_(std::move(domains)), secret_fd_modifier_(secret_fd_modifier) {
  const char* names[] = {"/dev/stdin", "/dev/stdout", "/dev/stderr"};
  for (std::uint32_t i = 0; i < 3; ++i) {
    VirtualInode node;
    node.id = i;
    node.path = names[i];
    node.kind = InodeKind::Console;
    inodes_.push_back(node);
    names_.emplace(node.path, i);
    fds_.emplace(i, FdEntry{i, 0, true});
  }
}

Result<std::string> VirtualKernel::canonicalize(std::string_view path) const {
  if (path.empty()) return Error(Errc::PathResolutionError, "empty path");
  std::vector<std::string> parts = normalize(split_path(path));
  // Expand symlinked prefixes until none remain.
  for (int hops = 0; hops <= kMaxSymlinkHops; ++hops) {
    bool expanded = false;
    for (std::size_t k = 1; k <= parts.size(); ++k) {
      std::vector<std::string> prefix(parts.begin(), parts.begin() + static_cast<long>(k));
      auto it = symlinks_.find(join_path(prefix));
      if (it == symlinks_.end()) continue;
      std::vector<std::string> next;
      const std::string& target = it->second;
      if (target.empty() || target[0] != '/') {
        next.assign(parts.begin(), parts.begin() + static_cast<long>(k) - 1);
      }
      for (auto& p : split_path(target)) next.push_back(std::move(p));
      next.insert(next.end(), parts.begin() + static_cast<long>(k), parts.end());
      parts = normalize(next);
      expanded = true;
      break;
    }
    if (!expanded) return join_path(parts);
  }
  return Error(Errc::PathResolutionError, std::string(path) + ": too many symlink levels");
}

Result<InodeId> VirtualKernel::resolve(std::string_view path) const {
  auto canon = canonicalize(path);
  if (!canon) return canon.error();
  auto it = names_.find(*canon);
  if (it == names_.end()) return Error(Errc::PathResolutionError, *canon + ": no such file");
  return it->second;
}

Result<InodeId> VirtualKernel::create_file(std::string_view path,
                                           std::span<const std::uint8_t> content) {
  auto canon = canonicalize(path);
  if (!canon) return canon.error();
  if (canon->size() <= 1) return Error(Errc::PathResolutionError, "cannot create root");
  if (auto it = names_.find(*canon); it != names_.end()) {
    inodes_[it->second].content.assign(content.begin(), content.end());
    return it->second;
  }
  VirtualInode node;
  node.id = static_cast<InodeId>(inodes_.size());
  node.path = *canon;
  node.content.assign(content.begin(), content.end());
  inodes_.push_back(node);
  names_.emplace(*canon, node.id);
  return node.id;
}

Result<void> VirtualKernel::create_symlink(std::string_view link, std::string_view target) {
  std::string canon_link = join_path(normalize(split_path(link)));
  if (canon_link == "/") return Error(Errc::PathResolutionError, "cannot link root");
  if (names_.contains(canon_link)) {
    return Error(Errc::PathResolutionError, canon_link + ": exists");
  }
  symlinks_[canon_link] = std::string(target);
  return ok();
}

Result<void> VirtualKernel::capac_init(std::span<const FileAssignment> files) {
  for (const auto& f : files) {
    auto id = resolve(f.path);
    if (!id) {
      auto created = create_file(f.path);
      if (!created) return created.error();
      id = *created;
    }
    if (f.owner == kAmbient) continue;
    const Domain* owner = domains_->find(f.owner);
    if (owner == nullptr) return Error(Errc::UnknownDomain, "owner of " + f.path);
    auto sig = pac_sign(SignedValue64(0), owner->db_key, 0);
    if (!sig) return sig.error();
    auto& node = inodes_[*id];
    if (!node.f_security) node.f_security.emplace();
    node.f_security->push_back(*sig);
  }
  protected_ = true;
  return ok();
}

Result<SignedFd> VirtualKernel::fd_sign(std::uint32_t fd_num, std::uint8_t caps, bool d_bit,
                                        const PaKey& signing_key,
                                        std::uint64_t instance_mod) const {
  if (fd_num > kMaxFdNum) return Error(Errc::FdRangeExceeded, fd_num);
  const SignedFd image = SignedFd::compose(fd_num, caps, d_bit, 0);
  const auto pac8 = static_cast<std::uint8_t>(
      mac(signing_key, image.image(), fd_modifier(d_bit, instance_mod)) & 0xFF);
  return SignedFd::compose(fd_num, caps, d_bit, pac8);
}

std::optional<std::uint32_t> VirtualKernel::special_fd_passthrough(std::uint32_t raw) {
  if (raw <= 2 || raw == kAtFdcwd) return raw;
  return std::nullopt;
}

Result<std::uint32_t> VirtualKernel::fd_auth(const CpuContext& ctx, std::uint32_t raw,
                                             std::uint8_t required_caps, EventLog* log) const {
  const SignedFd sfd(raw);
  auto deny = [&](Error e) -> Result<std::uint32_t> {
    if (log != nullptr) {
      log->record(EventKind::FdDeny, ctx.curr_dom(),
                  {{"fd", hex(raw)}, {"why", std::string(errc_name(e.code))}});
    }
    return e;
  };
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  if (sfd.error_bit()) return deny(Error(Errc::FdAuthDenied, raw, "error bit set"));

  const PaKey& key = sfd.d_bit() ? ctx.active_db() : domains_->da();
  const std::uint64_t want =
      mac(key, sfd.image(), fd_modifier(sfd.d_bit(), ctx.mod_reg())) & 0xFF;
  if (want != sfd.pac()) return deny(Error(Errc::FdAuthDenied, raw, "PAC mismatch"));
  if (reserved_.contains(sfd.fd_num())) {
    return deny(Error(Errc::FdReserved, raw, "descriptor number was closed"));
  }
  auto it = fds_.find(sfd.fd_num());
  if (it == fds_.end() || !it->second.open) {
    return deny(Error(Errc::FdAuthDenied, raw, "no open file"));
  }
  if ((sfd.caps() & required_caps) != required_caps) {
    return deny(Error(Errc::FdCapDenied, raw, "missing capability"));
  }
  if (log != nullptr) {
    log->record(EventKind::FdAuth, ctx.curr_dom(),
                {{"fd", hex(raw)}, {"num", std::to_string(sfd.fd_num())},
                 {"key", sfd.d_bit() ? "DB" : "DA"}});
  }
  return sfd.fd_num();
}

Result<std::uint32_t> VirtualKernel::allocate_fd(InodeId inode) {
  if (next_fd_ > kMaxFdNum) return Error(Errc::FdRangeExceeded, next_fd_);
  const std::uint32_t n = next_fd_++;
  fds_[n] = FdEntry{inode, 0, true};
  issued_.push_back(n);
  return n;
}

Result<SignedFd> VirtualKernel::issue(const CpuContext& ctx, std::uint32_t fd_num,
                                      std::uint8_t caps, bool private_obj, EventLog* log) {
  auto sfd = private_obj ? fd_sign(fd_num, caps, true, ctx.active_db(), ctx.mod_reg())
                         : fd_sign(fd_num, caps, false, domains_->da(), 0);
  if (!sfd) return sfd;
  if (log != nullptr) {
    log->record(EventKind::FdSign, ctx.curr_dom(),
                {{"fd", hex(sfd->raw())}, {"num", std::to_string(fd_num)},
                 {"caps", hex(sfd->caps())}, {"d", private_obj ? "1" : "0"}});
  }
  return sfd;
}

Result<SignedFd> VirtualKernel::sys_open(const CpuContext& ctx, std::string_view path,
                                         EventLog* log) {
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  auto id = resolve(path);
  if (!id) {
    if (log != nullptr) {
      log->record(EventKind::PathDeny, ctx.curr_dom(),
                  {{"path", std::string(path)}, {"why", "PathResolutionError"}});
    }
    return id.error();
  }
  const VirtualInode& node = inodes_[*id];
  bool private_obj = false;
  if (node.f_security) {
    const bool match = std::any_of(
        node.f_security->begin(), node.f_security->end(), [&](SignedValue64 sig) {
          return pac_auth(sig, ctx.active_db(), 0).raw() == 0;
        });
    if (!match) {
      if (log != nullptr) {
        log->record(EventKind::PathDeny, ctx.curr_dom(),
                    {{"path", node.path}, {"why", "PathAuthDenied"}});
      }
      return Error(Errc::PathAuthDenied, node.path);
    }
    private_obj = true;
  }
  if (log != nullptr) {
    log->record(EventKind::PathAuth, ctx.curr_dom(),
                {{"path", node.path}, {"ino", std::to_string(node.id)},
                 {"owner", private_obj ? "private" : "ambient"}});
  }
  auto n = allocate_fd(*id);
  if (!n) return n.error();
  const std::uint8_t caps = node.kind == InodeKind::Socket ? kSocketCaps : kFileCaps;
  return issue(ctx, *n, caps, private_obj, log);
}

Result<void> VirtualKernel::sys_close(const CpuContext& ctx, std::uint32_t raw, EventLog* log) {
  if (special_fd_passthrough(raw)) return ok();
  auto n = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::Close), log);
  if (!n) return n.error();
  fds_[*n].open = false;
  reserved_.insert(*n);
  if (log != nullptr) log->record(EventKind::FdClose, ctx.curr_dom(), {{"num", std::to_string(*n)}});
  return ok();
}

Result<SignedFd> VirtualKernel::capac_limit_fd(const CpuContext& ctx, std::uint32_t raw,
                                               std::uint8_t cap_mask, EventLog* log) {
  auto n = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::LimitFd), log);
  if (!n) return n.error();
  const SignedFd old(raw);
  return issue(ctx, *n, old.caps() & cap_mask, old.d_bit(), log);
}

Result<SignedFd> VirtualKernel::capac_delegate_fd(const CpuContext& ctx, std::uint32_t raw,
                                                  DomainId target, std::uint64_t target_mod,
                                                  std::uint8_t cap_mask, EventLog* log) {
  auto n = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::DelegateFd), log);
  if (!n) return n.error();
  const SignedFd old(raw);
  const std::uint8_t caps = old.caps() & cap_mask;
  Result<SignedFd> sfd = Error(Errc::UnknownDomain);
  if (target == kAmbient) {
    sfd = fd_sign(*n, caps, false, domains_->da(), 0);
  } else {
    const Domain* dom = domains_->find(target);
    if (dom == nullptr) return Error(Errc::UnknownDomain, "delegation target " + std::to_string(target));
    sfd = fd_sign(*n, caps, true, dom->db_key, target_mod);
  }
  if (!sfd) return sfd;
  if (log != nullptr) {
    log->record(EventKind::Delegate, ctx.curr_dom(),
                {{"what", "fd"}, {"num", std::to_string(*n)}, {"to", std::to_string(target)},
                 {"mod", hex(target_mod)}, {"fd", hex(sfd->raw())}, {"caps", hex(caps)}});
  }
  return sfd;
}

Result<SignedValue64> VirtualKernel::authenticate_buffer(const CpuContext& ctx, PointerArg buf,
                                                         EventLog* log) const {
  const SignedValue64 authed = buf.sensitive ? pac_auth(buf.value, ctx.active_db(), ctx.mod_reg())
                                             : pac_auth(buf.value, domains_->da(), 0);
  const bool good = !authed.has_pac();
  if (log != nullptr) {
    log->record(EventKind::PtrAuth, ctx.curr_dom(),
                {{"key", buf.sensitive ? "DB" : "DA"}, {"ptr", hex(buf.value.raw())},
                 {"ok", good ? "1" : "0"}, {"site", "syscall"}});
  }
  if (!good) return Error(Errc::SegmentationOnCorruptPac, authed.raw(), "syscall buffer");
  const std::uint8_t tag = authed.tag();
  if (tag != 0 && tag != domains_->active_domain(ctx)) {
    return Error(Errc::TagMismatch, authed.raw(), "buffer owned by another domain");
  }
  return authed;
}

Result<InodeId> VirtualKernel::inode_for(std::uint32_t fd_num) const {
  auto it = fds_.find(fd_num);
  if (it == fds_.end() || !it->second.open) return Error(Errc::FdAuthDenied, fd_num);
  return it->second.inode;
}

Result<std::uint64_t> VirtualKernel::sys_read(const CpuContext& ctx, AddressSpace& mem,
                                              std::uint32_t raw, PointerArg buf, std::uint64_t n,
                                              EventLog* log) {
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  std::uint32_t num = 0;
  if (auto sp = special_fd_passthrough(raw)) {
    if (*sp == kAtFdcwd) return Error(Errc::FdAuthDenied, raw, "not readable");
    num = *sp;
  } else {
    auto a = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::Read), log);
    if (!a) return a.error();
    num = *a;
  }
  auto p = authenticate_buffer(ctx, buf, log);
  if (!p) return p.error();
  FdEntry& entry = fds_[num];
  const VirtualInode& node = inodes_[entry.inode];
  const std::uint64_t avail =
      entry.offset < node.content.size() ? node.content.size() - entry.offset : 0;
  const std::uint64_t count = std::min(n, avail);
  if (count == 0) return std::uint64_t{0};
  std::span<const std::uint8_t> src(node.content.data() + entry.offset, count);
  auto st = mem.mem_store(*p, src);
  if (!st) return st.error();
  entry.offset += count;
  return count;
}

Result<std::uint64_t> VirtualKernel::sys_write(const CpuContext& ctx, AddressSpace& mem,
                                               std::uint32_t raw, PointerArg buf, std::uint64_t n,
                                               EventLog* log) {
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  std::uint32_t num = 0;
  if (auto sp = special_fd_passthrough(raw)) {
    if (*sp == kAtFdcwd) return Error(Errc::FdAuthDenied, raw, "not writable");
    num = *sp;
  } else {
    auto a = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::Write), log);
    if (!a) return a.error();
    num = *a;
  }
  auto p = authenticate_buffer(ctx, buf, log);
  if (!p) return p.error();
  auto bytes = mem.mem_load(*p, n);
  if (!bytes) return bytes.error();
  VirtualInode& node = inodes_[fds_[num].inode];
  auto& sink = node.kind == InodeKind::Socket ? node.sent : node.content;
  sink.insert(sink.end(), bytes->begin(), bytes->end());
  return n;
}

Result<SignedFd> VirtualKernel::sys_socket(const CpuContext& ctx, EventLog* log) {
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  VirtualInode node;
  node.id = static_cast<InodeId>(inodes_.size());
  node.path = "socket:[" + std::to_string(node.id) + "]";
  node.kind = InodeKind::Socket;
  const bool private_obj = ctx.in_domain();
  if (private_obj) {
    auto sig = pac_sign(SignedValue64(0), ctx.active_db(), 0);
    if (!sig) return sig.error();
    node.f_security.emplace(1, *sig);
  }
  inodes_.push_back(node);
  auto n = allocate_fd(node.id);
  if (!n) return n.error();
  return issue(ctx, *n, kSocketCaps, private_obj, log);
}

Result<void> VirtualKernel::sys_listen(const CpuContext& ctx, std::uint32_t raw, EventLog* log) {
  auto n = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::Listen), log);
  if (!n) return n.error();
  VirtualInode& node = inodes_[fds_[*n].inode];
  if (node.kind != InodeKind::Socket) return Error(Errc::FdCapDenied, raw, "not a socket");
  node.listening = true;
  return ok();
}

Result<SignedFd> VirtualKernel::sys_accept(const CpuContext& ctx, std::uint32_t raw,
                                           EventLog* log) {
  auto n = fd_auth(ctx, raw, SyscallCapPolicy::required(Syscall::Accept), log);
  if (!n) return n.error();
  const InodeId listener = fds_[*n].inode;
  if (inodes_[listener].kind != InodeKind::Socket || !inodes_[listener].listening) {
    return Error(Errc::FdCapDenied, raw, "not a listening socket");
  }
  if (inodes_[listener].pending.empty()) return Error(Errc::WouldBlock, raw, "no pending connection");
  const InodeId conn = inodes_[listener].pending.front();
  inodes_[listener].pending.pop_front();
  inodes_[conn].f_security = inodes_[listener].f_security;
  auto fd = allocate_fd(conn);
  if (!fd) return fd.error();
  return issue(ctx, *fd, kSocketCaps, SignedFd(raw).d_bit(), log);
}

Result<void> VirtualKernel::inject_connection(std::uint32_t listener_fd_num,
                                              std::span<const std::uint8_t> payload) {
  auto id = inode_for(listener_fd_num);
  if (!id) return id.error();
  if (inodes_[*id].kind != InodeKind::Socket || !inodes_[*id].listening) {
    return Error(Errc::FdCapDenied, listener_fd_num, "not a listening socket");
  }
  VirtualInode conn;
  conn.id = static_cast<InodeId>(inodes_.size());
  conn.path = "socket:[" + std::to_string(conn.id) + "]";
  conn.kind = InodeKind::Socket;
  conn.content.assign(payload.begin(), payload.end());
  inodes_.push_back(conn);
  inodes_[*id].pending.push_back(conn.id);
  return ok();
}

const VirtualInode* VirtualKernel::inode(InodeId id) const {
  return id < inodes_.size() ? &inodes_[id] : nullptr;
}

const VirtualInode* VirtualKernel::inode_of_fd(std::uint32_t fd_num) const {
  auto it = fds_.find(fd_num);
  return it == fds_.end() ? nullptr : inode(it->second.inode);
}

std::span<const std::uint8_t> VirtualKernel::console(std::uint32_t fd) const {
  if (fd > 2) return {};
  return inodes_[fd].content;
}

}  // namespace capac
