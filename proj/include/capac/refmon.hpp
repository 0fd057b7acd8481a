#pragma once

// Virtual-kernel reference monitor: a miniature inode store, signed 32-bit
// file descriptors with embedded capabilities, path authentication through
// per-inode domain signatures, and close-time descriptor reservation.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capac/domain.hpp"
#include "capac/events.hpp"
#include "capac/memory.hpp"
#include "capac/pa.hpp"
#include "capac/result.hpp"

namespace capac {

enum Cap : std::uint8_t {
  kCapRead = 1 << 0,
  kCapWrite = 1 << 1,
  kCapSocket = 1 << 2,
  kCapDelegate = 1 << 3,
};
inline constexpr std::uint8_t kCapFieldMask = 0x1F;
inline constexpr std::uint8_t kFileCaps = kCapRead | kCapWrite | kCapDelegate;
inline constexpr std::uint8_t kSocketCaps = kFileCaps | kCapSocket;

inline constexpr std::uint32_t kAtFdcwd = 0xFFFFFF9CU;  // (uint32_t)-100
inline constexpr std::uint32_t kMaxFdNum = (1U << 17) - 1;

/// 32-bit descriptor layout:
///   [31] zero | [30:23] PAC | [22] D | [21:17] caps | [16:0] fd number
class SignedFd {
 public:
  constexpr SignedFd() = default;
  constexpr explicit SignedFd(std::uint32_t raw) : raw_(raw) {}

  static constexpr SignedFd compose(std::uint32_t fd_num, std::uint8_t caps, bool d_bit,
                                    std::uint8_t pac) {
    return SignedFd((fd_num & kMaxFdNum) | (static_cast<std::uint32_t>(caps & kCapFieldMask) << 17) |
                    (static_cast<std::uint32_t>(d_bit) << 22) |
                    (static_cast<std::uint32_t>(pac) << 23));
  }

  constexpr std::uint32_t raw() const { return raw_; }
  constexpr std::uint32_t fd_num() const { return raw_ & kMaxFdNum; }
  constexpr std::uint8_t caps() const { return (raw_ >> 17) & kCapFieldMask; }
  constexpr bool d_bit() const { return ((raw_ >> 22) & 1) != 0; }
  constexpr std::uint8_t pac() const { return (raw_ >> 23) & 0xFF; }
  constexpr bool error_bit() const { return (raw_ >> 31) != 0; }
  /// The PAC-cleared image, zero-extended; this is what gets signed.
  constexpr std::uint64_t image() const { return raw_ & ((1U << 23) - 1); }

  friend constexpr bool operator==(SignedFd, SignedFd) = default;

 private:
  std::uint32_t raw_ = 0;
};

enum class Syscall : std::uint8_t { Read, Write, Listen, Accept, Close, LimitFd, DelegateFd };

/// Required capability bits per FD-accepting syscall.
struct SyscallCapPolicy {
  static constexpr std::uint8_t required(Syscall s) {
    switch (s) {
      case Syscall::Read: return kCapRead;
      case Syscall::Write: return kCapWrite;
      case Syscall::Listen:
      case Syscall::Accept: return kCapSocket;
      case Syscall::DelegateFd: return kCapDelegate;
      case Syscall::Close:
      case Syscall::LimitFd: return 0;
    }
    return 0xFF;
  }
};

using InodeId = std::uint32_t;

enum class InodeKind : std::uint8_t { File, Socket, Console };

struct VirtualInode {
  InodeId id = 0;
  std::string path;
  InodeKind kind = InodeKind::File;
  std::vector<std::uint8_t> content;
  /// Absent for ambient objects; otherwise one domain signature per owner.
  std::optional<std::vector<SignedValue64>> f_security;
  // Socket state.
  bool listening = false;
  std::deque<InodeId> pending;
  std::vector<std::uint8_t> sent;
};

struct FdEntry {
  InodeId inode = 0;
  std::uint64_t offset = 0;
  bool open = true;
};

struct FileAssignment {
  std::string path;
  DomainId owner = kAmbient;
};

/// A pointer-typed syscall argument as passed by the instrumented libc: the
/// in-memory signed value plus whether it was signed as domain-private.
struct PointerArg {
  SignedValue64 value;
  bool sensitive = false;
};

class VirtualKernel {
 public:
  VirtualKernel(std::shared_ptr<const DomainManager> domains, std::uint64_t secret_fd_modifier);

  // Filesystem setup, unmediated.
  Result<InodeId> create_file(std::string_view path, std::span<const std::uint8_t> content = {});
  Result<void> create_symlink(std::string_view link, std::string_view target);
  Result<std::string> canonicalize(std::string_view path) const;
  Result<InodeId> resolve(std::string_view path) const;

  Result<void> capac_init(std::span<const FileAssignment> files);
  bool protected_mode() const { return protected_; }

  Result<SignedFd> sys_open(const CpuContext& ctx, std::string_view path, EventLog* log = nullptr);
  Result<SignedFd> fd_sign(std::uint32_t fd_num, std::uint8_t caps, bool d_bit,
                           const PaKey& signing_key, std::uint64_t instance_mod = 0) const;
  Result<std::uint32_t> fd_auth(const CpuContext& ctx, std::uint32_t raw, std::uint8_t required_caps,
                                EventLog* log = nullptr) const;
  Result<void> sys_close(const CpuContext& ctx, std::uint32_t raw, EventLog* log = nullptr);
  Result<SignedFd> capac_limit_fd(const CpuContext& ctx, std::uint32_t raw, std::uint8_t cap_mask,
                                  EventLog* log = nullptr);
  Result<SignedFd> capac_delegate_fd(const CpuContext& ctx, std::uint32_t raw, DomainId target,
                                     std::uint64_t target_mod, std::uint8_t cap_mask,
                                     EventLog* log = nullptr);

  Result<std::uint64_t> sys_read(const CpuContext& ctx, AddressSpace& mem, std::uint32_t raw,
                                 PointerArg buf, std::uint64_t n, EventLog* log = nullptr);
  Result<std::uint64_t> sys_write(const CpuContext& ctx, AddressSpace& mem, std::uint32_t raw,
                                  PointerArg buf, std::uint64_t n, EventLog* log = nullptr);
  Result<SignedFd> sys_socket(const CpuContext& ctx, EventLog* log = nullptr);
  Result<void> sys_listen(const CpuContext& ctx, std::uint32_t raw, EventLog* log = nullptr);
  Result<SignedFd> sys_accept(const CpuContext& ctx, std::uint32_t raw, EventLog* log = nullptr);

  /// Specials (0, 1, 2, AT_FDCWD) bypass authentication and are ambient.
  static std::optional<std::uint32_t> special_fd_passthrough(std::uint32_t raw);

  /// Network side: a client connects to the socket behind fd_num.
  Result<void> inject_connection(std::uint32_t listener_fd_num, std::span<const std::uint8_t> payload);

  const VirtualInode* inode(InodeId id) const;
  const VirtualInode* inode_of_fd(std::uint32_t fd_num) const;
  const std::set<std::uint32_t>& reserved() const { return reserved_; }
  const std::vector<std::uint32_t>& issued_fd_numbers() const { return issued_; }
  std::span<const std::uint8_t> console(std::uint32_t fd) const;

 private:
  Result<std::uint32_t> allocate_fd(InodeId inode);
  Result<SignedFd> issue(const CpuContext& ctx, std::uint32_t fd_num, std::uint8_t caps,
                         bool private_obj, EventLog* log);
  Result<SignedValue64> authenticate_buffer(const CpuContext& ctx, PointerArg buf,
                                            EventLog* log) const;
  Result<InodeId> inode_for(std::uint32_t fd_num) const;
  std::uint64_t fd_modifier(bool d_bit, std::uint64_t instance_mod) const {
    return secret_fd_modifier_ ^ (d_bit ? instance_mod : 0);
  }

  std::shared_ptr<const DomainManager> domains_;
  std::uint64_t secret_fd_modifier_;
  std::vector<VirtualInode> inodes_;
  std::map<std::string, InodeId, std::less<>> names_;
  std::map<std::string, std::string, std::less<>> symlinks_;
  std::map<std::uint32_t, FdEntry> fds_;
  std::set<std::uint32_t> reserved_;
  std::vector<std::uint32_t> issued_;
  std::uint32_t next_fd_ = 3;
  bool protected_ = false;
};

}  // namespace capac
