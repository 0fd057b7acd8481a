#pragma once

// int | ptr(T) | struct{T, ...} | NAME, where NAME is bound by `type NAME = T`.
// Every scalar is 8 bytes; structs are packed.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "capac/result.hpp"

namespace capac::instr {

struct Type;
using TypeRef = std::shared_ptr<const Type>;

struct Type {
  enum class Kind { Int, Ptr, Struct, Named } kind = Kind::Int;
  TypeRef pointee;
  std::vector<TypeRef> members;
  std::string name;

  static TypeRef int_type();
  static TypeRef ptr_to(TypeRef t);
  static TypeRef struct_of(std::vector<TypeRef> members);
  static TypeRef named(std::string name);
};

class TypeTable {
 public:
  Result<void> define(const std::string& name, TypeRef t);
  /// Follows named references; null if undefined.
  TypeRef resolve(TypeRef t) const;
  bool has(const std::string& name) const { return named_.count(name) != 0; }

  bool is_ptr(TypeRef t) const;
  bool is_int(TypeRef t) const;
  Result<std::uint64_t> size_of(TypeRef t) const;
  Result<std::uint64_t> field_offset(TypeRef strct, std::size_t index) const;

 private:
  Result<std::uint64_t> size_of(TypeRef t, int depth) const;
  std::map<std::string, TypeRef> named_;
};

Result<TypeRef> parse_type(std::string_view text);
std::string print_type(const TypeRef& t);

}  // namespace capac::instr
