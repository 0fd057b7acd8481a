#include "capac/instr/types.hpp"

#include <cctype>

namespace capac::instr {

TypeRef Type::int_type() {
  static const TypeRef t = std::make_shared<Type>();
  return t;
}

TypeRef Type::ptr_to(TypeRef p) {
  auto t = std::make_shared<Type>();
  t->kind = Kind::Ptr;
  t->pointee = std::move(p);
  return t;
}

TypeRef Type::struct_of(std::vector<TypeRef> m) {
  auto t = std::make_shared<Type>();
  t->kind = Kind::Struct;
  t->members = std::move(m);
  return t;
}

TypeRef Type::named(std::string n) {
  auto t = std::make_shared<Type>();
  t->kind = Kind::Named;
  t->name = std::move(n);
  return t;
}

Result<void> TypeTable::define(const std::string& name, TypeRef t) {
  if (named_.count(name) != 0) return Error(Errc::ParseError, "type " + name + " redefined");
  named_.emplace(name, std::move(t));
  return ok();
}

TypeRef TypeTable::resolve(TypeRef t) const {
  for (int hops = 0; t && t->kind == Type::Kind::Named; ++hops) {
    if (hops > 64) return nullptr;
    auto it = named_.find(t->name);
    if (it == named_.end()) return nullptr;
    t = it->second;
  }
  return t;
}

bool TypeTable::is_ptr(TypeRef t) const {
  t = resolve(std::move(t));
  return t && t->kind == Type::Kind::Ptr;
}

bool TypeTable::is_int(TypeRef t) const {
  t = resolve(std::move(t));
  return t && t->kind == Type::Kind::Int;
}

Result<std::uint64_t> TypeTable::size_of(TypeRef t) const { return size_of(std::move(t), 0); }

Result<std::uint64_t> TypeTable::size_of(TypeRef t, int depth) const {
  if (depth > 64) return Error(Errc::CyclicTypeError, "type contains itself by value");
  const TypeRef r = resolve(t);
  if (!r) return Error(Errc::ParseError, "undefined type " + print_type(t));
  if (r->kind != Type::Kind::Struct) return 8;
  std::uint64_t total = 0;
  for (const auto& m : r->members) {
    auto s = size_of(m, depth + 1);
    if (!s) return s;
    total += *s;
  }
  return total;
}

Result<std::uint64_t> TypeTable::field_offset(TypeRef strct, std::size_t index) const {
  const TypeRef r = resolve(std::move(strct));
  if (!r || r->kind != Type::Kind::Struct) return Error(Errc::LoweringError, "field of a non-struct");
  if (index >= r->members.size()) return Error(Errc::LoweringError, "field index out of range");
  std::uint64_t off = 0;
  for (std::size_t i = 0; i < index; ++i) {
    auto s = size_of(r->members[i]);
    if (!s) return s;
    off += *s;
  }
  return off;
}

namespace {

struct TypeParser {
  std::string_view s;
  std::size_t i = 0;

  void ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eat(char c) {
    ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  std::string ident() {
    ws();
    const std::size_t start = i;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
    return std::string(s.substr(start, i - start));
  }
  Result<TypeRef> type() {
    const std::string w = ident();
    if (w.empty()) return Error(Errc::ParseError, "expected a type in '" + std::string(s) + "'");
    if (w == "int") return Type::int_type();
    if (w == "ptr") {
      if (!eat('(')) return Error(Errc::ParseError, "expected '(' after ptr");
      auto inner = type();
      if (!inner) return inner;
      if (!eat(')')) return Error(Errc::ParseError, "expected ')'");
      return Type::ptr_to(*inner);
    }
    if (w == "struct") {
      if (!eat('{')) return Error(Errc::ParseError, "expected '{' after struct");
      std::vector<TypeRef> members;
      if (!eat('}')) {
        do {
          auto m = type();
          if (!m) return m;
          members.push_back(*m);
        } while (eat(','));
        if (!eat('}')) return Error(Errc::ParseError, "expected '}'");
      }
      return Type::struct_of(std::move(members));
    }
    return Type::named(w);
  }
};

}  // namespace

Result<TypeRef> parse_type(std::string_view text) {
  TypeParser p{text};
  auto t = p.type();
  if (!t) return t;
  p.ws();
  if (p.i != text.size()) return Error(Errc::ParseError, "trailing text in type '" + std::string(text) + "'");
  return t;
}

std::string print_type(const TypeRef& t) {
  if (!t) return "?";
  switch (t->kind) {
    case Type::Kind::Int: return "int";
    case Type::Kind::Ptr: return "ptr(" + print_type(t->pointee) + ")";
    case Type::Kind::Named: return t->name;
    case Type::Kind::Struct: {
      std::string s = "struct{";
      for (std::size_t i = 0; i < t->members.size(); ++i) s += (i ? ", " : "") + print_type(t->members[i]);
      return s + "}";
    }
  }
  return "?";
}

}  // namespace capac::instr
