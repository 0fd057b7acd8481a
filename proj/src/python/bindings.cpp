#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "capac/harness/attacks.hpp"
#include "capac/harness/scenario.hpp"
#include "capac/harness/selftest.hpp"
#include "capac/instr/hir.hpp"
#include "capac/instr/pass.hpp"

namespace py = pybind11;
using namespace capac;

namespace {

class CapacError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
T unwrap(Result<T> r) {
  if (!r) throw CapacError(r.error().to_string());
  return std::move(r).value();
}

py::dict counters_dict(const EventCounters& c) {
  py::dict d;
  d["domain_switches"] = c.domain_switches;
  d["auth_syscalls"] = c.auth_syscalls;
  d["private_allocs"] = c.private_allocs;
  d["pac_db"] = c.pac_db;
  d["pac_da"] = c.pac_da;
  d["aut_db"] = c.aut_db;
  d["aut_da"] = c.aut_da;
  return d;
}

instr::MirModule plain_module(const std::string& text, const std::string& kind) {
  if (kind == "hir") return unwrap(instr::lower(unwrap(instr::parse_hir(text))));
  if (kind == "mir") return unwrap(instr::parse_mir(text));
  throw CapacError("kind must be 'mir' or 'hir'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Emulated pointer-authentication capability runtime";
  py::register_exception<CapacError>(m, "CapacError");

  py::enum_<KeyId>(m, "KeyId")
      .value("IA", KeyId::IA)
      .value("IB", KeyId::IB)
      .value("DA", KeyId::DA)
      .value("DB", KeyId::DB)
      .value("G", KeyId::G);

  py::class_<PaKey>(m, "PaKey")
      .def(py::init([](KeyId id, std::uint64_t lo, std::uint64_t hi) { return PaKey(id, {lo, hi}); }),
           py::arg("id"), py::arg("lo"), py::arg("hi"))
      .def_property_readonly("id", &PaKey::id)
      .def_static("from_seed", [](std::uint64_t seed, KeyId id) { return KeySource(seed).make_key(id); },
                  py::arg("seed"), py::arg("id") = KeyId::DB);

  m.def("pac_sign", [](std::uint64_t v, const PaKey& k, std::uint64_t mod) {
        return unwrap(pac_sign(SignedValue64(v), k, mod)).raw();
      }, py::arg("value"), py::arg("key"), py::arg("modifier") = 0);
  m.def("pac_auth", [](std::uint64_t v, const PaKey& k, std::uint64_t mod) {
        return pac_auth(SignedValue64(v), k, mod).raw();
      }, py::arg("value"), py::arg("key"), py::arg("modifier") = 0);
  m.def("pac_verify", [](std::uint64_t v, const PaKey& k, std::uint64_t mod) {
        return pac_verify(SignedValue64(v), k, mod);
      }, py::arg("value"), py::arg("key"), py::arg("modifier") = 0);
  m.def("strip_pac", [](std::uint64_t v) { return strip_pac(SignedValue64(v)).raw(); });
  m.def("tagged", [](std::uint64_t addr, std::uint8_t tag) { return SignedValue64::tagged(addr, tag).raw(); });
  m.attr("CORRUPTION_BIT") = kCorruptionBit;

  py::class_<SignedFd>(m, "SignedFd")
      .def(py::init<std::uint32_t>())
      .def_static("compose", &SignedFd::compose, py::arg("fd_num"), py::arg("caps"), py::arg("d_bit"), py::arg("pac"))
      .def_property_readonly("raw", &SignedFd::raw)
      .def_property_readonly("fd_num", &SignedFd::fd_num)
      .def_property_readonly("caps", &SignedFd::caps)
      .def_property_readonly("d_bit", &SignedFd::d_bit)
      .def_property_readonly("pac", &SignedFd::pac);

  m.def("run_scenario", [](const std::string& path, std::uint64_t seed, bool random_keys) {
        const auto r = unwrap(harness::run_scenario(std::filesystem::path(path), {seed, random_keys}));
        py::dict d;
        d["log"] = r.log.format();
        py::list kinds;
        for (const auto& e : r.log.events()) kinds.append(std::string(event_kind_name(e.kind)));
        d["events"] = kinds;
        d["counters"] = counters_dict(r.counters);
        d["exit_status"] = r.exit_status;
        d["fault"] = r.fault ? py::object(py::str(r.fault->to_string())) : py::object(py::none());
        d["outputs"] = r.outputs;
        return d;
      }, py::arg("path"), py::arg("seed") = 1, py::arg("random_keys") = false);

  m.def("run_attack_suite", [](const std::string& scenario, const std::string& suite, std::uint64_t seed) {
        const auto sc = unwrap(harness::load_scenario(scenario));
        const auto su = unwrap(harness::load_attack_suite(suite));
        const auto rep = unwrap(harness::run_attack_suite(sc, su, {seed, false}));
        py::list out;
        for (const auto& o : rep.outcomes) {
          py::dict d;
          d["kind"] = std::string(harness::attack_kind_name(o.directive.kind));
          d["at"] = o.directive.at;
          d["defended"] = o.defended;
          d["observed"] = o.observed;
          out.append(d);
        }
        return out;
      }, py::arg("scenario"), py::arg("suite"), py::arg("seed") = 1);

  m.def("instrument", [](const std::string& text, const std::string& kind) {
        return instr::print_module(unwrap(instr::instrument(plain_module(text, kind))));
      }, py::arg("text"), py::arg("kind") = "mir");

  m.def("pointer_liveness", [](const std::string& text, const std::string& fn) {
        const auto mod = unwrap(instr::parse_mir(text));
        const auto* f = mod.find(fn);
        if (f == nullptr) throw CapacError("no function " + fn);
        const auto lr = unwrap(instr::analyze_pointer_liveness(*f));
        std::vector<std::string> trace;
        for (const auto& p : lr.trace) trace.push_back(instr::format_pointer_set(p));
        return trace;
      }, py::arg("text"), py::arg("fn"));

  m.def("selftest", [](std::uint64_t seed, const std::string& dir) {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto& c : harness::run_selftest(seed, dir)) out.emplace_back(c.name, c.pass, c.detail);
        return out;
      }, py::arg("seed") = 1, py::arg("scenario_dir") = "");
}
