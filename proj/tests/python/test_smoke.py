import os
import pathlib

import pytest

import capac

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCENARIOS = ROOT / "scenarios"


def test_pac_round_trip():
    key = capac.PaKey.from_seed(7, capac.KeyId.DB)
    ptr = capac.tagged(0x10000040, 3)
    signed = capac.pac_sign(ptr, key, 99)
    assert capac.strip_pac(signed) == ptr
    assert capac.pac_auth(signed, key, 99) == ptr
    assert capac.pac_auth(signed, key, 100) & capac.CORRUPTION_BIT


def test_double_sign_raises():
    key = capac.PaKey.from_seed(1)
    signed = capac.pac_sign(0x1000, key, 0)
    with pytest.raises(capac.CapacError):
        capac.pac_sign(signed, key, 0)


def test_signed_fd_fields():
    fd = capac.SignedFd.compose(5, 0b1011, True, 0xAB)
    assert (fd.fd_num, fd.caps, fd.d_bit, fd.pac) == (5, 0b1011, True, 0xAB)


def test_code_example_sequence():
    r = capac.run_scenario(str(SCENARIOS / "code_example.scn"))
    assert r["exit_status"] == 0
    wanted = ["PATH-AUTH", "FD-SIGN", "PTR-SIGN", "FD-AUTH", "PTR-AUTH"]
    it = iter(r["events"])
    assert all(any(e == w for e in it) for w in wanted)


def test_webserver_counters():
    r = capac.run_scenario(str(SCENARIOS / "webserver.scn"), seed=3)
    c = r["counters"]
    assert r["fault"] is None
    assert c["domain_switches"] >= 2 and c["aut_db"] >= c["pac_db"] > 0


def test_attack_suite_defended():
    res = capac.run_attack_suite(str(SCENARIOS / "webserver.scn"), str(SCENARIOS / "webserver.atk"))
    assert res and all(o["defended"] for o in res)


def test_instrument_and_liveness():
    src = ("func f frame=2 {\n  bl capac_malloc(x0)\n  str x0, [fi#0] spill\n"
           "  ldr x1, [fi#0] reload\n  bl emit(x1)\n  ret\n}\n")
    out = capac.instrument(src)
    assert "pacdb" in out and "autdb" in out
    trace = capac.pointer_liveness(src, "f")
    assert trace[:3] == ["{x0:s}", "{fi#0:s}", "{x1:s, fi#0:s}"]


def test_selftest():
    assert all(ok for _, ok, _ in capac.selftest(seed=2))
