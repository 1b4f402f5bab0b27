from fractions import Fraction

import pytest

from flowcomp.machine import (
    LOOP,
    UNRESOLVED,
    Configuration,
    Halted,
    MachineError,
    MachineSpec,
    OutOfMemory,
    TapeBoundedSpec,
    encode,
    enumerate_inputs,
    format_machine,
    interval_of,
    parse_machine,
    run,
    run_bounded,
    step,
    trajectory,
)


def uniform_machine(q2, sym_of, shift, m=2, q0=1, q_halt=2, name="t"):
    rules = {(1, d): (q2, sym_of(d), shift) for d in range(10)}
    return MachineSpec(name, m, q0, q_halt, rules)


@pytest.fixture
def incrementer():
    return uniform_machine(2, lambda d: (d + 1) % 10, 0)


@pytest.fixture
def spinner():
    return uniform_machine(1, lambda d: d, 0)


@pytest.fixture
def right_filler():
    return uniform_machine(1, lambda d: 9, 1)


# -- transition semantics ---------------------------------------------------


def test_left_shift_moves_head_digit_to_negative_side():
    # rule writes 1 then shifts tape left: blank tape becomes (r, s) = (0, 1)
    spec = uniform_machine(1, lambda d: 1, 1)
    c = step(spec, Configuration(1, 0, 0))
    assert (c.r, c.s) == (0, 1)


def test_right_shift_pulls_from_negative_side():
    spec = uniform_machine(1, lambda d: 7, -1)
    c = step(spec, Configuration(1, 0, 34))
    assert (c.r, c.s) == (74, 3)


def test_halting_state_is_fixed(incrementer):
    c = Configuration(2, 123, 45)
    assert step(incrementer, c) == c


def test_digit_and_from_digits():
    c = Configuration.from_digits(1, {0: 3, 2: 7, -1: 9, -3: 4})
    assert c.r == 703 and c.s == 409
    assert c.digit(0) == 3 and c.digit(2) == 7
    assert c.digit(-1) == 9 and c.digit(-3) == 4
    assert c.digit(5) == 0 and c.digit(-2) == 0


def test_tape_size():
    assert Configuration(1, 0, 0).tape_size() == 0
    assert Configuration(1, 9, 0).tape_size() == 1
    assert Configuration(1, 900, 0).tape_size() == 1
    assert Configuration(1, 0, 9).tape_size() == 1
    assert Configuration(1, 1, 1).tape_size() == 2
    assert Configuration(1, 100, 10).tape_size() == 5


# -- execution --------------------------------------------------------------


def test_run_halts(incrementer):
    res = run(incrementer, Configuration(1, 0, 0), 10)
    assert isinstance(res, Halted)
    assert res.steps == 1 and res.config == Configuration(2, 1, 0)


def test_run_unresolved(spinner):
    assert run(spinner, Configuration(1, 0, 0), 100) is UNRESOLVED


def test_trajectory(right_filler):
    t = trajectory(right_filler, Configuration(1, 0, 0), 2)
    assert [(c.r, c.s) for c in t] == [(0, 0), (0, 9), (0, 99)]


def test_bounded_out_of_memory(right_filler):
    spec = TapeBoundedSpec(right_filler, -1, 1)
    res = run_bounded(spec, Configuration(1, 0, 0), 100)
    assert isinstance(res, OutOfMemory)
    assert res.steps == 2


def test_bounded_loop(spinner):
    spec = TapeBoundedSpec(spinner, -2, 2)
    assert run_bounded(spec, Configuration(1, 3, 0), 100) is LOOP


def test_bounded_halt(incrementer):
    spec = TapeBoundedSpec(incrementer, -2, 2)
    res = run_bounded(spec, Configuration(1, 0, 0), 100)
    assert isinstance(res, Halted) and res.steps == 1


def test_bounded_rejects_oversized_input(right_filler):
    spec = TapeBoundedSpec(right_filler, -1, 1)
    with pytest.raises(MachineError):
        run_bounded(spec, Configuration(1, 100, 0), 10)


# -- encoding ---------------------------------------------------------------


def test_encode_blank():
    p = encode(Configuration(1, 0, 0))
    assert p.value() == Fraction(1, 2)
    assert p.interval() == (Fraction(31, 64), Fraction(33, 64))


def test_encode_general():
    p = encode(Configuration(3, 2, 1))
    assert p.value() == Fraction(1, 8 * 9 * 5)


def test_halting_variant():
    p = encode(Configuration(2, 0, 0), halting_variant=True)
    assert p.value() == Fraction(3, 4)


def test_interval_translation():
    p = encode(Configuration(1, 0, 0))
    a, b = interval_of(p, 2)
    assert a == Fraction(31, 64) + 4 and b == Fraction(33, 64) + 4


def test_interval_width_matches_exponent_formula():
    p = encode(Configuration(2, 1, 1))
    a, b = p.interval()
    assert b - a == Fraction(1, 2 ** (2 + 4) * 3 * 5)


def test_huge_exponent_raises():
    p = encode(Configuration(1, 10**7, 0))
    with pytest.raises(OverflowError):
        p.value()
    # log form still fine
    assert p.ln_value().ln() < -(10**6)


def test_input_enumeration_order(incrementer):
    order = [(c.r, c.s) for _, c, _ in enumerate_inputs(incrementer, 6)]
    assert order == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_enumeration_is_descending_in_encoded_value(incrementer):
    pts = [p.value() for _, _, p in enumerate_inputs(incrementer, 12)]
    assert all(a > b for a, b in zip(pts, pts[1:]))


# -- file format ------------------------------------------------------------

GOOD = """\
machine demo
states 2
start 1
halt 2
# increments then halts
rule 1 0 -> 2 1 S0
rule 1 1 -> 2 2 S0
rule 1 2 -> 2 3 S0
rule 1 3 -> 2 4 S0
rule 1 4 -> 2 5 S0
rule 1 5 -> 2 6 S0
rule 1 6 -> 2 7 S0
rule 1 7 -> 2 8 S0
rule 1 8 -> 2 9 S0
rule 1 9 -> 2 0 S0
"""


def test_parse_roundtrip():
    spec = parse_machine(GOOD)
    assert spec.name == "demo" and spec.m == 2
    assert spec.rules[(1, 3)] == (2, 4, 0)
    assert parse_machine(format_machine(spec)) == spec


def test_parse_missing_rule():
    broken = "\n".join(GOOD.splitlines()[:-1])
    with pytest.raises(MachineError, match="missing rule"):
        parse_machine(broken)


def test_parse_duplicate_rule():
    with pytest.raises(MachineError, match="duplicate"):
        parse_machine(GOOD + "rule 1 9 -> 1 9 S0\n")


def test_parse_bad_shift():
    with pytest.raises(MachineError, match="shift"):
        parse_machine(GOOD.replace("rule 1 9 -> 2 0 S0", "rule 1 9 -> 2 0 S+2"))


def test_parse_reports_line_number():
    with pytest.raises(MachineError, match=":6:"):
        parse_machine(GOOD.replace("rule 1 0 -> 2 1 S0", "rule 1 zero -> 2 1 S0"))
