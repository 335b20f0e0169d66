"""One test per acceptance criterion; each prints a single [PASS]/[FAIL] line."""
import pytest

from toruswalk import verification as v

from conftest import ACCEPTANCE_LINES

SEED = 7


def report(res):
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


def test_c01_exact_oracles():
    report(v.check_exact_oracles())


def test_c02_escape_time_bounds():
    report(v.check_escape_bounds())


def test_c03_green_asymptotics():
    report(v.check_green_asymptotics())


def test_c04_potential_kernel():
    report(v.check_potential_kernel())


def test_c05_gamblers_ruin():
    report(v.check_gamblers_ruin())


def test_c06_harnack_trend():
    report(v.check_harnack_trend())


def test_c07_three_set_sandwich():
    report(v.check_three_set())


def test_c08_coupling():
    report(v.check_coupling(seed=SEED))


def test_c09_excursion_concentration():
    report(v.check_excursions(seed=SEED))


def test_c10_cover_scaling():
    report(v.check_cover(seed=SEED))


def test_c11_late_points():
    report(v.check_late(seed=SEED))


def test_c12_determinism():
    report(v.check_determinism(seed=SEED, workers=8))
