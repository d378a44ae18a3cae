"""Release acceptance gate: one test and one printed verdict line per claim.

Thresholds are pinned inside majoritylab.acceptance; the `verify` CLI
subcommand runs exactly the same functions.
"""

import pytest

from majoritylab import acceptance


def _check(fn):
    res = fn()
    print(res.line())
    assert res.ok, res.line()


def test_criterion_01_complete_graph_cascade():
    _check(acceptance.criterion_1)


def test_criterion_02_oracle_equivalence():
    _check(acceptance.criterion_2)


def test_criterion_03_critical_time_law():
    _check(acceptance.criterion_3)


def test_criterion_04_critical_chain_audit():
    _check(acceptance.criterion_4)


def test_criterion_05_influence_flip_test():
    _check(acceptance.criterion_5)


def test_criterion_06_boolean_structure():
    _check(acceptance.criterion_6)


def test_criterion_07_low_product_pair_bound():
    _check(acceptance.criterion_7)


def test_criterion_08_stabilization_bound():
    _check(acceptance.criterion_8)


def test_criterion_09_desk_scale_majority():
    _check(acceptance.criterion_9)


def test_criterion_10_line_roadblock():
    _check(acceptance.criterion_10)


def test_criterion_11_finalization_structure():
    _check(acceptance.criterion_11)


def test_criterion_12_generator_equivalence():
    _check(acceptance.criterion_12)


def test_criterion_13_determinism():
    _check(acceptance.criterion_13)
