"""Acceptance gate: one test per criterion, quick suite by default.

Tolerances are pinned in twistlab.acceptance and identical across
suites; TWISTLAB_SUITE=full switches to the stated full resolutions and
horizons (hours of compute; the CLI `twistlab verify --suite full` runs
the same code).  Each test prints its one-line verdict.
"""

import os

import pytest

from twistlab import acceptance as acc

SUITE = os.environ.get("TWISTLAB_SUITE", "quick")


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return str(tmp_path_factory.mktemp(f"acceptance_{SUITE}"))


_results = {}


def _run(cid, outdir):
    if cid not in _results:
        fn = {c: f for c, f, _ in acc.CRITERIA}[cid]
        pkey = {c: k for c, _, k in acc.CRITERIA}[cid]
        _results[cid] = fn(acc.PARAMS[SUITE][pkey], outdir)
    res = _results[cid]
    print()
    print(res.line())
    return res


@pytest.mark.parametrize("cid", [c for c, _, _ in acc.CRITERIA])
def test_criterion(cid, outdir):
    res = _run(cid, outdir)
    if res.void:
        pytest.skip(f"declared void: {res.margin}")
    assert res.passed, res.line()
