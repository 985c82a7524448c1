import json
import math

import pytest

from fraclap import verify


def test_check_serialisation():
    c = verify.Check("x", math.inf, 1.0, False)
    d = c.to_dict()
    assert d["pass"] is False and d["measured"] == "inf"
    report = json.loads(verify.report([c, verify.Check("y", 0.5, 1.0, True)]))
    assert report["pass"] is False and [r["name"] for r in report["checks"]] == ["x", "y"]


def test_report_is_deterministic():
    a = verify.report(verify.run_suite("dirac"))
    b = verify.report(verify.run_suite("dirac"))
    assert a == b


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify.run_suite("nope")
