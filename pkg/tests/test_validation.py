from qbl.config import RunConfig
from qbl.validation import CHECKS, Check, format_table, run_checks


def test_quick_subset():
    quick = run_checks(RunConfig(), quick=True)
    assert len(quick) == sum(c.quick for c in CHECKS)
    assert all(r.passed for r in quick)
    assert all(r.seconds < 1.0 for r in quick)


def test_crashing_check_is_reported_as_failure():
    def boom(ctx):
        raise RuntimeError("kaput")

    res = run_checks(RunConfig(), checks=[Check("boom", "test", True, boom)])
    assert not res[0].passed and "kaput" in res[0].detail
    table = format_table(res)
    assert table.splitlines()[1].startswith("FAIL")
    assert table.endswith("0/1 checks passed")
