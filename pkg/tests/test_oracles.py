import numpy as np
import pytest


def test_oracle_report():
    from bilayer.oracles import OracleReport

    report = OracleReport()
    assert report.passed
    assert report.max_deviation == 0.0

    report.relative("a", 1.0005, 1.0, 1e-3)
    report.relative("b", 1.1, 1.0, 1e-3)
    report.at_most("c", -1.0, -0.5, strict=True)
    report.at_most("d", 0.0, 0.0, strict=True)
    report.at_most("e", -1.0 - 1e-12, -1.0, strict=False)
    report.at_most("f", -1.0 + 1e-12, -1.0, strict=False)
    report.at_most("g", -0.9, -1.0, strict=False)

    assert len(report) == 7
    assert not report.passed
    assert [c.name for c in report.failures] == ["b", "d", "g"]
    assert report.max_deviation == pytest.approx(0.1)
    assert np.isnan(report.checks[2].deviation)

    text = str(report.checks[1])
    assert text.startswith("b: 1.1 (expected 1")
    assert text.endswith("FAILED")
    assert str(report.checks[0]).endswith("ok")


def test_oracle_suite():
    from bilayer.oracles import (
        CYLINDER_ALPHAS,
        PROP1_BETAS,
        PROP2_CASES,
        oracle_suite,
    )

    report = oracle_suite((100, 40))

    failures = "\n".join(map(str, report.failures))
    assert report.passed, failures
    assert len(report) == 3 * len(PROP1_BETAS) + 4 * len(PROP2_CASES) + 2 * len(
        CYLINDER_ALPHAS
    )
    assert report.max_deviation < 1e-6

    checks = {check.name: check for check in report}
    bound = checks["unit curvature witness, beta=1 penalised"]
    assert bound.value == pytest.approx(-0.256, rel=1e-9)
    assert bound.expected == pytest.approx(-0.256)

    tol = checks["large curvature witness, gamma=0.5, beta=16 tolerance"]
    assert tol.value == pytest.approx(0.815275, abs=1e-6)
    penalised = checks["large curvature witness, gamma=0.5, beta=16 penalised"]
    assert penalised.value == pytest.approx(-29.365, abs=1e-3)
    assert "large curvature witness, gamma=0.5, beta=16 penalised sign" in checks

    energy = checks["cylinder, alpha=10 energy"]
    assert energy.expected == 2000.0
    assert energy.value == pytest.approx(2000.0, rel=1e-9)
    assert checks["cylinder, alpha=2.5 tolerance"].value < 1e-12


def test_oracle_suite_progress():
    from unittest.mock import MagicMock

    from bilayer.oracles import oracle_suite

    progress = MagicMock()
    task = progress.task.return_value.__enter__.return_value
    oracle_suite((10, 4), progress=progress)
    progress.task.assert_called_once_with("oracles")
    assert task.update.call_count == 11
    task.update.assert_called_with(11, 11)
