import numpy as np
import pytest

from fse_forecast.errors import DomainError, InsufficientDataError
from fse_forecast.services.accuracy_metrics import (
    MEASURES,
    ae_re_series,
    build_accuracy_report,
    improvement,
    mae,
    mape,
    msae,
)


@pytest.mark.parametrize(
    "benchmark, candidate, printed",
    [
        # Case A accuracy table: MSAE, MAE, MAPE rows
        (0.18, 0.11, 38),
        (622.25, 328.54, 47),
        (47.11, 41.70, 11),
        # Case B accuracy table
        (0.32, 0.13, 59),
        (30.88, 13.62, 55),
        (48.60, 41.65, 14),
    ],
)
def test_improvement_reproduces_printed_tables(benchmark, candidate, printed):
    assert abs(improvement(benchmark, candidate) - printed) <= 1


def test_improvement_rounds_half_away_from_zero():
    assert improvement(200.0, 199.0) == 1
    assert improvement(200.0, 201.0) == -1
    assert improvement(5.0, 5.0) == 0


def test_improvement_needs_positive_benchmark():
    with pytest.raises(DomainError):
        improvement(0.0, 1.0)


def test_mae():
    assert mae([10.0, 12.0], [10.0, 10.0]) == 1.0
    assert mae([3.0, 4.0], [3.0, 4.0]) == 0.0


def test_mae_matches_direct_summation(rng):
    f = rng.normal(100, 10, size=20)
    x = rng.normal(100, 10, size=20)

    expected = sum(abs(a - b) for a, b in zip(f, x)) / 20

    assert mae(f, x) == pytest.approx(expected, abs=1e-12)


def test_mape():
    assert mape([110.0], [100.0]) == pytest.approx(10.0)
    assert mape([5.0, 110.0], [0.0, 100.0]) == pytest.approx(10.0)


def test_mape_zero_policies():
    with pytest.raises(DomainError):
        mape([5.0, 110.0], [0.0, 100.0], zero_policy="error")
    with pytest.raises(DomainError):
        mape([1.0, 2.0], [0.0, 0.0])


def test_msae_variants():
    assert msae([2.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0)
    assert msae([2.0, 2.0], [1.0, 1.0], variant="paper_literal") == pytest.approx(0.5)
    assert msae([4.0, 5.0], [4.0, 5.0]) == 0.0
    assert msae([4.0, 5.0], [4.0, 5.0], variant="paper_literal") == 0.0


def test_msae_needs_positive_total():
    with pytest.raises(DomainError):
        msae([1.0, 1.0], [0.0, 0.0])


def test_ae_re_series():
    ae, re = ae_re_series([90.0, 5.0, 7.0], [100.0, 0.0, 7.0])

    assert ae == [10.0, 5.0, 0.0]
    assert re[0] == pytest.approx(-0.10)
    assert re[1] is None
    assert re[2] == 0.0


def test_length_mismatch_and_empty_input():
    with pytest.raises(DomainError):
        mae([1.0, 2.0], [1.0])
    with pytest.raises(InsufficientDataError):
        mae([], [])


def test_metric_identities(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        x = rng.uniform(1.0, 500.0, size=n)
        f = x + rng.normal(0.0, 50.0, size=n)
        c = float(rng.uniform(0.1, 10.0))

        assert msae(f, x) == pytest.approx(mae(f, x) * n / x.sum(), rel=1e-12)
        assert mape(c * f, c * x) == pytest.approx(mape(f, x), rel=1e-10)
        assert msae(c * f, c * x) == pytest.approx(msae(f, x), rel=1e-10)
        assert mae(c * f, c * x) == pytest.approx(c * mae(f, x), rel=1e-10)
        assert mae(f, x) >= abs(float(np.mean(f - x))) - 1e-12

        ae, re = ae_re_series(f, x)
        assert ae == np.abs(f - x).tolist()
        assert re == ((f - x) / x).tolist()


def test_metrics_invariant_to_joint_permutation(rng):
    x = rng.uniform(10.0, 20.0, size=15)
    f = x + rng.normal(size=15)
    order = rng.permutation(15)

    assert mae(f[order], x[order]) == pytest.approx(mae(f, x), rel=1e-12)
    assert mape(f[order], x[order]) == pytest.approx(mape(f, x), rel=1e-12)
    assert msae(f[order], x[order]) == pytest.approx(msae(f, x), rel=1e-12)


def test_accuracy_report_is_self_consistent():
    actuals = [100.0, 120.0, 80.0, 110.0]
    report = build_accuracy_report(
        {
            "ses": [100.0, 100.0, 100.0, 100.0],
            "fse": [98.0, 118.0, 83.0, 111.0],
        },
        actuals,
        benchmark="ses",
        candidate="fse",
    )

    assert [row.measure for row in report.improvement] == list(MEASURES)
    for row in report.improvement:
        assert row.benchmark_error == report.forecasters["ses"].error(row.measure)
        assert row.candidate_error == report.forecasters["fse"].error(row.measure)
        assert row.improvement_pct == improvement(row.benchmark_error, row.candidate_error)
    assert report.forecasters["ses"].mae == pytest.approx(12.5)


def test_accuracy_report_needs_both_forecasters():
    with pytest.raises(DomainError):
        build_accuracy_report({"ses": [1.0]}, [1.0], benchmark="ses", candidate="fse")
