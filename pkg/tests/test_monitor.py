import logging

from ising_simreg.estimator import build_design
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import lasso_weights
from ising_simreg.monitor import LoggingMonitor
from ising_simreg.monitor import notify
from tests.fakes import FailingMonitor
from tests.fakes import RecordingMonitor
from tests.fakes import fast_settings
from tests.fakes import small_dataset
from tests.fakes import small_similarities


def test_failing_monitor_does_not_abort_path(caplog):
    """
    GIVEN one monitor that raises and one that records
    WHEN a path is fitted
    THEN the failure is logged, the fit completes and the other monitor sees every lambda
    """
    design = build_design(small_dataset(n=100), small_similarities())
    recorder = RecordingMonitor()

    path = fit_path(design, lasso_weights(3), monitors=[FailingMonitor(), recorder], settings=fast_settings())

    assert len(recorder.lambdas) == len(path)
    assert "FailingMonitor on_lambda failed: monitor broke" in caplog.text


def test_notify_skips_missing_hooks():
    # FailingMonitor has no on_fold
    notify([FailingMonitor()], "on_fold", 0, "ok")


def test_logging_monitor(caplog):
    design = build_design(small_dataset(n=100), small_similarities())

    with caplog.at_level(logging.INFO, logger="ising_simreg.monitor"):
        fit_path(design, lasso_weights(3), [0.01, 0.001], monitors=[LoggingMonitor()], settings=fast_settings())
        LoggingMonitor().on_fold(2, "ok")

    assert "Path start: 2 lambdas" in caplog.text
    assert "Lambda 1: 0.001" in caplog.text
    assert "elapsed=" in caplog.text
    assert "Fold 2: ok" in caplog.text
