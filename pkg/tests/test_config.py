import pytest
from pydantic import ValidationError

from ising_simreg.config import SimRegSettings
from ising_simreg.config import decisions
from ising_simreg.config import fingerprint


def test_settings_env(monkeypatch):
    # Set environment variables to test values
    monkeypatch.setenv("ISING_SIMREG_N_FOLDS", "5")
    monkeypatch.setenv("ISING_SIMREG_KKT_TOL", "1e-8")
    monkeypatch.setenv("ISING_SIMREG_GRAPH_FORMAT", "gexf")

    settings = SimRegSettings()
    assert settings.n_folds == 5
    assert settings.kkt_tol == 1e-8
    assert settings.graph_format == "gexf"


def test_settings_defaults():
    settings = SimRegSettings()
    assert settings.enumeration_cap == 20
    assert settings.n_lambda == 100
    assert settings.lambda_min_ratio == 1e-4
    assert settings.n_folds == 10
    assert settings.weight_epsilon is None
    assert settings.one_se_rule is False


@pytest.mark.parametrize(
    "field, value",
    [
        ("n_folds", 1),
        ("lambda_min_ratio", 1.5),
        ("enumeration_cap", 64),
        ("seed", -1),
        ("kkt_tol", 0.0),
    ],
)
def test_settings_reject_out_of_range(field, value):
    with pytest.raises(ValidationError):
        SimRegSettings(**{field: value})


def test_decisions_fingerprint_tracks_settings():
    """
    GIVEN two settings objects differing in one tolerance
    WHEN their decisions are fingerprinted
    THEN equal settings hash equally and the changed one does not
    """
    base = decisions(SimRegSettings())
    same = decisions(SimRegSettings())
    changed = decisions(SimRegSettings(kkt_tol=1e-4))

    assert fingerprint(base) == fingerprint(same)
    assert fingerprint(base) != fingerprint(changed)
    assert base["zero_pilot_policy"] == "force-exclude"
    assert decisions(SimRegSettings(weight_epsilon=1e-3))["zero_pilot_policy"] == "epsilon=0.001"
