from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

# Property suite contract: at least 200 randomized cases per property.
PROPERTY_EXAMPLES = 200

settings.register_profile(
    "acceptance",
    max_examples=PROPERTY_EXAMPLES,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("acceptance")

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def data_env(monkeypatch) -> Path:
    """Point relative dataset paths at the in-repo fixtures."""
    monkeypatch.setenv("POSTSCREEN_DATA_DIR", str(FIXTURES_DIR))
    return FIXTURES_DIR


def hindi_config_tree(output_dir: str) -> dict:
    tree = json.loads((FIXTURES_DIR / "config_hindi.json").read_text(encoding="utf-8"))
    tree["output_dir"] = output_dir
    return tree


def english_config_tree(output_dir: str) -> dict:
    tree = json.loads((FIXTURES_DIR / "config_english.json").read_text(encoding="utf-8"))
    tree["output_dir"] = output_dir
    return tree


@pytest.fixture(scope="session")
def trained_hindi(tmp_path_factory):
    """One fixture-trained Hindi model shared across service/CLI tests."""
    import os

    from postscreen.config import load_config
    from postscreen.runs import run_train

    out = tmp_path_factory.mktemp("hindi_model")
    old = os.environ.get("POSTSCREEN_DATA_DIR")
    os.environ["POSTSCREEN_DATA_DIR"] = str(FIXTURES_DIR)
    try:
        config = load_config(
            FIXTURES_DIR / "config_hindi.json", overrides={"output_dir": str(out)}
        )
        result = run_train(config)
    finally:
        if old is None:
            os.environ.pop("POSTSCREEN_DATA_DIR", None)
        else:
            os.environ["POSTSCREEN_DATA_DIR"] = old
    return config, result
