import json
from pathlib import Path

import pytest

from lcc import pipeline

_CACHE_DIR = Path(__file__).parent / ".cache"


@pytest.fixture(scope="session")
def default_scenario() -> pipeline.Scenario:
    return pipeline.load_scenario(pipeline.default_scenario_path())


@pytest.fixture(scope="session")
def default_synthesis(default_scenario) -> pipeline.SynthesisResult:
    """Offline synthesis for the default scenario, cached on disk across runs."""
    _CACHE_DIR.mkdir(exist_ok=True)
    cache = _CACHE_DIR / "sets.json"
    if cache.exists():
        try:
            synth = pipeline.synthesis_from_json(default_scenario, json.loads(cache.read_text()))
        except Exception:
            synth = None
        if synth is not None:
            return synth
    synth = pipeline.synthesize(default_scenario)
    cache.write_text(json.dumps(pipeline.sets_to_json(default_scenario, synth)))
    return synth


@pytest.fixture(scope="session")
def default_run(default_scenario, default_synthesis) -> pipeline.RunResult:
    """The full closed-loop case-study run, executed once per session."""
    return pipeline.run(default_scenario, synthesis=default_synthesis)
