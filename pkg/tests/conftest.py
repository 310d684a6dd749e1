import json

import numpy as np
import pytest

from fdrlab.circuits import TOY_CIRCUITS, desk_composite, desk_stimulus, toy_circuit, toy_document
from fdrlab.dataset import join
from fdrlab.features import extract_all
from fdrlab.graph import build_graph
from fdrlab.inject import CampaignConfig, run_campaign
from fdrlab.sim import Stimulus, run_golden

# Hand-picked stimuli for the feature fixture tables (see test_features.py).
TOY_STIMULI = {
    "shift3": {"d": [1, 0, 1, 1, 0, 0, 1, 0]},
    "gated": {"a": [1, 1, 0, 1, 1, 1], "b": [1, 0, 1, 1, 1, 0]},
    "ring3": {"in": [1, 0, 0, 0, 0, 0]},
    "bus4": {"rst_n": [0, 1, 1, 1, 1, 1, 0, 1], "en": [1, 1, 1, 0, 1, 1, 1, 1]},
    "isolated": {"d": [0, 1, 1, 0]},
}
TOY_CYCLES = {"toggle": 4}


def toy_stimulus(name: str) -> Stimulus:
    cols = TOY_STIMULI.get(name, {})
    return Stimulus.from_columns(cols, cycles=TOY_CYCLES.get(name))


def random_columns(doc: dict, cycles: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    return {pi: rng.integers(0, 2, cycles).tolist() for pi in doc["inputs"]}


@pytest.fixture(params=TOY_CIRCUITS)
def toy_name(request):
    return request.param


@pytest.fixture
def write_json(tmp_path):
    def _write(doc, name="netlist.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path

    return _write


@pytest.fixture(scope="session")
def desk():
    nl = desk_composite()
    stim = desk_stimulus()
    graph = build_graph(nl)
    _, activity = run_golden(nl, stim)
    features = extract_all(nl, graph, graph.adjacency, activity)
    records = run_campaign(nl, stim, CampaignConfig(170, (5, 200), 2019))
    data = join(features, {r.ff_name: r.fdr for r in records})
    return {"netlist": nl, "stimulus": stim, "graph": graph, "features": features,
            "records": records, "data": data}


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
