import numpy as np
import pytest

from pgusgp.instances import CraneConfig, Dataset, DatasetParams, Instance, Task, TerminalMap, generate_dataset, load_dataset
from pgusgp.simulator import FeatureVector
from pgusgp.trees import Individual, parse_sexpr


def make_individual(expression: str, birth_gen: int = 0) -> Individual:
    return Individual(code=parse_sexpr(expression), birth_gen=birth_gen)


def fv(**overrides) -> FeatureVector:
    base = dict(TT=0.0, CTN=0.0, OT=0.0, SNTN=0.0, ENTN=0.0, SNWTN=0.0,
                ENWTN=0.0, DT=0.0, RTN=0.0, ALT=0.0, AUT=0.0)
    base.update(overrides)
    return FeatureVector(**base)


def line_instance(travel_to_start=60.0, travel_start_end=45.0, service=(30.0, 30.0),
                  teu=1, seed=0) -> Instance:
    """One truck at Y0, one unload task Q0 -> Y1, fixed service times."""
    tmap = TerminalMap(
        nodes=["Q0", "Y0", "Y1"],
        edges=[
            ("Y0", "Q0", travel_to_start), ("Q0", "Y0", travel_to_start),
            ("Q0", "Y1", travel_start_end), ("Y1", "Q0", travel_start_end),
            ("Y0", "Y1", travel_to_start + travel_start_end + 100.0),
            ("Y1", "Y0", travel_to_start + travel_start_end + 100.0),
        ],
    )
    cranes = [
        CraneConfig(id=0, kind="QC", node="Q0", service_min=service[0], service_max=service[1]),
        CraneConfig(id=1, kind="YC", node="Y0", service_min=service[0], service_max=service[1]),
        CraneConfig(id=2, kind="YC", node="Y1", service_min=service[0], service_max=service[1]),
    ]
    tasks = [Task(id=0, qc_id=0, start_node="Q0", end_node="Y1", teu=teu,
                  op_type=1, dispatch_type=0, sequence_index=0)]
    return Instance(map=tmap, cranes=cranes, tasks=tasks, truck_nodes=["Y0"], seed=seed,
                    meta={"loading_ratio": 0.0, "trucks_per_qc": 1})


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Dataset:
    """Tiny but real dataset for evolution-level tests."""
    root = tmp_path_factory.mktemp("data")
    params = DatasetParams(num_tasks=24, trucks_per_qc_range=(3, 4))
    generate_dataset(root, 1, seed=11, n_train=4, n_test=4, params=params)
    return load_dataset(root, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
