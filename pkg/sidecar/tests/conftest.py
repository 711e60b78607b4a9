from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from titlegen_sidecar.service import ServiceState, create_app
from titlegen_sidecar.training import init_checkpoint

WIRE_DIR = Path(__file__).parent.parent.parent / "fixtures" / "wire"

TOY_RECORDS = [
    {
        "id": f"r{i}",
        "input": f"JS upload fails attempt {i} <code> $.ajax({i})",
        "gold": "jquery ajax upload error",
    }
    for i in range(10)
]


def write_toy_dataset(path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for record in TOY_RECORDS:
            handle.write(json.dumps(record) + "\n")
    return path


@pytest.fixture
def toy_dataset(tmp_path) -> Path:
    return write_toy_dataset(tmp_path / "toy.jsonl")


@pytest.fixture
def base_checkpoint(tmp_path, toy_dataset) -> Path:
    path = tmp_path / "base.pt"
    init_checkpoint(str(path), dataset_path=str(toy_dataset), seed=3)
    return path


@pytest.fixture
def loaded_client(base_checkpoint) -> TestClient:
    state = ServiceState()
    state.load(str(base_checkpoint))
    return TestClient(create_app(state))


@pytest.fixture
def unloaded_client() -> TestClient:
    return TestClient(create_app(ServiceState()))


@pytest.fixture
def wire_fixtures() -> Path:
    return WIRE_DIR
