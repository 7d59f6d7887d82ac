import numpy as np
import pytest
import torch

from pydegrade.models.encoder import OMEGA_DIM
from pydegrade.training.pool import RepresentationPool
from pydegrade.visuals import clusters, vega


@pytest.fixture
def pool():
    generator = torch.Generator().manual_seed(0)
    centres = {"blur": 0.0, "jpeg": 5.0}
    omegas, labels = [], []
    for label, centre in centres.items():
        for _ in range(6):
            omegas.append(centre + torch.randn(OMEGA_DIM, generator=generator))
            labels.append(label)
    omegas.append(torch.zeros(OMEGA_DIM))
    labels.append(None)
    return RepresentationPool(torch.stack(omegas), labels)


def test_project_pool(pool):
    frame = clusters.project_pool(pool)
    assert list(frame.columns) == ["x", "y", "label", "source"]
    assert len(frame) == len(pool)
    assert frame["label"].iloc[-1] == "unlabelled"

    blur = frame[frame["label"] == "blur"]["x"].mean()
    jpeg = frame[frame["label"] == "jpeg"]["x"].mean()
    assert np.sign(blur) != np.sign(jpeg)


def test_project_pool_needs_two_entries():
    with pytest.raises(ValueError):
        clusters.project_pool(RepresentationPool(torch.zeros(1, OMEGA_DIM)))


def test_omega_scatter(pool):
    schema = clusters.omega_scatter(pool, title="Families")
    assert schema["title"] == "Families"
    points = vega.find_keyed(schema["data"], "name", "points")["values"]
    assert len(points) == len(pool)
    assert {"x", "y", "label", "source"} <= set(points[0])

    untouched = vega.load_schema("omega_scatter.vg.json")
    assert vega.find_keyed(untouched["data"], "name", "points")["values"] == []


def test_omega_scatter_size(pool):
    schema = clusters.omega_scatter(pool, width=320, height=240)
    assert (schema["width"], schema["height"]) == (320, 240)
