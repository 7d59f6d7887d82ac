from typing import Optional

import pandas as pd
from sklearn.decomposition import PCA

from pydegrade.training.pool import RepresentationPool

from . import vega


def project_pool(pool: RepresentationPool, seed: int = 0) -> pd.DataFrame:
    """2-D PCA coordinates of every pool entry with its label and source id."""
    if len(pool) < 2:
        raise ValueError("Need at least two representations to project")
    coords = PCA(n_components=2, random_state=seed).fit_transform(pool.omegas.double().numpy())
    return pd.DataFrame(
        {
            "x": coords[:, 0],
            "y": coords[:, 1],
            "label": ["unlabelled" if label is None else label for label in pool.labels],
            "source": pool.source_ids,
        }
    )


def omega_scatter(
    pool: RepresentationPool,
    *,
    title: str = "Degradation representations",
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> vega.VegaSchema:
    """Scatter plot of a pool's representations in their first two principal components,
    colored by label."""
    schema = vega.load_schema("omega_scatter.vg.json")
    data = vega.find_keyed(schema["data"], "name", "points")
    data["values"] = project_pool(pool).to_dict(orient="records")
    return vega.resize(vega.set_title(schema, title), w=width, h=height)
