from .clusters import omega_scatter, project_pool  # noqa: F401
from .vega import VegaSchema, load_schema, resize, save_schema, set_title  # noqa: F401
