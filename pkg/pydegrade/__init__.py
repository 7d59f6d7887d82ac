from pydegrade.interfaces import (  # noqa: F401
    cluster_report,
    evaluate,
    extract_pool,
    scenario_pairs,
    synth_pairs,
    train,
)
