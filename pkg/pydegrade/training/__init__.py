from pydegrade.training.data import (  # noqa: F401
    TrainingBatch,
    load_pair_dir,
    make_training_batch,
    procedural_images,
)
from pydegrade.training.export import (  # noqa: F401
    PairedSample,
    replay_manifest,
    specific_scenario_pairs,
    synthesize_pairs,
)
from pydegrade.training.loop import (  # noqa: F401
    PlateauHalver,
    load_networks,
    read_metrics_log,
    run_training,
    train_step,
)
from pydegrade.training.pool import (  # noqa: F401
    RepresentationPool,
    augment_pairs,
    build_pool,
    load_pool,
    sample_pool,
    save_pool,
)
from pydegrade.training.report import (  # noqa: F401
    cluster_report,
    consistency_report,
    degradation_space_distance,
    evaluate_pairs,
)
