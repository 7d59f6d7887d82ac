from pydegrade.degradation.ops import (  # noqa: F401
    OP_TYPES,
    SHUFFLED_KINDS,
    BlurOp,
    ClipOp,
    DegradationOp,
    JpegOp,
    NoiseOp,
    ResampleDownUpOp,
    apply_op,
)
from pydegrade.degradation.recipe import (  # noqa: F401
    DegradationRecipe,
    apply_recipe,
    deserialize_recipe,
    serialize_recipe,
)
from pydegrade.degradation.sampler import (  # noqa: F401
    HELD_OUT_REAL_CONFIG,
    IDENTITY_CONFIG,
    SamplerConfig,
    sample_recipe,
    single_op_config,
)
