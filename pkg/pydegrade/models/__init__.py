from pydegrade.models.discriminator import (  # noqa: F401
    ConditionalDiscriminator,
    DiscriminatorConfig,
)
from pydegrade.models.encoder import (  # noqa: F401
    OMEGA_DIM,
    DegNetConfig,
    DegradationEncoder,
    degnet_forward_batch,
    extract_representation,
)
from pydegrade.models.synthesizer import (  # noqa: F401
    SynNetConfig,
    SynthesisNetwork,
    map_to_w,
    synthesize,
    synthesize_batch,
    synthesize_natural,
)
