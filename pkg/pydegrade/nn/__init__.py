import pyro

from pydegrade.nn.checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from pydegrade.nn.features import (  # noqa: F401
    RandomPyramidExtractor,
    default_extractor,
    gram_matrix,
    perceptual_features,
    vgg19_extractor,
)
from pydegrade.nn.layers import (  # noqa: F401
    Affine,
    Conv2d,
    SNConv2d,
    conv2d,
    evaluation,
    leaky_relu,
    spectral_normalize,
)
from pydegrade.nn.modulated import MCBlock, modulated_conv  # noqa: F401

# Networks own their parameters; nothing is shared through pyro's global param store.
pyro.settings.set(module_local_params=True)
