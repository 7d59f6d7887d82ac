from pydegrade.imaging.filters import (  # noqa: F401
    AugmentParams,
    CropBox,
    add_gaussian_noise,
    apply_augmentation,
    augment,
    gaussian_blur,
    random_augmentation,
    resample,
    resize,
)
from pydegrade.imaging.jpeg import jpeg_proxy, pillow_jpeg_codec  # noqa: F401
from pydegrade.imaging.metrics import psnr, ssim  # noqa: F401
from pydegrade.imaging.tensor import (  # noqa: F401
    ImageTensor,
    load_image,
    save_image,
    stack_images,
    unstack_images,
)
