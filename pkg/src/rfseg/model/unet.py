"""3D U-Net over the fused low-res input grid."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import GridTensor, Parameter
from ..errors import ShapeError
from .config import NetConfig

__all__ = ["UNet3D"]


def _he_conv(rng: np.random.Generator, name: str, c_out: int, c_in: int, k: int,
             std_scale: float = 1.0) -> tuple[Parameter, Parameter]:
    fan_in = c_in * k ** 3
    std = std_scale * np.sqrt(2.0 / fan_in)
    w = Parameter(name + ".w", rng.normal(0.0, std, size=(c_out, c_in, k, k, k)))
    b = Parameter(name + ".b", np.zeros(c_out))
    return w, b


class UNet3D:
    """Encoder-decoder with stride-2 downsampling, nearest 2x upsampling and
    skip concatenation; one logit per voxel out, finest decoder features
    exposed for the refinement stage."""

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        self.config = config
        self.params: dict[str, Parameter] = {}
        c = config.base_channels
        chans = [c * 2 ** i for i in range(config.depth + 1)]
        self.chans = chans

        def reg(pair):
            for p in pair:
                self.params[p.name] = p
            return pair

        self.stem = reg(_he_conv(rng, "unet.stem", chans[0], config.in_channels, 3))
        self.enc = []
        for i in range(1, config.depth + 1):
            down = reg(_he_conv(rng, f"unet.enc{i}.down", chans[i], chans[i - 1], 3))
            conv = reg(_he_conv(rng, f"unet.enc{i}.conv", chans[i], chans[i], 3))
            self.enc.append((down, conv))
        self.dec = []
        for i in range(config.depth, 0, -1):
            conv = reg(_he_conv(rng, f"unet.dec{i}.conv", chans[i - 1], chans[i] + chans[i - 1], 3))
            self.dec.append(conv)
        self.head = reg(_he_conv(rng, "unet.head", 1, chans[0], 1, std_scale=0.1))

    def forward(self, x: GridTensor) -> tuple[GridTensor, GridTensor]:
        """Returns (logits (X, Y, D), decoder features (C0, X, Y, D))."""
        if x.values.ndim != 4 or x.shape[0] != self.config.in_channels:
            raise ShapeError(
                f"unet expects ({self.config.in_channels}, X, Y, D), got {x.shape}"
            )
        dims = x.shape[1:]
        mult = 2 ** self.config.depth
        pads = tuple((-n) % mult for n in dims)
        if any(pads):
            x = ad.pad3d(x, pads)

        def conv_relu(t, pair, stride=1, padding=1):
            w, b = pair
            return ad.relu(ad.conv3d(t, w.tensor, b.tensor, stride=stride, padding=padding))

        h = conv_relu(x, self.stem)
        skips = [h]
        for down, conv in self.enc:
            h = conv_relu(h, down, stride=2)
            h = conv_relu(h, conv)
            skips.append(h)

        h = skips[-1]
        for level, conv in enumerate(self.dec):
            skip = skips[len(self.enc) - 1 - level]
            h = ad.nearest_upsample2x(h)
            h = ad.concat([h, skip], axis=0)
            h = conv_relu(h, conv)

        w, b = self.head
        s = ad.conv3d(h, w.tensor, b.tensor, stride=1, padding=0)
        if any(pads):
            s = ad.crop3d(s, dims)
            h = ad.crop3d(h, dims)
        s = ad.reshape(s, dims)
        return s, h

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())
