"""Differentiable distortion-model layers.

Each layer maps a batch of parameter vectors to the dense forward
displacement field of its distortion family, so a network can regress the
parameter implicitly while being supervised on the flow; gradients reach
the parameter through the analytic mapping.

Parametrizations (must stay numerically identical to the distortion
toolkit this package interoperates with): centered normalized coordinates
u = (x - cx)/scale, v = (y - cy)/scale, cx = (W-1)/2, cy = (H-1)/2,
scale = max(W, H)/2, r^2 = u^2 + v^2.

* barrel / pincushion: (u, v) / (1 + k r^2), k <= 0 barrel, k >= 0 pincushion
* rotation (degrees):  (u cos + v sin, -u sin + v cos)
* shear:               (u + s v, v)
* perspective:         (u, v) / (1 + a u + b v)
* wave (pixel units):  (x + A sin(2 pi y / T), y)

Flows are returned in pixel units with shape (B, 2, H, W).
"""

from __future__ import annotations

import torch
from torch import nn

TYPE_NAMES = ("barrel", "pincushion", "rotation", "shear", "perspective", "wave")

PARAM_COUNT = {
    "barrel": 1,
    "pincushion": 1,
    "rotation": 1,
    "shear": 1,
    "perspective": 2,
    "wave": 2,
}

# Parameter bounds per family; network outputs are squashed into these so
# the model layer is always evaluated at a well-posed parameter vector.
PARAM_BOUNDS = {
    "barrel": ((-0.4,), (0.0,)),
    "pincushion": ((0.0,), (0.4,)),
    "rotation": ((-30.0,), (30.0,)),
    "shear": ((-0.4,), (0.4,)),
    "perspective": ((-0.3, -0.3), (0.3, 0.3)),
    "wave": ((0.0, 20.0), (8.0, 100.0)),
}


class DistortionFlowLayer(nn.Module):
    """rho (B, k) -> forward flow (B, 2, H, W) for one distortion family."""

    def __init__(self, type_name: str, height: int, width: int):
        super().__init__()
        if type_name not in TYPE_NAMES:
            raise ValueError(f"unknown distortion type {type_name!r}")
        self.type_name = type_name
        self.height = int(height)
        self.width = int(width)
        cx = (width - 1) / 2.0
        cy = (height - 1) / 2.0
        scale = max(width, height) / 2.0
        self.scale = scale
        xs = torch.arange(width, dtype=torch.float64)
        ys = torch.arange(height, dtype=torch.float64)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        self.register_buffer("grid_x", gx)
        self.register_buffer("grid_y", gy)
        self.register_buffer("u", (gx - cx) / scale)
        self.register_buffer("v", (gy - cy) / scale)

    def forward(self, rho: torch.Tensor) -> torch.Tensor:
        if rho.ndim != 2 or rho.shape[1] != PARAM_COUNT[self.type_name]:
            raise ValueError(
                f"{self.type_name} expects (B, {PARAM_COUNT[self.type_name]}), "
                f"got {tuple(rho.shape)}"
            )
        u = self.u.to(rho.dtype)[None]
        v = self.v.to(rho.dtype)[None]
        t = self.type_name

        if t in ("barrel", "pincushion"):
            k = rho[:, 0, None, None]
            denom = 1.0 + k * (u * u + v * v)
            u2 = u / denom
            v2 = v / denom
        elif t == "rotation":
            th = torch.deg2rad(rho[:, 0, None, None])
            c, s = torch.cos(th), torch.sin(th)
            u2 = u * c + v * s
            v2 = -u * s + v * c
        elif t == "shear":
            s = rho[:, 0, None, None]
            u2 = u + s * v
            v2 = v.expand_as(u2)
        elif t == "perspective":
            a = rho[:, 0, None, None]
            b = rho[:, 1, None, None]
            denom = 1.0 + a * u + b * v
            u2 = u / denom
            v2 = v / denom
        else:  # wave works in pixel coordinates
            amp = rho[:, 0, None, None]
            period = rho[:, 1, None, None]
            gy = self.grid_y.to(rho.dtype)[None]
            fx = amp * torch.sin(2.0 * torch.pi * gy / period)
            fy = torch.zeros_like(fx)
            return torch.stack([fx.expand(rho.shape[0], self.height, self.width),
                                fy.expand(rho.shape[0], self.height, self.width)], dim=1)

        fx = (u2 - u) * self.scale
        fy = (v2 - v) * self.scale
        return torch.stack([fx, fy], dim=1)


class BoundedParams(nn.Module):
    """Squash unbounded activations into a family's parameter box."""

    def __init__(self, type_name: str):
        super().__init__()
        lo, hi = PARAM_BOUNDS[type_name]
        self.register_buffer("lo", torch.tensor(lo, dtype=torch.float64))
        self.register_buffer("hi", torch.tensor(hi, dtype=torch.float64))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        lo = self.lo.to(x.dtype)
        hi = self.hi.to(x.dtype)
        return lo + (hi - lo) * torch.sigmoid(x)


def epe_loss(pred_flow: torch.Tensor, target_flow: torch.Tensor) -> torch.Tensor:
    """Mean endpoint error: Euclidean distance between corresponding flow
    vectors averaged over all pixels (and the batch)."""
    diff = pred_flow - target_flow
    return torch.sqrt((diff * diff).sum(dim=1) + 1e-12).mean()
