"""RMSE vs SSIM vs center-weighted SSIM on controlled distortions.

Two distortions with the same mean squared error can look very different;
SSIM separates them, and the weighted variant additionally cares where on
the screen the damage sits.
"""

import numpy as np

from vtlab import synth
from vtlab.metrics import SsimParams, rmse, ssim, wssim

rng = np.random.default_rng(0)
base = synth.checker_texture(128, cells=8, c0=(60, 60, 60), c1=(190, 190, 190))

# Distortion A: a constant brightness shift across the whole image.
shift = np.clip(base.astype(np.int16) + 12, 0, 255).astype(np.uint8)

# Distortion B: strong noise confined to a small patch, scaled until its
# RMSE matches the shift.
patchy = base.copy().astype(np.int16)
noise = rng.integers(-80, 81, size=(32, 32, 3))
patchy[48:80, 48:80] += noise
patchy = np.clip(patchy, 0, 255).astype(np.uint8)

print(f"{'distortion':>22}  {'rmse':>7}  {'ssim':>7}  {'wssim':>7}")
for name, img in (("brightness shift", shift), ("noise patch (center)", patchy)):
    print(f"{name:>22}  {rmse(base, img):7.3f}  {ssim(base, img):7.4f}  "
          f"{wssim(base, img):7.4f}")

# Same damage at the corner vs the center: rmse cannot tell them apart,
# the weighted ssim can.
corner = base.copy().astype(np.int16)
corner[0:32, 0:32] += noise
corner = np.clip(corner, 0, 255).astype(np.uint8)

print(f"{'noise patch (corner)':>22}  {rmse(base, corner):7.3f}  "
      f"{ssim(base, corner):7.4f}  {wssim(base, corner):7.4f}")

params = SsimParams(center_floor=1.0)  # flat weights collapse wssim to ssim
print(f"\nwith flat window weights: wssim == ssim -> "
      f"{wssim(base, patchy, params):.6f} == {ssim(base, patchy, params):.6f}")
