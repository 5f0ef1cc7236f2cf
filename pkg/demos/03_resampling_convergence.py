"""Compare the derivative-initialized backward-mapping solver against the
plain iterative search, reproducing the convergence story: at a severe
distortion the plain iteration is still far from converged after 15
rounds while the derivative-initialized one finishes within 5.
"""

import os

import numpy as np

from geowarp import DistortionParams, DistortionType, ResampleOptions, crop_valid, \
    distort_image, resample
from geowarp import flowio
from demo_util import smooth_image

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output", "resampling")
os.makedirs(OUT, exist_ok=True)

src = smooth_image(512, seed=5)
params = DistortionParams(DistortionType.ROTATION, (30.0,))
distorted, flow = distort_image(src, params)
img, gt_flow, _ = crop_valid(distorted, flow, (256, 256))
flowio.write_image(os.path.join(OUT, "distorted.png"), img)

print("fraction of pixels converged (step < 1e-3 px) by iteration budget")
print(f"{'iterations':>10s} {'derivative init':>16s} {'plain init':>11s}")
for budget in (1, 2, 3, 5, 10, 15):
    fr = {}
    for label, deriv in (("deriv", True), ("plain", False)):
        out, rep = resample(img, gt_flow,
                            ResampleOptions(max_iterations=budget,
                                            use_derivative_init=deriv))
        den = out.valid_mask()
        fr[label] = (rep.converged & den).sum() / den.sum()
    print(f"{budget:>10d} {fr['deriv']:>16.4f} {fr['plain']:>11.4f}")

corrected, report = resample(img, gt_flow)
flowio.write_image(os.path.join(OUT, "corrected.png"), corrected)
print(f"\nfull run: {report.fraction_converged:.2%} converged, "
      f"mean {report.iterations.mean():.2f} iterations, "
      f"{report.fraction_invalid:.2%} of output pixels have no source")
print(f"images written to {OUT}")
