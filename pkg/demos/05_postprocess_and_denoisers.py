# Post-processing reconstruction (one classical recovery, one denoiser pass,
# one cross-validated blend) and a tour of the available denoisers, including
# the committed residual-CNN fixture.
#
# Run from the repository root:  python demos/05_postprocess_and_denoisers.py

import os

import numpy as np

from unrollreg import (
    DenoiserSpec,
    NoiseModel,
    add_poisson_noise,
    apply_denoiser,
    build_parallel_radon,
    fixture_weights_path,
    landweber,
    make_leaveout_split,
    make_phantom,
    operator_norm_sq,
    post_process_reconstruct,
    psnr,
    synthesize_clean,
)

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

op = build_parallel_radon(64, 64, 91, 60)
phantom = make_phantom("shepp_logan", 64, 64)
y = add_poisson_noise(synthesize_clean(op, phantom), NoiseModel(1e4, seed=0))
split = make_leaveout_split(op.rows, 0.01, seed=0)
tau = 1.0 / operator_norm_sq(op, 200, seed=0)

# an over-iterated classical recovery has started fitting the noise, so a
# denoising pass has something to offer; at a well-stopped 400-step recovery
# the held-out criterion refuses the denoiser instead (beta ~ 0)
steps = 2000
classical = landweber(op, y, np.zeros(op.cols), steps, tau, fit_mask=split.fit_mask())
classical_img = classical.reshape(64, 64)
print(f"pure Landweber ({steps} steps):    {psnr(classical_img, phantom):6.2f} dB")

denoisers = {
    "gaussian(1.0)": DenoiserSpec.gaussian(1.0),
    "median(3)": DenoiserSpec.median(3),
    "conv fixture": DenoiserSpec.conv_residual(fixture_weights_path()),
}
for name, spec in denoisers.items():
    denoised = apply_denoiser(spec, classical_img)
    blended = post_process_reconstruct(op, y, steps, tau, spec, beta_mode="cv", split=split)
    print(
        f"{name:18s} denoise-only {psnr(denoised, phantom):6.2f} dB, "
        f"cv-blended post-process {psnr(blended, phantom):6.2f} dB"
    )

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    blended = post_process_reconstruct(
        op, y, steps, tau, denoisers["conv fixture"], beta_mode="cv", split=split
    )
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, img, title in zip(
        axes,
        [phantom, classical_img, blended],
        ["truth", "Landweber", "post-processed (cv blend)"],
    ):
        ax.imshow(img, cmap="gray", vmin=0, vmax=1)
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "postprocess.png"), dpi=120)
    print(f"wrote postprocess.png to {out_dir}")
except ImportError:
    pass
