# Build the parallel-beam projector, look at a sinogram, and back-project it.
#
# Run from the repository root:  python demos/01_forward_operator.py
# Images land in demos/out/.

import os

from unrollreg import (
    build_parallel_radon,
    make_phantom,
    operator_norm_sq,
    synthesize_clean,
    write_pgm,
)

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

# a 64x64 head phantom and a sparse-view geometry: 91 rays x 60 angles
op = build_parallel_radon(64, 64, 91, 60)
phantom = make_phantom("shepp_logan", 64, 64)
print(f"operator: {op.rows} rows x {op.cols} cols, {op.nnz} stored chords")
print(f"||T||^2 (power method): {operator_norm_sq(op, 200, seed=0):.1f}")

sino = synthesize_clean(op, phantom)
print(f"sinogram shape {sino.shape}, line integrals up to {sino.max():.2f}")

# the adjoint is the unfiltered back-projection: blurry but recognizable
backprojection = op.apply_adjoint(sino)

write_pgm(phantom, os.path.join(out_dir, "phantom.pgm"))
write_pgm(sino, os.path.join(out_dir, "sinogram.pgm"))
write_pgm(backprojection, os.path.join(out_dir, "backprojection.pgm"))
print(f"wrote phantom/sinogram/backprojection PGMs to {out_dir}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, img, title in zip(
        axes, [phantom, sino, backprojection], ["phantom", "sinogram", "back-projection"]
    ):
        ax.imshow(img, cmap="gray", aspect="auto" if title == "sinogram" else None)
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "forward_model.png"), dpi=120)
    print("wrote forward_model.png")
except ImportError:
    print("matplotlib not available, skipped the png")
