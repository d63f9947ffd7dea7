# Classical regularization on noisy data: Landweber semi-convergence and the
# Tikhonov parameter sweep.
#
# Run from the repository root:  python demos/02_classical_regularization.py

import os

import numpy as np

from unrollreg import (
    NoiseModel,
    add_poisson_noise,
    build_parallel_radon,
    landweber,
    make_phantom,
    noise_level,
    operator_norm_sq,
    psnr,
    synthesize_clean,
    tikhonov_solve,
)

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

op = build_parallel_radon(64, 64, 91, 60)
phantom = make_phantom("shepp_logan", 64, 64)
y = synthesize_clean(op, phantom)
y_noisy = add_poisson_noise(y, NoiseModel(1e6, seed=0))
print(f"relative noise level: {noise_level(y, y_noisy) / np.linalg.norm(y):.4%}")

tau = 1.0 / operator_norm_sq(op, 200, seed=0)

# semi-convergence: with noisy data the iteration count is the regularization
# parameter, and more iterations eventually hurt
x = np.zeros(op.cols)
checkpoints, errors = [], []
truth = phantom.reshape(-1)
for block in range(1, 41):
    x = landweber(op, y_noisy, x, 50, tau)
    checkpoints.append(block * 50)
    errors.append(np.linalg.norm(x - truth) / np.linalg.norm(truth))
best = int(np.argmin(errors))
print(f"best stopping index ~{checkpoints[best]} steps, rel error {errors[best]:.4f}")
print(f"error at {checkpoints[-1]} steps: {errors[-1]:.4f} (creeping back up)")

# Tikhonov: the penalty weight plays the same role
print("\nalpha        psnr")
for alpha in (1e2, 1e0, 1e-2, 1e-4):
    x_tik = tikhonov_solve(op, y_noisy, alpha)
    print(f"{alpha:8.0e}  {psnr(x_tik.reshape(64, 64), phantom):8.2f} dB")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(checkpoints, errors)
    ax.axvline(checkpoints[best], color="red", linestyle=":", label="best stop")
    ax.set_xlabel("Landweber steps")
    ax.set_ylabel("relative error")
    ax.set_title("semi-convergence on noisy data")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "semi_convergence.png"), dpi=120)
    print(f"\nwrote semi_convergence.png to {out_dir}")
except ImportError:
    pass
