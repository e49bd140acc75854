"""Recompute the hard-coded smoothness constants in twolayer_opt.activations.

For each built-in activation h this maximizes, over a dense grid on
[-50, 50] (resp. [-50, 50]^2):

  * L_dh  = max |h''(x)|           (Lipschitz constant of h')
  * L_hdh = max ||grad H(x1, x2)|| for H(x1, x2) = h(x1) h'(x2),
            i.e. max sqrt((h'(x1) h'(x2))^2 + (h(x1) h''(x2))^2)

The grids are augmented with points next to the origin because the elliot
family attains its |h''| supremum only in the limit x -> 0.  The values
stored in the activation table are these maxima times a 5% safety margin
(grid maxima can sit slightly below the true suprema).

Run:  python scripts/derive_activation_bounds.py
"""

import numpy as np

from twolayer_opt.activations import ACTIVATION_NAMES, builtin_activation

DOMAIN = 50.0
N_1D = 2_000_001
N_2D = 4001
MARGIN = 1.05
NEAR_ZERO = np.array([-1e-2, -1e-4, -1e-6, -1e-9, 1e-9, 1e-6, 1e-4, 1e-2])


def grid(n):
    return np.sort(np.concatenate([np.linspace(-DOMAIN, DOMAIN, n), NEAR_ZERO]))


def max_abs_deriv2(act):
    return float(np.max(np.abs(act.deriv2(grid(N_1D)))))


def max_grad_h(act):
    x = grid(N_2D)
    h, dh, d2h = act.eval(x), act.deriv(x), act.deriv2(x)
    best = 0.0
    # chunk over x1 to keep the broadcast below ~100 MB
    for lo in range(0, len(x), 512):
        g2 = ((dh[lo:lo + 512, None] * dh[None, :]) ** 2
              + (h[lo:lo + 512, None] * d2h[None, :]) ** 2)
        best = max(best, float(np.max(g2)))
    return float(np.sqrt(best))


def main():
    print(f"{'name':<20} {'max|h2|':>16} {'L_dh (x1.05)':>16} "
          f"{'max|gradH|':>16} {'L_hdh (x1.05)':>16}")
    for name in ACTIVATION_NAMES:
        act = builtin_activation(name)
        if name == "relu":
            print(f"{name:<20} {'n/a (h1 jumps at 0)':>16}")
            continue
        m2 = max_abs_deriv2(act)
        mg = max_grad_h(act)
        print(f"{name:<20} {m2:16.10f} {m2 * MARGIN:16.10f} "
              f"{mg:16.10f} {mg * MARGIN:16.10f}")


if __name__ == "__main__":
    main()
