"""Brute-force reference values for the unit tests.

Everything here is computed by dense grids, finite differences or a plain
projected-gradient loop written directly in numpy; none of it calls the
package's prox, projection or solver code. Run from the repository root:

    python3 tests/oracles/make_oracles.py

and commit the regenerated ``frozen.json``.
"""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

OUT = Path(__file__).with_name("frozen.json")


def grid_min_1d(f, lo, hi, n=2_000_001):
    w = np.linspace(lo, hi, n)
    v = f(w)
    i = int(np.argmin(v))
    return float(w[i]), float(v[i])


def grid_min_2d(f, center, half, n=401, rounds=8):
    # coarse-to-fine dense grid; the objectives here are strongly convex
    c = np.asarray(center, dtype=float)
    for _ in range(rounds):
        a = np.linspace(c[0] - half, c[0] + half, n)
        b = np.linspace(c[1] - half, c[1] + half, n)
        A, B = np.meshgrid(a, b, indexing="ij")
        V = f(A, B)
        i, j = np.unravel_index(np.argmin(V), V.shape)
        c = np.array([A[i, j], B[i, j]])
        best = float(V[i, j])
        half *= 10.0 / n
    return c, best


def env_abs(z):
    return grid_min_1d(lambda w: np.abs(w) + (w - z) ** 2 / 2.0, -10, 10)[1]


def env_max2(z):
    f = lambda a, b: np.maximum(a, b) + ((a - z[0]) ** 2 + (b - z[1]) ** 2) / 2.0  # noqa: E731
    return grid_min_2d(f, z, 4.0)[1]


def main():
    out = {}
    # Moreau envelope of |.| with mu = 1
    out["moreau_abs"] = {str(z): env_abs(z) for z in (0.0, 0.5, 2.0)}
    h = 1e-3
    out["moreau_abs_grad_at_2"] = (env_abs(2 + h) - env_abs(2 - h)) / (2 * h)
    g = [(env_max2(np.array([h, 0.0])) - env_max2(np.array([-h, 0.0]))) / (2 * h),
         (env_max2(np.array([0.0, h])) - env_max2(np.array([0.0, -h]))) / (2 * h)]
    out["moreau_max_grad_at_00"] = g

    # prox of lam|.| with mu = 0.5: minimize |w| + (w - z)^2 / (2 * 0.5)
    out["prox_l1_half"] = {
        str(z): grid_min_1d(lambda w: np.abs(w) + (w - z) ** 2, -10, 10)[0] for z in (2.0, 0.3)
    }
    # prox of max with mu = 1
    pm = {}
    for z in ((0.0, 0.0), (10.0, 0.0)):
        f = lambda a, b, z=z: np.maximum(a, b) + ((a - z[0]) ** 2 + (b - z[1]) ** 2) / 2.0  # noqa: E731
        pm[str(list(z))] = grid_min_2d(f, z, 6.0)[0].tolist()
    out["prox_max_mu1"] = pm

    # simplex projection of (2, 0): walk the segment p = (t, 1 - t)
    t = np.linspace(0, 1, 1_000_001)
    d = (t - 2.0) ** 2 + (1 - t) ** 2
    out["simplex_2_0"] = [float(t[np.argmin(d)]), float(1 - t[np.argmin(d)])]

    # nearest point of V ∩ B(0,1), V = span{(1,0)}, to z = (2, 5)
    s = np.linspace(-1, 1, 2_000_001)
    out["ball_subspace_rank1"] = [float(s[np.argmin((s - 2) ** 2 + 25)]), 0.0]

    # polygon projections: dense sample of the hull (interior grid + boundary)
    def hull_points(M, n=1201):
        verts = np.stack([np.cos(2 * np.pi * np.arange(M) / M), np.sin(2 * np.pi * np.arange(M) / M)], 1)
        if M == 2:
            x = np.linspace(-1, 1, 200_001)
            return np.stack([x, np.zeros_like(x)], 1)
        g1 = np.linspace(-1, 1, n)
        P = np.stack(np.meshgrid(g1, g1), -1).reshape(-1, 2)
        # keep points inside every edge half-plane
        keep = np.ones(len(P), bool)
        for k in range(M):
            a, b = verts[k], verts[(k + 1) % M]
            nrm = np.array([b[1] - a[1], a[0] - b[0]])
            keep &= (P - a) @ nrm <= 1e-12
        edge = [a + np.linspace(0, 1, 20001)[:, None] * (verts[(k + 1) % M] - a) for k, a in enumerate(verts)]
        return np.vstack([P[keep]] + edge)

    poly = {}
    for M, z in ((4, (2.0, 0.0)), (2, (0.0, 5.0)), (8, (1.5, 0.4))):
        H = hull_points(M)
        poly[f"{M}:{list(z)}"] = H[np.argmin(((H - np.array(z)) ** 2).sum(1))].tolist()
    out["polygon"] = poly

    # backtracking for h = 4 x^2 (L = 8) at x = 1 in exact rational arithmetic:
    # largest 2^-l with h(x - g h'(x)) <= h(x) - c g h'(x)^2
    def largest_step(c):
        gam = Fraction(1)
        while 4 * (1 - 8 * gam) ** 2 > 4 - c * gam * 64:
            gam /= 2
        return float(gam)

    out["backtrack_L8"] = {"c=0": largest_step(Fraction(0)), "c=2^-13": largest_step(Fraction(1, 2**13))}

    # triangle dispersion instance on the unit disk: grid best
    out["triangle"] = disk_grid_best(np.array([[2.0, 0.0], [-1.0, np.sqrt(3)], [-1.0, -np.sqrt(3)]]))

    # SOAV toy, M = 4, lam = 0, U = 2: projected gradient onto the diamond |a| + |b| <= 1
    rng = np.random.default_rng(20240601)
    Hc = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / 2.0
    yc = Hc @ np.array([1.0, 1j]) + 0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    Hr = np.block([[Hc.real, -Hc.imag], [Hc.imag, Hc.real]])
    yr = np.concatenate([yc.real, yc.imag])
    s_ref = projected_gradient_diamond(Hr, yr)
    out["soav_toy"] = {"H": Hr.tolist(), "y": yr.tolist(), "s": s_ref.tolist(),
                       "cost": float(0.5 * np.sum((Hr @ s_ref - yr) ** 2))}
    OUT.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


def disk_grid_best(points, n=400):
    g = np.linspace(-1, 1, n)
    P = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    P = P[(P**2).sum(1) <= 1.0]
    d2 = ((P[:, None, :] - points[None]) ** 2).sum(-1)
    return float(np.max(-d2, axis=1).min())


def l1_ball_2d(v):
    # projection onto {|a| + |b| <= 1} by sorting
    if np.abs(v).sum() <= 1:
        return v.copy()
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u) - 1
    k = np.nonzero(u - css / np.arange(1, 3) > 0)[0][-1]
    tau = css[k] / (k + 1)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0)


def projected_gradient_diamond(H, y, iters=200_000):
    U = H.shape[1] // 2
    L = np.linalg.norm(H, 2) ** 2
    s = np.zeros(2 * U)
    for _ in range(iters):
        s = s - H.T @ (H @ s - y) / L
        for u in range(U):
            a, b = l1_ball_2d(np.array([s[u], s[u + U]]))
            s[u], s[u + U] = a, b
    return s


if __name__ == "__main__":
    main()
