"""Independent oracles used by the test suite.

Everything here recomputes expected values through a different route than
the library (Jacobi rotations instead of LAPACK, numerical quadrature
instead of antiderivatives, plain double loops instead of vectorized
windows) so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np


def jacobi_eigh(a, max_sweeps: int = 100, tol: float = 1e-14):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted by eigenvalue descending.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(-np.diag(a), kind="stable")
    return np.diag(a)[order], v[:, order]


def quadrature_metric(flow, nodes: int = 10_000) -> np.ndarray:
    """Trapezoid integration of Pi(nu) @ Pi(nu).T over nu in [0, 1]."""
    nus = np.linspace(0.0, 1.0, nodes + 1)
    weights = np.full(nodes + 1, 1.0 / nodes)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    gammas = np.cos(np.outer(nus, flow.angles))
    sigmas = np.sin(np.outer(nus, flow.angles))
    # paths[m] = left * gammas[m] - right * sigmas[m], shape (M, D, k)
    paths = flow._left[None, :, :] * gammas[:, None, :] - flow._right[None, :, :] * sigmas[:, None, :]
    return np.einsum("m,mik,mjk->ij", weights, paths, paths)


def random_subspace(d: int, k: int, rng: np.random.Generator):
    """Random k-dimensional subspace of R^d via QR of a Gaussian matrix."""
    from geoguide.linalg import SubspaceBasis

    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return SubspaceBasis(q)


def planted_angle_pair(d: int, angles, rng: np.random.Generator):
    """Two subspaces of R^d whose principal angles are exactly ``angles``."""
    from geoguide.linalg import SubspaceBasis

    angles = np.sort(np.asarray(angles, dtype=np.float64))
    k = angles.shape[0]
    if 2 * k > d:
        raise ValueError("need d >= 2k to plant angles")
    q, _ = np.linalg.qr(rng.standard_normal((d, 2 * k)))
    p_t = q[:, :k]
    p_next = q[:, :k] * np.cos(angles) + q[:, k : 2 * k] * np.sin(angles)
    return SubspaceBasis(p_t), SubspaceBasis(p_next), angles


def ssim_naive(a: np.ndarray, b: np.ndarray, window: int = 8) -> float:
    """Reference sliding-window SSIM: explicit loops, population statistics."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    h, w, c = a.shape
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    vals = []
    for ch in range(c):
        for i in range(h - window + 1):
            for j in range(w - window + 1):
                wa = a[i : i + window, j : j + window, ch].ravel()
                wb = b[i : i + window, j : j + window, ch].ravel()
                mu_a = wa.mean()
                mu_b = wb.mean()
                va = ((wa - mu_a) ** 2).mean()
                vb = ((wb - mu_b) ** 2).mean()
                cov = ((wa - mu_a) * (wb - mu_b)).mean()
                vals.append(
                    ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                    / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
                )
    return float(np.mean(vals))


def central_difference(fn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Per-coordinate central finite differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        e = np.zeros_like(xf)
        e[i] = step
        f_plus = fn((xf + e).reshape(x.shape))
        f_minus = fn((xf - e).reshape(x.shape))
        flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def projector(basis) -> np.ndarray:
    b = basis.basis if hasattr(basis, "basis") else np.asarray(basis)
    return b @ b.T
