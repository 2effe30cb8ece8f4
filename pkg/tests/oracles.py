"""Slow reference implementations used as test oracles."""
import numpy as np


def ssim_loop(a, b, data_range, mask=None, size=11, sigma=1.5):
    """Per-cell SSIM written out window by window, then averaged."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    nx, ny, nc = a.shape
    m = np.ones((nx, ny), bool) if mask is None else np.asarray(mask, bool)
    r = size // 2
    x = np.arange(size) - r
    g = np.exp(-x * x / (2 * sigma * sigma))
    g /= g.sum()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    scores = []
    for c in range(nc):
        vals = []
        for i in range(nx):
            for j in range(ny):
                if not m[i, j]:
                    continue
                i0, i1 = max(i - r, 0), min(i + r + 1, nx)
                j0, j1 = max(j - r, 0), min(j + r + 1, ny)
                w = np.outer(g[i0 - i + r:i1 - i + r], g[j0 - j + r:j1 - j + r]) * m[i0:i1, j0:j1]
                w = w / w.sum()
                pa, pb = a[i0:i1, j0:j1, c], b[i0:i1, j0:j1, c]
                mx, my = (w * pa).sum(), (w * pb).sum()
                vx = (w * (pa - mx) ** 2).sum()
                vy = (w * (pb - my) ** 2).sum()
                cxy = (w * (pa - mx) * (pb - my)).sum()
                vals.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
        scores.append(np.mean(vals))
    return float(np.mean(scores))
