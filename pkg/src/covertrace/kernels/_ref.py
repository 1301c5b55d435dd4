"""Pure-numpy reference kernels.

Same contracts as the compiled core in ``_core.pyx``; used as the fallback
backend and as the ground truth the compiled kernels are tested against.

Grid convention: ``values`` has shape (Nx, Ny, Nz, C) with voxel centers at
``lo + (i + 0.5) * h``.  Points outside the box ``[lo, lo + N*h]`` produce
zeros (and zero gradients); points in the half-voxel shell between the box
edge and the outermost centers clamp to the edge value.
"""

import numpy as np

BACKEND = "numpy"


def _locate(values, points, lo, h):
    nx, ny, nz, _ = values.shape
    dims = np.array([nx, ny, nz])
    u = (points - lo) / h - 0.5
    inside = np.all((points >= lo) & (points <= lo + dims * h), axis=1)
    i0 = np.floor(u).astype(np.int64)
    np.clip(i0, 0, dims - 2, out=i0)
    f = u - i0
    active = (f > 0.0) & (f < 1.0)  # position grads vanish where f clamps
    np.clip(f, 0.0, 1.0, out=f)
    return u, inside, i0, f, active


def trilinear_forward(values, points, lo, h):
    m = points.shape[0]
    c = values.shape[3]
    out = np.zeros((m, c))
    _, inside, i0, f, _ = _locate(values, points, lo, h)
    nx, ny, nz, _ = values.shape
    flat = values.reshape(-1, c)
    for dx in (0, 1):
        wx = f[:, 0] if dx else 1.0 - f[:, 0]
        for dy in (0, 1):
            wy = f[:, 1] if dy else 1.0 - f[:, 1]
            for dz in (0, 1):
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                idx = ((i0[:, 0] + dx) * ny + (i0[:, 1] + dy)) * nz + (i0[:, 2] + dz)
                w = (wx * wy * wz) * inside
                out += w[:, None] * flat[idx]
    return out


def trilinear_backward(values, points, lo, h, gout):
    m = points.shape[0]
    c = values.shape[3]
    nx, ny, nz, _ = values.shape
    _, inside, i0, f, active = _locate(values, points, lo, h)
    flat = values.reshape(-1, c)
    gvalues_flat = np.zeros_like(flat)
    gpoints = np.zeros((m, 3))
    gdotv = np.empty(m)
    for dx in (0, 1):
        wx = f[:, 0] if dx else 1.0 - f[:, 0]
        sx = 1.0 if dx else -1.0
        for dy in (0, 1):
            wy = f[:, 1] if dy else 1.0 - f[:, 1]
            sy = 1.0 if dy else -1.0
            for dz in (0, 1):
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                sz = 1.0 if dz else -1.0
                idx = ((i0[:, 0] + dx) * ny + (i0[:, 1] + dy)) * nz + (i0[:, 2] + dz)
                w = (wx * wy * wz) * inside
                np.add.at(gvalues_flat, idx, (w[:, None] * gout))
                np.einsum("ij,ij->i", gout, flat[idx], out=gdotv)
                gdotv *= inside
                gpoints[:, 0] += sx * wy * wz * active[:, 0] / h[0] * gdotv
                gpoints[:, 1] += sy * wx * wz * active[:, 1] / h[1] * gdotv
                gpoints[:, 2] += sz * wx * wy * active[:, 2] / h[2] * gdotv
    return gvalues_flat.reshape(values.shape), gpoints


def composite_forward(sigma, delta, color):
    a = sigma * delta
    ae = np.exp(-a)
    t = np.cumprod(ae, axis=1)
    t = np.concatenate([np.ones((sigma.shape[0], 1)), t[:, :-1]], axis=1)
    w = t * (1.0 - ae)
    return np.einsum("rn,rnc->rc", w, color)


def composite_backward(sigma, delta, color, gout):
    a = sigma * delta
    ae = np.exp(-a)
    t = np.cumprod(ae, axis=1)
    t = np.concatenate([np.ones((sigma.shape[0], 1)), t[:, :-1]], axis=1)
    w = t * (1.0 - ae)
    cg = np.einsum("rnc,rc->rn", color, gout)
    wc = w * cg
    # suffix sums over later samples: effect of a_k on downstream transmittance
    suffix = np.flip(np.cumsum(np.flip(wc, axis=1), axis=1), axis=1) - wc
    ga = t * ae * cg - suffix
    gsigma = ga * delta
    gdelta = ga * sigma
    gcolor = w[:, :, None] * gout[:, None, :]
    return gsigma, gdelta, gcolor
