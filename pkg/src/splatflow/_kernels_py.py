"""Pure-Python compositing kernels: the naive per-pixel reference path.

Bit-identical to the compiled extension (same scalar arithmetic, same libm exp),
hundreds of times slower. Selected automatically when the extension is missing;
kept as the oracle the tiled implementation is checked against.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


def composite_forward(mu, conic, depth, opacity, color, bbox, order, dmu, dmu_valid,
                      bg, width, height, t_min, cutoff):
    """Front-to-back alpha composition over sorted splats.

    Per pixel: alpha = opacity * exp(-0.5 d^T conic d) clamped to 0.999, weight
    w = alpha * T, T' = T (1 - alpha); stops once T < t_min. Records (splat,
    alpha, w) for w > cutoff. Returns color/depth/accum/flow images, final
    transmittance, and the contribution lists as a CSR triple.
    """
    n_splats = len(order)
    out_color = np.empty((height, width, 3), dtype=np.float64)
    out_depth = np.zeros((height, width), dtype=np.float64)
    out_accum = np.zeros((height, width), dtype=np.float64)
    out_flow = np.zeros((height, width, 2), dtype=np.float64)
    out_tfinal = np.ones((height, width), dtype=np.float64)
    offsets = np.zeros(height * width + 1, dtype=np.int64)
    cidx: list[int] = []
    calpha: list[float] = []
    cweight: list[float] = []

    for py in range(height):
        fy = float(py)
        for px in range(width):
            fx = float(px)
            T = 1.0
            r = 0.0
            g = 0.0
            b = 0.0
            dsum = 0.0
            wsum = 0.0
            f0 = 0.0
            f1 = 0.0
            for k in range(n_splats):
                m = order[k]
                if px < bbox[m, 0] or px > bbox[m, 1] or py < bbox[m, 2] or py > bbox[m, 3]:
                    continue
                dx = fx - mu[m, 0]
                dy = fy - mu[m, 1]
                e = -0.5 * (conic[m, 0] * dx * dx + 2.0 * conic[m, 1] * dx * dy
                            + conic[m, 2] * dy * dy)
                a = opacity[m] * math.exp(e)
                if a > 0.999:
                    a = 0.999
                w = a * T
                if w > cutoff:
                    cidx.append(m)
                    calpha.append(a)
                    cweight.append(w)
                r += w * color[m, 0]
                g += w * color[m, 1]
                b += w * color[m, 2]
                dsum += w * depth[m]
                wsum += w
                if dmu_valid[m]:
                    f0 += w * dmu[m, 0]
                    f1 += w * dmu[m, 1]
                T *= 1.0 - a
                if T < t_min:
                    break
            out_color[py, px, 0] = r + bg[0] * (1.0 - wsum)
            out_color[py, px, 1] = g + bg[1] * (1.0 - wsum)
            out_color[py, px, 2] = b + bg[2] * (1.0 - wsum)
            out_accum[py, px] = wsum
            out_depth[py, px] = dsum / wsum if wsum > 1e-6 else 0.0
            out_flow[py, px, 0] = f0
            out_flow[py, px, 1] = f1
            out_tfinal[py, px] = T
            offsets[py * width + px + 1] = len(cidx)

    return {
        "color": out_color,
        "depth": out_depth,
        "accum": out_accum,
        "flow": out_flow,
        "tfinal": out_tfinal,
        "offsets": offsets,
        "cidx": np.asarray(cidx, dtype=np.int32),
        "calpha": np.asarray(calpha, dtype=np.float64),
        "cweight": np.asarray(cweight, dtype=np.float64),
    }


def composite_backward(mu, conic, opacity, color, dmu, dmu_valid, bg,
                       offsets, cidx, calpha, grad_color, grad_flow, width, height):
    """Adjoint of composite_forward for the color and flow channels.

    Requires contribution lists recorded with cutoff 0. Returns per-splat
    gradients for the 2D mean (alpha path), conic, effective opacity, color,
    and the flow displacement.
    """
    n = len(mu)
    gmu = np.zeros((n, 2), dtype=np.float64)
    gconic = np.zeros((n, 3), dtype=np.float64)
    gopa = np.zeros(n, dtype=np.float64)
    gcol = np.zeros((n, 3), dtype=np.float64)
    gdmu = np.zeros((n, 2), dtype=np.float64)
    tj = np.empty(int(np.max(offsets[1:] - offsets[:-1], initial=1)), dtype=np.float64)

    for py in range(height):
        fy = float(py)
        for px in range(width):
            fx = float(px)
            p = py * width + px
            s = int(offsets[p])
            e = int(offsets[p + 1])
            if e == s:
                continue
            gc0 = grad_color[py, px, 0]
            gc1 = grad_color[py, px, 1]
            gc2 = grad_color[py, px, 2]
            gf0 = grad_flow[py, px, 0]
            gf1 = grad_flow[py, px, 1]
            T = 1.0
            for j in range(s, e):
                tj[j - s] = T
                T *= 1.0 - calpha[j]
            sc0 = 0.0
            sc1 = 0.0
            sc2 = 0.0
            sf0 = 0.0
            sf1 = 0.0
            for j in range(e - 1, s - 1, -1):
                m = int(cidx[j])
                a = calpha[j]
                t_here = tj[j - s]
                w = a * t_here
                ct0 = color[m, 0] - bg[0]
                ct1 = color[m, 1] - bg[1]
                ct2 = color[m, 2] - bg[2]
                gcol[m, 0] += w * gc0
                gcol[m, 1] += w * gc1
                gcol[m, 2] += w * gc2
                if dmu_valid[m]:
                    dm0 = dmu[m, 0]
                    dm1 = dmu[m, 1]
                    gdmu[m, 0] += w * gf0
                    gdmu[m, 1] += w * gf1
                else:
                    dm0 = 0.0
                    dm1 = 0.0
                one_m_a = 1.0 - a
                da = (gc0 * (t_here * ct0 - sc0 / one_m_a)
                      + gc1 * (t_here * ct1 - sc1 / one_m_a)
                      + gc2 * (t_here * ct2 - sc2 / one_m_a)
                      + gf0 * (t_here * dm0 - sf0 / one_m_a)
                      + gf1 * (t_here * dm1 - sf1 / one_m_a))
                dx = fx - mu[m, 0]
                dy = fy - mu[m, 1]
                qa = conic[m, 0]
                qb = conic[m, 1]
                qc = conic[m, 2]
                ex = math.exp(-0.5 * (qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy))
                raw = opacity[m] * ex
                if raw < 0.999:
                    gopa[m] += da * ex
                    ge = da * raw
                    gmu[m, 0] += ge * (qa * dx + qb * dy)
                    gmu[m, 1] += ge * (qb * dx + qc * dy)
                    gconic[m, 0] += ge * (-0.5 * dx * dx)
                    gconic[m, 1] += ge * (-dx * dy)
                    gconic[m, 2] += ge * (-0.5 * dy * dy)
                sc0 += w * ct0
                sc1 += w * ct1
                sc2 += w * ct2
                sf0 += w * dm0
                sf1 += w * dm1

    return gmu, gconic, gopa, gcol, gdmu
