# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compositing kernels: tile-binned front-to-back alpha composition.

Bit-identical to the pure-Python reference path (same arithmetic order, same
libm exp); tiles only restrict which splats each pixel considers, the per-pixel
math is unchanged.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND_NAME = "cython"

DEF TILE = 16


def composite_forward(double[:, ::1] mu, double[:, ::1] conic, double[::1] depth,
                      double[::1] opacity, double[:, ::1] color, int[:, ::1] bbox,
                      int[::1] order, double[:, ::1] dmu, unsigned char[::1] dmu_valid,
                      double[::1] bg, int width, int height, double t_min, double cutoff):
    """See the pure-Python backend for the contract; this is its tiled twin."""
    cdef int n_splats = order.shape[0]
    cdef int tiles_x = (width + TILE - 1) // TILE
    cdef int tiles_y = (height + TILE - 1) // TILE
    cdef int n_tiles = tiles_x * tiles_y

    out_color_arr = np.empty((height, width, 3), dtype=np.float64)
    out_depth_arr = np.zeros((height, width), dtype=np.float64)
    out_accum_arr = np.zeros((height, width), dtype=np.float64)
    out_flow_arr = np.zeros((height, width, 2), dtype=np.float64)
    out_tfinal_arr = np.ones((height, width), dtype=np.float64)
    offsets_arr = np.zeros(height * width + 1, dtype=np.int64)
    cdef double[:, :, ::1] out_color = out_color_arr
    cdef double[:, ::1] out_depth = out_depth_arr
    cdef double[:, ::1] out_accum = out_accum_arr
    cdef double[:, :, ::1] out_flow = out_flow_arr
    cdef double[:, ::1] out_tfinal = out_tfinal_arr
    cdef long long[::1] offsets = offsets_arr

    # Tile binning: per-tile splat lists in global front-to-back rank order.
    cdef long long[::1] tile_off = np.zeros(n_tiles + 1, dtype=np.int64)
    cdef long long[::1] cursor = np.zeros(n_tiles, dtype=np.int64)
    cdef int k, m, tx, ty, tx0, tx1, ty0, ty1
    cdef long long total = 0
    for k in range(n_splats):
        m = order[k]
        tx0 = bbox[m, 0] // TILE
        tx1 = bbox[m, 1] // TILE
        ty0 = bbox[m, 2] // TILE
        ty1 = bbox[m, 3] // TILE
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                tile_off[ty * tiles_x + tx + 1] += 1
    for k in range(n_tiles):
        tile_off[k + 1] += tile_off[k]
    cdef int[::1] tile_items = np.empty(max(tile_off[n_tiles], 1), dtype=np.int32)
    for k in range(n_splats):
        m = order[k]
        tx0 = bbox[m, 0] // TILE
        tx1 = bbox[m, 1] // TILE
        ty0 = bbox[m, 2] // TILE
        ty1 = bbox[m, 3] // TILE
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                tile_items[tile_off[ty * tiles_x + tx] + cursor[ty * tiles_x + tx]] = m
                cursor[ty * tiles_x + tx] += 1

    # Contribution upper bound: every (splat, pixel-in-bbox) pair.
    for k in range(n_splats):
        m = order[k]
        total += <long long>(bbox[m, 1] - bbox[m, 0] + 1) * (bbox[m, 3] - bbox[m, 2] + 1)
    cidx_arr = np.empty(max(total, 1), dtype=np.int32)
    calpha_arr = np.empty(max(total, 1), dtype=np.float64)
    cweight_arr = np.empty(max(total, 1), dtype=np.float64)
    cdef int[::1] cidx = cidx_arr
    cdef double[::1] calpha = calpha_arr
    cdef double[::1] cweight = cweight_arr

    cdef long long n_rec = 0
    cdef int px, py, tid, j0, j1, j
    cdef double T, r, g, b, dsum, wsum, f0, f1, dx, dy, e, a, w, fx, fy

    for py in range(height):
        fy = <double>py
        ty = py // TILE
        for px in range(width):
            fx = <double>px
            tid = ty * tiles_x + px // TILE
            j0 = <int>tile_off[tid]
            j1 = <int>(tile_off[tid] + cursor[tid])
            T = 1.0
            r = 0.0
            g = 0.0
            b = 0.0
            dsum = 0.0
            wsum = 0.0
            f0 = 0.0
            f1 = 0.0
            for j in range(j0, j1):
                m = tile_items[j]
                if px < bbox[m, 0] or px > bbox[m, 1] or py < bbox[m, 2] or py > bbox[m, 3]:
                    continue
                dx = fx - mu[m, 0]
                dy = fy - mu[m, 1]
                e = -0.5 * (conic[m, 0] * dx * dx + 2.0 * conic[m, 1] * dx * dy
                            + conic[m, 2] * dy * dy)
                a = opacity[m] * exp(e)
                if a > 0.999:
                    a = 0.999
                w = a * T
                if w > cutoff:
                    cidx[n_rec] = m
                    calpha[n_rec] = a
                    cweight[n_rec] = w
                    n_rec += 1
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
            offsets[py * width + px + 1] = n_rec

    return {
        "color": out_color_arr,
        "depth": out_depth_arr,
        "accum": out_accum_arr,
        "flow": out_flow_arr,
        "tfinal": out_tfinal_arr,
        "offsets": offsets_arr,
        "cidx": cidx_arr[:n_rec].copy(),
        "calpha": calpha_arr[:n_rec].copy(),
        "cweight": cweight_arr[:n_rec].copy(),
    }


def composite_backward(double[:, ::1] mu, double[:, ::1] conic, double[::1] opacity,
                       double[:, ::1] color, double[:, ::1] dmu, unsigned char[::1] dmu_valid,
                       double[::1] bg, long long[::1] offsets, int[::1] cidx,
                       double[::1] calpha, double[:, :, ::1] grad_color,
                       double[:, :, ::1] grad_flow, int width, int height):
    cdef int n = mu.shape[0]
    gmu_arr = np.zeros((n, 2), dtype=np.float64)
    gconic_arr = np.zeros((n, 3), dtype=np.float64)
    gopa_arr = np.zeros(n, dtype=np.float64)
    gcol_arr = np.zeros((n, 3), dtype=np.float64)
    gdmu_arr = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] gmu = gmu_arr
    cdef double[:, ::1] gconic = gconic_arr
    cdef double[::1] gopa = gopa_arr
    cdef double[:, ::1] gcol = gcol_arr
    cdef double[:, ::1] gdmu = gdmu_arr

    cdef long long max_n = 1
    cdef long long p
    for p in range(height * width):
        if offsets[p + 1] - offsets[p] > max_n:
            max_n = offsets[p + 1] - offsets[p]
    cdef double[::1] tj = np.empty(max_n, dtype=np.float64)

    cdef int px, py, m
    cdef long long s, e, j
    cdef double fx, fy, gc0, gc1, gc2, gf0, gf1, T, a, t_here, w
    cdef double ct0, ct1, ct2, dm0, dm1, one_m_a, da, dx, dy, qa, qb, qc, ex, raw, ge
    cdef double sc0, sc1, sc2, sf0, sf1

    for py in range(height):
        fy = <double>py
        for px in range(width):
            fx = <double>px
            p = py * width + px
            s = offsets[p]
            e = offsets[p + 1]
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
                m = cidx[j]
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
                ex = exp(-0.5 * (qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy))
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

    return gmu_arr, gconic_arr, gopa_arr, gcol_arr, gdmu_arr
