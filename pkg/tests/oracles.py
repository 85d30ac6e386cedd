"""Independent reference implementations used only by the tests.

They are written from the definitions with explicit loops and complex
arithmetic, sharing no code with the library beyond reading parameters.
"""

import numpy as np


def rope_complex(x, pos, base=10000.0):
    """Rotate pairs (2i, 2i+1) as complex numbers times exp(i * pos * theta_i)."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    theta = np.array([base ** (-2.0 * i / d) for i in range(d // 2)])
    z = x[..., 0::2] + 1j * x[..., 1::2]
    z = z * np.exp(1j * pos * theta)
    out = np.empty_like(x)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def _rms(x):
    return x / np.sqrt(np.mean(x * x) + 1e-6)


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


def naive_forward(params, embeddings, positions, visibility):
    """Full-sequence forward with per-token, per-head loops."""
    cfg = params.config
    H, hd = cfg.n_heads, cfg.d_model // cfg.n_heads
    base = params.rotation.base
    x = [np.array(e, dtype=np.float64) for e in embeddings]
    n = len(x)
    for layer in params.layers:
        hs = [_rms(xi) for xi in x]
        q = [h @ layer.wq for h in hs]
        k = [h @ layer.wk for h in hs]
        v = [h @ layer.wv for h in hs]
        new_x = []
        for i in range(n):
            heads = []
            for hh in range(H):
                sl = slice(hh * hd, (hh + 1) * hd)
                qi = rope_complex(q[i][sl], positions[i], base)
                scores = {}
                for j in range(n):
                    if visibility[i][j]:
                        kj = rope_complex(k[j][sl], positions[j], base)
                        scores[j] = float(qi @ kj) / np.sqrt(hd)
                m = max(scores.values())
                z = sum(np.exp(s - m) for s in scores.values())
                out = sum(np.exp(s - m) / z * v[j][sl] for j, s in scores.items())
                heads.append(out)
            xi = x[i] + np.concatenate(heads) @ layer.wo
            xi = xi + _gelu(_rms(xi) @ layer.w_up) @ layer.w_down
            new_x.append(xi)
        x = new_x
    return np.stack([_rms(xi) @ params.w_out for xi in x])


def streaming_visibility(n_visual, n_reasoning, widths):
    """Mask by definition: visual rows causal over visual keys; reasoning row t
    sees visual keys j < widths[t] and reasoning keys up to itself."""
    n = n_visual + n_reasoning
    vis = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i < n_visual:
                vis[i][j] = j < n_visual and j <= i
            else:
                t = i - n_visual
                if j < n_visual:
                    vis[i][j] = j < widths[t]
                else:
                    vis[i][j] = j - n_visual <= t
    return np.array(vis, dtype=bool)


def _cos(a, b):
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (sum(x * x for x in a) ** 0.5 * sum(y * y for y in b) ** 0.5)


def resample_oracle(timestamps, anchors, delta, epsilon, max_duration):
    """Brute force: per grid point, the nearest reaching anchor (earliest frame
    on ties), else the nearest frame (earliest on ties).

    ``anchors`` are ``(keyframe, frame, timestamp)`` triples. Returns
    ``[(grid_time, frame, is_anchor, keyframes)]``.
    """
    out = []
    k = 0
    while k * delta <= timestamps[-1] + 1e-12 and k * delta < max_duration:
        g = k * delta
        reach = [(abs(g - t), f, kf) for kf, f, t in anchors if abs(g - t) <= epsilon]
        if reach:
            best = min((d, f) for d, f, _ in reach)
            out.append((g, best[1], True, sorted(kf for _, _, kf in reach)))
        else:
            best = min(range(len(timestamps)), key=lambda j: (abs(timestamps[j] - g), j))
            out.append((g, best, False, []))
        k += 1
    return out


def filter_oracle(q, captions, tau_q, tau_adj):
    """Relevance screen, time sort, drop a caption too similar to the last kept.

    ``captions`` are ``(vector, time)`` pairs; returns kept indices.
    """
    order = sorted(range(len(captions)), key=lambda i: (captions[i][1], i))
    kept = []
    for i in order:
        if _cos(q, captions[i][0]) < tau_q:
            continue
        if kept and _cos(captions[kept[-1]][0], captions[i][0]) >= tau_adj:
            continue
        kept.append(i)
    return kept


def judge_oracle(s_ref, s_opt, s_neg, tau):
    return s_ref >= tau and s_opt >= tau and s_opt > s_neg
