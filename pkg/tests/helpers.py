"""Independent oracles shared by the test modules.

Nothing here calls into the code paths it is used to check.
"""

import math

import numpy as np

from fedsumm.models import Dataset, ModelSpec


def random_spec(rng, kind=None):
    kind = kind or rng.choice(["linear", "logistic", "mlp"])
    d = int(rng.integers(1, 5))
    if kind == "linear":
        return ModelSpec("linear", d, int(rng.integers(1, 4)))
    if kind == "logistic":
        return ModelSpec("logistic", d, int(rng.integers(2, 5)))
    loss = "cross-entropy" if rng.random() < 0.5 else "squared-error"
    out = int(rng.integers(2, 4)) if loss == "cross-entropy" else int(rng.integers(1, 3))
    return ModelSpec("mlp", d, out, int(rng.integers(1, 5)), loss)


def random_batch(rng, spec, n=None):
    n = n or int(rng.integers(1, 8))
    x = rng.standard_normal((n, spec.input_dim))
    if spec.is_classifier:
        y = rng.integers(spec.output_dim, size=n)
    else:
        y = rng.standard_normal((n, spec.output_dim))
    return Dataset(x, y, np.arange(n))


def loop_loss(spec, w, x, y):
    """Per-example forward pass written with plain Python loops."""
    w = [float(v) for v in w]
    i_dim, o_dim, h_dim = spec.input_dim, spec.output_dim, spec.hidden_dim
    total = 0.0
    for row, target in zip(x, y):
        row = [float(v) for v in row]
        if spec.kind == "mlp":
            pos = 0
            hidden = []
            for h in range(h_dim):
                s = sum(w[pos + h * i_dim + j] * row[j] for j in range(i_dim))
                hidden.append(s)
            pos += h_dim * i_dim
            hidden = [math.tanh(hidden[h] + w[pos + h]) for h in range(h_dim)]
            pos += h_dim
            out = []
            for o in range(o_dim):
                out.append(sum(w[pos + o * h_dim + h] * hidden[h] for h in range(h_dim)))
            pos += o_dim * h_dim
            out = [out[o] + w[pos + o] for o in range(o_dim)]
        else:
            out = [
                sum(w[o * i_dim + j] * row[j] for j in range(i_dim)) + w[o_dim * i_dim + o]
                for o in range(o_dim)
            ]
        if spec.is_classifier:
            m = max(out)
            lse = m + math.log(sum(math.exp(v - m) for v in out))
            total += lse - out[int(target)]
        else:
            t = np.ravel(target)
            total += sum((out[o] - float(t[o])) ** 2 for o in range(o_dim))
    return total / len(x)


def central_difference(f, w, step=1e-5):
    w = np.array(w, dtype=np.float64)
    grad = np.zeros_like(w)
    for k in range(w.size):
        up, down = w.copy(), w.copy()
        up[k] += step
        down[k] -= step
        grad[k] = (f(up) - f(down)) / (2 * step)
    return grad


def lstsq_params(dataset):
    """Least-squares (W, b) in the linear model's flat layout, via the normal equations."""
    x = np.hstack([dataset.features, np.ones((len(dataset), 1))])
    y = np.asarray(dataset.targets, dtype=np.float64).reshape(len(dataset), -1)
    beta = np.linalg.solve(x.T @ x, x.T @ y)
    return np.concatenate([beta[:-1].T.ravel(), beta[-1]])


def brute_ngram_overlap(cand, ref, n):
    """Clipped n-gram matches by repeatedly removing matched grams from a list."""
    cand_grams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
    ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
    pool = list(ref_grams)
    hits = 0
    for g in cand_grams:
        if g in pool:
            pool.remove(g)
            hits += 1
    return hits, len(cand_grams), len(ref_grams)


def table_lcs(a, b):
    """Full (len(a)+1) x (len(b)+1) dynamic programming table."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)
