from typing import Optional, Sequence, Tuple

import numpy as np

from models.learners import TreeArrays

GAIN_EPS = 1e-12


def _gini_gains(y_sorted: np.ndarray) -> np.ndarray:
    """Weighted Gini decrease for every cut between consecutive sorted rows."""
    n = len(y_sorted)
    pos_left = np.cumsum(y_sorted)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    pos_total = pos_left[-1] + y_sorted[-1]
    pos_right = pos_total - pos_left
    parent = 2.0 * pos_total * (n - pos_total) / n
    children = 2.0 * pos_left * (n_left - pos_left) / n_left + 2.0 * pos_right * (n_right - pos_right) / n_right
    return parent - children


def _newton_gains(g_sorted: np.ndarray, h_sorted: np.ndarray, l2: float) -> np.ndarray:
    """Second-order logistic gain G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2)."""
    g_left = np.cumsum(g_sorted)[:-1]
    h_left = np.cumsum(h_sorted)[:-1]
    g_total, h_total = g_sorted.sum(), h_sorted.sum()
    g_right, h_right = g_total - g_left, h_total - h_left
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = g_left ** 2 / (h_left + l2) + g_right ** 2 / (h_right + l2) - g_total ** 2 / (h_total + l2)
    return np.where(np.isfinite(gains), gains, -np.inf)


def best_split(
    X: np.ndarray,
    rows: np.ndarray,
    features: Sequence[int],
    min_samples_leaf: int,
    y: Optional[np.ndarray] = None,
    grad: Optional[np.ndarray] = None,
    hess: Optional[np.ndarray] = None,
    l2: float = 0.0,
) -> Tuple[int, float, float]:
    """Exact scan over midpoints of consecutive distinct values.

    Gini when y is given, Newton gain when grad/hess are given. Ties in gain go
    to the lowest feature index, then the lowest threshold. Returns
    (feature, threshold, gain); feature is -1 when no admissible split improves.
    """
    n = len(rows)
    best = (-1, 0.0, GAIN_EPS)
    if n < 2 * min_samples_leaf:
        return best

    n_left = np.arange(1, n)
    size_ok = (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
    for f in sorted(features):
        values = X[rows, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        admissible = size_ok & (v[1:] > v[:-1])
        if not np.any(admissible):
            continue
        if y is not None:
            gains = _gini_gains(y[rows][order].astype(np.float64))
        else:
            gains = _newton_gains(grad[rows][order], hess[rows][order], l2)
        gains = np.where(admissible, gains, -np.inf)
        i = int(np.argmax(gains))
        if gains[i] > best[2]:
            threshold = 0.5 * (v[i] + v[i + 1])
            if threshold <= v[i]:
                threshold = v[i + 1]
            best = (int(f), float(threshold), float(gains[i]))
    return best


def build_tree(
    X: np.ndarray,
    rows: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    rng: np.random.Generator,
    y: Optional[np.ndarray] = None,
    grad: Optional[np.ndarray] = None,
    hess: Optional[np.ndarray] = None,
    l2: float = 0.0,
    features: Optional[Sequence[int]] = None,
    mtry: Optional[int] = None,
) -> TreeArrays:
    """Grow one CART tree depth-first over `rows` (repeats allowed for bootstrap samples).

    Classification trees (y given) store the class-1 fraction in leaves; Newton
    trees (grad/hess given) store -sum(grad) / (sum(hess) + l2). `features`
    restricts the columns for the whole tree, `mtry` draws that many of them
    afresh at every split.
    """
    if (y is None) == (grad is None):
        raise ValueError("Pass either y (Gini) or grad/hess (Newton)")
    allowed = np.arange(X.shape[1]) if features is None else np.sort(np.asarray(features))

    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(node_rows):
        if y is not None:
            return float(np.mean(y[node_rows]))
        return float(-grad[node_rows].sum() / (hess[node_rows].sum() + l2))

    def new_node(node_rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(node_rows))
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if depth >= max_depth:
            continue
        if y is not None and np.all(y[node_rows] == y[node_rows][0]):
            continue
        candidates = allowed
        if mtry is not None and mtry < len(allowed):
            candidates = np.sort(rng.choice(allowed, size=mtry, replace=False))
        f, t, _ = best_split(X, node_rows, candidates, min_samples_leaf, y=y, grad=grad, hess=hess, l2=l2)
        if f < 0:
            continue
        go_left = X[node_rows, f] < t
        left_rows, right_rows = node_rows[go_left], node_rows[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return TreeArrays(feature=np.array(feature, dtype=np.int64), threshold=threshold,
                      left=np.array(left, dtype=np.int64), right=np.array(right, dtype=np.int64), value=value)
