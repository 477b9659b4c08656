"""Independent reference implementations used only by the tests."""
import math

import numpy as np


def l1_logistic_fista(X, y, c, iters=200_000, tol=1e-13):
    """Proximal gradient (FISTA with restart) on ||w||_1 + c sum log(1 + exp(-y Xw))."""
    n, d = X.shape
    lip = c * np.linalg.norm(X, 2) ** 2 / 4.0
    step = 1.0 / lip
    w = np.zeros(d)
    z = w.copy()
    t = 1.0
    prev = objective(w, X, y, c)
    for _ in range(iters):
        m = y * (X @ z)
        grad = -c * X.T @ (y * _sigmoid(-m))
        u = z - step * grad
        w_new = np.sign(u) * np.maximum(np.abs(u) - step, 0.0)
        obj = objective(w_new, X, y, c)
        if obj > prev:
            # adaptive restart keeps the sequence monotone
            z, t = w.copy(), 1.0
            continue
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        z = w_new + ((t - 1) / t_new) * (w_new - w)
        if abs(prev - obj) <= tol * max(1.0, abs(obj)):
            w = w_new
            break
        w, t, prev = w_new, t_new, obj
    return w


def _sigmoid(a):
    return 0.5 * (1 + np.tanh(a / 2))


def objective(w, X, y, c):
    return float(np.abs(w).sum() + c * np.logaddexp(0, -y * (X @ w)).sum())


def direct_dft(x, n=512):
    xp = np.zeros(n)
    xp[: len(x)] = x
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ xp


def anova_by_hand(groups):
    allv = np.concatenate(groups)
    grand = allv.mean()
    ssb = sum(len(g) * (np.mean(g) - grand) ** 2 for g in groups)
    ssw = sum(((np.asarray(g) - np.mean(g)) ** 2).sum() for g in groups)
    k, n = len(groups), len(allv)
    return (ssb / (k - 1)) / (ssw / (n - k))
