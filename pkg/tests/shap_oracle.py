"""Exhaustive-coalition Shapley values for path-dependent tree expectations."""

import itertools
import math

import numpy as np


def cond_expectation(tree, value, x, S, node=0):
    """E[f | x_S]: follow x on features in S, otherwise cover-weight both children."""
    f = tree.feature[node]
    if f < 0:
        return value[node]
    l, r = tree.left[node], tree.right[node]
    if f in S:
        return cond_expectation(tree, value, x, S, l if x[f] <= tree.threshold[node] else r)
    cl, cr = tree.cover[l], tree.cover[r]
    return (cl * cond_expectation(tree, value, x, S, l) + cr * cond_expectation(tree, value, x, S, r)) / (cl + cr)


def brute_force_shap(tree, value, x):
    n = len(x)
    phi = np.zeros(n)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for size in range(n):
            w = math.factorial(size) * math.factorial(n - size - 1) / math.factorial(n)
            for S in itertools.combinations(others, size):
                S = set(S)
                phi[i] += w * (cond_expectation(tree, value, x, S | {i}) - cond_expectation(tree, value, x, S))
    return phi
