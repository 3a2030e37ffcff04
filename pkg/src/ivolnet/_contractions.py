"""Low-level contraction kernels shared by the covariation and variance code.

All kernels are pure array transforms over a batch axis and use
deterministic pairwise reductions (plain numpy sums over fixed layouts),
so repeated runs are bit-identical.
"""

from __future__ import annotations

import numpy as np


def quad_kernel_contract(
    dA: np.ndarray,
    dB: np.ndarray,
    C: np.ndarray,
    support_a=None,
    support_b=None,
) -> np.ndarray:
    """sum_{gh,jk} dA[gh] dB[jk] (C[gj] C[hk] + C[gk] C[hj]) per batch row.

    Uses a gather loop over the gradients' sparsity patterns when both are
    small, otherwise two batched matmuls; the two routes agree exactly up
    to float association.
    """
    d = C.shape[-1]
    if (
        support_a is not None
        and support_b is not None
        and len(support_a) * len(support_b) <= max(4 * d * d, 64)
    ):
        acc = np.zeros(C.shape[0])
        for g, h in support_a:
            a_col = dA[:, g, h]
            for j, k in support_b:
                acc += (
                    a_col
                    * dB[:, j, k]
                    * (C[:, g, j] * C[:, h, k] + C[:, g, k] * C[:, h, j])
                )
        return acc
    sym = dB + np.swapaxes(dB, 1, 2)
    mid = np.matmul(C, np.matmul(sym, C))
    return np.einsum("ngh,ngh->n", dA, mid)


def grad_dot(dA: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Entrywise inner product <dA_i, M_i> per batch row."""
    return np.einsum("ngh,ngh->n", dA, M)
