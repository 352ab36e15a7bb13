"""
Emparelhamento bipartido - HLSpot
"""

import numpy as np
from scipy.optimize import linear_sum_assignment

from hlspot.errors import ContractError

# folga relativa para considerar dois custos totais empatados
TIE_TOL = 1e-9


class MatchResult:
    def __init__(self, pairs, unmatched, total_cost=0.0):
        self.pairs = pairs
        self.unmatched = unmatched
        self.total_cost = float(total_cost)

    @property
    def gt_indices(self):
        return np.array([g for g, _ in self.pairs], dtype=np.int64)

    @property
    def pred_indices(self):
        return np.array([q for _, q in self.pairs], dtype=np.int64)


def _completion(cost, row, col, used):
    """Melhor custo das linhas seguintes com `col` fixada para `row`"""
    avail = np.array([c for c in range(cost.shape[1]) if c not in used and c != col],
                     dtype=np.int64)
    rest = cost[row + 1:][:, avail]
    if rest.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=np.int64)
    r, c = linear_sum_assignment(rest)
    return float(rest[r, c].sum()), avail[c[np.argsort(r)]]


def hungarian(cost):
    """
    Atribuição de custo mínimo entre G verdades (linhas) e Q predições (colunas)

    Entre soluções ótimas empatadas escolhe a lexicograficamente menor:
    menor φ(0), depois menor φ(1), e assim por diante.

    Args:
        cost: Matriz G×Q finita com G <= Q

    Returns:
        MatchResult
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ContractError(f"hungarian exige matriz 2-D, recebido shape {cost.shape}")
    G, Q = cost.shape
    if G > Q:
        raise ContractError(f"hungarian exige G <= Q, recebido G={G}, Q={Q}")
    if G == 0:
        return MatchResult([], list(range(Q)), 0.0)
    if not np.all(np.isfinite(cost)):
        raise ContractError("hungarian exige custos finitos")

    rows, cols = linear_sum_assignment(cost)
    assignment = cols[np.argsort(rows)].copy()
    best = float(cost[np.arange(G), assignment].sum())
    tol = TIE_TOL * max(1.0, abs(best))

    used = set()
    prefix = 0.0
    for g in range(G):
        current = int(assignment[g])
        free = np.array([c for c in range(Q) if c not in used], dtype=np.int64)
        # limite inferior barato: mínimo por linha nas colunas livres
        bound = cost[g + 1:][:, free].min(axis=1).sum() if g + 1 < G else 0.0
        candidates = [int(q) for q in free
                      if q < current and prefix + cost[g, q] + bound <= best + tol]
        for q in candidates:
            rest, completion = _completion(cost, g, q, used)
            if prefix + cost[g, q] + rest <= best + tol:
                assignment[g + 1:] = completion
                current = q
                break
        assignment[g] = current
        used.add(current)
        prefix += cost[g, current]

    pairs = [(g, int(assignment[g])) for g in range(G)]
    unmatched = sorted(set(range(Q)) - used)
    return MatchResult(pairs, unmatched, prefix)
