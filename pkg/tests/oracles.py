"""Deliberately naive reference implementations used only by the tests.

None of these share code with the package: they work on plain Python data
(dicts, lists, Fractions) so that a bug in the vectorised code cannot hide
behind the same bug in its check.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, List

import numpy as np

GATE_EVAL = {
    "BUF": lambda v: v[0],
    "NOT": lambda v: 1 - v[0],
    "AND": lambda v: int(all(v)),
    "OR": lambda v: int(any(v)),
    "NAND": lambda v: 1 - int(all(v)),
    "NOR": lambda v: 1 - int(any(v)),
    "XOR": lambda v: v[0] ^ v[1],
    "XNOR": lambda v: 1 - (v[0] ^ v[1]),
}


def _base(cell_type: str) -> str:
    return cell_type.split("_X")[0]


def simulate_document(doc: dict, columns: Dict[str, List[int]], cycles: int,
                      flip=None) -> dict:
    """Event-free reference simulator over the raw JSON document.

    Combinational nets are resolved by repeated sweeps until nothing changes.
    ``flip`` is an optional ``(ff_name, cycle)`` inverted after that cycle's
    clock edge. Returns ``{"po": {name: [...]}, "q": {ff: [...]}}``.
    """
    consts = dict(doc.get("constants", {}))
    cells = doc["cells"]
    seq = {c["name"]: c for c in cells if _base(c["type"]) in ("DFF", "DFFR")}
    comb = [c for c in cells if c["name"] not in seq]
    state = {name: 0 for name in seq}
    outs = {}
    for o in doc["outputs"]:
        if isinstance(o, str):
            outs[o] = o
        else:
            outs[o["name"]] = o["net"]
    po = {name: [] for name in outs}
    q = {name: [] for name in seq}
    for t in range(cycles):
        nets = dict(consts)
        for pi in doc["inputs"]:
            nets[pi] = columns[pi][t]
        for name, c in seq.items():
            nets[c["pins"]["Q"]] = state[name]
        changed = True
        while changed:
            changed = False
            for c in comb:
                base = _base(c["type"])
                y = c["pins"]["Y"]
                if base in ("TIE0", "TIE1"):
                    val = int(base == "TIE1")
                elif base == "MUX2":
                    ins = [c["pins"][p] for p in ("A", "B", "S")]
                    if not all(i in nets for i in ins):
                        continue
                    a, b, s = (nets[i] for i in ins)
                    val = b if s else a
                else:
                    pins = sorted(p for p in c["pins"] if p != "Y")
                    if not all(c["pins"][p] in nets for p in pins):
                        continue
                    vals = [nets[c["pins"][p]] for p in pins]
                    key = base.rstrip("0123456789")
                    val = GATE_EVAL[key](vals)
                if nets.get(y) != val:
                    nets[y] = val
                    changed = True
        for name, net in outs.items():
            po[name].append(nets[net])
        for name in seq:
            q[name].append(state[name])
        new = {}
        for name, c in seq.items():
            d = nets[c["pins"]["D"]]
            if "RN" in c["pins"]:
                d &= nets[c["pins"]["RN"]]
            new[name] = d
        if flip is not None and flip[1] == t:
            new[flip[0]] ^= 1
        state = new
    return {"po": po, "q": q}


def exhaustive_fdr(doc, columns, cycles, ff, window, observe):
    """Fraction of flip cycles in ``window`` whose run differs from golden
    inside ``observe`` (both inclusive), by brute force."""
    lo, hi = observe
    golden = simulate_document(doc, columns, cycles)["po"]
    fails = 0
    for c in range(window[0], window[1] + 1):
        run = simulate_document(doc, columns, cycles, flip=(ff, c))["po"]
        if any(run[o][lo:hi + 1] != golden[o][lo:hi + 1] for o in golden):
            fails += 1
    return Fraction(fails, window[1] - window[0] + 1)


def closure_by_squaring(names: List[str], succ: Dict[str, set]) -> Dict[str, set]:
    """Transitive closure of a relation by repeated boolean matrix squaring."""
    n = len(names)
    idx = {x: i for i, x in enumerate(names)}
    R = np.zeros((n, n), dtype=bool)
    for a, bs in succ.items():
        for b in bs:
            R[idx[a], idx[b]] = True
    while True:
        R2 = R | ((R.astype(int) @ R.astype(int)) > 0)
        if np.array_equal(R2, R):
            break
        R = R2
    return {a: {names[j] for j in np.flatnonzero(R[idx[a]])} for a in names}


# -- metrics ------------------------------------------------------------------


def mae(y, p):
    return sum(abs(a - b) for a, b in zip(y, p)) / len(y)


def max_err(y, p):
    return max(abs(a - b) for a, b in zip(y, p))


def rmse(y, p):
    # math.hypot scales internally, so tiny residuals do not square to zero
    return math.hypot(*(a - b for a, b in zip(y, p))) / math.sqrt(len(y))


def _pvar(xs):
    m = sum(xs) / len(xs)
    return sum((x - m) ** 2 for x in xs) / len(xs)


def ev(y, p):
    return 1 - _pvar([a - b for a, b in zip(y, p)]) / _pvar(y)


def r2(y, p):
    m = sum(y) / len(y)
    return 1 - sum((a - b) ** 2 for a, b in zip(y, p)) / sum((a - m) ** 2 for a in y)


# -- models -------------------------------------------------------------------


def zscore(X_train, X):
    mu = X_train.mean(axis=0)
    sd = X_train.std(axis=0)
    sd_safe = np.where(sd == 0, 1.0, sd)
    return np.where(sd == 0, 0.0, (X - mu) / sd_safe)


def normal_equation_predict(X_train, y_train, X_query):
    """OLS by the textbook normal equations on raw features plus a bias column."""
    A = np.column_stack([np.ones(len(X_train)), X_train])
    w = np.linalg.solve(A.T @ A, A.T @ y_train)
    return np.column_stack([np.ones(len(X_query)), X_query]) @ w


def knn_scan(Z_train, y_train, Z_query, k, metric):
    """Exhaustive k-NN with inverse-distance weights, tie expansion at rank k
    and the zero-distance mean rule, one query at a time in pure Python."""
    out = []
    for q in Z_query.tolist():
        dists = []
        for row, target in zip(Z_train.tolist(), y_train.tolist()):
            if metric == "manhattan":
                d = sum(abs(a - b) for a, b in zip(q, row))
            else:
                d = math.sqrt(sum((a - b) ** 2 for a, b in zip(q, row)))
            dists.append((d, target))
        zeros = [t for d, t in dists if d == 0]
        if zeros:
            out.append(sum(zeros) / len(zeros))
            continue
        kth = sorted(d for d, _ in dists)[k - 1]
        near = [(d, t) for d, t in dists if d <= kth]
        out.append(sum(t / d for d, t in near) / sum(1 / d for d, _ in near))
    return np.array(out)


def svr_kkt_violation(K, y, beta, bias, C, eps):
    """Largest gap between the lowest upper bound and the highest lower bound
    the KKT conditions place on the bias, given only ``beta`` and the data.

    Each training point restricts the bias ``b`` through
    ``r_i = y_i - sum_j beta_j K_ij``:
    beta_i = 0      ->  r_i - eps <= b <= r_i + eps
    0 < beta_i < C  ->  b = r_i - eps
    beta_i = C      ->  b <= r_i - eps
    -C < beta_i < 0 ->  b = r_i + eps
    beta_i = -C     ->  b >= r_i + eps
    The violation also reports how far the returned ``bias`` strays from
    that feasible interval.
    """
    r = y - K @ beta
    lows, highs = [], []
    for ri, bi in zip(r, beta):
        if bi == 0:
            lows.append(ri - eps)
            highs.append(ri + eps)
        elif 0 < bi < C:
            lows.append(ri - eps)
            highs.append(ri - eps)
        elif bi >= C:
            highs.append(ri - eps)
        elif -C < bi < 0:
            lows.append(ri + eps)
            highs.append(ri + eps)
        else:
            lows.append(ri + eps)
    lo = max(lows) if lows else -math.inf
    hi = min(highs) if highs else math.inf
    gap = max(0.0, lo - hi)
    outside = max(0.0, lo - bias, bias - hi) if gap == 0 else 0.0
    return gap, outside
