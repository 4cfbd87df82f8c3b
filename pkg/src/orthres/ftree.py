"""Finite filtration engine on level-ordered scenario trees.

A tree is stored as flat arrays: nodes are numbered level by level, edges are
grouped by parent node.  Recombining lattices are supported as level-layered
DAGs (a node may have several incoming edges); operations that genuinely need
pathwise information check ``is_tree`` first.
"""

from dataclasses import dataclass, field

import json
import numpy as np

from . import _kernels
from .errors import InvariantViolation

PROB_TOL = 1e-14
MASS_TOL = 1e-12
PSD_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points t[0]=0 < ... < t[K]=T."""

    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise InvariantViolation("time grid needs at least two points")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise InvariantViolation("time grid must start at 0 and strictly increase")
        object.__setattr__(self, "t", t)
        t.flags.writeable = False

    @classmethod
    def uniform(cls, K, T=1.0):
        return cls(np.linspace(0.0, T, K + 1))

    @property
    def K(self):
        return len(self.t) - 1

    @property
    def T(self):
        return float(self.t[-1])


class ScenarioTree:
    """Level-ordered finite filtered probability space.

    Attributes
    ----------
    grid : TimeGrid
    d : martingale dimension
    level_start : (K+2,) node-id offset of each level
    estart : (n_nodes+1,) per-node offset into the edge arrays
    eparent, echild, eprob : flat edge arrays grouped by parent
    parent : (n_nodes,) unique parent id, -1 for root, -2 when recombined
    path_prob : (n_nodes,) total probability mass reaching the node
    """

    def __init__(self, grid, d, level_start, eparent, echild, eprob, validate=True):
        self.grid = grid
        self.d = int(d)
        self.level_start = np.asarray(level_start, dtype=np.int64)
        self.eparent = np.asarray(eparent, dtype=np.int64)
        self.echild = np.asarray(echild, dtype=np.int64)
        self.eprob = np.asarray(eprob, dtype=float)
        n = int(self.level_start[-1])
        self.n_nodes = n
        if np.any(np.diff(self.eparent) < 0):
            order = np.argsort(self.eparent, kind="stable")
            self.eparent = self.eparent[order]
            self.echild = self.echild[order]
            self.eprob = self.eprob[order]
        self.estart = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.estart, self.eparent + 1, 1)
        np.cumsum(self.estart, out=self.estart)

        self.parent = np.full(n, -1, dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        np.add.at(counts, self.echild, 1)
        self.parent[self.echild] = self.eparent
        self.parent[self.level_start[1]:][counts[self.level_start[1]:] > 1] = -2
        self.is_tree = bool(np.all(counts[self.level_start[1]:] == 1))
        self.parent[:self.level_start[1]] = -1

        self.path_prob = np.zeros(n)
        self.path_prob[0] = 1.0
        for k in range(self.K):
            sl = self._edge_slice(k)
            np.add.at(self.path_prob, self.echild[sl],
                      self.path_prob[self.eparent[sl]] * self.eprob[sl])

        self.node_level = np.repeat(np.arange(self.K + 1),
                                    np.diff(self.level_start))
        for a in (self.level_start, self.eparent, self.echild, self.eprob,
                  self.estart, self.parent, self.path_prob, self.node_level):
            a.flags.writeable = False
        if validate:
            self.validate()

    # -- structure ---------------------------------------------------------
    @property
    def K(self):
        return self.grid.K

    @property
    def n_nonterminal(self):
        return int(self.level_start[self.K])

    def level_slice(self, k):
        return int(self.level_start[k]), int(self.level_start[k + 1])

    def _edge_slice(self, k):
        lo, hi = self.level_slice(k)
        return slice(int(self.estart[lo]), int(self.estart[hi]))

    def leaves(self):
        return np.arange(*self.level_slice(self.K))

    def validate(self):
        if self.n_nodes != self.level_start[-1]:
            raise InvariantViolation("levels do not partition the node set")
        if np.any(self.eprob <= 0) or np.any(self.eprob > 1):
            raise InvariantViolation("edge probabilities must lie in (0,1]")
        sums = np.zeros(self.n_nodes)
        np.add.at(sums, self.eparent, self.eprob)
        bad = np.abs(sums[:self.n_nonterminal] - 1.0)
        if bad.size and bad.max() > PROB_TOL:
            raise InvariantViolation(
                f"outgoing probabilities sum to 1 violated by {bad.max():.3e}")
        child_levels = self.node_level[self.echild]
        if np.any(child_levels != self.node_level[self.eparent] + 1):
            raise InvariantViolation("edges must connect consecutive levels")
        for k in range(self.K + 1):
            lo, hi = self.level_slice(k)
            mass = float(np.sum(self.path_prob[lo:hi]))
            if abs(mass - 1.0) > MASS_TOL:
                raise InvariantViolation(
                    f"level {k} probability mass {mass} != 1")


class TreeBuilder:
    """Incremental level-by-level construction with optional state merging.

    ``child(parent, prob, key=...)`` merges children of the current level that
    share the same hashable key (recombining lattice); ``key=None`` always
    creates a fresh node.
    """

    def __init__(self, grid, d=1):
        self.grid = grid
        self.d = d
        self.level_start = [0, 1]
        self.eparent = []
        self.echild = []
        self.eprob = []
        self._level_keys = {}
        self._next_id = 1

    @property
    def n_nodes(self):
        return self._next_id

    def begin_level(self):
        self._level_keys = {}

    def child(self, parent, prob, key=None):
        if key is not None and key in self._level_keys:
            cid = self._level_keys[key]
        else:
            cid = self._next_id
            self._next_id += 1
            if key is not None:
                self._level_keys[key] = cid
        self.eparent.append(parent)
        self.echild.append(cid)
        self.eprob.append(prob)
        return cid

    def end_level(self):
        self.level_start.append(self._next_id)

    def build(self, validate=True):
        return ScenarioTree(self.grid, self.d, self.level_start,
                            self.eparent, self.echild, self.eprob,
                            validate=validate)


@dataclass
class AdaptedProcess:
    """One real vector per node."""

    tree: ScenarioTree
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.tree.n_nodes:
            raise InvariantViolation("adapted process needs one value per node")
        if not np.all(np.isfinite(v)):
            raise InvariantViolation("adapted process has non-finite entries")
        self.values = v

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def scalar(self):
        """(n_nodes,) view, valid when dim == 1."""
        return self.values[:, 0]


@dataclass
class PredictableField:
    """One value per non-terminal node, applied on the step to the next level."""

    tree: ScenarioTree
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != self.tree.n_nonterminal:
            raise InvariantViolation("predictable field must cover every "
                                     "non-terminal node")
        self.values = v

    @property
    def dim(self):
        return self.values.shape[1] if self.values.ndim > 1 else 1


@dataclass
class ClockAndFactor:
    """Clock C = arctan of the accumulated bracket trace, with its factor q."""

    C: AdaptedProcess                 # scalar, per node
    dC: PredictableField              # scalar, per non-terminal node
    q: PredictableField               # (d, d) lower-triangular, per non-terminal node
    sigma: np.ndarray = field(repr=False, default=None)  # conditional covariances
    trace: np.ndarray = field(repr=False, default=None)  # accumulated bracket trace


class MartingaleCheck:
    def __init__(self, ok, max_violation):
        self.ok = bool(ok)
        self.max_violation = float(max_violation)

    def __bool__(self):
        return self.ok


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def cond_exp(tree, X, k, of_level=None):
    """Exact E[X_{of_level} | F_k] by backward weighted averaging.

    Returns an array of shape (nodes at level k, dim).  ``of_level`` defaults
    to the terminal level.
    """
    if of_level is None:
        of_level = tree.K
    if not 0 <= k < of_level <= tree.K:
        raise ValueError(f"need 0 <= k < of_level <= K, got ({k}, {of_level})")
    vals = np.array(X.values if isinstance(X, AdaptedProcess) else X, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    cur = vals
    for j in range(of_level - 1, k - 1, -1):
        lo, hi = tree.level_slice(j)
        nxt = np.empty((hi - lo, cur.shape[1]))
        for c in range(cur.shape[1]):
            nxt[:, c] = _kernels.backward_expect(tree, cur[:, c], lo, hi)
        cur = np.zeros((tree.n_nodes, cur.shape[1]))
        cur[lo:hi] = nxt
    lo, hi = tree.level_slice(k)
    return cur[lo:hi].copy()


def backward_closure(tree, leaf_values):
    """Fill the whole tree with E[zeta | F_k] from leaf values (all levels)."""
    leaf_values = np.asarray(leaf_values, dtype=float)
    lo, hi = tree.level_slice(tree.K)
    if leaf_values.shape[0] != hi - lo:
        raise InvariantViolation("need one terminal value per leaf")
    out = np.empty(tree.n_nodes)
    out[lo:hi] = leaf_values
    for k in range(tree.K - 1, -1, -1):
        a, b = tree.level_slice(k)
        out[a:b] = _kernels.backward_expect(tree, out, a, b)
    return AdaptedProcess(tree, out)


def is_martingale(tree, M, tol=1e-12):
    """Check E[M_{k+1} | node] == M_k at every non-terminal node."""
    worst = 0.0
    nt = tree.n_nonterminal
    for c in range(M.dim):
        ey = _kernels.backward_expect(tree, M.values[:, c], 0, nt)
        worst = max(worst, float(np.max(np.abs(ey - M.values[:nt, c]))))
    return MartingaleCheck(worst <= tol, worst)


def psd_cholesky(A, tol=PSD_TOL):
    """Lower-triangular factor of a PSD matrix, zeroing rank-deficient columns."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(A))))
    L = np.zeros_like(A)
    for j in range(d):
        s = A[j, j] - np.dot(L[j, :j], L[j, :j])
        if s < -tol * scale:
            raise InvariantViolation(
                f"matrix not PSD within tolerance (pivot {s:.3e})")
        if s <= tol * scale:
            continue  # column stays zero
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            L[i, j] = (A[i, j] - np.dot(L[i, :j], L[j, :j])) / L[j, j]
    return L


def conditional_covariances(tree, M):
    """Sigma_k = E[dM dM* | node] for every non-terminal node, shape (nt,d,d)."""
    nt = tree.n_nonterminal
    d = M.dim
    if d == 1:
        _, _, s2 = _kernels.level_moments_d1(tree, M.scalar, M.scalar, 0, nt)
        return s2.reshape(nt, 1, 1)
    sl = slice(0, int(tree.estart[nt]))
    dm = M.values[tree.echild[sl]] - M.values[tree.eparent[sl]]
    w = tree.eprob[sl][:, None, None] * (dm[:, :, None] * dm[:, None, :])
    idx = tree.estart[:nt]
    return np.add.reduceat(w, idx, axis=0)


def predictable_bracket(tree, M):
    """Clock C = arctan(sum of bracket traces) and Cholesky factor q.

    Built from conditional covariances so that C, dC and q are predictable.
    Requires the accumulated trace to be consistent across recombined paths.
    """
    nt = tree.n_nonterminal
    sigma = conditional_covariances(tree, M)
    tr = np.einsum("kii->k", sigma)
    V = np.zeros(tree.n_nodes)
    for k in range(tree.K):
        sl = tree._edge_slice(k)
        cand = V[tree.eparent[sl]] + tr[tree.eparent[sl]]
        V[tree.echild[sl]] = cand
    # re-check: every incoming edge must agree on the accumulated trace
    sl = slice(0, int(tree.estart[nt]))
    err = np.abs(V[tree.echild[sl]] - (V[tree.eparent[sl]] + tr[tree.eparent[sl]]))
    if err.size and err.max() > 1e-9:
        raise InvariantViolation(
            "recombined nodes disagree on the accumulated bracket trace "
            f"(max {err.max():.3e}); use a non-recombining tree")
    C = np.arctan(V)
    dC = np.arctan(V[:nt] + tr) - C[:nt]
    d = M.dim
    q = np.zeros((nt, d, d))
    for i in range(nt):
        if dC[i] > 0:
            q[i] = psd_cholesky(sigma[i] / dC[i])
    return ClockAndFactor(
        C=AdaptedProcess(tree, C),
        dC=PredictableField(tree, dC),
        q=PredictableField(tree, q),
        sigma=sigma,
        trace=V,
    )


def pathwise_bracket(tree, M):
    """Cumulative sum of dM dM* along each node's path (true trees only)."""
    if not tree.is_tree:
        raise InvariantViolation("pathwise bracket needs a non-recombining tree")
    d = M.dim
    B = np.zeros((tree.n_nodes, d, d))
    for k in range(tree.K):
        sl = tree._edge_slice(k)
        dm = M.values[tree.echild[sl]] - M.values[tree.eparent[sl]]
        B[tree.echild[sl]] = B[tree.eparent[sl]] + dm[:, :, None] * dm[:, None, :]
    return AdaptedProcess(tree, B.reshape(tree.n_nodes, d * d))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def tree_to_json(tree, M=None):
    doc = {
        "grid": tree.grid.t.tolist(),
        "d": tree.d,
        "nodes": [{"id": int(i), "level": int(tree.node_level[i])}
                  for i in range(tree.n_nodes)],
    }
    if tree.is_tree:
        for i in range(1, tree.n_nodes):
            doc["nodes"][i]["parent"] = int(tree.parent[i])
        for e in range(len(tree.echild)):
            doc["nodes"][int(tree.echild[e])]["prob"] = float(tree.eprob[e])
    else:
        doc["edges"] = [[int(p), int(c), float(w)] for p, c, w in
                        zip(tree.eparent, tree.echild, tree.eprob)]
    if M is not None:
        doc["mart_values"] = M.values.tolist()
    return json.dumps(doc, sort_keys=True)


def tree_from_json(text):
    doc = json.loads(text)
    grid = TimeGrid(np.asarray(doc["grid"]))
    nodes = doc["nodes"]
    levels = np.array([n["level"] for n in nodes])
    counts = np.bincount(levels, minlength=grid.K + 1)
    level_start = np.concatenate([[0], np.cumsum(counts)])
    if "edges" in doc:
        ep, ec, pr = (np.array(x) for x in zip(*doc["edges"]))
    else:
        ep = np.array([n["parent"] for n in nodes if "parent" in n])
        ec = np.array([n["id"] for n in nodes if "parent" in n])
        pr = np.array([n["prob"] for n in nodes if "parent" in n])
    tree = ScenarioTree(grid, doc["d"], level_start, ep, ec, pr)
    M = None
    if "mart_values" in doc:
        M = AdaptedProcess(tree, np.asarray(doc["mart_values"]))
    return tree, M
