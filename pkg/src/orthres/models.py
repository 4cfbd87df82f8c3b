"""Martingale model zoo: walks with a continuous limit, an enlarged-filtration
product model, and a compensated-jump counterexample.

All builders calibrate to unit-diffusion scale by default: per-step variance
T/K for the continuous-limit kinds.  Models whose filtration equals
sigma(M) recombine into lattices; the product model keeps the full tree.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, NodeCapExceeded
from .ftree import AdaptedProcess, TimeGrid, TreeBuilder, is_martingale

DEFAULT_NODE_CAP = 5_000_000

KINDS = ("binary", "trinomial", "time_changed", "product_noise",
         "compensated_jump")


def node_cap():
    return int(os.environ.get("ORTHRES_NODE_CAP", DEFAULT_NODE_CAP))


@dataclass
class ModelConfig:
    kind: str
    K: int
    d: int = 1
    T: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.K < 1:
            raise ModelError("K must be >= 1")
        if self.d != 1:
            raise ModelError("builders ship with d=1; higher-dimensional "
                             "martingales are constructed by hand in tests")
        if self.T <= 0:
            raise ModelError("T must be positive")


@dataclass
class BuiltModel:
    """Builder output plus provenance for reports."""

    tree: object
    M: AdaptedProcess
    aux: AdaptedProcess = None
    meta: dict = field(default_factory=dict)


def _validated(tree, mvals, tol=1e-12):
    M = AdaptedProcess(tree, mvals)
    chk = is_martingale(tree, M, tol)
    if not chk:
        raise ModelError(f"constructed process is not a martingale "
                         f"(violation {chk.max_violation:.3e})")
    return M


def _check_cap(builder):
    if builder.n_nodes > node_cap():
        raise NodeCapExceeded(builder.n_nodes, node_cap())


def build_binary(config):
    """Symmetric +-h walk; recombining lattice; h defaults to sqrt(T/K)."""
    K, T = config.K, config.T
    h = float(config.params.get("h", np.sqrt(T / K)))
    if h <= 0:
        raise ModelError("h must be positive")
    recomb = bool(config.params.get("recombine", True))
    b = TreeBuilder(TimeGrid.uniform(K, T))
    states = {0: 0}           # node id -> integer offset
    mvals = [0.0]
    for k in range(K):
        b.begin_level()
        nxt = {}
        for nid, i in states.items():
            for di in (-1, 1):
                cid = b.child(nid, 0.5, key=i + di if recomb else None)
                if cid == len(mvals):
                    mvals.append((i + di) * h)
                nxt[cid] = i + di
        b.end_level()
        _check_cap(b)
        states = nxt
    tree = b.build()
    return tree, _validated(tree, np.array(mvals))


def build_trinomial(config):
    """Steps (-h, 0, +h) with probabilities (p, 1-2p, p); lattice."""
    K, T = config.K, config.T
    p = float(config.params.get("p", 0.25))
    if not 0 < p < 0.5:
        raise ModelError("trinomial branch probability must lie in (0, 1/2)")
    h = float(config.params.get("h", np.sqrt(T / (2 * p * K))))
    recomb = bool(config.params.get("recombine", True))
    b = TreeBuilder(TimeGrid.uniform(K, T))
    states = {0: 0}
    mvals = [0.0]
    for k in range(K):
        b.begin_level()
        nxt = {}
        for nid, i in states.items():
            for di, pr in ((-1, p), (0, 1 - 2 * p), (1, p)):
                cid = b.child(nid, pr, key=i + di if recomb else None)
                if cid == len(mvals):
                    mvals.append((i + di) * h)
                nxt[cid] = i + di
        b.end_level()
        _check_cap(b)
        states = nxt
    tree = b.build()
    return tree, _validated(tree, np.array(mvals))


def build_compensated_jump(config):
    """Compensated Poisson-type walk with fixed jump sizes; lattice, Markov,
    discontinuous in the limit.

    Per step an up jump of size ``jump`` fires with probability lam*dt and a
    down jump of size ``jump_down`` with probability lam_down*dt (at most one
    of the two); dM subtracts the compensator so M is a martingale.  With
    lam_down = 0 this degenerates to the one-sided Bernoulli jump
    dM = (J - lam*dt)*jump, whose two-branch steps are representable exactly.
    The default two-sided walk branches three ways and carries a genuine
    orthogonal component.
    """
    K, T = config.K, config.T
    lam = float(config.params.get("lam", 2.0))
    jump = float(config.params.get("jump", 1.0))
    lam_down = float(config.params.get("lam_down", lam))
    jump_down = float(config.params.get("jump_down", jump))
    dt = T / K
    if lam <= 0 or lam_down < 0:
        raise ModelError("need lam > 0 and lam_down >= 0")
    pu, pd = lam * dt, lam_down * dt
    if pu + pd >= 1:
        raise ModelError("need (lam + lam_down)*dt < 1")
    comp = (lam * jump - lam_down * jump_down) * dt
    recomb = bool(config.params.get("recombine", True))
    b = TreeBuilder(TimeGrid.uniform(K, T))
    states = {0: (0, 0)}      # node id -> (up jumps, down jumps) so far
    mvals = [0.0]
    moves = [((1, 0), pu), ((0, 0), 1 - pu - pd)]
    if pd > 0:
        moves.append(((0, 1), pd))
    for k in range(K):
        b.begin_level()
        nxt = {}
        for nid, (nu, nd) in states.items():
            for (du, dd), pr in moves:
                s = (nu + du, nd + dd)
                cid = b.child(nid, pr, key=s if recomb else None)
                if cid == len(mvals):
                    mvals.append(jump * s[0] - jump_down * s[1]
                                 - (k + 1) * comp)
                nxt[cid] = s
        b.end_level()
        _check_cap(b)
        states = nxt
    tree = b.build()
    return tree, _validated(tree, np.array(mvals))


def build_time_changed(config):
    """Binary walk with state-dependent step h(m) = h0*sqrt(1+kappa*|m|),
    capped; non-deterministic bracket, Markov."""
    K, T = config.K, config.T
    kappa = float(config.params.get("kappa", 1.0))
    if kappa < 0:
        raise ModelError("kappa must be >= 0")
    h0 = float(config.params.get("h", np.sqrt(T / K)))
    hcap = float(config.params.get("h_cap", 3 * h0))

    def step(m):
        return min(h0 * np.sqrt(1 + kappa * abs(m)), hcap)

    b = TreeBuilder(TimeGrid.uniform(K, T))
    states = {0: 0.0}
    mvals = [0.0]
    for k in range(K):
        b.begin_level()
        nxt = {}
        for nid, m in states.items():
            h = step(m)
            for s in (-1, 1):
                mc = m + s * h
                cid = b.child(nid, 0.5, key=round(mc, 12))
                if cid == len(mvals):
                    mvals.append(mc)
                nxt[cid] = mc
        b.end_level()
        _check_cap(b)
        states = nxt
    tree = b.build()
    return tree, _validated(tree, np.array(mvals))


def build_product_noise(config):
    """Binary M walk times an independent fair coin per step.

    The filtration is strictly larger than sigma(M): each node also records
    the latest coin flip in ``aux`` (+-1, 0 at the root).  M ignores aux.
    Full tree, branching 4.
    """
    K, T = config.K, config.T
    h = float(config.params.get("h", np.sqrt(T / K)))
    if 4 ** K > node_cap():
        raise NodeCapExceeded(4 ** K, node_cap())
    b = TreeBuilder(TimeGrid.uniform(K, T))
    states = {0: 0.0}
    mvals = [0.0]
    avals = [0.0]
    for k in range(K):
        b.begin_level()
        nxt = {}
        for nid, m in states.items():
            for s in (-1, 1):
                for coin in (-1, 1):
                    cid = b.child(nid, 0.25)
                    mvals.append(m + s * h)
                    avals.append(float(coin))
                    nxt[cid] = m + s * h
        b.end_level()
        _check_cap(b)
        states = nxt
    tree = b.build()
    M = _validated(tree, np.array(mvals))
    return tree, M, AdaptedProcess(tree, np.array(avals))


def build(config):
    """Dispatch on kind; returns a BuiltModel with provenance."""
    aux = None
    if config.kind == "binary":
        tree, M = build_binary(config)
    elif config.kind == "trinomial":
        tree, M = build_trinomial(config)
    elif config.kind == "compensated_jump":
        tree, M = build_compensated_jump(config)
    elif config.kind == "time_changed":
        tree, M = build_time_changed(config)
    elif config.kind == "product_noise":
        tree, M, aux = build_product_noise(config)
    else:  # pragma: no cover - guarded by ModelConfig
        raise ModelError(config.kind)
    meta = {
        "kind": config.kind,
        "K": config.K,
        "T": config.T,
        "params": dict(config.params),
        "n_nodes": tree.n_nodes,
        "markov": True,
        "recombining": not tree.is_tree,
        "filtration_enlarged": config.kind == "product_noise",
        "continuous_limit": config.kind != "compensated_jump",
    }
    return BuiltModel(tree=tree, M=M, aux=aux, meta=meta)
