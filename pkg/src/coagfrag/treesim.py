"""Pruned binary critical Galton-Watson trees.

Two routes to the leaf count of a pruned tree are provided.

The literal route builds the tree in a flat arena (``sample_bcgwt``), puts
Exp(2) lengths on its edges, scatters rate-1/n Poisson marks on the branch
of every internal node and applies them from the top down (``prune``).

The fast route never stores the tree. Only the topmost mark of a node can
act: its lower marks sit on the same branch and are deactivated by the
topmost one, or lie below a cut that already removed the node. The topmost
mark of a node at height h is at h - n E with E ~ Exp(1), kept if positive.
For the subtree hanging from an edge (hp, h) write (L, top) for its pruned
leaf count and the highest surviving mark strictly below h. With children
results (La, ta), (Lb, tb) and own top mark m, put T = max(ta, tb, m); if
T > hp the edge is cut, giving (1, -inf), otherwise (La + Lb, T). A leaf
gives (1, -inf). Children are generated lazily and skipped as soon as the
edge is known to be cut, which keeps the expected work finite.

For the size-biased tree the backbone edges are generated until the first
edge i on which the upper backbone node puts a mark (n E_i < kappa_i). On
the earlier backbone edges the conditioning says that node's topmost mark
lies below the edge, i.e. at h_i - n E_i with n E_i > kappa_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba as nb
import numpy as np

from .errors import DomainError
from .rng import STREAM_IDS, exponential, kernel_state, substream, uniform

__all__ = [
    "DiscreteTree",
    "MarkList",
    "EmpiricalLaw",
    "sample_bcgwt",
    "assign_edge_lengths",
    "scatter_marks",
    "prune",
    "leaf_count",
    "evaluate_top_marks",
    "sample_pruned_bcgwt_leafcount",
    "sample_pruned_sbbcgwt_leafcount",
    "pruned_leafcounts",
    "PrunedTreeSampler",
    "empirical_law",
    "empirical_law_from_samples",
    "tv_distance",
    "ks_distance",
    "DEFAULT_NODE_CAP",
]

DEFAULT_NODE_CAP = 10**7
CENSORED = -1


# ---------------------------------------------------------------------------
# literal arena representation


@dataclass
class DiscreteTree:
    """Rooted binary tree in a flat arena. Index 0 is the root; the parent of
    the root is the anchor, encoded as -1 with height 0."""

    parent: np.ndarray
    left: np.ndarray
    right: np.ndarray
    edge_length: np.ndarray
    height: np.ndarray
    alive: np.ndarray

    @property
    def size(self) -> int:
        return int(self.alive.sum())

    def is_leaf(self) -> np.ndarray:
        return self.alive & (self.left < 0)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.is_leaf())

    def internal(self) -> np.ndarray:
        return np.flatnonzero(self.alive & (self.left >= 0))

    def copy(self) -> "DiscreteTree":
        return DiscreteTree(*(a.copy() for a in (self.parent, self.left, self.right, self.edge_length, self.height, self.alive)))

    def parent_height(self, v: int) -> float:
        p = self.parent[v]
        return 0.0 if p < 0 else float(self.height[p])

    def descendants(self, v: int) -> list[int]:
        """v and all nodes above it, by explicit stack."""
        out, stack = [], [v]
        while stack:
            w = stack.pop()
            out.append(w)
            if self.left[w] >= 0:
                stack.append(int(self.left[w]))
                stack.append(int(self.right[w]))
        return out


@dataclass
class MarkList:
    owner: np.ndarray
    position: np.ndarray
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.owner.size, dtype=bool)

    def __len__(self) -> int:
        return int(self.owner.size)


def sample_bcgwt(rng: np.random.Generator, node_cap: int = DEFAULT_NODE_CAP) -> DiscreteTree | None:
    """Binary critical GW tree in breadth-first order, or None past node_cap."""
    if node_cap < 1:
        raise DomainError("node_cap must be >= 1")
    parent = [-1]
    left: list[int] = []
    right: list[int] = []
    head = 0
    while head < len(parent):
        if len(parent) > node_cap:
            return None
        if rng.random() < 0.5:
            left.append(-1)
            right.append(-1)
        else:
            k = len(parent)
            parent.extend((head, head))
            left.append(k)
            right.append(k + 1)
        head += 1
    if len(parent) > node_cap:
        return None
    size = len(parent)
    return DiscreteTree(
        np.array(parent, dtype=np.int64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.zeros(size),
        np.zeros(size),
        np.ones(size, dtype=bool),
    )


def _recompute_heights(tree: DiscreteTree) -> None:
    # breadth-first arenas have parent index < child index
    h = tree.height
    for v in range(tree.parent.size):
        p = tree.parent[v]
        h[v] = tree.edge_length[v] + (0.0 if p < 0 else h[p])


def assign_edge_lengths(tree: DiscreteTree, rng: np.random.Generator) -> DiscreteTree:
    """Independent Exp(2) length on every edge, the anchor edge included."""
    out = tree.copy()
    out.edge_length = rng.exponential(0.5, size=tree.parent.size)
    _recompute_heights(out)
    return out


def scatter_marks(tree: DiscreteTree, n: float, rng: np.random.Generator) -> MarkList:
    """Poisson(height/n) marks, uniform on (0, height), for every internal node."""
    if not n > 0:
        raise DomainError("n must be positive")
    nodes = tree.internal()
    heights = tree.height[nodes]
    counts = rng.poisson(heights / n)
    owner = np.repeat(nodes, counts)
    position = rng.random(owner.size) * np.repeat(heights, counts)
    return MarkList(owner.astype(np.int64), position)


def _edge_at(tree: DiscreteTree, owner: int, p: float) -> int:
    """Node w on the branch of ``owner`` whose edge (parent, w) contains height p."""
    w = owner
    while tree.parent_height(w) >= p:
        w = int(tree.parent[w])
        if w < 0:
            raise AssertionError("mark below the anchor")
    return w


def prune(tree: DiscreteTree, marks: MarkList) -> DiscreteTree:
    """Apply marks from the highest down. A mark acts iff its owner is still an
    original internal node of the running tree; acting at height p on edge
    (parent, w) turns w into a leaf at height p and removes everything above."""
    out = tree.copy()
    intact = out.alive & (out.left >= 0)
    active = marks.active.copy()
    order = np.lexsort((-marks.owner, -marks.position))
    for i in order:
        if not active[i]:
            continue
        owner = int(marks.owner[i])
        if not out.alive[owner] or not intact[owner]:
            active[i] = False
            continue
        p = float(marks.position[i])
        if not (0.0 < p < out.height[owner]):
            raise AssertionError("mark outside its owner's branch")
        w = _edge_at(out, owner, p)
        removed = out.descendants(w)
        for v in removed:
            intact[v] = False
            if v != w:
                out.alive[v] = False
        out.left[w] = -1
        out.right[w] = -1
        out.edge_length[w] = p - out.parent_height(w)
        out.height[w] = out.parent_height(w) + out.edge_length[w]
        active[i] = False
    return out


def leaf_count(tree: DiscreteTree) -> int:
    return int(tree.is_leaf().sum())


def evaluate_top_marks(tree: DiscreteTree, marks: MarkList) -> int:
    """Pruned leaf count from the topmost mark of each node (fast-route rule,
    evaluated without laziness on a stored tree)."""
    size = tree.parent.size
    top = np.full(size, -np.inf)
    if len(marks):
        np.maximum.at(top, marks.owner, marks.position)
    L = np.ones(size, dtype=np.int64)
    t = np.full(size, -np.inf)
    # children have larger indices in breadth-first arenas
    for v in range(size - 1, -1, -1):
        if tree.left[v] < 0:
            continue
        a, b = tree.left[v], tree.right[v]
        T = max(t[a], t[b], top[v])
        if T > tree.parent_height(v):
            L[v], t[v] = 1, -np.inf
        else:
            L[v], t[v] = L[a] + L[b], T
    return int(L[0])


# ---------------------------------------------------------------------------
# lazy evaluators


@nb.njit(cache=True)
def _grow(a, size):
    b = np.empty(size, dtype=a.dtype)
    b[: a.size] = a
    return b


@nb.njit(cache=True)
def _gw_eval(n, s, hp0, cap):
    """(leaf count, surviving top mark, nodes generated) for a pruned GW tree
    hanging from height hp0; leaf count -1 when more than cap nodes are needed."""
    size = 64
    hp = np.empty(size)
    h = np.empty(size)
    m = np.empty(size)
    stage = np.empty(size, dtype=np.int64)
    la = np.empty(size, dtype=np.int64)
    ta = np.empty(size)
    explored = 0
    sp = 0
    hp[0] = hp0
    stage[0] = 0
    ret_l = 0
    ret_t = -np.inf
    while sp >= 0:
        f = sp
        st = stage[f]
        if st == 0:
            explored += 1
            if explored > cap:
                return -1, -np.inf, explored
            h[f] = hp[f] + 0.5 * exponential(s)
            if uniform(s) < 0.5:
                ret_l, ret_t = 1, -np.inf
                sp -= 1
                continue
            mv = h[f] - n * exponential(s)
            m[f] = mv if mv > 0.0 else -np.inf
            if m[f] > hp[f]:
                ret_l, ret_t = 1, -np.inf
                sp -= 1
                continue
            stage[f] = 1
        elif st == 1:
            if ret_t > hp[f]:
                ret_l, ret_t = 1, -np.inf
                sp -= 1
                continue
            la[f] = ret_l
            ta[f] = ret_t
            stage[f] = 2
        else:
            T = max(ta[f], ret_t, m[f])
            if T > hp[f]:
                ret_l, ret_t = 1, -np.inf
            else:
                ret_l, ret_t = la[f] + ret_l, T
            sp -= 1
            continue
        # push a child of frame f
        sp += 1
        if sp >= size:
            size *= 2
            hp = _grow(hp, size)
            h = _grow(h, size)
            m = _grow(m, size)
            stage = _grow(stage, size)
            la = _grow(la, size)
            ta = _grow(ta, size)
        hp[sp] = h[f]
        stage[sp] = 0
    return ret_l, ret_t, explored


@nb.njit(cache=True)
def _sb_eval(n, s, cap):
    size = 64
    hb = np.empty(size)
    mb = np.empty(size)
    count = 0
    height = 0.0
    while True:
        kappa = 0.5 * exponential(s)
        d = n * exponential(s)
        height += kappa
        if count >= size:
            size *= 2
            hb = _grow(hb, size)
            mb = _grow(mb, size)
        hb[count] = height
        count += 1
        if d < kappa:
            break
        mv = height - d
        mb[count - 1] = mv if mv > 0.0 else -np.inf
        if count > cap:
            return -1, count
    explored = count
    # the last backbone node acts as a leaf carrying no marks
    L = 1
    top = -np.inf
    for i in range(count - 2, -1, -1):
        hp = hb[i - 1] if i > 0 else 0.0
        if top > hp or mb[i] > hp:
            L, top = 1, -np.inf
            continue
        lg, tg, e = _gw_eval(n, s, hb[i], cap - explored)
        explored += e
        if lg < 0:
            return -1, explored
        T = max(top, mb[i], tg)
        if T > hp:
            L, top = 1, -np.inf
        else:
            L, top = L + lg, T
    return L, explored


@nb.njit(cache=True, nogil=True)
def _batch(n, seed, stream, start, count, cap, size_biased):
    out = np.empty(count, dtype=np.int64)
    work = np.empty(count, dtype=np.int64)
    for i in range(count):
        s = kernel_state(seed, stream, start + i)
        if size_biased:
            L, e = _sb_eval(n, s, cap)
        else:
            L, t, e = _gw_eval(n, s, 0.0, cap)
        out[i] = L
        work[i] = e
    return out, work


def _check_n(n) -> float:
    n = float(n)
    if not n >= 1:
        raise DomainError("n must be >= 1")
    return n


def pruned_leafcounts(
    n: float,
    count: int,
    seed: int = 0,
    start: int = 0,
    node_cap: int = DEFAULT_NODE_CAP,
    size_biased: bool = False,
    return_work: bool = False,
):
    """Leaf counts of ``count`` independent pruned trees (sample indices
    start..start+count-1); censored samples are -1."""
    n = _check_n(n)
    stream = STREAM_IDS["sbbcgwt" if size_biased else "bcgwt"]
    out, work = _batch(n, np.uint64(seed), np.uint64(stream), np.uint64(start), int(count), int(node_cap), bool(size_biased))
    return (out, work) if return_work else out


def _literal_gw(n: float, rng: np.random.Generator, node_cap: int) -> int | None:
    tree = sample_bcgwt(rng, node_cap)
    if tree is None:
        return None
    tree = assign_edge_lengths(tree, rng)
    marks = scatter_marks(tree, n, rng)
    return leaf_count(prune(tree, marks))


def _literal_sb_tree(n: float, rng: np.random.Generator, node_cap: int):
    """Truncated size-biased tree and its marks, or None past node_cap."""
    kappas, backbone_marks = [], []
    height = 0.0
    while True:
        kappa = rng.exponential(0.5)
        # the upper node's marks on this edge; the first success stops the backbone
        hit = rng.poisson(kappa / n)
        kappas.append(kappa)
        if hit > 0:
            break
        # given no mark on its own top edge, the node's marks fall on (0, height)
        backbone_marks.append(rng.random(rng.poisson(height / n)) * height if height > 0 else np.zeros(0))
        height += kappa
        if len(kappas) > node_cap:
            return None
    S = len(kappas)
    parent, left, right, lengths = [], [], [], []
    owners, positions = [], []
    # backbone nodes 0..S-1; node i has children i+1 (backbone) and a planted tree
    for i in range(S):
        parent.append(i - 1)
        lengths.append(kappas[i])
        left.append(-1)
        right.append(-1)
    total = S
    heights = np.cumsum(kappas)
    for i in range(S - 1):
        planted = sample_bcgwt(rng, node_cap - total)
        if planted is None:
            return None
        planted = assign_edge_lengths(planted, rng)
        off = len(parent)
        left[i] = i + 1
        right[i] = off
        for v in range(planted.parent.size):
            p = planted.parent[v]
            parent.append(i if p < 0 else off + int(p))
            left.append(-1 if planted.left[v] < 0 else off + int(planted.left[v]))
            right.append(-1 if planted.right[v] < 0 else off + int(planted.right[v]))
            lengths.append(float(planted.edge_length[v]))
        total = len(parent)
        pos = backbone_marks[i]
        owners.extend([i] * pos.size)
        positions.extend(pos.tolist())
    size = len(parent)
    tree = DiscreteTree(
        np.array(parent, dtype=np.int64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(lengths),
        np.zeros(size),
        np.ones(size, dtype=bool),
    )
    # planted nodes were appended after their parents, so one forward pass suffices
    _recompute_heights(tree)
    # marks of planted internal nodes
    planted_internal = np.array([v for v in tree.internal() if v >= S], dtype=np.int64)
    hts = tree.height[planted_internal]
    counts = rng.poisson(hts / n)
    owners.extend(np.repeat(planted_internal, counts).tolist())
    positions.extend((rng.random(int(counts.sum())) * np.repeat(hts, counts)).tolist())
    marks = MarkList(np.array(owners, dtype=np.int64), np.array(positions))
    return tree, marks


def _literal_sb(n: float, rng: np.random.Generator, node_cap: int) -> int | None:
    built = _literal_sb_tree(n, rng, node_cap)
    if built is None:
        return None
    tree, marks = built
    return leaf_count(prune(tree, marks))


def sample_pruned_bcgwt_leafcount(n, rng, node_cap: int = DEFAULT_NODE_CAP, method: str = "lazy") -> int | None:
    """Leaf count of a pruned BCGWT; None if censored.

    ``rng`` is a numpy Generator for method="literal" and a (seed, index)
    pair for method="lazy".
    """
    n = _check_n(n)
    if method == "literal":
        return _literal_gw(n, rng, node_cap)
    seed, index = rng
    v = int(pruned_leafcounts(n, 1, seed, index, node_cap)[0])
    return None if v < 0 else v


def sample_pruned_sbbcgwt_leafcount(n, rng, node_cap: int = DEFAULT_NODE_CAP, method: str = "lazy") -> int | None:
    """Leaf count of a pruned size-biased BCGWT; None if censored."""
    n = _check_n(n)
    if method == "literal":
        return _literal_sb(n, rng, node_cap)
    seed, index = rng
    v = int(pruned_leafcounts(n, 1, seed, index, node_cap, size_biased=True)[0])
    return None if v < 0 else v


@dataclass(frozen=True)
class PrunedTreeSampler:
    """Sampler addressed by (seed, sample index)."""

    n: float
    size_biased: bool = False
    node_cap: int = DEFAULT_NODE_CAP
    method: str = "lazy"

    def batch(self, seed: int, start: int, count: int) -> np.ndarray:
        if self.method == "lazy":
            return pruned_leafcounts(self.n, count, seed, start, self.node_cap, self.size_biased)
        stream = STREAM_IDS["literal"] + (8 if self.size_biased else 0)
        fn = _literal_sb if self.size_biased else _literal_gw
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            v = fn(self.n, substream(seed, stream, start + i), self.node_cap)
            out[i] = CENSORED if v is None else v
        return out


# ---------------------------------------------------------------------------
# empirical laws and distances


@dataclass
class EmpiricalLaw:
    k_max: int
    counts: np.ndarray  # counts[k-1] for k = 1..k_max
    overflow: int
    N: int
    censored: int

    @property
    def effective(self) -> int:
        return self.N - self.censored

    def probabilities(self) -> np.ndarray:
        return self.counts / max(self.effective, 1)

    def merge(self, other: "EmpiricalLaw") -> "EmpiricalLaw":
        if other.k_max != self.k_max:
            raise DomainError("cannot merge laws with different k_max")
        return EmpiricalLaw(self.k_max, self.counts + other.counts, self.overflow + other.overflow, self.N + other.N, self.censored + other.censored)


def empirical_law_from_samples(samples, k_max: int) -> EmpiricalLaw:
    x = np.asarray(samples, dtype=np.int64)
    censored = int(np.sum(x < 0))
    good = x[x >= 1]
    counts = np.bincount(good[good <= k_max], minlength=k_max + 1)[1:]
    return EmpiricalLaw(int(k_max), counts, int(np.sum(good > k_max)), int(x.size), censored)


def empirical_law(sampler: Callable | PrunedTreeSampler, N: int, k_max: int, seed: int = 0, chunk: int = 50_000) -> EmpiricalLaw:
    """Histogram of N samples. ``sampler`` has ``batch(seed, start, count)`` or
    is a callable (seed, index) -> int | None."""
    if N < 1:
        raise DomainError("N must be >= 1")
    law = None
    for start in range(0, N, chunk):
        count = min(chunk, N - start)
        if hasattr(sampler, "batch"):
            x = sampler.batch(seed, start, count)
        else:
            x = np.array([CENSORED if (v := sampler(seed, start + i)) is None else v for i in range(count)])
        part = empirical_law_from_samples(x, k_max)
        law = part if law is None else law.merge(part)
    return law


def tv_distance(emp: EmpiricalLaw, exact) -> float:
    """Total variation on k <= k_max. The overflow mass on each side enters the
    half-sum as if it were fully disjoint; the censored fraction is added whole."""
    exact = np.asarray(exact, dtype=float)
    K = emp.k_max
    ex = np.zeros(K)
    m = min(K, exact.size)
    ex[:m] = exact[:m]
    ex_tail = max(0.0, 1.0 - float(ex.sum()))
    eff = max(emp.effective, 1)
    core = 0.5 * float(np.sum(np.abs(emp.counts / eff - ex)))
    return min(1.0, core + 0.5 * (emp.overflow / eff + ex_tail) + emp.censored / max(emp.N, 1))


def ks_distance(samples_or_emp, exact_cdf: Callable) -> float:
    """Kolmogorov-Smirnov statistic. Continuous samples are compared at every
    jump; an EmpiricalLaw is compared on k = 1..k_max with the overflow mass
    added in full."""
    if isinstance(samples_or_emp, EmpiricalLaw):
        emp = samples_or_emp
        k = np.arange(1, emp.k_max + 1)
        F_emp = np.cumsum(emp.probabilities())
        F_ex = np.asarray(exact_cdf(k), dtype=float)
        return float(np.max(np.abs(F_emp - F_ex))) + emp.overflow / max(emp.effective, 1)
    x = np.sort(np.asarray(samples_or_emp, dtype=float))
    N = x.size
    F = np.asarray(exact_cdf(x), dtype=float)
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))
