"""Clique bookkeeping and the reduction loop that grows them.

The solve state is a family of node sets ("cliques"), each carrying a lazily
computed face basis.  Four steps shrink the family or grow a clique, tried
in priority order:

  1. rigid clique union      -- two cliques sharing >= r+1 nodes
  2. rigid node absorption   -- a node adjacent to >= r+1 nodes of a clique
  3. singular clique union   -- two cliques sharing exactly r nodes
  4. singular node absorption-- a node adjacent to exactly r clique nodes

The singular steps produce two candidate realizations and commit only when
exactly one survives the feasibility test against the known distances.

The loop processes cliques by ascending id.  The clique under consideration
(the "grower") keeps incremental overlap counters: cnt[l] is the number of
shared nodes with clique l, acnt[w] the number of grower nodes adjacent to
the outside node w, both updated as nodes arrive, so candidate search never
rescans the whole family.  Partner choice is by descending overlap, ties by
ascending id.  Failed attempts are remembered together with the counter
value they failed at and retried only after it changes.  Merged ids forward
to their absorber through an alias table so membership sets can be cleaned
lazily.
"""

from __future__ import annotations

from collections import Counter
from enum import IntEnum

import numpy as np

from .edm_core import eigh_descending, kappa_pinv, significant_rank
from .errors import (
    IntersectionRankLoss,
    InvalidConfig,
    NoRealBranch,
    NoRigidSeed,
    NotAClique,
    RangeMismatch,
    RankDeficient,
)
from .faces import (
    FaceRep,
    Tolerances,
    face_from_clique,
    face_from_gram,
    face_from_points,
    intersect_faces_nonrigid,
    intersect_faces_rigid,
)
from .recovery import points_from_face, two_completions

__all__ = [
    "StepLevel",
    "CliqueFamily",
    "init_family",
    "grow_cliques",
    "rigid_clique_union",
    "rigid_node_absorption",
    "nonrigid_clique_union",
    "nonrigid_node_absorption",
    "run",
]


class StepLevel(IntEnum):
    """Which reduction steps are enabled; each level includes the previous."""

    L1 = 1  # rigid clique unions only
    L2 = 2  # + rigid node absorption
    L3 = 3  # + singular clique union
    L4 = 4  # + singular node absorption


_MISSING = object()

STEP_RIGID_UNION = "rigid_union"
STEP_RIGID_ABSORB = "rigid_absorb"
STEP_NONRIGID_UNION = "nonrigid_union"
STEP_NONRIGID_ABSORB = "nonrigid_absorb"


class CliqueFamily:
    """Mutable family of active cliques with lazy face representations."""

    def __init__(self, pedm):
        self.pedm = pedm
        self.dim = pedm.dim
        self.cliques: dict[int, set[int]] = {}
        self.faces: dict[int, FaceRep | None] = {}
        self.membership: list[set[int]] = [set() for _ in range(pedm.n)]
        self.alias: dict[int, int] = {}
        self.active: set[int] = set()
        self.anchor_clique_id: int | None = None
        self.step_counts: Counter = Counter()
        self._next_id = 0
        self._comp_cache: dict[int, tuple] = {}

    # -- id and membership management ------------------------------------

    def add_clique(self, nodes) -> int:
        cid = self._next_id
        self._next_id += 1
        nodes = set(int(u) for u in nodes)
        self.cliques[cid] = nodes
        self.active.add(cid)
        for u in nodes:
            self.membership[u].add(cid)
        return cid

    def find(self, cid: int) -> int:
        """Canonical id of a clique; merged ids forward to their absorber."""
        alias = self.alias
        root = cid
        while root in alias:
            root = alias[root]
        while cid != root:
            alias[cid], cid = root, alias[cid]
        return root

    def node_cliques(self, u: int) -> set[int]:
        """Active clique ids containing node u (cleans stale entries)."""
        ids = self.membership[u]
        if any(c in self.alias for c in ids):
            ids = {self.find(c) for c in ids}
            self.membership[u] = ids
        return ids

    def _kill_into(self, dead: int, survivor: int) -> None:
        self.alias[dead] = survivor
        self.active.discard(dead)
        self.cliques.pop(dead, None)
        self.faces.pop(dead, None)
        self._comp_cache.pop(dead, None)

    # -- lazy faces and point representations ----------------------------

    def face_of(self, cid: int, tol: Tolerances) -> FaceRep | None:
        """Face basis of a clique, computed on first use; None if degenerate."""
        cached = self.faces.get(cid, _MISSING)
        if cached is not _MISSING:
            return cached
        try:
            face = face_from_clique(self.pedm, self.cliques[cid], self.dim, tol)
        except (RankDeficient, NotAClique):
            face = None
        self.faces[cid] = face
        return face

    def completion_of(self, cid: int, tol: Tolerances):
        """Coordinates for a clique's nodes, cached per face object."""
        face = self.face_of(cid, tol)
        if face is None:
            return None
        cached = self._comp_cache.get(cid)
        if cached is not None and cached[0] is face:
            return cached[1]
        try:
            comp = points_from_face(face, self.pedm, tol)
        except (NoRigidSeed, RankDeficient):
            comp = None
        self._comp_cache[cid] = (face, comp)
        return comp

    def positioned_count(self) -> int:
        if self.anchor_clique_id is None:
            return 0
        cid = self.find(self.anchor_clique_id)
        if cid not in self.cliques:
            return 0
        return len(self.cliques[cid]) - self.pedm.m

    def check_consistency(self) -> None:
        """Assert the membership index inverts the clique map (test helper)."""
        inverse = [set() for _ in range(self.pedm.n)]
        for cid in self.active:
            for u in self.cliques[cid]:
                inverse[u].add(cid)
        for u in range(self.pedm.n):
            assert self.node_cliques(u) == inverse[u], f"membership broken at {u}"


def init_family(pedm, seeds, m: int) -> CliqueFamily:
    """Family from clique seeds, deduplicated, plus the anchor clique.

    Every node must be covered by some seed (singleton seeds are a valid
    fallback).  The m anchors form one additional clique; if a seed already
    equals the anchor set, that clique doubles as the anchor clique.
    """
    family = CliqueFamily(pedm)
    seen: dict[tuple, int] = {}
    covered = np.zeros(pedm.n, dtype=bool)
    for seed in seeds:
        key = tuple(sorted(seed.members))
        if key not in seen:
            seen[key] = family.add_clique(key)
        covered[list(key)] = True
    for u in np.flatnonzero(~covered):
        key = (int(u),)
        if key not in seen:
            seen[key] = family.add_clique(key)
    if m > 0:
        anchors = tuple(range(pedm.n - m, pedm.n))
        family.anchor_clique_id = seen.get(anchors)
        if family.anchor_clique_id is None:
            family.anchor_clique_id = family.add_clique(anchors)
    return family


def grow_cliques(family: CliqueFamily, pedm, max_size: int) -> None:
    """Greedily extend every clique with nodes adjacent to all its members."""
    if max_size <= family.dim + 1:
        raise InvalidConfig(f"max_size must exceed r+1, got {max_size}")
    for cid in sorted(family.active):
        nodes = family.cliques[cid]
        if len(nodes) >= max_size:
            continue
        base = min(nodes, key=lambda u: len(pedm.adj[u]))
        cand = set(pedm.adj[base]) - nodes
        for u in nodes:
            if u != base:
                cand &= pedm.adj[u].keys()
        while len(nodes) < max_size and cand:
            j = min(cand)
            nodes.add(j)
            family.membership[j].add(cid)
            cand.discard(j)
            cand &= pedm.adj[j].keys()


# -- the four reduction steps ---------------------------------------------


def rigid_clique_union(family: CliqueFamily, i: int, j: int, tol: Tolerances) -> bool:
    """Merge cliques i and j when their overlap spans full dimension.

    On success the union keeps id i, j forwards to i, and i's face becomes
    the intersection of the two faces.  Any failure (degenerate overlap,
    mismatched subspaces, missing face) leaves the family untouched.
    """
    i, j = family.find(i), family.find(j)
    if i == j or i not in family.active or j not in family.active:
        return False
    r = family.dim
    Ci, Cj = family.cliques[i], family.cliques[j]
    small, big = (Ci, Cj) if len(Ci) <= len(Cj) else (Cj, Ci)
    overlap = sum(1 for u in small if u in big)
    if overlap < r + 1:
        return False
    if overlap == len(Cj):
        # Cj adds no nodes; keep i's face untouched
        family._kill_into(j, i)
        family.step_counts[STEP_RIGID_UNION] += 1
        return True
    if overlap == len(Ci):
        # i is contained in j: adopt j's node set and face state
        face_j = family.faces.pop(j, _MISSING)
        Ci.update(Cj)
        family._kill_into(j, i)
        self_faces = family.faces
        if face_j is _MISSING:
            self_faces.pop(i, None)
        else:
            self_faces[i] = face_j
        family._comp_cache.pop(i, None)
        family.step_counts[STEP_RIGID_UNION] += 1
        return True
    f1 = family.face_of(i, tol)
    f2 = family.face_of(j, tol)
    if f1 is None or f2 is None:
        return False
    try:
        merged = intersect_faces_rigid(f1, f2, tol)
    except (IntersectionRankLoss, RangeMismatch):
        return False
    Ci.update(Cj)
    family.faces[i] = merged
    family._kill_into(j, i)
    family.step_counts[STEP_RIGID_UNION] += 1
    return True


def _mixed_submatrix(family: CliqueFamily, cid: int, nodes: list, tol: Tolerances):
    """Dense squared distances over ``nodes``: measured entries where known,
    synthesized from clique cid's point representation otherwise.

    Synthesized values are ephemeral; they are never written back into the
    measured data.  Returns None when a missing pair cannot be synthesized.
    """
    pedm = family.pedm
    k = len(nodes)
    D = np.zeros((k, k))
    missing = []
    for a in range(k):
        row = pedm.adj[nodes[a]]
        for b in range(a + 1, k):
            v = row.get(nodes[b])
            if v is None:
                missing.append((a, b))
            else:
                D[a, b] = D[b, a] = v
    if missing:
        Ci = family.cliques[cid]
        if any(nodes[a] not in Ci or nodes[b] not in Ci for a, b in missing):
            return None
        comp = family.completion_of(cid, tol)
        if comp is None:
            return None
        inside = np.asarray(sorted(u for u in nodes if u in Ci))
        pos = dict(zip(inside.tolist(), comp.coords[comp.rows(inside)]))
        for a, b in missing:
            diff = pos[nodes[a]] - pos[nodes[b]]
            D[a, b] = D[b, a] = float(diff @ diff)
    return D


def rigid_node_absorption(family: CliqueFamily, i: int, j: int, tol: Tolerances) -> bool:
    """Absorb node j into clique i when j is adjacent to >= r+1 of its nodes.

    The adjacent nodes plus j form a temporary clique (missing distances
    among them are synthesized from i's point representation); its face is
    intersected with i's face exactly like a rigid union.
    """
    i = family.find(i)
    if i not in family.active:
        return False
    pedm = family.pedm
    r = family.dim
    Ci = family.cliques[i]
    if j in Ci:
        return False
    beta = sorted(u for u in pedm.adj[j] if u in Ci)
    if len(beta) < r + 1:
        return False
    f1 = family.face_of(i, tol)
    if f1 is None:
        return False
    temp_nodes = sorted(beta + [j])
    D = _mixed_submatrix(family, i, temp_nodes, tol)
    if D is None:
        return False
    try:
        f2 = face_from_gram(np.asarray(temp_nodes), kappa_pinv(D), r, tol)
        merged = intersect_faces_rigid(f1, f2, tol)
    except (RankDeficient, IntersectionRankLoss, RangeMismatch):
        return False
    Ci.add(j)
    family.faces[i] = merged
    family.membership[j].add(i)
    family.step_counts[STEP_RIGID_ABSORB] += 1
    return True


def _pick_delta(comp, beta: list, r: int, tol: Tolerances):
    """Choose a small full-dimensional subset delta containing beta.

    Extra nodes are picked greedily, each maximizing its minimum squared
    distance to the nodes already chosen (ties to the smaller id), until the
    subset's Gram matrix has rank r; about r+2 extras are targeted when the
    clique has that many to spare.  Returns (sorted delta, its dense
    squared-distance matrix) or None.
    """
    beta_set = set(beta)
    mask = np.array([int(u) not in beta_set for u in comp.nodes])
    others = comp.nodes[mask].astype(int)
    if others.size == 0:
        return None
    coords = comp.coords
    rows = {int(u): a for a, u in enumerate(comp.nodes)}
    pts = coords[mask]
    beta_pts = coords[[rows[u] for u in beta]]
    dmin = np.min(
        ((pts[:, None, :] - beta_pts[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    available = np.ones(others.size, dtype=bool)
    picked: list[int] = []
    target = min(others.size, r + 2)
    limit = min(others.size, 2 * (r + 2))
    while len(picked) < limit:
        idx = int(np.argmax(np.where(available, dmin, -1.0)))
        available[idx] = False
        picked.append(int(others[idx]))
        dmin = np.minimum(dmin, ((pts - pts[idx]) ** 2).sum(axis=1))
        if len(picked) < target:
            continue
        delta = sorted(list(beta) + picked)
        P = coords[[rows[u] for u in delta]]
        X = P - P.mean(axis=0)
        vals = eigh_descending(X @ X.T).values
        if significant_rank(vals, tol.rank) == r:
            D = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
            return delta, D
    return None


def _is_feasible(comp, pedm, tol: Tolerances) -> bool:
    """Candidate coordinates must reproduce every known distance among the
    candidate's nodes; optionally, unknown pairs must stay out of range."""
    nodes = comp.nodes
    coords = comp.coords
    idx = {int(u): a for a, u in enumerate(nodes)}
    sigma = pedm.noise_factor
    for u, a in idx.items():
        pu = coords[a]
        for v, d2 in pedm.adj[u].items():
            if v > u and v in idx:
                diff = pu - coords[idx[v]]
                if abs(float(diff @ diff) - d2) > tol.feas_tol + 6.0 * sigma * d2:
                    return False
    if tol.use_range_bounds:
        R2 = pedm.radio_range ** 2
        slack = tol.feas_tol + 6.0 * sigma * R2
        k = nodes.size
        for a in range(k):
            u = int(nodes[a])
            row = pedm.adj[u]
            for b in range(a + 1, k):
                v = int(nodes[b])
                if v not in row:
                    diff = coords[a] - coords[b]
                    if float(diff @ diff) < R2 - slack:
                        return False
    return True


def nonrigid_clique_union(
    family: CliqueFamily, i: int, j: int, pedm, tol: Tolerances
) -> bool:
    """Merge cliques sharing exactly r nodes, when the branch is unique.

    Builds the widened intersection face, computes the two candidate point
    sets, and commits only if exactly one reproduces all known distances
    among the union.  The committed face is rebuilt from the feasible points.
    """
    i, j = family.find(i), family.find(j)
    if i == j or i not in family.active or j not in family.active:
        return False
    r = family.dim
    Ci, Cj = family.cliques[i], family.cliques[j]
    small, big = (Ci, Cj) if len(Ci) <= len(Cj) else (Cj, Ci)
    beta = sorted(u for u in small if u in big)
    if len(beta) != r:
        return False
    f1 = family.face_of(i, tol)
    f2 = family.face_of(j, tol)
    if f1 is None or f2 is None:
        return False
    try:
        ext = intersect_faces_nonrigid(f1, f2, tol)
    except (IntersectionRankLoss, RangeMismatch):
        return False
    comp_i = family.completion_of(i, tol)
    comp_j = family.completion_of(j, tol)
    if comp_i is None or comp_j is None:
        return False
    sel1 = _pick_delta(comp_i, beta, r, tol)
    sel2 = _pick_delta(comp_j, beta, r, tol)
    if sel1 is None or sel2 is None:
        return False
    try:
        cands = two_completions(
            ext, pedm, sel1[0], sel2[0], tol, d1=sel1[1], d2=sel2[1]
        )
    except (RankDeficient, NoRealBranch, NotAClique):
        return False
    feasible = [c for c in cands if _is_feasible(c, pedm, tol)]
    if len(feasible) != 1:
        return False
    try:
        newface = face_from_points(ext.nodes, feasible[0].coords, tol)
    except RankDeficient:
        return False
    Ci.update(Cj)
    family.faces[i] = newface
    family._kill_into(j, i)
    family.step_counts[STEP_NONRIGID_UNION] += 1
    return True


def nonrigid_node_absorption(
    family: CliqueFamily, i: int, j: int, pedm, tol: Tolerances
) -> bool:
    """Absorb node j adjacent to exactly r nodes of clique i, if unambiguous.

    The r neighbors span only r-1 dimensions, so j has two mirror-image
    placements; j is absorbed when exactly one is consistent with the known
    distances (and the range bounds, when enabled).
    """
    i = family.find(i)
    if i not in family.active:
        return False
    r = family.dim
    Ci = family.cliques[i]
    if j in Ci:
        return False
    beta = sorted(u for u in pedm.adj[j] if u in Ci)
    if len(beta) != r:
        return False
    f1 = family.face_of(i, tol)
    if f1 is None:
        return False
    temp_nodes = sorted(beta + [j])
    Dtemp = _mixed_submatrix(family, i, temp_nodes, tol)
    if Dtemp is None:
        return False
    bpos = [temp_nodes.index(u) for u in beta]
    Bbeta = kappa_pinv(Dtemp[np.ix_(bpos, bpos)])
    if significant_rank(eigh_descending(Bbeta).values, tol.rank) != r - 1:
        return False
    try:
        f2 = face_from_gram(np.asarray(temp_nodes), kappa_pinv(Dtemp), r, tol)
        ext = intersect_faces_nonrigid(f1, f2, tol)
    except (RankDeficient, IntersectionRankLoss, RangeMismatch):
        return False
    comp_i = family.completion_of(i, tol)
    if comp_i is None:
        return False
    sel1 = _pick_delta(comp_i, beta, r, tol)
    if sel1 is None:
        return False
    try:
        cands = two_completions(
            ext, pedm, sel1[0], temp_nodes, tol, d1=sel1[1], d2=Dtemp
        )
    except (RankDeficient, NoRealBranch, NotAClique):
        return False
    feasible = [c for c in cands if _is_feasible(c, pedm, tol)]
    if len(feasible) != 1:
        return False
    try:
        newface = face_from_points(ext.nodes, feasible[0].coords, tol)
    except RankDeficient:
        return False
    Ci.add(j)
    family.faces[i] = newface
    family.membership[j].add(i)
    family.step_counts[STEP_NONRIGID_ABSORB] += 1
    return True


# -- the reduction loop -----------------------------------------------------


def _exhaust_grower(family, gid, level, tol, trace) -> bool:
    """Apply every enabled step to clique gid until none applies.

    Within the grower's turn the step priority is exact: a union is always
    preferred over an absorption, and rigid steps over singular ones.  Only
    the grower mutates, so opportunities between other cliques are
    unaffected and get their turn later in the pass.
    """
    pedm = family.pedm
    r = family.dim
    Ci = family.cliques[gid]
    cnt: dict[int, int] = {}
    for u in Ci:
        for c in family.node_cliques(u):
            if c != gid:
                cnt[c] = cnt.get(c, 0) + 1
    acnt: dict[int, int] | None = None
    failed_u: dict[int, int] = {}
    failed_a: dict[int, int] = {}
    failed_nu: dict[int, tuple[int, int]] = {}
    failed_na: dict[int, tuple[int, int]] = {}
    changed = False

    def log(step, other):
        if trace is not None:
            trace.write(
                f"step={step} i={gid} j={other} |C|={len(family.active)} "
                f"positioned={family.positioned_count()}\n"
            )

    def register_nodes(new_nodes):
        nonlocal acnt
        for u in new_nodes:
            for c in family.node_cliques(u):
                if c != gid:
                    cnt[c] = cnt.get(c, 0) + 1
            if acnt is not None:
                acnt.pop(u, None)
                for w in pedm.adj[u]:
                    if w not in Ci:
                        acnt[w] = acnt.get(w, 0) + 1

    while True:
        # 1: rigid clique union
        best = None
        for l, c in cnt.items():
            if c >= r + 1 and failed_u.get(l) != c:
                key = (c, -l)
                if best is None or key > best[0]:
                    best = (key, l)
        if best is not None:
            l = best[1]
            new_nodes = [u for u in family.cliques[l] if u not in Ci]
            if rigid_clique_union(family, gid, l, tol):
                for cache in (failed_u, failed_nu):
                    cache.pop(l, None)
                cnt.pop(l, None)
                register_nodes(new_nodes)
                changed = True
                log(STEP_RIGID_UNION, l)
            else:
                failed_u[l] = cnt[l]
            continue
        # 2: rigid node absorption
        if level >= StepLevel.L2:
            if acnt is None:
                acnt = {}
                for u in Ci:
                    for w in pedm.adj[u]:
                        if w not in Ci:
                            acnt[w] = acnt.get(w, 0) + 1
            best = None
            for w, c in acnt.items():
                if c >= r + 1 and failed_a.get(w) != c:
                    key = (c, -w)
                    if best is None or key > best[0]:
                        best = (key, w)
            if best is not None:
                w = best[1]
                if rigid_node_absorption(family, gid, w, tol):
                    failed_a.pop(w, None)
                    failed_na.pop(w, None)
                    register_nodes([w])
                    changed = True
                    log(STEP_RIGID_ABSORB, w)
                else:
                    failed_a[w] = acnt[w]
                continue
        # 3: singular clique union
        if level >= StepLevel.L3:
            best = None
            size = len(Ci)
            for l, c in cnt.items():
                if c == r and failed_nu.get(l) != (c, size):
                    if best is None or l < best:
                        best = l
            if best is not None:
                l = best
                new_nodes = [u for u in family.cliques[l] if u not in Ci]
                if nonrigid_clique_union(family, gid, l, pedm, tol):
                    for cache in (failed_u, failed_nu):
                        cache.pop(l, None)
                    cnt.pop(l, None)
                    register_nodes(new_nodes)
                    changed = True
                    log(STEP_NONRIGID_UNION, l)
                else:
                    failed_nu[l] = (cnt[l], size)
                continue
        # 4: singular node absorption
        if level >= StepLevel.L4:
            if acnt is None:
                acnt = {}
                for u in Ci:
                    for w in pedm.adj[u]:
                        if w not in Ci:
                            acnt[w] = acnt.get(w, 0) + 1
            best = None
            size = len(Ci)
            for w, c in acnt.items():
                if c == r and failed_na.get(w) != (c, size):
                    if best is None or w < best:
                        best = w
            if best is not None:
                w = best
                if nonrigid_node_absorption(family, gid, w, pedm, tol):
                    failed_a.pop(w, None)
                    failed_na.pop(w, None)
                    register_nodes([w])
                    changed = True
                    log(STEP_NONRIGID_ABSORB, w)
                else:
                    failed_na[w] = (acnt[w], size)
                continue
        break
    return changed


def _run_to_fixed_point(family, level, tol, trace) -> None:
    while True:
        changed = False
        for gid in sorted(family.active):
            if gid in family.alias or gid not in family.active:
                continue
            if _exhaust_grower(family, gid, level, tol, trace):
                changed = True
        if not changed:
            break


def run(
    family: CliqueFamily,
    pedm,
    level: StepLevel = StepLevel.L2,
    tol: Tolerances | None = None,
    trace=None,
) -> CliqueFamily:
    """Run enabled reduction steps to a fixed point.

    Passes over cliques by ascending id repeat until one full pass changes
    nothing.  Deterministic for a fixed family and data.  pedm must be the
    same data the family was built from.

    Merging runs in two phases.  The first defers merges whose common block
    is too ill conditioned (tol.invert_floor), which keeps the error of long
    merge chains near round-off.  A second phase with the conditioning guard
    disabled then picks up the deferred merges; by that point both sides are
    as large as they will get, so the amplified error cannot compound
    further.
    """
    if tol is None:
        tol = Tolerances.for_noise(pedm.noise_factor)
    level = StepLevel(level)
    _run_to_fixed_point(family, level, tol, trace)
    if tol.invert_floor > 0.0:
        from dataclasses import replace

        _run_to_fixed_point(family, level, replace(tol, invert_floor=0.0), trace)
    return family
