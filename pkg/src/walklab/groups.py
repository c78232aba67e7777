"""Finitely generated groups with decidable word problem and ball enumeration.

Each group family supplies an element representation together with a
canonical byte key (key equality holds exactly when the group elements are
equal), right generator actions, inverses, and composition.  Breadth-first
search over the generator actions produces a :class:`CayleyBall`: a dense
index structure with word-metric radii and generator-labelled adjacency that
the walk, profile and proof modules consume.

Index assignment is deterministic: within each BFS level, new elements are
indexed in sorted order of their canonical keys, so the output is independent
of expansion schedule.  Index 0 is always the identity.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import MemoryCapError
from .keycodec import encode_ints

BOUNDARY = -1  # in-memory sentinel; serialized as 2**64 - 1 on disk

DEFAULT_MEMORY_CAP = 2 << 30  # 2 GiB


# ---------------------------------------------------------------------------
# group engines
# ---------------------------------------------------------------------------


class ZdEngine:
    """Free abelian group Z^d; elements are integer coordinate tuples."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = d
        self.generators = []
        self.inverse_name = {}
        self._moves = {}
        for i in range(d):
            plus, minus = f"x{i + 1}+", f"x{i + 1}-"
            self.generators += [plus, minus]
            self.inverse_name[plus] = minus
            self.inverse_name[minus] = plus
            step = [0] * d
            step[i] = 1
            self._moves[plus] = tuple(step)
            step[i] = -1
            self._moves[minus] = tuple(step)

    def identity(self):
        return (0,) * self.d

    def apply(self, x, gen):
        m = self._moves[gen]
        return tuple(a + b for a, b in zip(x, m))

    def inverse(self, x):
        return tuple(-a for a in x)

    def compose(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def key(self, x) -> bytes:
        return encode_ints(x)


class FreeEngine:
    """Free group of given rank; elements are freely reduced words.

    Letters are signed ints: +i and -i are the i-th generator and inverse.
    """

    NAMES = "abcdefgh"

    def __init__(self, rank: int):
        if not 1 <= rank <= len(self.NAMES):
            raise ValueError("rank must be between 1 and 8")
        self.rank = rank
        self.generators = []
        self.inverse_name = {}
        self._letter = {}
        for i in range(rank):
            g, gi = self.NAMES[i], self.NAMES[i] + "-"
            self.generators += [g, gi]
            self.inverse_name[g] = gi
            self.inverse_name[gi] = g
            self._letter[g] = i + 1
            self._letter[gi] = -(i + 1)

    def identity(self):
        return ()

    def apply(self, x, gen):
        s = self._letter[gen]
        if x and x[-1] == -s:
            return x[:-1]
        return x + (s,)

    def inverse(self, x):
        return tuple(-s for s in reversed(x))

    def compose(self, x, y):
        out = list(x)
        for s in y:
            if out and out[-1] == -s:
                out.pop()
            else:
                out.append(s)
        return tuple(out)

    def key(self, x) -> bytes:
        return encode_ints(x)


class LamplighterEngine:
    """Wreath product Z_s wr Z^d ("lamplighter").

    Elements are ``(lamps, cursor)`` where ``lamps`` is a sorted tuple of
    ``(position, value)`` pairs with value in ``1..s-1`` and ``cursor`` is the
    walker position.  Positions are d-tuples of ints (plain ints for d=1
    internally stored as 1-tuples).  Walk generators move the cursor; the
    switch generator increments the lamp under the cursor mod s.  The switch
    is an involution exactly when s=2.
    """

    def __init__(self, lamp_order: int = 2, base_dim: int = 1):
        if lamp_order < 2:
            raise ValueError("lamp order must be >= 2")
        if base_dim < 1:
            raise ValueError("base dimension must be >= 1")
        self.s = lamp_order
        self.d = base_dim
        self.generators = []
        self.inverse_name = {}
        self._moves = {}
        for i in range(base_dim):
            plus = "t+" if base_dim == 1 else f"t{i + 1}+"
            minus = "t-" if base_dim == 1 else f"t{i + 1}-"
            self.generators += [plus, minus]
            self.inverse_name[plus] = minus
            self.inverse_name[minus] = plus
            step = [0] * base_dim
            step[i] = 1
            self._moves[plus] = tuple(step)
            step[i] = -1
            self._moves[minus] = tuple(step)
        self.generators.append("s")
        if lamp_order == 2:
            self.inverse_name["s"] = "s"
        else:
            self.generators.append("s-")
            self.inverse_name["s"] = "s-"
            self.inverse_name["s-"] = "s"

    def identity(self):
        return ((), (0,) * self.d)

    def _switch(self, x, delta):
        lamps, cur = x
        d = dict(lamps)
        v = (d.get(cur, 0) + delta) % self.s
        if v:
            d[cur] = v
        else:
            d.pop(cur, None)
        return (tuple(sorted(d.items())), cur)

    def apply(self, x, gen):
        if gen == "s":
            return self._switch(x, 1)
        if gen == "s-":
            return self._switch(x, -1)
        lamps, cur = x
        m = self._moves[gen]
        return (lamps, tuple(a + b for a, b in zip(cur, m)))

    def inverse(self, x):
        lamps, cur = x
        ncur = tuple(-a for a in cur)
        nl = tuple(
            sorted(
                (tuple(p - c for p, c in zip(pos, cur)), (-v) % self.s)
                for pos, v in lamps
            )
        )
        return (nl, ncur)

    def compose(self, x, y):
        (lx, cx), (ly, cy) = x, y
        d = dict(lx)
        for pos, v in ly:
            q = tuple(p + c for p, c in zip(pos, cx))
            nv = (d.get(q, 0) + v) % self.s
            if nv:
                d[q] = nv
            else:
                d.pop(q, None)
        return (tuple(sorted(d.items())), tuple(a + b for a, b in zip(cx, cy)))

    def key(self, x) -> bytes:
        lamps, cur = x
        flat = [len(lamps)]
        flat.extend(cur)
        for pos, v in lamps:
            flat.extend(pos)
            flat.append(v)
        return encode_ints(flat)


class HeisenbergEngine:
    """Discrete Heisenberg group: upper-triangular integer matrices.

    Element ``(a, b, c)`` stands for the matrix [[1,a,c],[0,1,b],[0,0,1]];
    the product rule is (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b').
    """

    def __init__(self):
        self.generators = ["x+", "x-", "y+", "y-"]
        self.inverse_name = {"x+": "x-", "x-": "x+", "y+": "y-", "y-": "y+"}
        self._gen_elem = {
            "x+": (1, 0, 0),
            "x-": (-1, 0, 0),
            "y+": (0, 1, 0),
            "y-": (0, -1, 0),
        }

    def identity(self):
        return (0, 0, 0)

    def compose(self, x, y):
        return (x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1])

    def apply(self, x, gen):
        return self.compose(x, self._gen_elem[gen])

    def inverse(self, x):
        a, b, c = x
        return (-a, -b, a * b - c)

    def key(self, x) -> bytes:
        return encode_ints(x)


# --- first Grigorchuk group -------------------------------------------------
#
# Generators a,b,c,d act on the rooted binary tree: a swaps the two subtrees,
# and the wreath recursions are b=(a,c), c=(a,d), d=(1,b).  All four are
# involutions and {1,b,c,d} is a Klein four-group.  Words are kept in the
# syllable normal form (aa -> 1, products inside {b,c,d} collapsed), and the
# canonical key of an element is its portrait with leaves in {1,a,b,c,d}:
# the recursion computes the root permutation and the two subtree sections,
# stopping as soon as the element equals one of the five leaf elements.  The
# stopping rule is semantic (tested by the word problem), which makes the key
# independent of the representing word.

_A, _B, _C, _D = 0, 1, 2, 3
_KLEIN = {
    (_B, _C): _D,
    (_C, _B): _D,
    (_B, _D): _C,
    (_D, _B): _C,
    (_C, _D): _B,
    (_D, _C): _B,
}
# section of each generator over subtree 0 / subtree 1 (None = identity)
_SECT = {_A: (None, None), _B: (_A, _C), _C: (_A, _D), _D: (None, _B)}


def _grig_reduce(word):
    out = []
    for g in word:
        if out and out[-1] == g:
            out.pop()
        elif out and out[-1] != _A and g != _A:
            out[-1] = _KLEIN[(out[-1], g)]
        else:
            out.append(g)
    return tuple(out)


def _grig_parity(word) -> int:
    return sum(1 for g in word if g == _A) & 1


def _grig_sections(word):
    """Both level-1 sections of a word (rightmost letter acts first)."""
    s0, s1 = [], []
    j0, j1 = 0, 1
    for g in reversed(word):
        if g == _A:
            j0, j1 = 1 - j0, 1 - j1
        else:
            sect = _SECT[g]
            t = sect[j0]
            if t is not None:
                s0.append(t)
            t = sect[j1]
            if t is not None:
                s1.append(t)
    s0.reverse()
    s1.reverse()
    return _grig_reduce(s0), _grig_reduce(s1)


def _grig_act(word, path):
    """Image of a binary string under the word's tree action."""
    for g in reversed(word):
        out = []
        cur = g
        for bit in path:
            if cur is None:
                out.append(bit)
                continue
            if cur == _A:
                out.append(1 - bit)
                cur = None
            else:
                out.append(bit)
                cur = _SECT[cur][bit]
        path = tuple(out)
    return path


_PATHS3 = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]


def _grig_signature3(word):
    return tuple(_grig_act(word, p) for p in _PATHS3)


_ID_SIG3 = tuple(_PATHS3)


@functools.lru_cache(maxsize=1 << 20)
def _grig_is_identity(word) -> bool:
    word = _grig_reduce(word)
    if not word:
        return True
    if len(word) == 1:
        return False
    if _grig_parity(word):
        return False
    if _grig_signature3(word) != _ID_SIG3:
        return False
    s0, s1 = _grig_sections(word)
    return _grig_is_identity(s0) and _grig_is_identity(s1)


_NUCLEUS = [(), (_A,), (_B,), (_C,), (_D,)]
_NUCLEUS_SIG3 = [_grig_signature3(w) for w in _NUCLEUS]


def _grig_nucleus_id(word):
    """Index into the nucleus {1,a,b,c,d} if the word equals one, else None."""
    sig = _grig_signature3(word)
    for i, nsig in enumerate(_NUCLEUS_SIG3):
        if sig == nsig and _grig_is_identity(word + _NUCLEUS[i]):
            return i  # nucleus elements are involutions, so w*x tests w == x
    return None


@functools.lru_cache(maxsize=1 << 20)
def _grig_key(word) -> bytes:
    word = _grig_reduce(word)
    nid = _grig_nucleus_id(word)
    if nid is not None:
        return bytes([nid])
    s0, s1 = _grig_sections(word)
    return b"(" + bytes([16 + _grig_parity(word)]) + _grig_key(s0) + _grig_key(s1) + b")"


class GrigorchukEngine:
    """First Grigorchuk group; elements carried as reduced witness words."""

    def __init__(self):
        self.generators = ["a", "b", "c", "d"]
        self.inverse_name = {g: g for g in self.generators}
        self._letter = {"a": _A, "b": _B, "c": _C, "d": _D}

    def identity(self):
        return ()

    def apply(self, x, gen):
        return _grig_reduce(x + (self._letter[gen],))

    def inverse(self, x):
        return tuple(reversed(x))  # generators are involutions

    def compose(self, x, y):
        return _grig_reduce(x + y)

    def key(self, x) -> bytes:
        return _grig_key(x)

    # exposed for the tree-action test oracle
    @staticmethod
    def act(x, path):
        return _grig_act(x, path)


# ---------------------------------------------------------------------------
# GroupSpec facade
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    """A group family instance: generators, involution pairing, and engine."""

    name: str
    engine: object
    generators: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.engine.generators))

    @property
    def degree(self) -> int:
        return len(self.generators)

    def inverse_generator(self, gen: str) -> str:
        return self.engine.inverse_name[gen]

    def identity(self):
        return self.engine.identity()

    def apply(self, x, gen: str):
        return self.engine.apply(x, gen)

    def inverse(self, x):
        return self.engine.inverse(x)

    def compose(self, x, y):
        return self.engine.compose(x, y)

    def key(self, x) -> bytes:
        return self.engine.key(x)

    def identity_key(self) -> bytes:
        return self.key(self.identity())


def z_lattice(d: int) -> GroupSpec:
    return GroupSpec(f"z:{d}", ZdEngine(d))


def free_group(rank: int) -> GroupSpec:
    return GroupSpec(f"free:{rank}", FreeEngine(rank))


def lamplighter(lamp_order: int = 2, base_dim: int = 1) -> GroupSpec:
    return GroupSpec(f"lamplighter:{lamp_order}:{base_dim}", LamplighterEngine(lamp_order, base_dim))


def heisenberg() -> GroupSpec:
    return GroupSpec("heisenberg", HeisenbergEngine())


def grigorchuk() -> GroupSpec:
    return GroupSpec("grigorchuk", GrigorchukEngine())


def parse_group(name: str) -> GroupSpec:
    """Build a GroupSpec from a CLI name like ``z:2`` or ``lamplighter:2:1``."""
    parts = name.split(":")
    kind = parts[0]
    if kind == "z":
        return z_lattice(int(parts[1]) if len(parts) > 1 else 1)
    if kind == "free":
        return free_group(int(parts[1]) if len(parts) > 1 else 2)
    if kind == "lamplighter":
        s = int(parts[1]) if len(parts) > 1 else 2
        d = int(parts[2]) if len(parts) > 2 else 1
        return lamplighter(s, d)
    if kind == "heisenberg":
        return heisenberg()
    if kind == "grigorchuk":
        return grigorchuk()
    raise ValueError(f"unknown group name: {name!r}")


def canonical_key(group: GroupSpec, word) -> bytes:
    """Canonical key of the element given by a sequence of generator ids."""
    x = group.identity()
    for gen in word:
        x = group.apply(x, gen)
    return group.key(x)


# ---------------------------------------------------------------------------
# ball enumeration
# ---------------------------------------------------------------------------


@dataclass
class CayleyBall:
    """BFS-enumerated ball of a Cayley graph with dense indexing.

    ``adjacency[i, j]`` is the index of element i multiplied on the right by
    generator j, or BOUNDARY when the product lies outside the ball.
    ``elements`` holds the engine representations (None for balls loaded from
    disk, which carry adjacency and radii only).
    """

    group: GroupSpec
    radius: int
    size: int
    key_to_index: dict
    radii: np.ndarray
    adjacency: np.ndarray
    elements: list | None = None
    _gen_cache: dict = field(default_factory=dict, repr=False)

    def index_of_key(self, key: bytes):
        return self.key_to_index.get(key)

    def element(self, i: int):
        if self.elements is None:
            raise ValueError("ball loaded without element representations")
        return self.elements[i]

    def inverse_index(self, i: int) -> int:
        """Index of the group inverse of element i (must lie in the ball)."""
        inv = self.group.inverse(self.element(i))
        j = self.key_to_index.get(self.group.key(inv))
        if j is None:
            raise ValueError("inverse lies outside the ball")
        return j

    def generator_arrays(self, j: int):
        """Cached (sources, targets, escaping) index arrays for generator j."""
        hit = self._gen_cache.get(j)
        if hit is None:
            col = self.adjacency[:, j]
            inside = col != BOUNDARY
            src = np.nonzero(inside)[0]
            hit = (src, col[src].astype(np.int64), np.nonzero(~inside)[0])
            self._gen_cache[j] = hit
        return hit

    def interior_mask(self) -> np.ndarray:
        """True for vertices with no BOUNDARY neighbour."""
        return (self.adjacency != BOUNDARY).all(axis=1)

    def growth_counts(self) -> np.ndarray:
        """Cumulative ball sizes Gr(0..R) from the radii array."""
        per_level = np.bincount(self.radii, minlength=self.radius + 1)
        return np.cumsum(per_level)


def enumerate_ball(group: GroupSpec, R: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> CayleyBall:
    """Enumerate the radius-R ball around the identity.

    Raises MemoryCapError when the predicted footprint (adjacency plus radii)
    exceeds ``memory_cap`` bytes.  Index order is schedule-independent: levels
    are assigned in sorted canonical-key order.
    """
    if R < 0:
        raise ValueError("radius must be >= 0")
    gens = group.generators
    ns = len(gens)
    per_elem_bytes = ns * 8 + 4

    ident = group.identity()
    key_to_index: dict = {group.key(ident): 0}
    elements = [ident]
    level_start = [0, 1]  # index range of each BFS level
    adjacency_rows: list = []

    level = [0]
    for r in range(R + 1):
        pending = {}  # neighbor key -> element, discovered at level r+1
        rows = {}
        for i in level:
            x = elements[i]
            row = np.empty(ns, dtype=np.int64)
            for j, g in enumerate(gens):
                y = group.apply(x, g)
                ky = group.key(y)
                idx = key_to_index.get(ky)
                if idx is not None:
                    row[j] = idx
                else:
                    row[j] = BOUNDARY  # provisional; fixed up below if r < R
                    if r < R and ky not in pending:
                        pending[ky] = y
            rows[i] = row
        adjacency_rows.append(rows)
        if r == R:
            break
        next_level = []
        for ky in sorted(pending):
            idx = len(elements)
            key_to_index[ky] = idx
            elements.append(pending[ky])
            next_level.append(idx)
        if len(elements) * per_elem_bytes > memory_cap:
            raise MemoryCapError(
                f"ball would exceed memory cap: {len(elements)} states so far, "
                f"cap {memory_cap} bytes"
            )
        # resolve provisional BOUNDARY entries that landed in the new level
        for i in level:
            x = elements[i]
            row = rows[i]
            for j, g in enumerate(gens):
                if row[j] == BOUNDARY:
                    ky = group.key(group.apply(x, g))
                    idx = key_to_index.get(ky)
                    if idx is not None:
                        row[j] = idx
        if not next_level:
            level_start.append(len(elements))
            break  # finite group exhausted before reaching R
        level = next_level
        level_start.append(len(elements))

    n = len(elements)
    adjacency = np.full((n, ns), BOUNDARY, dtype=np.int64)
    for rows in adjacency_rows:
        for i, row in rows.items():
            adjacency[i] = row
    radii = np.zeros(n, dtype=np.uint32)
    for r in range(1, len(level_start) - 1):
        radii[level_start[r] : level_start[r + 1]] = r

    return CayleyBall(
        group=group,
        radius=R,
        size=n,
        key_to_index=key_to_index,
        radii=radii,
        adjacency=adjacency,
        elements=elements,
    )


def growth_table(group: GroupSpec, r_max: int, memory_cap: int = DEFAULT_MEMORY_CAP):
    """Table of (r, Gr(r)) for r = 0..r_max; Gr(r) = points in the r-ball."""
    ball = enumerate_ball(group, r_max, memory_cap=memory_cap)
    counts = ball.growth_counts()
    return [(r, int(counts[r])) for r in range(min(r_max, len(counts) - 1) + 1)]


def uniform_weights(group: GroupSpec) -> dict[str, Fraction]:
    """Unit generator weights 1/|S| (simple random walk)."""
    w = Fraction(1, group.degree)
    return {g: w for g in group.generators}
