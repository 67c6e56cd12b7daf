"""Reduced words, Cayley balls and convolution operators for free groups.

Generators are indexed by integers; only the finite window touched by an
experiment is instantiated. The left regular representation is truncated to a
ball of reduced words: convolution from the sub-ball of radius R - p into the
full ball is exact, so its largest singular value is a certified lower bound
for the true operator norm.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import CapacityError, ConfigError, StructureError
from .linalg import DEFAULT_SEED, restricted_sigma_max

SPARSE_BALL = 10000
DEFAULT_MAX_BALL = 200000

Letter = tuple[int, int]  # (generator index, exponent +1 or -1)


@dataclass(frozen=True)
class ReducedWord:
    letters: tuple[Letter, ...]

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        return reduce_word(self.letters + other.letters)

    def inverse(self) -> "ReducedWord":
        return ReducedWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def shifted(self, k: int) -> "ReducedWord":
        return ReducedWord(tuple((g + k, e) for g, e in self.letters))

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        return " ".join(f"g{g}" if e == 1 else f"g{g}^-1" for g, e in self.letters)


IDENTITY = ReducedWord(())


def reduce_word(letters) -> ReducedWord:
    """Freely reduce a letter sequence by cancelling adjacent inverse pairs."""
    out: list[Letter] = []
    for g, e in letters:
        if e not in (1, -1):
            raise StructureError(f"exponent {e} is not +1 or -1")
        if out and out[-1][0] == g and out[-1][1] == -e:
            out.pop()
        else:
            out.append((g, e))
    return ReducedWord(tuple(out))


def word_length(w: ReducedWord) -> int:
    return len(w.letters)


_TOKEN = _re.compile(r"^g(-?\d+)(?:\^(-?\d+))?$")


def parse_word(text: str) -> ReducedWord:
    """Parse the literal syntax 'g0 g1^-1 g0' into a reduced word."""
    letters: list[Letter] = []
    for token in text.split():
        m = _TOKEN.match(token)
        if not m:
            raise ConfigError(f"cannot parse word token {token!r}")
        g = int(m.group(1))
        power = int(m.group(2)) if m.group(2) else 1
        sign = 1 if power >= 0 else -1
        letters.extend([(g, sign)] * abs(power))
    return reduce_word(letters)


class GroupFunction:
    """A finitely supported function on reduced words."""

    def __init__(self, terms: dict[ReducedWord, complex] | None = None):
        self.terms: dict[ReducedWord, complex] = {}
        for w, c in (terms or {}).items():
            if c != 0:
                self.terms[w] = self.terms.get(w, 0.0) + complex(c)

    @staticmethod
    def delta(w: ReducedWord, coeff: complex = 1.0) -> "GroupFunction":
        return GroupFunction({w: coeff})

    def __add__(self, other: "GroupFunction") -> "GroupFunction":
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return GroupFunction(out)

    def __rmul__(self, scalar: complex) -> "GroupFunction":
        return GroupFunction({w: scalar * c for w, c in self.terms.items()})

    def star(self) -> "GroupFunction":
        """f*(g) = conj(f(g^-1))."""
        return GroupFunction(
            {w.inverse(): np.conj(c) for w, c in self.terms.items()}
        )

    def ell2(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.terms.values())))

    def support_lengths(self) -> set[int]:
        return {word_length(w) for w in self.terms}

    def touched_generators(self) -> tuple[int, ...]:
        gens = {g for w in self.terms for g, _ in w.letters}
        return tuple(sorted(gens))


def convolve(f: GroupFunction, g: GroupFunction) -> GroupFunction:
    out: dict[ReducedWord, complex] = {}
    for wf, cf in f.terms.items():
        for wg, cg in g.terms.items():
            w = wf * wg
            out[w] = out.get(w, 0.0) + cf * cg
    return GroupFunction(out)


def trace_tau(f: GroupFunction) -> complex:
    """The canonical trace: the coefficient of the identity."""
    return complex(f.terms.get(IDENTITY, 0.0))


def rd_norm(f: GroupFunction, s: float) -> float:
    """Length-weighted ell2 norm (sum |f(g)|^2 (1 + |g|)^(2s))^(1/2)."""
    total = 0.0
    for w, c in f.terms.items():
        total += abs(c) ** 2 * (1.0 + word_length(w)) ** (2 * s)
    return float(np.sqrt(total))


def orbit_classify(h: ReducedWord) -> str:
    """Orbit type under the index shift: only the identity is fixed."""
    return "fixed" if not h.letters else "infinite"


def ball_size(num_generators: int, radius: int) -> int:
    """Number of reduced words of length at most radius over d generators."""
    d = num_generators
    if d == 0:
        return 1
    total = 1
    count = 1
    for ell in range(1, radius + 1):
        count = count * (2 * d - 1) if ell > 1 else 2 * d
        total += count
    return total


@dataclass(frozen=True)
class BallBasis:
    """Deterministic enumeration of the reduced words of length <= radius."""

    radius: int
    window: tuple[int, ...]
    words: tuple[ReducedWord, ...]
    index: dict

    def __len__(self) -> int:
        return len(self.words)


def build_ball(window, radius: int, max_size: int = DEFAULT_MAX_BALL) -> BallBasis:
    """Breadth-first enumeration: generator index ascending, +1 before -1."""
    window = tuple(sorted(set(window)))
    expected = ball_size(len(window), radius)
    if expected > max_size:
        raise CapacityError(
            f"ball of radius {radius} over {len(window)} generators has "
            f"{expected} words, above the cap {max_size}",
            required=expected,
        )
    alphabet: list[Letter] = [(g, e) for g in window for e in (1, -1)]
    words: list[ReducedWord] = [IDENTITY]
    frontier: list[ReducedWord] = [IDENTITY]
    for _ in range(radius):
        nxt: list[ReducedWord] = []
        for w in frontier:
            for g, e in alphabet:
                if w.letters and w.letters[-1] == (g, -e):
                    continue
                nxt.append(ReducedWord(w.letters + ((g, e),)))
        words.extend(nxt)
        frontier = nxt
    if len(words) != expected:
        raise StructureError(
            f"ball enumeration produced {len(words)} words, expected {expected}"
        )
    return BallBasis(
        radius=radius,
        window=window,
        words=tuple(words),
        index={w: i for i, w in enumerate(words)},
    )


def largest_feasible_radius(window, radius: int, max_size: int) -> int:
    """Largest r <= radius whose ball over the window fits under the cap."""
    d = len(set(window))
    r = radius
    while r > 0 and ball_size(d, r) > max_size:
        r -= 1
    return r


def convolution_operator(f: GroupFunction, basis: BallBasis):
    """Matrix of left convolution by f from the sub-ball of radius R - p.

    Left translation cannot push the sub-ball outside the full ball, so the
    matrix action is exact on its domain and every singular value is attained
    by the true operator. Returns (matrix, domain_radius, domain_size).
    """
    lengths = f.support_lengths()
    p = max(lengths) if lengths else 0
    if p > basis.radius:
        raise StructureError(
            f"support length {p} exceeds the ball radius {basis.radius}"
        )
    for g in f.touched_generators():
        if g not in basis.window:
            raise StructureError(f"generator g{g} outside the ball window")
    dom_radius = basis.radius - p
    dom = [i for i, w in enumerate(basis.words) if word_length(w) <= dom_radius]
    rows, cols, vals = [], [], []
    for col, i in enumerate(dom):
        g = basis.words[i]
        for h, c in f.terms.items():
            target = h * g
            rows.append(basis.index[target])
            cols.append(col)
            vals.append(c)
    shape = (len(basis.words), len(dom))
    if len(basis.words) > SPARSE_BALL:
        mat = sparse.csr_matrix((vals, (rows, cols)), shape=shape, dtype=complex)
    else:
        mat = np.zeros(shape, dtype=complex)
        for r, c, v in zip(rows, cols, vals):
            mat[r, c] += v
    return mat, dom_radius, len(dom)


@dataclass(frozen=True)
class GroupNormReport:
    label: str
    length: int
    radius: int
    effective_radius: int
    lower: float
    ell2: float
    upper: float

    @property
    def ratio(self) -> float:
        return self.lower / self.upper if self.upper > 0 else float("nan")


def haagerup_check(
    f: GroupFunction,
    radius: int,
    *,
    max_ball: int = DEFAULT_MAX_BALL,
    label: str = "f",
    seed: int = DEFAULT_SEED,
) -> GroupNormReport:
    """Certified lower bound against the (p+1) ell2 bound for homogeneous f.

    If the requested ball exceeds the capacity cap, the radius is lowered to
    the largest feasible one; the certified bound stays rigorous because it
    only restricts the domain further.
    """
    lengths = f.support_lengths()
    if len(lengths) != 1:
        raise StructureError(
            f"support must be length-homogeneous, got lengths {sorted(lengths)}"
        )
    p = lengths.pop()
    window = f.touched_generators()
    eff = largest_feasible_radius(window, radius, max_ball)
    if eff < p:
        raise CapacityError(
            f"no ball of radius >= {p} over {len(window)} generators fits "
            f"under the cap {max_ball}"
        )
    basis = build_ball(window, eff, max_ball)
    mat, _, _ = convolution_operator(f, basis)
    sigma, _ = restricted_sigma_max(mat, seed=seed)
    return GroupNormReport(
        label=label,
        length=p,
        radius=radius,
        effective_radius=eff,
        lower=float(sigma),
        ell2=f.ell2(),
        upper=(p + 1) * f.ell2(),
    )


def shift_average(h: ReducedWord, n: int) -> GroupFunction:
    """(1/n) sum of the first n index-shifted copies of delta_h."""
    if n < 1:
        raise StructureError("an average needs at least one term")
    out = GroupFunction()
    for k in range(n):
        out = out + GroupFunction.delta(h.shifted(k), 1.0 / n)
    return out


def shift_average_group(
    h: ReducedWord,
    n: int,
    radius: int,
    *,
    max_ball: int = DEFAULT_MAX_BALL,
    seed: int = DEFAULT_SEED,
) -> GroupNormReport:
    """Decay-curve entry for the shift average of a single group element."""
    if not h.letters:
        raise StructureError("the identity is fixed by the shift; no decay to probe")
    f = shift_average(h, n)
    return haagerup_check(
        f, radius, max_ball=max_ball, label=f"avg({h})[n={n}]", seed=seed
    )
