"""Sparse multimode Fock states and the linear-optical elements acting on them.

A mode is identified by its spatial path, polarization and OAM index.  Every
element is a linear map on creation operators; it is applied to a basis state
by expanding ``prod_k (sum_j U_jk a_j^dag)^{n_k} / sqrt(n_k!)`` and
re-normalizing the resulting monomials.  Loss is modelled unitarily by routing
photons into dedicated loss paths, so marginal probabilities stay exact.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence

from . import DomainError

#: Sparse-term pruning threshold on amplitude magnitude.
AMPLITUDE_CUTOFF = 1e-15

NORM_TOL = 1e-9

POLARIZATIONS = ("H", "V")


class ModeLabel(NamedTuple):
    path: str
    polarization: str = "H"
    oam: int = 0


class BasisState(tuple):
    """Canonical, hashable occupation list: sorted ``(ModeLabel, n)`` pairs, n > 0."""

    __slots__ = ()

    def __new__(cls, occupations: Mapping | Iterable = ()):
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        merged: dict = defaultdict(int)
        for mode, n in items:
            if n < 0:
                raise DomainError(f"negative occupation {n} for {mode}")
            mode = ModeLabel(*mode)
            if mode.polarization not in POLARIZATIONS:
                raise DomainError(f"unknown polarization {mode.polarization!r}")
            merged[mode] += int(n)
        return tuple.__new__(cls, sorted((m, n) for m, n in merged.items() if n))

    @classmethod
    def _from_sorted(cls, pairs):
        return tuple.__new__(cls, pairs)

    def occupation(self, mode: ModeLabel) -> int:
        for m, n in self:
            if m == mode:
                return n
        return 0

    def on_path(self, path: str) -> int:
        return sum(n for m, n in self if m.path == path)

    @property
    def photons(self) -> int:
        return sum(n for _, n in self)

    @property
    def modes(self) -> tuple:
        return tuple(m for m, _ in self)

    def as_dict(self) -> dict:
        return dict(self)

    def __repr__(self):
        body = ", ".join(f"{n}_{m.path}{m.polarization}{m.oam:+d}" for m, n in self)
        return f"|{body}>"


def fock(*occupations) -> BasisState:
    """Shorthand: ``fock((mode, n), ...)`` or ``fock({mode: n})``."""
    if len(occupations) == 1 and isinstance(occupations[0], Mapping):
        return BasisState(occupations[0])
    return BasisState(occupations)


class Ket:
    """Sparse superposition of basis states.  Treated as immutable."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        for state, amp in (terms or {}).items():
            if not isinstance(state, BasisState):
                state = BasisState(state)
            amp = complex(amp)
            if abs(amp) >= AMPLITUDE_CUTOFF:
                clean[state] = clean.get(state, 0j) + amp
        self.terms = {s: a for s, a in clean.items() if abs(a) >= AMPLITUDE_CUTOFF}

    @classmethod
    def vacuum(cls) -> "Ket":
        return cls({BasisState(): 1.0})

    @classmethod
    def basis(cls, state: BasisState | Mapping, amplitude: complex = 1.0) -> "Ket":
        return cls({BasisState(state) if not isinstance(state, BasisState) else state: amplitude})

    @classmethod
    def zero(cls) -> "Ket":
        return cls()

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def amplitude(self, state: BasisState) -> complex:
        return self.terms.get(state, 0j)

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def normalize(self) -> "Ket":
        nrm = self.norm()
        if nrm == 0:
            return Ket()
        return Ket({s: a / nrm for s, a in self.terms.items()})

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def modes(self) -> set:
        return {m for s in self.terms for m in s.modes}

    def probabilities(self) -> dict:
        return {s: abs(a) ** 2 for s, a in self.terms.items()}

    def __add__(self, other: "Ket") -> "Ket":
        out = dict(self.terms)
        for s, a in other.terms.items():
            out[s] = out.get(s, 0j) + a
        return Ket(out)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "Ket":
        return Ket({s: scalar * a for s, a in self.terms.items()})

    __rmul__ = __mul__

    def __repr__(self):
        parts = [f"({a.real:.4g}{a.imag:+.4g}j){s!r}" for s, a in sorted(self.terms.items())]
        return "Ket(" + " + ".join(parts) + ")"


def tensor(x: Ket, y: Ket) -> Ket:
    """Product of two kets living on disjoint mode sets."""
    overlap = x.modes() & y.modes()
    if overlap:
        raise DomainError(f"tensor factors share modes: {sorted(overlap)}")
    out = {}
    for sx, ax in x.terms.items():
        for sy, ay in y.terms.items():
            out[BasisState._from_sorted(tuple(sorted(sx + sy)))] = ax * ay
    return Ket(out)


def inner_product(x: Ket, y: Ket) -> complex:
    """<x|y>, conjugate-linear in ``x``."""
    if len(x.terms) > len(y.terms):
        return sum(y.terms[s].conjugate() * a for s, a in x.terms.items() if s in y.terms).conjugate()
    return sum(a.conjugate() * y.terms[s] for s, a in x.terms.items() if s in y.terms)


# ---------------------------------------------------------------------------
# generic linear-optical action

Image = Optional[Sequence]  # list of (ModeLabel, coefficient) or None for "untouched"


def transform(state: Ket, image: Callable[[ModeLabel], Image]) -> Ket:
    """Apply the creation-operator substitution ``a_m^dag -> sum_j c_j a_j^dag``.

    ``image(mode)`` returns the substitution for modes the element acts on and
    ``None`` for modes it leaves alone.  Output modes may not coincide with
    modes that are left untouched and occupied (label collision).
    """
    out: dict = defaultdict(complex)
    cache: dict = {}
    images: dict = {}

    def img(mode):
        if mode not in images:
            images[mode] = image(mode)
        return images[mode]

    for state_, amp in state.terms.items():
        fixed = []
        moving = []
        for mode, n in state_:
            (fixed if img(mode) is None else moving).append((mode, n))
        key = tuple(moving)
        if key not in cache:
            cache[key] = _expand(moving, img)
        fixed_modes = {m for m, _ in fixed}
        for part, coeff in cache[key]:
            if fixed_modes and any(m in fixed_modes for m, _ in part):
                raise DomainError("element output collides with an occupied untouched mode")
            merged = BasisState._from_sorted(tuple(sorted(fixed + list(part))))
            out[merged] += amp * coeff
    return Ket(out)


def _expand(moving, img):
    if not moving:
        return [((), 1.0)]
    targets: list = []
    index: dict = {}
    forms = []
    for mode, n in moving:
        form = []
        for tgt, c in img(mode):
            tgt = ModeLabel(*tgt)
            if tgt not in index:
                index[tgt] = len(targets)
                targets.append(tgt)
            form.append((index[tgt], complex(c)))
        forms.append((form, n))
    k = len(targets)
    poly = {(0,) * k: 1.0 + 0j}
    for form, n in forms:
        for _ in range(n):
            nxt: dict = defaultdict(complex)
            for mono, c in poly.items():
                for idx, coef in form:
                    if coef == 0:
                        continue
                    m = list(mono)
                    m[idx] += 1
                    nxt[tuple(m)] += c * coef
            poly = nxt
    in_norm = math.prod(math.factorial(n) for _, n in moving)
    result = []
    for mono, c in poly.items():
        if abs(c) < AMPLITUDE_CUTOFF:
            continue
        out_norm = math.prod(math.factorial(p) for p in mono)
        part = tuple(sorted((targets[i], p) for i, p in enumerate(mono) if p))
        result.append((part, c * math.sqrt(out_norm / in_norm)))
    return result


def _path(tag) -> str:
    return tag.path if isinstance(tag, ModeLabel) else str(tag)


# ---------------------------------------------------------------------------
# elements

SQRT_HALF = 1.0 / math.sqrt(2.0)


def apply_beamsplitter(state: Ket, in1, in2, out1, out2) -> Ket:
    """50:50 symmetric splitter: ``in1 -> (out1 + i out2)/sqrt2``, ``in2 -> (i out1 + out2)/sqrt2``.

    Ports are path tags (a ``ModeLabel`` is accepted and reduced to its path);
    polarization and OAM ride along unchanged.
    """
    in1, in2, out1, out2 = map(_path, (in1, in2, out1, out2))
    if in1 == in2 or out1 == out2:
        raise DomainError(f"beam splitter ports collide: in=({in1},{in2}) out=({out1},{out2})")

    def image(m: ModeLabel):
        if m.path == in1:
            return [(m._replace(path=out1), SQRT_HALF), (m._replace(path=out2), 1j * SQRT_HALF)]
        if m.path == in2:
            return [(m._replace(path=out1), 1j * SQRT_HALF), (m._replace(path=out2), SQRT_HALF)]
        return None

    return transform(state, image)


def apply_phase(state: Ket, mode: ModeLabel, phi: float) -> Ket:
    """Multiply each term by ``exp(i*phi*n)`` with n the occupation of ``mode``."""
    mode = ModeLabel(*mode)
    return Ket({s: a * cmath.exp(1j * phi * s.occupation(mode)) for s, a in state.terms.items()})


def apply_mismatch(state: Ket, arm, phi: float, dof: str = "oam") -> Ket:
    """Rotate the internal state of every photon on ``arm`` by the mismatch angle.

    ``dof="polarization"`` turns linear polarization by ``phi``
    (H -> cos H + sin V); its circular eigencomponents pick up ``exp(+-i phi)``,
    a relative phase of ``exp(2i phi)``.  ``dof="oam"`` mixes OAM ``m`` with
    ``-m`` by the angle ``|m| phi``; the eigencomponents pick up
    ``exp(+-i m phi)``, relative phase ``exp(2i m phi)``.  ``dof="both"`` applies
    the two in sequence.
    """
    arm = _path(arm)
    if dof == "both":
        return apply_mismatch(apply_mismatch(state, arm, phi, "polarization"), arm, phi, "oam")
    if dof == "polarization":
        c, s = math.cos(phi), math.sin(phi)

        def image(m: ModeLabel):
            if m.path != arm:
                return None
            h, v = m._replace(polarization="H"), m._replace(polarization="V")
            if m.polarization == "H":
                return [(h, c), (v, s)]
            return [(h, -s), (v, c)]

    elif dof == "oam":

        def image(m: ModeLabel):
            if m.path != arm or m.oam == 0:
                return None
            k = abs(m.oam)
            c, s = math.cos(k * phi), math.sin(k * phi)
            flipped = m._replace(oam=-m.oam)
            return [(m, c), (flipped, s if m.oam > 0 else -s)]

    else:
        raise DomainError(f"unknown mismatch degree of freedom {dof!r}")
    return transform(state, image)


def apply_oam_shift(state: Ket, arm, delta_l: int) -> Ket:
    """Add ``delta_l`` to the OAM of every photon on ``arm``."""
    arm = _path(arm)
    if delta_l == 0:
        return state
    out = {}
    for s, a in state.terms.items():
        shifted = tuple(
            sorted((m._replace(oam=m.oam + delta_l) if m.path == arm else m, n) for m, n in s)
        )
        out[BasisState._from_sorted(shifted)] = a
    return Ket(out)


def apply_loss(
    state: Ket,
    arm,
    efficiency: float,
    loss_path: str,
    blocked: Callable[[ModeLabel], bool] | None = None,
) -> Ket:
    """Unitary loss: each photon on ``arm`` survives with ``efficiency``.

    Photons whose mode satisfies ``blocked`` are sent entirely to ``loss_path``.
    ``loss_path`` must be unused (fresh vacuum modes).
    """
    if not 0 <= efficiency <= 1:
        raise DomainError(f"efficiency must lie in [0, 1], got {efficiency}")
    arm = _path(arm)
    keep, drop = math.sqrt(efficiency), math.sqrt(1.0 - efficiency)

    def image(m: ModeLabel):
        if m.path != arm:
            return None
        lost = m._replace(path=loss_path)
        if blocked is not None and blocked(m):
            return [(lost, 1.0)]
        if efficiency == 1.0:
            return None
        return [(m, keep), (lost, drop)]

    return transform(state, image)


def apply_polarizer(state: Ket, arm, keep: str = "H", loss_path: str = "loss_pbs") -> Ket:
    """PBS used as a projector: the orthogonal polarization on ``arm`` is dumped."""
    return apply_loss(state, arm, 1.0, loss_path, blocked=lambda m: m.polarization != keep)


def apply_filter(state: Ket, arm, keep_oam: int, efficiency: float) -> tuple:
    """Single-mode filter summarized projectively.

    Terms holding a photon on ``arm`` with OAM other than ``keep_oam`` are
    removed; surviving photons each pass with ``efficiency``.  Returns the
    renormalized component in which every photon passed, and the probability
    of that outcome.
    """
    if not 0 <= efficiency <= 1:
        raise DomainError(f"efficiency must lie in [0, 1], got {efficiency}")
    arm = _path(arm)
    kept = {}
    for s, a in state.terms.items():
        on_arm = [(m, n) for m, n in s if m.path == arm]
        if any(m.oam != keep_oam for m, _ in on_arm):
            continue
        n_arm = sum(n for _, n in on_arm)
        kept[s] = a * efficiency ** (n_arm / 2.0)
    ket = Ket(kept)
    total = state.norm_squared()
    prob = ket.norm_squared() / total if total > 0 else 0.0
    return ket.normalize(), prob


def measure_pattern(state: Ket, pattern: BasisState) -> float:
    """Probability of the exact basis state ``pattern``."""
    if not state.is_normalized():
        raise DomainError(f"state is not normalized (norm^2 = {state.norm_squared():.12g})")
    if not isinstance(pattern, BasisState):
        pattern = BasisState(pattern)
    return abs(state.amplitude(pattern)) ** 2


def path_count_distribution(state: Ket, paths: Sequence[str]) -> dict:
    """Marginal distribution of photon counts on each of ``paths``."""
    dist: dict = defaultdict(float)
    for s, a in state.terms.items():
        dist[tuple(s.on_path(p) for p in paths)] += abs(a) ** 2
    return dict(dist)
