"""The bunching interferometer: configuration, element list and exact propagation.

Layout (after the first splitter, which is absorbed into the two-arm source)::

    SLM1(+l1 on a) -> SLM2(+l2 on b) -> mismatch(phi on b) -> BS2(a,b -> c,d)
      -> PBS2 on c (optional) -> SLM3(+l3 on c) -> single-mode filter(l=0 on c)
      -> BS3(c -> d1,d2)

Port ``c`` is the monitored output, ``d`` is never detected.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from . import ConfigError, DomainError
from .fockspace import (
    BasisState,
    Ket,
    ModeLabel,
    apply_beamsplitter,
    apply_loss,
    apply_mismatch,
    apply_oam_shift,
    apply_polarizer,
    path_count_distribution,
)

SOURCE_POLARIZATION = "H"
MONITORED = "c"
UNMONITORED = "d"
DETECTOR_PORTS = ("d1", "d2")
FILTER_PORTS = (MONITORED, UNMONITORED)
MISMATCH_DOFS = ("oam", "polarization", "both")


@dataclass(frozen=True)
class CircuitConfig:
    l1: int = 1
    l2: int = 1
    l3: int = -1
    phi: float = 0.0
    pbs2_enabled: bool = True
    filter_efficiency: float = 1.0
    slm_efficiency: float = 1.0
    mismatch_dof: str = "oam"
    matched: bool = False

    def validate(self) -> "CircuitConfig":
        bad = []
        for name in ("l1", "l2", "l3"):
            if not isinstance(getattr(self, name), (int, np.integer)) or isinstance(getattr(self, name), bool):
                bad.append(name)
        if not math.isfinite(self.phi):
            bad.append("phi")
        for name in ("filter_efficiency", "slm_efficiency"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                bad.append(name)
        if self.mismatch_dof not in MISMATCH_DOFS:
            bad.append("mismatch_dof")
        if self.matched and not bad and not (self.l1 == self.l2 == -self.l3):
            bad.extend(["l1", "l2", "l3"])
        if bad:
            raise ConfigError(f"invalid circuit configuration: {', '.join(bad)}", bad)
        return self

    def replace(self, **changes) -> "CircuitConfig":
        d = asdict(self)
        d.update(changes)
        return CircuitConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Element:
    name: str
    apply: Callable[[Ket], Ket]

    def __call__(self, ket: Ket) -> Ket:
        return self.apply(ket)

    def __repr__(self):
        return f"Element({self.name})"


def build_circuit(cfg: CircuitConfig) -> list:
    """Ordered element list for ``cfg``; 8 elements, 7 without PBS2."""
    cfg.validate()
    eta_slm = cfg.slm_efficiency
    elements = [
        Element(f"SLM1(a,{cfg.l1:+d})", lambda k: apply_loss(apply_oam_shift(k, "a", cfg.l1), "a", eta_slm, "loss_slm1")),
        Element(f"SLM2(b,{cfg.l2:+d})", lambda k: apply_loss(apply_oam_shift(k, "b", cfg.l2), "b", eta_slm, "loss_slm2")),
        Element(f"mismatch(b,{cfg.mismatch_dof})", lambda k: apply_mismatch(k, "b", cfg.phi, cfg.mismatch_dof)),
        Element("BS2(a,b->c,d)", lambda k: apply_beamsplitter(k, "a", "b", "c", "d")),
    ]
    if cfg.pbs2_enabled:
        elements.append(Element("PBS2(c,H)", lambda k: apply_polarizer(k, "c", SOURCE_POLARIZATION, "loss_pbs2")))
    elements += [
        Element(f"SLM3(c,{cfg.l3:+d})", lambda k: apply_loss(apply_oam_shift(k, "c", cfg.l3), "c", eta_slm, "loss_slm3")),
        Element(
            "filter(c,l=0)",
            lambda k: apply_loss(k, "c", cfg.filter_efficiency, "loss_filter", blocked=lambda m: m.oam != 0),
        ),
        Element("BS3(c->d1,d2)", lambda k: apply_beamsplitter(k, "c", "c_vac", "d1", "d2")),
    ]
    return elements


def source_state(i: int, j: int) -> BasisState:
    """``i`` photons on arm a and ``j`` on arm b, source polarization, zero OAM."""
    return BasisState({ModeLabel("a", SOURCE_POLARIZATION, 0): i, ModeLabel("b", SOURCE_POLARIZATION, 0): j})


def _check_input(state: BasisState) -> None:
    for m, _ in state:
        if m.path not in ("a", "b") or m.polarization != SOURCE_POLARIZATION or m.oam != 0:
            raise DomainError(f"input photons must sit on arms a/b, {SOURCE_POLARIZATION}, l=0; got {m}")


def propagate(cfg: CircuitConfig, state: BasisState | Ket, through_bs3: bool = True) -> Ket:
    """Push an input through the circuit; stop before BS3 unless ``through_bs3``."""
    ket = state if isinstance(state, Ket) else Ket.basis(state)
    for el in build_circuit(cfg)[: None if through_bs3 else -1]:
        ket = el(ket)
    return ket


def conditional_probability(cfg: CircuitConfig, input: BasisState, pattern: Mapping[str, int]) -> float:
    """Probability that the monitored ports show ``pattern`` given a Fock input.

    ``pattern`` maps port tags to photon counts, either on ``{"c", "d"}``
    (photons at c counted after the single-mode filter) or on ``{"d1", "d2"}``
    (after BS3).  Ports absent from ``pattern`` are marginalized.
    """
    ports = tuple(pattern)
    if not ports:
        return 1.0
    if set(ports) <= set(FILTER_PORTS):
        through = False
    elif set(ports) <= set(DETECTOR_PORTS):
        through = True
    else:
        raise DomainError(f"unknown or mixed ports in pattern {dict(pattern)}; use {FILTER_PORTS} or {DETECTOR_PORTS}")
    if not isinstance(input, BasisState):
        input = BasisState(input)
    _check_input(input)
    counts = tuple(int(pattern[p]) for p in ports)
    dist = _port_distribution(cfg, input, ports, through)
    return float(min(1.0, max(0.0, dist.get(counts, 0.0))))


@lru_cache(maxsize=4096)
def _port_distribution(cfg: CircuitConfig, input: BasisState, ports: tuple, through: bool) -> dict:
    return path_count_distribution(propagate(cfg, input, through), ports)


@lru_cache(maxsize=4096)
def monitored_count_distribution(cfg: CircuitConfig, i: int, j: int) -> np.ndarray:
    """``P(n photons at c after the filter | i on a, j on b)`` for n = 0..i+j."""
    dist = _port_distribution(cfg, source_state(i, j), (MONITORED,), False)
    out = np.zeros(i + j + 1)
    for (n,), p in dist.items():
        out[n] += p
    return out


def bunching_probability(phi: float, l: int) -> float:
    """Closed form ``cos(l phi)**2 / 2`` for both photons at one chosen port."""
    return 0.5 * math.cos(l * phi) ** 2


def subspace_coefficients(phi: float, l: int) -> tuple:
    """(split, bunched) amplitudes of the two-photon state after BS2.

    ``split**2`` is the probability of one photon in each output, spread over
    four mixed-OAM terms of magnitude ``sin(l phi)/2``.  ``bunched`` is the
    magnitude of each same-mode term ``|2_c>``, ``|2_d>`` in the undisturbed
    OAM mode, the part that survives the single-mode filter.
    """
    return math.sin(l * phi) / math.sqrt(2.0), math.cos(l * phi) / math.sqrt(2.0)


@lru_cache(maxsize=1024)
def transfer_matrix(cfg: CircuitConfig) -> tuple:
    """Single-photon amplitudes from arms (a, b) to every detector mode.

    Returns ``(modes, T)`` where ``T[k, 0]`` (``T[k, 1]``) is the amplitude for a
    photon entering arm a (b) to leave in ``modes[k]``, a mode on d1 or d2.
    For coherent inputs this fixes the output coherent amplitudes exactly.
    """
    cols = []
    for state in (source_state(1, 0), source_state(0, 1)):
        ket = propagate(cfg, state, True)
        col = {}
        for s, a in ket.terms.items():
            ((m, _),) = tuple(s)
            if m.path in DETECTOR_PORTS:
                col[m] = a
        cols.append(col)
    modes = sorted(set(cols[0]) | set(cols[1]))
    t = np.array([[cols[0].get(m, 0j), cols[1].get(m, 0j)] for m in modes], dtype=complex).reshape(len(modes), 2)
    return tuple(modes), t


def detector_means(cfg: CircuitConfig, mu_a: float, mu_b: float, theta) -> tuple:
    """Mean photon numbers reaching d1 and d2 for coherent inputs.

    Arm a carries ``sqrt(mu_a)``, arm b ``sqrt(mu_b) exp(i theta)``; ``theta``
    may be an array.
    """
    modes, t = transfer_matrix(cfg)
    theta = np.asarray(theta, dtype=float)
    amp_b = math.sqrt(mu_b) * np.exp(1j * theta)
    out = []
    for port in DETECTOR_PORTS:
        rows = [k for k, m in enumerate(modes) if m.path == port]
        total = np.zeros(theta.shape)
        for k in rows:
            total = total + np.abs(math.sqrt(mu_a) * t[k, 0] + amp_b * t[k, 1]) ** 2
        out.append(total)
    return tuple(out)


def detector_mean_bounds(cfg: CircuitConfig, mu_a: float, mu_b: float) -> tuple:
    """Upper bounds over theta of :func:`detector_means`."""
    modes, t = transfer_matrix(cfg)
    bounds = []
    for port in DETECTOR_PORTS:
        rows = [k for k, m in enumerate(modes) if m.path == port]
        bounds.append(
            sum((math.sqrt(mu_a) * abs(t[k, 0]) + math.sqrt(mu_b) * abs(t[k, 1])) ** 2 for k in rows)
        )
    return tuple(bounds)


def config_fields() -> tuple:
    return tuple(f.name for f in fields(CircuitConfig))
