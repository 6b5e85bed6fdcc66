"""Vacuum functionals of the free scalar field on twisted tensors.

Normalisation: w2(f (x) g) = 2 pi \\int d^3q / (2 w_q) ft(q) gt(-q), q = (w_q, q_vec).
In a Wick pairing the left leg of each pair carries +q and the right leg -q.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import BarycentricInterpolator

from . import testfn as tf
from .errors import DegreeTooLarge, LatticeTooLarge, QuadratureFailure, Unsupported
from .geometry import ZERO_THETA, NoncommMatrix, theta_bilinear
from .minkowski import lower
from .moyal import (
    DampedPhase,
    StandardPhase,
    TwistedTensor,
    as_poly,
    plain_join,
    star_involution_tensor,
    tensor,
    u_theta_multiplier,
)
from .quadrature import box_rule, interval_rule

MAX_DEGREE = 6
TWO_PI = 2.0 * math.pi
_CHUNK_ELEMS = 2_000_000
_MAX_TRIPLE = 40_000_000
CERTIFY_TOL = 1e-8
# interpolation nodes per axis beyond the phase-swing estimate
_COMPRESS_BASE = 10
_COMPRESS_SLOPE = 1.0


# ------------------------------------------------------------ shell rules


def on_shell(qvec: np.ndarray, mass: float) -> np.ndarray:
    qvec = np.asarray(qvec, dtype=float)
    omega = np.sqrt(np.sum(qvec * qvec, axis=-1) + mass * mass)
    return np.concatenate([omega[..., None], qvec], axis=-1)


@dataclass(frozen=True)
class ShellRule:
    """Explicit shell nodes and weights; weights include the 2 pi / (2 w) factor."""

    momenta: np.ndarray
    weights: np.ndarray
    # (t_lo, t_hi, counts, mass) when the nodes form a sinh-mapped tensor grid
    grid: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.momenta, dtype=float)
        w = np.array(self.weights, dtype=float)
        if m.ndim != 2 or m.shape[1] != 4 or w.shape != (m.shape[0],):
            raise ValueError("shell rule needs momenta (K, 4) and weights (K,)")
        m.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "momenta", m)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.size


def sinh_box_rule(lo, hi, counts, mass: float) -> ShellRule:
    """Shell rule on a box in q_vec, Gauss-Legendre in t with q_i = m sinh(t_i).

    In t the integrand is analytic in a strip of half-width pi/2 (the branch
    points of w_q sit at sinh(t) = +-i), whereas in q itself they sit only a
    distance m from the real axis, which makes plain Gauss-Legendre on wide
    boxes converge slowly.
    """
    tlo = np.arcsinh(np.asarray(lo, dtype=float) / mass)
    thi = np.arcsinh(np.asarray(hi, dtype=float) / mass)
    counts = tuple(int(n) for n in np.broadcast_to(np.asarray(counts, dtype=int), tlo.shape))
    t, w = box_rule(tlo, thi, counts)
    qvec = mass * np.sinh(t)
    w = w * np.prod(mass * np.cosh(t), axis=1)
    q = on_shell(qvec, mass)
    return ShellRule(q, TWO_PI * w / (2.0 * q[:, 0]), grid=(tlo, thi, counts, mass))


def _reduced_counts(rule: ShellRule, y: np.ndarray):
    """Interpolation counts per axis for the kernel exp(-i/2 A(q) . y_b) over the rule's box.

    Along axis i the phase changes by at most max_b(|y_b0| + |y_bi|) |dq_i| / 2,
    since |d w_q / d q_i| <= 1. Returns None when the saving is not worth it.
    """
    if rule.grid is None:
        return None
    tlo, thi, counts, mass = rule.grid
    span = mass * (np.sinh(thi) - np.sinh(tlo))
    ay = np.abs(y)
    swing = 0.5 * np.max(ay[:, :1] + ay[:, 1:], axis=0) * span
    small = np.minimum(np.asarray(counts), np.ceil(_COMPRESS_SLOPE * swing).astype(int) + _COMPRESS_BASE)
    if np.prod(small) * 2 > np.prod(counts):
        return None
    return tuple(int(k) for k in small)


def _compress(values: np.ndarray, rule: ShellRule, small):
    """Project grid values onto a smaller Lagrange grid in the same box.

    For a kernel K that is smooth over the box, sum_a values_a K(q_a) equals
    sum_j reduced_j K(q_j) up to the interpolation error of K on the reduced
    nodes. Returns (reduced values, lowered reduced momenta).
    """
    tlo, thi, counts, mass = rule.grid
    mats = []
    coarse_axes = []
    for a, b, n, k in zip(tlo, thi, counts, small):
        fine = interval_rule(a, b, n)[0]
        nodes = interval_rule(a, b, k)[0]
        mats.append(BarycentricInterpolator(nodes, np.eye(k))(fine))
        coarse_axes.append(nodes)
    reduced = np.einsum("abc,ai,bj,ck->ijk", values.reshape(counts), *mats, optimize=True).ravel()
    grids = np.meshgrid(*coarse_axes, indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=-1)
    return reduced, lower(on_shell(mass * np.sinh(t), mass))


def lattice_rule(mass: float, cutoff: float, nodes_per_axis: int) -> ShellRule:
    """Fixed shell lattice on [-cutoff, cutoff]^3 with nodes_per_axis^3 modes."""
    return sinh_box_rule([-cutoff] * 3, [cutoff] * 3, nodes_per_axis, mass)


@dataclass(frozen=True)
class MassShellMeasure:
    """Invariant shell measure d^3q / (2 w_q) with a Gauss-Legendre rule.

    Each Wick contraction integrates over [-cutoff, cutoff]^3 clipped to the
    eps-momentum boxes of its two legs. Axes that reach the cutoff get
    ``nodes`` points (Gauss-Legendre in the sinh-mapped variable); axes clipped
    to a leg's box get ``min_nodes`` points. When ``rule`` is given
    every contraction uses those fixed nodes instead and no error estimate is
    produced.
    """

    mass: float
    cutoff: float = 6.0
    nodes: int = 48
    min_nodes: int = 32
    eps: float = 1e-8
    rule: ShellRule | None = field(default=None, repr=False)
    certify: bool = True

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.rule is None:
            if not self.cutoff > 0:
                raise ValueError("cutoff must be positive")
            if self.nodes < 4 or self.nodes % 2:
                raise ValueError("nodes must be an even integer >= 4")
            if self.certify:
                gap = self.certification_gap()
                if not gap < CERTIFY_TOL:
                    raise QuadratureFailure(
                        f"shell rule not converged: doubling the nodes moves the reference value by {gap:.2e}"
                    )

    @classmethod
    def from_rule(cls, mass: float, rule: ShellRule) -> "MassShellMeasure":
        return cls(mass=mass, rule=rule, certify=False)

    def certification_gap(self) -> float:
        """Relative change of a reference two-point value when the nodes double."""
        f = tf.gaussian(widths=(1.0, 1.0, 1.0, 1.0))
        g = tf.gaussian(center=(0.0, 0.3, 0.0, 0.0), widths=(1.0, 1.0, 1.0, 1.0), wavevector=(-1.2, 0.4, 0.0, 0.0))
        finer = MassShellMeasure(self.mass, self.cutoff, 2 * self.nodes, 2 * self.min_nodes, self.eps, certify=False)
        a = _evaluate_tensor(tensor(f.star(), g), self, self.nodes)
        b = _evaluate_tensor(tensor(f.star(), g), finer, finer.nodes)
        return float(abs(a - b) / max(abs(b), 1e-300))

    def to_json(self) -> dict:
        if self.rule is not None:
            return {"mass": self.mass, "rule_size": self.rule.size}
        return {
            "mass": self.mass,
            "cutoff": self.cutoff,
            "nodes": self.nodes,
            "min_nodes": self.min_nodes,
            "eps": self.eps,
        }


def _contraction_rule(fi, fj, mu: MassShellMeasure, level: int) -> ShellRule | None:
    """Shell rule for a contraction whose left leg is fi (+q) and right leg fj (-q)."""
    if mu.rule is not None:
        return mu.rule
    bi = fi.eps_support(mu.eps, "momentum")
    bj = fj.eps_support(mu.eps, "momentum")
    lo = np.maximum.reduce([bi.lo[1:], -bj.hi[1:], np.full(3, -mu.cutoff)])
    hi = np.minimum.reduce([bi.hi[1:], -bj.lo[1:], np.full(3, mu.cutoff)])
    # the energy window bounds |q| as well
    emax = min(bi.hi[0], -bj.lo[0])
    if emax <= mu.mass or np.any(lo >= hi):
        return None
    radius = math.sqrt(emax * emax - mu.mass * mu.mass)
    lo = np.maximum(lo, -radius)
    hi = np.minimum(hi, radius)
    if np.any(lo >= hi):
        return None
    # an axis limited only by the cutoff gets the full level; an axis clipped
    # to a leg's eps-box holds a smooth bump-free profile and gets min_nodes
    clipped = (lo > -mu.cutoff) | (hi < mu.cutoff)
    narrow = max(2, mu.min_nodes * level // mu.nodes)
    counts = np.where(clipped, narrow, level)
    return sinh_box_rule(lo, hi, counts, mu.mass)


# ------------------------------------------------------------ Wick combinatorics


def wick_pairings(n: int) -> list[tuple[tuple[int, int], ...]]:
    """All perfect matchings of range(n) as sorted tuples of (i, j), i < j."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n % 2:
        return []

    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for k, partner in enumerate(rest):
            for tail in rec(rest[:k] + rest[k + 1 :]):
                yield ((first, partner),) + tail

    return list(rec(tuple(range(n))))


# ------------------------------------------------------------ vacuum functional


def _couplings(F: TwistedTensor, pairing):
    """Phase matrices M_ab and damping terms between contractions a < b."""
    sign = {}
    owner = {}
    for a, (i, j) in enumerate(pairing):
        sign[i], sign[j] = 1.0, -1.0
        owner[i] = owner[j] = a
    phase = {}
    damp = {}
    for l in range(F.degree):
        for r in range(l + 1, F.degree):
            th = F.theta(l, r)
            rho = F.rho(l, r)
            if not isinstance(rho, (StandardPhase, DampedPhase)):
                raise Unsupported(f"twist function {rho!r} is not supported")
            a, b = owner[l], owner[r]
            if a == b or th.is_zero():
                continue  # p theta (-p) = 0 inside a contraction
            m = sign[l] * sign[r] * th.matrix
            if a > b:
                # p_l m p_r written with the lower contraction first
                a, b = b, a
                m = m.T
            phase[(a, b)] = phase.get((a, b), 0.0) + m
            if isinstance(rho, DampedPhase):
                damp.setdefault((a, b), []).append((rho.sigma, th.matrix))
    phase = {key: val for key, val in phase.items() if np.any(val)}
    return phase, damp


def _coupling_factor(Aa, Ab, m, damps):
    """exp(-i/2 Aa m Ab^T) times the damping factors, for lowered momenta."""
    lam = (Aa @ m) @ Ab.T
    out = np.exp(-0.5j * lam)
    for sigma, th in damps:
        lt = (Aa @ th) @ Ab.T
        out = out * np.exp(-sigma * lt * lt)
    return out


def _pair_sum(v1, A1, v2, A2, m, damps):
    total = 0.0 + 0.0j
    chunk = max(1, _CHUNK_ELEMS // max(1, v2.size))
    for s in range(0, v1.size, chunk):
        e = _coupling_factor(A1[s : s + chunk], A2, m, damps)
        total += np.dot(v1[s : s + chunk], e @ v2)
    return total


def _triple_sum(vs, As, phase, damp):
    # outer index over the largest contraction, dense middle matrix for the other two
    order = sorted(range(3), key=lambda a: -vs[a].size)
    o, b, c = order

    def coupling(x, y):
        key = (min(x, y), max(x, y))
        m = phase.get(key)
        d = damp.get(key, [])
        if m is None and not d:
            return None
        if m is None:
            m = np.zeros((4, 4))
        if x > y:  # stored for (min, max); the swapped bilinear form is the transpose
            return m.T, [(s, t.T) for s, t in d]
        return m, d

    def factor(x, y, Ax, Ay):
        cm = coupling(x, y)
        if cm is None:
            return np.ones((Ax.shape[0], Ay.shape[0]), dtype=complex)
        return _coupling_factor(Ax, Ay, cm[0], cm[1])

    if vs[b].size * vs[c].size > _MAX_TRIPLE:
        raise QuadratureFailure("three-contraction sum too large; reduce nodes")
    g = factor(b, c, As[b], As[c])
    total = 0.0 + 0.0j
    chunk = max(1, _CHUNK_ELEMS // max(vs[b].size, vs[c].size))
    for s in range(0, vs[o].size, chunk):
        Ao = As[o][s : s + chunk]
        eob = factor(o, b, Ao, As[b])
        eoc = factor(o, c, Ao, As[c])
        y = g @ (eoc * vs[c]).T  # (Kb, chunk)
        total += np.dot(vs[o][s : s + chunk], np.einsum("cb,b,bc->c", eob, vs[b], y))
    return total


def _compressed_pair(first, second, m):
    """Reduce both contractions of a twisted pair sum where the phase is smooth."""
    v1, A1, r1 = first
    v2, A2, r2 = second
    # the phase is -1/2 A1 . y2 with y2 = m A2, and -1/2 y1 . A2 with y1 = A1 m
    out = []
    for v, A, r, y in ((v1, A1, r1, A2 @ m.T), (v2, A2, r2, A1 @ m)):
        small = _reduced_counts(r, y)
        out.append((v, A) if small is None else _compress(v, r, small))
    return out


def _evaluate_tensor(F: TwistedTensor, mu: MassShellMeasure, level: int) -> complex:
    n = F.degree
    if n == 0:
        return F.coefficient
    if n % 2:
        return 0.0 + 0.0j
    cache: dict = {}

    def contraction(i, j):
        if (i, j) not in cache:
            rule = _contraction_rule(F.factors[i], F.factors[j], mu, level)
            if rule is None:
                cache[(i, j)] = None
            else:
                q = rule.momenta
                v = rule.weights * F.factors[i].fourier(q) * F.factors[j].fourier(-q)
                cache[(i, j)] = (v, lower(q), rule)
        return cache[(i, j)]

    total = 0.0 + 0.0j
    for pairing in wick_pairings(n):
        data = [contraction(i, j) for i, j in pairing]
        if any(d is None for d in data):
            continue
        phase, damp = _couplings(F, pairing)
        vs = [d[0] for d in data]
        As = [d[1] for d in data]
        k = len(pairing)
        if not phase and not damp:
            total += np.prod([v.sum() for v in vs])
        elif k == 2:
            m = phase.get((0, 1), np.zeros((4, 4)))
            damps = damp.get((0, 1), [])
            if not damps and mu.rule is None:
                (vs[0], As[0]), (vs[1], As[1]) = _compressed_pair(data[0], data[1], m)
            total += _pair_sum(vs[0], As[0], vs[1], As[1], m, damps)
        else:
            total += _triple_sum(vs, As, phase, damp)
    return F.coefficient * total


def vacuum_levels(F, mu: MassShellMeasure) -> tuple[complex, complex | None]:
    """Vacuum functional at ``nodes`` and at ``nodes/2`` (None for fixed rules)."""
    P = as_poly(F)
    if P.max_degree > MAX_DEGREE:
        raise DegreeTooLarge(f"degree {P.max_degree} exceeds {MAX_DEGREE}")
    if mu.rule is not None:
        value = sum((_evaluate_tensor(t, mu, 0) for t in P.terms), 0.0 + 0.0j)
        coarse = None
    else:
        value = sum((_evaluate_tensor(t, mu, mu.nodes) for t in P.terms), 0.0 + 0.0j)
        coarse = sum((_evaluate_tensor(t, mu, mu.nodes // 2) for t in P.terms), 0.0 + 0.0j)
    if not np.isfinite(value):
        raise QuadratureFailure("non-finite vacuum functional")
    return complex(value), coarse


def vacuum_functional(F, mu: MassShellMeasure) -> tuple[complex, float]:
    """Free-field vacuum expectation of a twisted tensor or polynomial, with an error estimate.

    The estimate is |I(nodes) - I(nodes/2)|; it is zero for fixed-rule measures.
    """
    value, coarse = vacuum_levels(F, mu)
    return value, 0.0 if coarse is None else float(abs(value - coarse))


def two_point_with_error(f, g, mu: MassShellMeasure) -> tuple[complex, float]:
    return vacuum_functional(tensor(f, g), mu)


def two_point(f, g, mu: MassShellMeasure) -> complex:
    return two_point_with_error(f, g, mu)[0]


def inner_product_theta(f, g, theta: NoncommMatrix, mu: MassShellMeasure) -> tuple[complex, float]:
    """omega^theta(f^* (x) g): plain join of f^* and g, then the uniform twist."""
    joined = plain_join(star_involution_tensor(f), g)
    return vacuum_functional(u_theta_multiplier(joined, theta), mu)


# ------------------------------------------------------------ truncated Fock oracle


MAX_FOCK_DIM = 200_000


class FockSpace:
    """Symmetric Fock space over K modes, truncated at ``nmax`` particles."""

    def __init__(self, momenta: np.ndarray, nmax: int):
        K = momenta.shape[0]
        dim = sum(math.comb(K + s - 1, s) for s in range(nmax + 1))
        if dim > MAX_FOCK_DIM:
            raise LatticeTooLarge(f"Fock dimension {dim} exceeds {MAX_FOCK_DIM}")
        self.dim = dim
        states = [()]
        for s in range(1, nmax + 1):
            states.extend(itertools.combinations_with_replacement(range(K), s))
        index = {st: i for i, st in enumerate(states)}
        self.index = index
        rows, cols, modes, facs, totals = [], [], [], [], []
        for st in states:
            if len(st) >= nmax:
                continue
            col = index[st]
            tot = momenta[list(st)].sum(axis=0) if st else np.zeros(4)
            for a in range(K):
                new = tuple(sorted(st + (a,)))
                rows.append(index[new])
                cols.append(col)
                modes.append(a)
                facs.append(math.sqrt(st.count(a) + 1))
                totals.append(tot)
        self.rows = np.array(rows, dtype=np.int64)
        self.cols = np.array(cols, dtype=np.int64)
        self.modes = np.array(modes, dtype=np.int64)
        self.facs = np.array(facs)
        self.totals = np.array(totals).reshape(-1, 4)

    def field(self, f, theta: NoncommMatrix, rule: ShellRule) -> sp.csr_matrix:
        """Smeared twisted field: creation part maps col -> row, annihilation its transpose."""
        q = rule.momenta[self.modes]
        lam = theta_bilinear(theta, q, self.totals)
        root = np.sqrt(rule.weights)[self.modes] * self.facs
        create = root * f.fourier(-rule.momenta)[self.modes] * np.exp(-0.5j * lam)
        annihilate = root * f.fourier(rule.momenta)[self.modes] * np.exp(0.5j * lam)
        data = np.concatenate([create, annihilate])
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        return sp.csr_matrix((data, (r, c)), shape=(self.dim, self.dim))


def _row_thetas(F: TwistedTensor) -> list[NoncommMatrix]:
    """Per-field matrices for a tensor whose pair data depends only on the left index."""
    n = F.degree
    out = []
    for l in range(n):
        row = [F.theta(l, r) for r in range(l + 1, n)]
        if any(not isinstance(F.rho(l, r), StandardPhase) for r in range(l + 1, n)):
            raise Unsupported("Fock oracle needs pure phase twists")
        if any(t != row[0] for t in row[1:]):
            raise Unsupported("Fock oracle needs pair data constant along each row")
        out.append(row[0] if row else ZERO_THETA)
    return out


def fock_oracle(F, theta: NoncommMatrix, rule: ShellRule) -> complex:
    """<Omega| phi_1 ... phi_n |Omega> with twisted fields on a shell lattice.

    Field l carries the twist ``Theta_l + theta`` where Theta_l is the row
    constant pair matrix of F; the field is
    sum_a sqrt(w_a) [ft(q_a) a_a e^{+i/2 q_a t P} + ft(-q_a) a_a^+ e^{-i/2 q_a t P}].
    """
    total = 0.0 + 0.0j
    spaces: dict[int, FockSpace] = {}
    for term in as_poly(F).terms:
        n = term.degree
        if n == 0:
            total += term.coefficient
            continue
        if n % 2:
            continue
        nmax = n // 2
        if nmax not in spaces:
            spaces[nmax] = FockSpace(rule.momenta, nmax)
        space = spaces[nmax]
        state = np.zeros(space.dim, dtype=complex)
        state[0] = 1.0
        for f, th in reversed(list(zip(term.factors, _row_thetas(term)))):
            state = space.field(f, th + theta, rule) @ state
        total += term.coefficient * state[0]
    return complex(total)


def positivity_report(f, theta: NoncommMatrix, mu: MassShellMeasure) -> dict:
    """(f, f)_theta with its estimate; reports, does not assert, positivity."""
    val, err = inner_product_theta(f, f, theta, mu)
    return {"value": [val.real, val.imag], "estimate": err, "nonnegative": bool(val.real >= -10 * err)}

