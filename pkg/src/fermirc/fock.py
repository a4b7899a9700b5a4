"""Fermionic operators on small Fock spaces and the two-dot demon models.

Basis convention: occupation-number kets ordered by binary counting with mode
0 as the least-significant bit, i.e. basis index b = sum_i n_i 2^i.  Mode
ordering for the transport models is (d_s, d_d, C_l, C_r, C_d) with absent
modes skipped: d_s/d_d are the system/demon dots, C_l/C_r/C_d the collective
modes extracted from the left, right and demon reservoirs.

Annihilators are built with sign strings over the lower-index modes so that
{d_i, d_j^dag} = delta_ij and {d_i, d_j} = 0 hold exactly as matrix
identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Flat, Lorentzian, SpectralDensity

__all__ = [
    "ModeAlgebra",
    "Reservoir",
    "Attachment",
    "ImpurityModel",
    "DemonParams",
    "build_algebra",
    "build_double_dot",
    "build_model",
    "MODEL_VARIANTS",
]

MAX_MODES = 12

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])
_PARITY = np.diag([1.0, -1.0])
_ID2 = np.eye(2)


@dataclass(frozen=True, eq=False)
class ModeAlgebra:
    """Annihilation operators for ``n_modes`` fermionic modes on a 2^n space."""

    n_modes: int
    annihilators: tuple

    @property
    def dim(self):
        return 2 ** self.n_modes

    def creator(self, i):
        return self.annihilators[i].conj().T

    def number(self, i):
        d = self.annihilators[i]
        return d.conj().T @ d

    def total_number(self):
        out = np.zeros((self.dim, self.dim))
        for i in range(self.n_modes):
            out += self.number(i)
        return out


def build_algebra(n_modes):
    """Construct the mode algebra; modes indexed 0..n_modes-1, mode 0 = LSB.

    d_i acts as sigma_minus on tensor factor i with a parity string on all
    factors of lower index.
    """
    if not 1 <= n_modes <= MAX_MODES:
        raise ValueError(f"n_modes must be in 1..{MAX_MODES}, got {n_modes}")
    ops = []
    for i in range(n_modes):
        factors = []
        for j in range(n_modes - 1, -1, -1):  # kron order: highest mode first
            if j == i:
                factors.append(_SIGMA_MINUS)
            elif j < i:
                factors.append(_PARITY)
            else:
                factors.append(_ID2)
        mat = factors[0]
        for f in factors[1:]:
            mat = np.kron(mat, f)
        ops.append(mat)
    return ModeAlgebra(n_modes, tuple(ops))


@dataclass(frozen=True)
class Reservoir:
    """Equilibrium fermionic reservoir: inverse temperature, chemical potential, SD."""

    beta: float
    mu: float
    sd: SpectralDensity
    label: str = ""

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True, eq=False)
class Attachment:
    """Coupling operator (from the model algebra) paired with its reservoir."""

    operator: np.ndarray
    reservoir: Reservoir


@dataclass(frozen=True, eq=False)
class ImpurityModel:
    """Impurity Hamiltonian with per-reservoir attachments.

    ``system_modes``/``demon_modes`` record the bipartition used for mutual
    information; they cover all modes exactly once for the demon presets.
    """

    algebra: ModeAlgebra
    hamiltonian: np.ndarray
    number_op: np.ndarray
    attachments: tuple
    mode_names: tuple
    system_modes: tuple = ()
    demon_modes: tuple = ()

    @property
    def dim(self):
        return self.algebra.dim

    def attachment(self, label):
        for att in self.attachments:
            if att.reservoir.label == label:
                return att
        raise KeyError(f"no attachment labelled {label!r}")


def _check_model(model):
    h = model.hamiltonian
    if np.abs(h - h.conj().T).max() > 1e-12:
        raise ValueError("Hamiltonian is not Hermitian")
    comm = h @ model.number_op - model.number_op @ h
    if np.abs(comm).max() > 1e-12:
        raise ValueError("Hamiltonian does not conserve particle number")
    return model


def build_double_dot(eps_s, eps_d, u):
    """Two Coulomb-coupled dots: H = eps_s n_s + eps_d n_d + U n_s n_d.

    No reservoir attachments; the spectrum is {0, eps_s, eps_d, eps_s+eps_d+U}.
    """
    alg = build_algebra(2)
    n_s, n_d = alg.number(0), alg.number(1)
    h = eps_s * n_s + eps_d * n_d + u * (n_s @ n_d)
    return _check_model(ImpurityModel(
        algebra=alg,
        hamiltonian=h,
        number_op=alg.total_number(),
        attachments=(),
        mode_names=("d_s", "d_d"),
        system_modes=(0,),
        demon_modes=(1,),
    ))


@dataclass(frozen=True)
class DemonParams:
    """Parameter set of the two-dot demon device, in units of the dot energy.

    Defaults follow the operating point used throughout the sweeps:
    beta*eps = 1, bias v = 0.01, Coulomb shift u = 0.015, demon bath colder
    by a factor 300, demon coupling 100x the system coupling.  The reservoir
    peaks sit at w0_l = eps_s, w0_r = eps_s + u, w0_d = eps_d + u/2 and the
    chemical potentials at mu_l/r = eps_s +- v/2, mu_d = eps_d + u/2.
    """

    eps_s: float = 1.0
    eps_d: float = 1.0
    u: float = 0.015
    v: float = 0.01
    beta: float = 1.0
    beta_d_ratio: float = 300.0
    gamma_s: float = 1e-5
    gamma_d: float | None = None
    delta_s: float = 0.01
    delta_d: float = 0.01
    n_widths: float = 50.0

    @property
    def gamma_d_eff(self):
        return 100.0 * self.gamma_s if self.gamma_d is None else self.gamma_d

    @property
    def beta_d(self):
        return self.beta_d_ratio * self.beta

    @property
    def mu_l(self):
        return self.eps_s + self.v / 2.0

    @property
    def mu_r(self):
        return self.eps_s - self.v / 2.0

    @property
    def mu_d(self):
        return self.eps_d + self.u / 2.0

    @property
    def w0_l(self):
        return self.eps_s

    @property
    def w0_r(self):
        return self.eps_s + self.u

    @property
    def w0_d(self):
        return self.eps_d + self.u / 2.0

    @property
    def rc_coupling_s(self):
        return math.sqrt(self.gamma_s * self.delta_s / 2.0)

    @property
    def rc_coupling_d(self):
        return math.sqrt(self.gamma_d_eff * self.delta_d / 2.0)

    def sd_imbalance(self):
        """Ratio J_L(eps_s)/J_L(eps_s+u) = 1 + u^2/delta_s^2 of the lead SDs."""
        return 1.0 + (self.u / self.delta_s) ** 2

    def lead_sd(self, which):
        w0 = {"L": self.w0_l, "R": self.w0_r, "D": self.w0_d}[which]
        gamma = self.gamma_d_eff if which == "D" else self.gamma_s
        delta = self.delta_d if which == "D" else self.delta_s
        return Lorentzian(gamma, delta, w0, n_widths=self.n_widths)

    def residual_sd(self, which):
        """Flat residual left after extracting the collective mode of a lead."""
        lead = self.lead_sd(which)
        return Flat(2.0 * lead.width, bounds=lead.window)

    def reservoir(self, which, sd):
        beta = self.beta_d if which == "D" else self.beta
        mu = {"L": self.mu_l, "R": self.mu_r, "D": self.mu_d}[which]
        return Reservoir(beta=beta, mu=mu, sd=sd, label=which)


MODEL_VARIANTS = ("dqdmd", "model1", "model2", "model3")


def build_model(variant, params=None):
    """Assemble a demon-device variant with its reservoir attachments.

    dqdmd  -- bare two dots, Lorentzian leads on d_s (L, R) and d_d (D).
    model1 -- collective modes C_l, C_r for the structured left/right leads;
              their residual baths are flat with height 2*delta_s.
    model2 -- collective mode C_d for the strongly coupled cold demon lead;
              residual flat with height 2*delta_d.
    model3 -- union of model1 and model2 (impurity Hamiltonian counted once).
    """
    if params is None:
        params = DemonParams()
    if variant not in MODEL_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {MODEL_VARIANTS}")

    names = {
        "dqdmd": ("d_s", "d_d"),
        "model1": ("d_s", "d_d", "C_l", "C_r"),
        "model2": ("d_s", "d_d", "C_d"),
        "model3": ("d_s", "d_d", "C_l", "C_r", "C_d"),
    }[variant]
    alg = build_algebra(len(names))
    idx = {name: k for k, name in enumerate(names)}
    d_s, d_d = alg.annihilators[idx["d_s"]], alg.annihilators[idx["d_d"]]
    n_s, n_d = alg.number(idx["d_s"]), alg.number(idx["d_d"])

    h = params.eps_s * n_s + params.eps_d * n_d + params.u * (n_s @ n_d)

    def hop(a, b, lam):
        return lam * (a.conj().T @ b + b.conj().T @ a)

    if "C_l" in idx:
        c_l = alg.annihilators[idx["C_l"]]
        c_r = alg.annihilators[idx["C_r"]]
        h = h + params.w0_l * alg.number(idx["C_l"]) + params.w0_r * alg.number(idx["C_r"])
        h = h + hop(c_l, d_s, params.rc_coupling_s) + hop(c_r, d_s, params.rc_coupling_s)
    if "C_d" in idx:
        c_d = alg.annihilators[idx["C_d"]]
        h = h + params.w0_d * alg.number(idx["C_d"])
        h = h + hop(c_d, d_d, params.rc_coupling_d)

    if variant == "dqdmd":
        attachments = (
            Attachment(d_s, params.reservoir("L", params.lead_sd("L"))),
            Attachment(d_s, params.reservoir("R", params.lead_sd("R"))),
            Attachment(d_d, params.reservoir("D", params.lead_sd("D"))),
        )
    elif variant == "model1":
        attachments = (
            Attachment(c_l, params.reservoir("L", params.residual_sd("L"))),
            Attachment(c_r, params.reservoir("R", params.residual_sd("R"))),
            Attachment(d_d, params.reservoir("D", params.lead_sd("D"))),
        )
    elif variant == "model2":
        attachments = (
            Attachment(d_s, params.reservoir("L", params.lead_sd("L"))),
            Attachment(d_s, params.reservoir("R", params.lead_sd("R"))),
            Attachment(c_d, params.reservoir("D", params.residual_sd("D"))),
        )
    else:
        attachments = (
            Attachment(c_l, params.reservoir("L", params.residual_sd("L"))),
            Attachment(c_r, params.reservoir("R", params.residual_sd("R"))),
            Attachment(c_d, params.reservoir("D", params.residual_sd("D"))),
        )

    system = tuple(idx[n] for n in ("d_s", "C_l", "C_r") if n in idx)
    demon = tuple(idx[n] for n in ("d_d", "C_d") if n in idx)
    return _check_model(ImpurityModel(
        algebra=alg,
        hamiltonian=h,
        number_op=alg.total_number(),
        attachments=attachments,
        mode_names=names,
        system_modes=system,
        demon_modes=demon,
    ))
