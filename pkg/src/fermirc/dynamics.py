"""Steady states, transport currents and thermodynamic/information observables.

Sign conventions.  The raw per-reservoir currents are

    I_E(nu) = tr{H L_nu rho},   I_M(nu) = tr{N L_nu rho},

positive when the impurity gains energy/particles from reservoir nu.  The
derived device quantities follow the transport arrows: ``i_m_main`` is the
matter flow entering from the left lead (flow L -> R at steady state, so a
demon pumping against the bias gives i_m_main < 0) and ``i_e_main`` is the
energy flow into the demon reservoir, -I_E(D).  Heats are
Q_nu = I_E(nu) - mu_nu I_M(nu) and the entropy production rate at steady
state is -sum_nu beta_nu Q_nu.

Steady states are obtained from the null space of the dense generator and
then polished by iterative refinement in extended precision against the
generator's longdouble copy; the extreme scale separation of the demon
models (currents ~1e7 below the Hamiltonian scale) makes plain double
precision insufficient for the conservation checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SteadyReport",
    "steady_state",
    "currents",
    "thermo_report",
    "partial_trace",
    "entropy_vn",
    "mutual_information",
]

SIGN_CONVENTION = (
    "raw I_E/I_M per reservoir: tr{H L_nu rho}/tr{N L_nu rho}, positive into the "
    "impurity; i_m_main = raw I_M(L) (flow L->R); i_e_main = -raw I_E(D) "
    "(flow into the demon bath)"
)

#: eigenvalues of rho below this contribute zero to the von Neumann entropy
ENTROPY_CUTOFF = 1e-14


def _vec(mat):
    return np.ascontiguousarray(mat).ravel()


def _unvec(v, dim):
    return v.reshape(dim, dim)


def steady_state(liouv, refine=True, refine_steps=4, return_info=False):
    """Solve L rho = 0 with tr rho = 1.

    The right-singular vector of the smallest singular value supplies the
    null direction; a degenerate null space (rank gap below ``1e-10`` of the
    leading singular value) triggers a warning and a projection of the
    Hermitized candidate onto its positive part.  With ``refine`` the
    solution is polished in extended precision and returned as clongdouble.
    ``return_info`` additionally returns a dict with the singular-value gap
    and the degeneracy flag.
    """
    mat = liouv.matrix
    dim = liouv.dim
    u, s, vh = np.linalg.svd(mat)
    if s[-1] > 1e-8 * s[0]:
        raise RuntimeError(
            f"no steady state found: smallest singular value {s[-1]:.3e} "
            f"(largest {s[0]:.3e})"
        )
    degenerate = s[-2] < 1e-10 * s[0]

    rho = _unvec(vh[-1].conj(), dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        degenerate = True
    info = {"degenerate": degenerate, "gap": float(s[-2] / s[0]),
            "null_residual": float(s[-1] / s[0])}
    if degenerate:
        warnings.warn("steady-state null space is degenerate; projecting onto "
                      "the positive part of one Hermitian candidate")
        vals, vecs = np.linalg.eigh(rho if abs(tr) > 1e-12 else rho + np.eye(dim) / dim)
        vals = np.clip(vals, 0.0, None)
        rho = (vecs * vals) @ vecs.conj().T
        rho = rho / np.trace(rho).real
        if refine:
            rho = rho.astype(np.clongdouble)
        return (rho, info) if return_info else rho

    rho = rho / tr
    if not refine:
        return (rho, info) if return_info else rho

    # iterative refinement against the extended-precision generator: solve the
    # correction on the non-null subspace from the SVD factors and fix the
    # trace along the null direction
    mat_ld = liouv.matrix_ld
    x = _vec(rho).astype(np.clongdouble)
    null_vec = vh[-1].conj().astype(np.clongdouble)
    null_tr = _unvec(null_vec, dim).trace()
    u_h = u[:, :-1].conj().T.astype(complex)
    v_cols = vh[:-1].conj().T.astype(complex)
    inv_s = (1.0 / s[:-1]).astype(complex)
    for _ in range(refine_steps):
        r = -(mat_ld @ x)
        coef = inv_s * (u_h @ r.astype(complex))
        delta = (v_cols @ coef).astype(np.clongdouble)
        tr_defect = 1.0 - _unvec(x + delta, dim).trace()
        delta = delta + (tr_defect / null_tr) * null_vec
        x = x + delta
        if np.abs(r).max() < 1e-22:
            break
    rho = _unvec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    return (rho, info) if return_info else rho


def currents(part, rho, h, n):
    """(I_E, I_M) for one reservoir piece: tr{H L_nu rho} and tr{N L_nu rho}."""
    dim = h.shape[0]
    flux = _unvec(part @ _vec(rho), dim)
    i_e = np.sum(h.T * flux).real
    i_m = np.sum(n.T * flux).real
    return float(i_e), float(i_m)


def entropy_vn(rho):
    """Von Neumann entropy in nats; eigenvalues below the cutoff contribute zero."""
    vals = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    vals = vals[vals > ENTROPY_CUTOFF]
    return float(-(vals * np.log(vals)).sum())


def partial_trace(rho, keep, n_modes):
    """Reduce ``rho`` to the modes in ``keep`` (occupation-number factorization).

    Mode i corresponds to bit i of the basis index; the reduced state keeps
    the relative mode order.  Valid for parity-conserving states, where the
    fermionic sign strings never reach across the traced factors in the
    surviving (block-diagonal) matrix elements.
    """
    keep = sorted(keep)
    if any(k < 0 or k >= n_modes for k in keep) or len(set(keep)) != len(keep):
        raise ValueError("keep must be distinct mode indices inside the register")
    rho = np.asarray(rho, dtype=complex)
    dims = [2] * n_modes
    # axis 0 is the highest mode: mode i sits at axis n_modes - 1 - i
    keep_axes = sorted(n_modes - 1 - k for k in keep)
    tensor = rho.reshape(dims + dims)
    labels = list(range(2 * n_modes))
    for a in range(n_modes):
        if a not in keep_axes:
            labels[a + n_modes] = labels[a]  # trace row against column
    out_spec = keep_axes + [a + n_modes for a in keep_axes]
    reduced = np.einsum(tensor, labels, out_spec)
    d = 2 ** len(keep)
    return reduced.reshape(d, d)


def mutual_information(rho, part_a, part_b, n_modes):
    """S(rho_A) + S(rho_B) - S(rho_AB) over an exact bipartition of the modes."""
    part_a, part_b = tuple(part_a), tuple(part_b)
    union = set(part_a) | set(part_b)
    if set(part_a) & set(part_b) or union != set(range(n_modes)):
        raise ValueError("partition must cover all modes exactly once")
    rho_a = partial_trace(rho, part_a, n_modes)
    rho_b = partial_trace(rho, part_b, n_modes)
    return entropy_vn(rho_a) + entropy_vn(rho_b) - entropy_vn(np.asarray(rho, dtype=complex))


@dataclass(frozen=True)
class SteadyReport:
    """Steady-state observables of one model at one parameter point."""

    rho: np.ndarray = field(repr=False)
    labels: tuple
    raw_currents: dict          # label -> {"I_E": ..., "I_M": ...}
    heats: dict                 # label -> Q_nu
    entropy_rate: float
    impurity_energy: float
    impurity_entropy: float
    mi_partition: float | None
    mi_dots: float | None
    min_eig: float
    degenerate: bool
    i_m_main: float | None = None
    i_e_main: float | None = None
    entropy_rate_demon: float | None = None
    energy_imbalance: float | None = None
    sign_convention: str = SIGN_CONVENTION

    def to_dict(self, include_state=False):
        out = {
            "labels": list(self.labels),
            "raw_currents": self.raw_currents,
            "heats": self.heats,
            "entropy_rate": self.entropy_rate,
            "impurity_energy": self.impurity_energy,
            "impurity_entropy": self.impurity_entropy,
            "mi_partition": self.mi_partition,
            "mi_dots": self.mi_dots,
            "min_eig": self.min_eig,
            "degenerate": self.degenerate,
            "i_m_main": self.i_m_main,
            "i_e_main": self.i_e_main,
            "entropy_rate_demon": self.entropy_rate_demon,
            "energy_imbalance": self.energy_imbalance,
            "sign_convention": self.sign_convention,
        }
        if include_state:
            rho = np.asarray(self.rho, dtype=complex)
            out["rho_re"] = rho.real.tolist()
            out["rho_im"] = rho.imag.tolist()
        return out


def thermo_report(model, liouv, rho, degenerate=False):
    """Full thermodynamic bookkeeping for a steady state of ``model``.

    For the demon presets (reservoirs labelled L, R, D) the report also
    carries the device-form entropy production beta*V*i_m_main +
    (beta_D - beta)*i_e_main, which must agree with the heat-current form at
    steady state, and the relative energetic imbalance |i_e_main / I_E(L)|.
    """
    h_ld = model.hamiltonian.astype(np.clongdouble)
    n_ld = model.number_op.astype(np.clongdouble)
    rho_ld = np.asarray(rho, dtype=np.clongdouble)

    raw = {}
    heats = {}
    entropy_rate = 0.0
    for label, part in zip(liouv.labels, liouv.parts_ld):
        att = model.attachment(label)
        i_e, i_m = currents(part, rho_ld, h_ld, n_ld)
        raw[label] = {"I_E": i_e, "I_M": i_m}
        q = i_e - att.reservoir.mu * i_m
        heats[label] = q
        entropy_rate -= att.reservoir.beta * q

    rho_c = np.asarray(rho, dtype=complex)
    impurity_energy = float(np.trace(model.hamiltonian @ rho_c).real)
    impurity_entropy = entropy_vn(rho_c)
    min_eig = float(np.linalg.eigvalsh(rho_c).min())

    mi_part = None
    mi_dots = None
    if model.system_modes and model.demon_modes:
        n_modes = model.algebra.n_modes
        mi_part = mutual_information(rho_c, model.system_modes, model.demon_modes, n_modes)
        rho_two = partial_trace(rho_c, (0, 1), n_modes)
        mi_dots = mutual_information(rho_two, (0,), (1,), 2)

    i_m_main = i_e_main = rate_demon = imbalance = None
    if set(liouv.labels) == {"L", "R", "D"}:
        res = {label: model.attachment(label).reservoir for label in ("L", "R", "D")}
        i_m_main = raw["L"]["I_M"]
        i_e_main = -raw["D"]["I_E"]
        beta = res["L"].beta
        bias = res["L"].mu - res["R"].mu
        rate_demon = beta * bias * i_m_main + (res["D"].beta - beta) * i_e_main
        if raw["L"]["I_E"] != 0.0:
            imbalance = abs(i_e_main / raw["L"]["I_E"])

    return SteadyReport(
        rho=rho,
        labels=tuple(liouv.labels),
        raw_currents=raw,
        heats=heats,
        entropy_rate=float(entropy_rate),
        impurity_energy=impurity_energy,
        impurity_entropy=impurity_entropy,
        mi_partition=mi_part,
        mi_dots=mi_dots,
        min_eig=min_eig,
        degenerate=bool(degenerate),
        i_m_main=i_m_main,
        i_e_main=i_e_main,
        entropy_rate_demon=rate_demon,
        energy_imbalance=imbalance,
    )
