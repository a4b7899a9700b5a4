"""Non-secular Born-Markov generator for an impurity with fermionic reservoirs.

For each attachment (coupling operator d, reservoir) the generator is

    dt rho = -i[H, rho] + sum_nu ( [chi^dag rho, d] + [d^dag, rho chi]
                                   + [theta rho, d^dag] + [d, rho theta^dag] )

with, in the eigenbasis of H (Bohr frequencies w_lk = E_l - E_k, matrix
elements d_kl = <k|d|l>),

    chi   = sum_kl J(w_lk)/2 * f(w_lk)       * d_kl |k><l|
    theta = sum_kl J(w_lk)/2 * (1 - f(w_lk)) * d_kl |k><l| .

Optional variants: ``lamb_shift`` adds the principal-value part of the
half-Fourier bath correlation to the chi/theta coefficients,
+ i/(2 pi) PV integral J(w) f(w) / (w_lk - w) dw (and the 1-f analogue);
``secular`` zeroes every superoperator element coupling distinct Bohr
frequencies, which yields a Lindblad-form generator.

Superoperators act on row-major vectorized density matrices, so that
vec(A X B) = kron(A, B^T) vec(X).  Each Liouvillian keeps extended-precision
copies of its parts; the steady-state refinement in :mod:`fermirc.dynamics`
relies on them to resolve currents many orders of magnitude below the
Hamiltonian scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spectral import Lorentzian, pv_integral, _quad

__all__ = [
    "GeneratorFlags",
    "EigenFrame",
    "DissipatorPieces",
    "Liouvillian",
    "fermi",
    "build_chi_theta",
    "collect_pieces",
    "apply_variant",
    "build_liouvillian",
]

LONG = np.longdouble
CLONG = np.clongdouble


@dataclass(frozen=True)
class GeneratorFlags:
    """Generator variants; defaults give the plain non-secular equation."""

    lamb_shift: bool = False
    secular: bool = False
    degeneracy_tol: float = 1e-9


def fermi(beta, mu, w):
    """Fermi function 1/(exp(beta (w - mu)) + 1), overflow-safe, dtype-preserving."""
    w = np.asarray(w)
    x = beta * (w - mu)
    ex = np.exp(-np.abs(x))
    out = np.where(x >= 0, ex / (1.0 + ex), 1.0 / (1.0 + ex))
    if out.ndim == 0:
        return out[()]
    return out


@dataclass(frozen=True, eq=False)
class EigenFrame:
    """Eigendecomposition of the impurity Hamiltonian (ascending energies)."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_hamiltonian(cls, h):
        energies, vectors = np.linalg.eigh(h)
        frame = cls(energies=energies, vectors=vectors)
        dim = h.shape[0]
        if np.abs(vectors.conj().T @ vectors - np.eye(dim)).max() > 1e-10:
            raise ValueError("eigenvector matrix failed the unitarity check")
        rebuilt = (vectors * energies) @ vectors.conj().T
        if np.abs(rebuilt - h).max() > 1e-10 * max(1.0, np.abs(energies).max()):
            raise ValueError("eigendecomposition does not reconstruct H")
        return frame

    @property
    def dim(self):
        return self.energies.size

    def bohr_lk(self):
        """Matrix with entry [k, l] = E_l - E_k."""
        e = self.energies
        return e[None, :] - e[:, None]

    def to_eigen(self, op):
        return self.vectors.conj().T @ op @ self.vectors

    def from_eigen(self, op):
        return self.vectors @ op @ self.vectors.conj().T


def _lamb_pv(res, w0):
    """PV integrals (occupied, empty) of J g/(w0 - w) dw / (2 pi) for g = f, 1-f."""
    sd = res.sd
    a, b = sd.window
    out = []
    for occupied in (True, False):
        def num(x, occ=occupied):
            j = float(sd(x))
            f = float(fermi(res.beta, res.mu, x))
            return j * (f if occ else 1.0 - f)

        val = -pv_integral(num, a, b, w0, points=[res.mu])
        if isinstance(sd, Lorentzian):
            val += _quad(lambda x: num(x) / (w0 - x), -math.inf, a)
            val += _quad(lambda x: num(x) / (w0 - x), b, math.inf)
        out.append(val / (2.0 * math.pi))
    return tuple(out)


def _coefficient_tables(frame, res, lamb_shift):
    """(chi, theta) coefficient matrices over the (k, l) index pair, longdouble."""
    w = frame.bohr_lk().astype(LONG)
    jmat = np.asarray(res.sd(w), dtype=LONG)
    fmat = fermi(LONG(res.beta), LONG(res.mu), w)
    chi_c = (0.5 * jmat * fmat).astype(CLONG)
    theta_c = (0.5 * jmat * (1.0 - fmat)).astype(CLONG)
    if lamb_shift:
        scale = max(1.0, float(np.abs(frame.energies).max()))
        cache = {}
        it = np.nditer(w, flags=["multi_index"])
        for val in it:
            w0 = float(val)
            key = round(w0 / scale, 12)
            if key not in cache:
                cache[key] = _lamb_pv(res, w0)
            occ, emp = cache[key]
            k, l = it.multi_index
            chi_c[k, l] += 1j * LONG(occ)
            theta_c[k, l] += 1j * LONG(emp)
    return chi_c, theta_c


@dataclass(frozen=True, eq=False)
class AttachmentPieces:
    """Eigenbasis operators of one reservoir's dissipator."""

    label: str
    d_eig: np.ndarray
    chi_eig: np.ndarray
    theta_eig: np.ndarray


@dataclass(frozen=True, eq=False)
class DissipatorPieces:
    """chi/theta operators for every attachment of a model, plus the frame."""

    frame: EigenFrame
    model: object
    items: tuple
    flags: GeneratorFlags


def build_chi_theta(frame, operator, reservoir, lamb_shift=False):
    """Return (chi, theta) for one attachment, rotated back to the original basis."""
    d_eig = frame.to_eigen(operator).astype(CLONG)
    chi_c, theta_c = _coefficient_tables(frame, reservoir, lamb_shift)
    v = frame.vectors.astype(CLONG)
    chi = v @ (chi_c * d_eig) @ v.conj().T
    theta = v @ (theta_c * d_eig) @ v.conj().T
    return chi.astype(complex), theta.astype(complex)


def collect_pieces(model, flags=GeneratorFlags()):
    """Build the eigenbasis dissipator operators for every attachment."""
    frame = EigenFrame.from_hamiltonian(model.hamiltonian)
    items = []
    for att in model.attachments:
        d_eig = frame.to_eigen(att.operator).astype(CLONG)
        chi_c, theta_c = _coefficient_tables(frame, att.reservoir, flags.lamb_shift)
        items.append(AttachmentPieces(
            label=att.reservoir.label,
            d_eig=d_eig,
            chi_eig=chi_c * d_eig,
            theta_eig=theta_c * d_eig,
        ))
    return DissipatorPieces(frame=frame, model=model, items=tuple(items), flags=flags)


def apply_variant(pieces, flags):
    """Re-derive the pieces under different generator flags."""
    if flags.lamb_shift != pieces.flags.lamb_shift:
        return collect_pieces(pieces.model, flags)
    return replace(pieces, flags=flags)


def _dissipator_super(d, chi, theta):
    """Superoperator of [chi^dag rho, d] + [d^dag, rho chi] + [theta rho, d^dag] + [d, rho theta^dag]."""
    dim = d.shape[0]
    eye = np.eye(dim, dtype=d.dtype)
    chid = chi.conj().T
    thed = theta.conj().T
    ddag = d.conj().T
    out = np.kron(chid, d.T) - np.kron(d @ chid, eye)
    out += np.kron(ddag, chi.T) - np.kron(eye, (chi @ ddag).T)
    out += np.kron(theta, ddag.T) - np.kron(ddag @ theta, eye)
    out += np.kron(d, thed.T) - np.kron(eye, (thed @ d).T)
    return out


def _secular_mask(frame, tol):
    e = frame.energies
    wvec = (e[:, None] - e[None, :]).ravel()
    scale = max(1.0, np.abs(e).max())
    return (np.abs(wvec[:, None] - wvec[None, :]) <= tol * scale)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Dense generator on vectorized density matrices, with per-reservoir parts.

    ``matrix``/``parts`` are complex128; ``matrix_ld``/``parts_ld`` are the
    extended-precision originals used for steady-state refinement and current
    evaluation at extreme scale separation.
    """

    dim: int
    labels: tuple
    flags: GeneratorFlags
    matrix: np.ndarray
    ham_part: np.ndarray
    parts: tuple
    matrix_ld: np.ndarray
    ham_part_ld: np.ndarray
    parts_ld: tuple

    def part(self, label):
        return self.parts[self.labels.index(label)]

    def trace_defect(self):
        """Max residual of the trace functional applied to the generator rows."""
        idx = np.arange(self.dim) * self.dim + np.arange(self.dim)
        return float(np.abs(self.matrix[idx, :].sum(axis=0)).max())


def build_liouvillian(model, flags=GeneratorFlags()):
    """Assemble the full generator for ``model`` under the given flags.

    The non-secular generator is assembled directly in the original basis;
    with ``secular`` on, per-reservoir superoperators are built in the
    eigenbasis, elements coupling distinct Bohr frequencies are zeroed, and
    the result is rotated back.
    """
    if not model.attachments:
        raise ValueError("model has no reservoir attachments")
    dim = model.dim
    for att in model.attachments:
        if att.operator.shape != model.hamiltonian.shape:
            raise ValueError("attachment operator dimension does not match H")

    pieces = collect_pieces(model, flags)
    frame = pieces.frame
    v_ld = frame.vectors.astype(CLONG)

    parts_ld = []
    if flags.secular:
        mask = _secular_mask(frame, flags.degeneracy_tol)
        rot_dtype = CLONG if dim <= 16 else complex
        u = np.kron(frame.vectors, frame.vectors.conj()).astype(rot_dtype)
        for item in pieces.items:
            l_eig = _dissipator_super(item.d_eig, item.chi_eig, item.theta_eig)
            l_eig = np.where(mask, l_eig, 0.0)
            part = u @ l_eig.astype(rot_dtype) @ u.conj().T
            parts_ld.append(part.astype(CLONG))
    else:
        for item in pieces.items:
            d = v_ld @ item.d_eig @ v_ld.conj().T
            chi = v_ld @ item.chi_eig @ v_ld.conj().T
            theta = v_ld @ item.theta_eig @ v_ld.conj().T
            parts_ld.append(_dissipator_super(d, chi, theta))

    h_ld = model.hamiltonian.astype(CLONG)
    eye = np.eye(dim, dtype=CLONG)
    ham_ld = -1j * (np.kron(h_ld, eye) - np.kron(eye, h_ld.T))
    total_ld = ham_ld.copy()
    for p in parts_ld:
        total_ld += p

    return Liouvillian(
        dim=dim,
        labels=tuple(a.reservoir.label for a in model.attachments),
        flags=flags,
        matrix=total_ld.astype(complex),
        ham_part=ham_ld.astype(complex),
        parts=tuple(p.astype(complex) for p in parts_ld),
        matrix_ld=total_ld,
        ham_part_ld=ham_ld,
        parts_ld=tuple(parts_ld),
    )
