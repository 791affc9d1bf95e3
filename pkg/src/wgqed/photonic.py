"""Waveguide photonic environment: Green's tensor decomposition and the
coupling matrices and scalars consumed by the scattering and emission solvers.

Conventions
-----------
The guided field enters through the forward Bloch polarization ``E_f`` at the
emitter location; the backward mode is its time reverse, ``E_b = conj(E_f)``.
The per-direction Green's tensors are

    G_f = i (a w / 4|v_g|) outer(E_f, E_f*),   G_b likewise with E_b,

and the stored loss tensor is rate-normalized: for a dipole d the decay rate
into non-guided modes is ``Im(d . G_loss . d*) / (hbar eps0)`` directly, so
``LossModel.isotropic(s)`` yields a loss rate ``s`` for any unit dipole. The
guided sandwiches carry the usual extra factor of two (rate =
``2 Im(d . G_wg . d*) / (hbar eps0)``), equivalently the loss tensor
contributes to the physical Green's function at half weight. With the default
simple units (a = w = 1, v_g = 0.1) a linear dipole matched to a linear field
decays at rate 5 per direction, 10 total, and isotropic loss 0.2 gives a
guided fraction of 10/10.2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .emitter import EmitterModel, PolarizationVector, validate
from .errors import ModelValidationError

LOSS_SYMMETRY_TOL = 1e-12
LOSS_PASSIVITY_TOL = 1e-10


@dataclass(frozen=True)
class WaveguideEnv:
    """Local waveguide data: forward field, periodicity, group velocity,
    photon frequency, and unit constants (simple units by default)."""

    E_f: PolarizationVector
    a: float = 1.0
    v_g: float = 0.1
    omega: float = 1.0
    epsilon0: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not isinstance(self.E_f, PolarizationVector):
            object.__setattr__(self, "E_f", PolarizationVector(self.E_f))
        if not self.E_f.is_finite():
            raise ModelValidationError("non-finite-entry", "E_f has non-finite components")
        for name in ("a", "omega", "epsilon0", "hbar"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ModelValidationError(
                    "invalid-environment", f"{name} must be positive and finite, got {val}"
                )
        if not np.isfinite(self.v_g) or self.v_g == 0:
            raise ModelValidationError(
                "invalid-environment", f"v_g must be nonzero and finite, got {self.v_g}"
            )

    @property
    def E_b(self) -> PolarizationVector:
        """Backward mode polarization, the time reverse of the forward one."""
        return self.E_f.conjugated()

    @property
    def z(self) -> float:
        """Density-of-states scale a w / (2 |v_g|)."""
        return self.a * self.omega / (2.0 * abs(self.v_g))

    @property
    def N(self) -> complex:
        """Field-normalization constant 2 |v_g| eps0 / (i a w)."""
        return 2.0 * abs(self.v_g) * self.epsilon0 / (1j * self.a * self.omega)

    def with_field(self, E_f) -> "WaveguideEnv":
        return replace(self, E_f=PolarizationVector(E_f))


@dataclass(frozen=True)
class LossModel:
    """Non-guided contribution to the Green's tensor, stored as a symmetric
    complex 3x3 matrix in rate normalization (see module docstring).

    The imaginary part must induce a non-negative decay rate for every dipole
    (passivity); the real part produces level shifts.
    """

    tensor: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.tensor, dtype=complex)
        if arr.shape != (3, 3):
            raise ModelValidationError(
                "dimension-mismatch", f"loss tensor must be 3x3, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr.view(float))):
            raise ModelValidationError("non-finite-entry", "loss tensor has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(arr))))
        if np.max(np.abs(arr - arr.T)) > LOSS_SYMMETRY_TOL * scale:
            raise ModelValidationError(
                "non-symmetric-loss-tensor",
                "loss tensor must be symmetric (reciprocal medium)",
            )
        rate_eigs = np.linalg.eigvalsh(arr.imag)
        if np.min(rate_eigs) < -LOSS_PASSIVITY_TOL * scale:
            raise ModelValidationError(
                "non-passive-loss-tensor",
                f"loss tensor induces a negative decay rate (min eig {np.min(rate_eigs):.3e})",
            )
        object.__setattr__(
            self, "tensor", tuple(tuple(complex(v) for v in row) for row in arr)
        )

    @classmethod
    def none(cls) -> "LossModel":
        return cls.isotropic(0.0)

    @classmethod
    def isotropic(cls, strength: float) -> "LossModel":
        """Dipole-independent loss: G_loss = i * strength * identity, i.e. two
        (in fact three) equally coupled orthogonal loss modes."""
        if strength < 0:
            raise ModelValidationError(
                "non-passive-loss-tensor", f"loss strength must be >= 0, got {strength}"
            )
        return cls.from_array(1j * float(strength) * np.eye(3))

    @classmethod
    def from_array(cls, tensor) -> "LossModel":
        arr = np.asarray(tensor, dtype=complex)
        return cls(tuple(tuple(complex(v) for v in row) for row in arr))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.tensor, dtype=complex)

    def rate_for(self, dipole: PolarizationVector, env: WaveguideEnv) -> float:
        """Loss decay rate induced on a single dipole."""
        d = dipole.as_array()
        return float(np.imag(d @ self.as_array() @ d.conj()) / (env.hbar * env.epsilon0))


@dataclass(frozen=True)
class GreensDecomposition:
    """Green's tensor at the emitter location, split by channel."""

    G_f: np.ndarray
    G_b: np.ndarray
    G_loss: np.ndarray

    def total(self) -> np.ndarray:
        return self.G_f + self.G_b + self.G_loss

    def physical(self) -> np.ndarray:
        """Channel sum with the stored loss tensor at its physical half weight."""
        return self.G_f + self.G_b + 0.5 * self.G_loss


def greens_decomposition(env: WaveguideEnv, loss: LossModel) -> GreensDecomposition:
    """Assemble the per-channel Green's tensors from the local mode fields."""
    kappa = env.a * env.omega / (4.0 * abs(env.v_g))
    ef = env.E_f.as_array()
    eb = env.E_b.as_array()
    G_f = 1j * kappa * np.outer(ef, ef.conj())
    G_b = 1j * kappa * np.outer(eb, eb.conj())
    for g in (G_f, G_b):
        g.setflags(write=False)
    return GreensDecomposition(G_f=G_f, G_b=G_b, G_loss=loss.as_array())


@dataclass(frozen=True)
class ChannelCouplings:
    """Emission couplings of one radiation channel.

    ``couplings[x, n]`` is the amplitude with which excited state x decays to
    ground state n into this channel; multiplying the mod-squared contraction
    with an excited-state amplitude vector by ``rate_scale`` gives a rate.
    """

    label: str
    rate_scale: float
    couplings: np.ndarray


@dataclass(frozen=True)
class CouplingBundle:
    """Every coupling matrix and scalar the solvers consume.

    ``W``, ``Gamma``, ``V``, ``X`` and ``L`` follow the index convention of the
    defining sandwiches (unconjugated dipole on the left index); the solvers
    contract them through their transposes, which is the orientation under
    which probability is conserved and excited-basis rotations act trivially.
    """

    W: np.ndarray          # (n_e, n_e, n_g, n_g), W[x, y, n, m]
    Gamma: np.ndarray      # (n_e, n_e)
    V: np.ndarray          # (n_e, n_e, n_g, n_g)
    Delta: np.ndarray      # (n_e, n_e) real diagonal, E_excited - E_int
    X: np.ndarray          # (n_e, n_e) guided damping sandwich
    L: np.ndarray          # (n_e, n_e) loss sandwich of the stored tensor
    N: complex
    z: float
    E_int: float
    epsilon0: float
    hbar: float
    channels: tuple[ChannelCouplings, ...]
    coherent_shift: np.ndarray      # Hermitian level-shift matrix (energy units)
    excited_energies: np.ndarray

    def damping_rate_matrix(self) -> np.ndarray:
        """Hermitian PSD matrix K with dpop/dt = -K-weighted decay (rate units).

        Built from the channel couplings, so the emission fluxes and the total
        excited decay balance exactly.
        """
        n_e = self.Gamma.shape[0]
        K = np.zeros((n_e, n_e), dtype=complex)
        for ch in self.channels:
            C = ch.couplings
            K += ch.rate_scale * (C.conj() @ C.T)
        return K

    def total_decay_rates(self) -> np.ndarray:
        """Total spontaneous decay rate of each excited state (all channels)."""
        return np.real(np.diag(self.damping_rate_matrix()))

    def channel_decay_rates(self) -> dict[str, np.ndarray]:
        """Per-channel decay rate of each excited state."""
        n_e = self.Gamma.shape[0]
        out: dict[str, np.ndarray] = {}
        for ch in self.channels:
            C = ch.couplings
            rates = ch.rate_scale * np.real(np.einsum("xn,xn->x", C, C.conj()))
            out[ch.label] = out.get(ch.label, np.zeros(n_e)) + rates
        return out


def coupling_bundle(
    model: EmitterModel, env: WaveguideEnv, loss: LossModel, E_int: float
) -> CouplingBundle:
    """Assemble all coupling matrices for one emitter in one environment.

    ``E_int`` is the conserved total energy of the process: the initial ground
    energy plus the photon energy for scattering, or the initial excited
    energy for emission. A single field frequency is used for every
    transition, so only energy differences enter the couplings.
    """
    validate(model)
    D = model.dipole_array()                      # (n_g, n_e, 3)
    dec = greens_decomposition(env, loss)
    G_phys = dec.physical()
    eps0, hbar = env.epsilon0, env.hbar

    W = -np.einsum("nxi,ij,myj->xynm", D, G_phys.conj(), D.conj()) / eps0
    Gamma = np.einsum("xynn->xy", W)
    V = W - np.conj(np.transpose(W, (1, 0, 3, 2)))

    e_energies = np.asarray(model.excited_energies, dtype=float)
    Delta = np.diag(e_energies - float(E_int))

    ef = env.E_f.as_array()
    eb = env.E_b.as_array()
    B_f = np.einsum("nxi,i->xn", D, ef.conj())    # E_f* . d_{nx}
    B_b = np.einsum("nxi,i->xn", D, eb.conj())
    X = 0.5 * (B_f @ B_f.conj().T + B_b @ B_b.conj().T)

    G_loss = dec.G_loss
    L = np.einsum("nxi,ij,nyj->xy", D, G_loss.conj(), D.conj())

    wg_scale = env.a * env.omega / (2.0 * abs(env.v_g) * hbar * eps0)
    channels = [
        ChannelCouplings("forward", wg_scale, B_f),
        ChannelCouplings("backward", wg_scale, B_b),
    ]
    # One loss channel per eigenmode of the dissipative part of the tensor.
    rate_eigs, rate_vecs = np.linalg.eigh(G_loss.imag)
    for lam, u in zip(rate_eigs, rate_vecs.T):
        if lam <= 1e-15:
            continue
        C = np.einsum("nxi,i->xn", D, u.astype(complex))
        channels.append(ChannelCouplings("loss", float(lam) / (hbar * eps0), C))

    Gamma_oriented = Gamma.T
    shift = 0.5 * (Gamma_oriented + Gamma_oriented.conj().T)

    for arr in (W, Gamma, V, Delta, X, L, shift):
        arr.setflags(write=False)

    return CouplingBundle(
        W=W,
        Gamma=Gamma,
        V=V,
        Delta=Delta,
        X=X,
        L=L,
        N=env.N,
        z=env.z,
        E_int=float(E_int),
        epsilon0=eps0,
        hbar=hbar,
        channels=tuple(channels),
        coherent_shift=shift,
        excited_energies=e_energies,
    )
