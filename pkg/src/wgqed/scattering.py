"""Long-time single-photon scattering amplitudes for a multi-level emitter,
plus the scalar two-level closed form used as an independent cross-check.

The amplitude into output mode m with the emitter left in ground state k is

    gamma[m, k] = delta - (E_m* . d_k:) M^-1 (d_r:* . E_in)

with the response matrix assembled from the coupling bundle in either of two
algebraically equivalent forms (``form="gamma"`` or ``form="split"``). The
bookend convention is fixed: absorption contracts the conjugated dipole with
the field, emission contracts the conjugated field with the dipole.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .emitter import EmitterModel, PolarizationVector, validate
from .errors import (
    IllConditionedResponseWarning,
    SingularResponseError,
)
from .photonic import CouplingBundle, LossModel, WaveguideEnv, coupling_bundle

MODES = ("forward", "backward")
DARK_COUPLING_THRESHOLD = 1e-12
COND_WARN_THRESHOLD = 1e12
COND_SINGULAR_THRESHOLD = 1e15


@dataclass(frozen=True)
class ScatterInput:
    """Input channel: photon direction, initial ground state, and photon
    frequency (defaults to the environment frequency, i.e. zero detuning
    against an excited energy equal to ``E_ground + hbar * omega``)."""

    direction: str = "forward"
    ground_index: int = 0
    photon_frequency: float | None = None

    def __post_init__(self):
        if self.direction not in MODES:
            raise ValueError(f"direction must be one of {MODES}, got {self.direction!r}")


@dataclass(frozen=True)
class ScatteringResult:
    """Amplitude table gamma[mode, ground] plus the probability scattered out
    of the waveguide and the energy-conserving output frequencies."""

    amplitudes: np.ndarray            # (2, n_ground), rows ordered as MODES
    p_loss: float
    output_frequencies: np.ndarray    # (n_ground,)
    input_direction: str
    input_ground: int

    def amplitude(self, mode: str, ground_index: int) -> complex:
        return complex(self.amplitudes[MODES.index(mode), ground_index])

    @property
    def transmission(self) -> complex:
        """Amplitude in the input mode with the emitter back in the input
        ground state."""
        return self.amplitude(self.input_direction, self.input_ground)

    @property
    def reflection(self) -> complex:
        other = "backward" if self.input_direction == "forward" else "forward"
        return self.amplitude(other, self.input_ground)

    def total_probability(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) + self.p_loss)


class TwoLevelAmplitudes(NamedTuple):
    t: complex
    r: complex
    p_loss: float


def response_matrix(bundle: CouplingBundle, form: str = "gamma") -> np.ndarray:
    """Response matrix whose inverse propagates the excited manifold.

    ``"gamma"`` evaluates N (Gamma^T - Delta) from the self-energy matrix;
    ``"split"`` assembles the frequency-independent per-channel split
    X^T + i L^T / 2z + i eps0 Delta / z. Both are the same matrix up to
    rounding and are kept as mutual cross-checks.
    """
    if form == "gamma":
        return bundle.N * (bundle.Gamma.T - bundle.Delta)
    if form == "split":
        return (
            bundle.X.T
            + (0.5j / bundle.z) * bundle.L.T
            + (1j * bundle.epsilon0 / bundle.z) * bundle.Delta
        )
    raise ValueError(f"unknown response form {form!r}")


def _dark_split(M: np.ndarray):
    """Eigen-split of the Hermitian damping part of M into dark and coupled
    subspaces. Dark directions have total channel coupling below threshold."""
    damping = 0.5 * (M + M.conj().T)
    lam, vecs = np.linalg.eigh(damping)
    dark = lam < DARK_COUPLING_THRESHOLD
    return lam, vecs, dark


def _solve_response(
    M: np.ndarray, in_vec: np.ndarray, dark_state_projection: bool
) -> np.ndarray:
    cond = np.linalg.cond(M)
    if np.isfinite(cond) and cond <= COND_SINGULAR_THRESHOLD:
        if cond > COND_WARN_THRESHOLD:
            warnings.warn(
                f"response matrix condition number {cond:.3e} exceeds {COND_WARN_THRESHOLD:.0e}",
                IllConditionedResponseWarning,
                stacklevel=3,
            )
        return np.linalg.solve(M, in_vec)

    lam, vecs, dark = _dark_split(M)
    if not dark_state_projection:
        dark_vecs = vecs[:, dark]
        raise SingularResponseError(
            "response matrix is singular: dark excited eigenvector(s) with "
            f"couplings {lam[dark]} decouple from every channel on resonance; "
            "rerun with dark-state projection to solve in the coupled subspace",
            dark_vectors=dark_vecs,
        )
    keep = vecs[:, ~dark]
    if keep.shape[1] == 0:
        return np.zeros_like(in_vec)
    M_red = keep.conj().T @ M @ keep
    y_red = np.linalg.solve(M_red, keep.conj().T @ in_vec)
    return keep @ y_red


def scatter(
    model: EmitterModel,
    env: WaveguideEnv,
    loss: LossModel,
    inp: ScatterInput,
    *,
    dark_state_projection: bool = False,
    form: str = "gamma",
) -> ScatteringResult:
    """Scatter one long (single-frequency) photon off the emitter.

    Returns the complex amplitude for every (output mode, final ground state)
    pair; the remaining probability is reported as ``p_loss``. Raises
    :class:`SingularResponseError` when the response matrix is singular (a
    dark excited state exactly on resonance with zero loss) unless
    ``dark_state_projection`` is set, in which case decoupled excited
    directions are removed and the system is solved in the coupled subspace.
    """
    validate(model)
    n_g = model.n_ground
    r = inp.ground_index
    if not 0 <= r < n_g:
        raise IndexError(f"ground index {r} out of range for {n_g} ground states")

    omega_f = env.omega if inp.photon_frequency is None else float(inp.photon_frequency)
    ground = np.asarray(model.ground_energies, dtype=float)
    E_int = ground[r] + env.hbar * omega_f
    bundle = coupling_bundle(model, env, loss, E_int)

    B_f = bundle.channels[0].couplings    # E_f* . d_{nx}, shape (n_e, n_g)
    B_b = bundle.channels[1].couplings
    D = model.dipole_array()
    E_in = (env.E_f if inp.direction == "forward" else env.E_b).as_array()
    in_vec = np.einsum("xi,i->x", D[r].conj(), E_in)

    amplitudes = np.zeros((2, n_g), dtype=complex)
    amplitudes[MODES.index(inp.direction), r] = 1.0

    if np.linalg.norm(in_vec) > 0.0:
        M = response_matrix(bundle, form=form)
        y = _solve_response(M, in_vec, dark_state_projection)
        amplitudes[0] -= B_f.T @ y
        amplitudes[1] -= B_b.T @ y

    p_loss = float(1.0 - np.sum(np.abs(amplitudes) ** 2))
    output_frequencies = omega_f + (ground[r] - ground) / env.hbar
    amplitudes.setflags(write=False)
    output_frequencies.setflags(write=False)
    return ScatteringResult(
        amplitudes=amplitudes,
        p_loss=p_loss,
        output_frequencies=output_frequencies,
        input_direction=inp.direction,
        input_ground=r,
    )


def two_level_closed_form(
    d: PolarizationVector,
    env: WaveguideEnv,
    loss: LossModel,
    detuning: float = 0.0,
) -> TwoLevelAmplitudes:
    """Closed-form (t, r, p_loss) for a single transition with dipole ``d``.

    ``detuning`` is the transition energy minus the total input energy, in the
    same units as the level energies. Kept free of the matrix machinery so it
    can serve as an independent oracle for :func:`scatter`.
    """
    if not isinstance(d, PolarizationVector):
        d = PolarizationVector(d)
    dv = d.as_array()
    ef = env.E_f.as_array()
    eb = env.E_b.as_array()

    a_f = dv @ ef.conj()              # E_f* . d
    a_b = dv @ eb.conj()
    X = 0.5 * (abs(a_f) ** 2 + abs(a_b) ** 2)
    loss_term = (0.5j / env.z) * (dv @ loss.as_array().conj() @ dv.conj())
    M = X + loss_term + 1j * env.epsilon0 * float(detuning) / env.z
    if abs(M) == 0.0:
        raise SingularResponseError(
            "two-level denominator vanishes: zero coupling, zero loss, on resonance",
            code="singular-denominator",
        )
    excitation = np.conj(a_f)         # d* . E_f
    t = 1.0 - a_f * excitation / M
    r = -a_b * excitation / M
    p_loss = float(1.0 - abs(t) ** 2 - abs(r) ** 2)
    return TwoLevelAmplitudes(t=complex(t), r=complex(r), p_loss=p_loss)


@dataclass(frozen=True)
class SweepPoint:
    """One polarization sweep sample; exactly one of result/error is set."""

    theta: float
    result: Optional[ScatteringResult] = None
    error: Optional[Exception] = field(default=None, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None


def polarization_sweep(
    model: EmitterModel,
    env_template: WaveguideEnv,
    loss: LossModel,
    inp: ScatterInput,
    theta_grid: Sequence[float],
    *,
    dark_state_projection: bool = False,
    form: str = "gamma",
    max_workers: int = 1,
) -> list[SweepPoint]:
    """Scatter at E_f = (cos(theta), i sin(theta), 0) for each grid point.

    Failed points are flagged in place instead of aborting the sweep. Results
    are returned in grid order and do not depend on ``max_workers``.
    """
    thetas = np.asarray(theta_grid, dtype=float)
    if thetas.size == 0 or not np.all(np.isfinite(thetas)):
        raise ValueError("theta grid must be nonempty and finite")
    if np.min(thetas) < 0.0 or np.max(thetas) > np.pi + 1e-12:
        raise ValueError("theta grid must lie within [0, pi]")

    def run_point(theta: float) -> SweepPoint:
        env = env_template.with_field([np.cos(theta), 1j * np.sin(theta), 0.0])
        try:
            res = scatter(
                model, env, loss, inp,
                dark_state_projection=dark_state_projection, form=form,
            )
        except (SingularResponseError, np.linalg.LinAlgError) as exc:
            return SweepPoint(theta=float(theta), error=exc)
        return SweepPoint(theta=float(theta), result=res)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(run_point, thetas))
    return [run_point(t) for t in thetas]
