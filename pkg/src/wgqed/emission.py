"""Spontaneous-emission dynamics of an initially excited emitter.

Integrates the reduced density matrix of the emitter with the optical modes
traced out: the excited block evolves coherently under the bare energies plus
environment-induced shifts and decays under the channel couplings, while the
released population is routed into per-channel ground-state accumulators
(forward, backward, loss) built from the matching part of the Green's tensor.

Ground-manifold coherences between different photon channels, and between
ground states within one channel, are not tracked: the reproduced observables
(populations and direction-resolved photon probabilities) only need the
diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .emitter import EmitterModel, ExcitedSuperposition, validate
from .errors import NonPhysicalStateError
from .photonic import CouplingBundle, LossModel, WaveguideEnv, coupling_bundle
from .rk import integrate_adaptive

CHANNELS = ("forward", "backward", "loss")
_CHANNEL_INDEX = {label: i for i, label in enumerate(CHANNELS)}

INITIAL_NORM_TOL = 1e-12
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_LIFETIMES = 20.0


@dataclass(frozen=True)
class EmitterDensityMatrix:
    """Reduced emitter state at one time: Hermitian excited block plus
    accumulated ground-state probabilities per radiation channel."""

    excited_block: np.ndarray        # (n_e, n_e) complex Hermitian
    ground_mode_probs: np.ndarray    # (n_g, 3) real, columns ordered as CHANNELS

    def total_trace(self) -> float:
        return float(np.trace(self.excited_block).real + np.sum(self.ground_mode_probs))

    def excited_populations(self) -> np.ndarray:
        return np.real(np.diag(self.excited_block))

    def channel_totals(self) -> tuple[float, float, float]:
        sums = np.sum(self.ground_mode_probs, axis=0)
        return (float(sums[0]), float(sums[1]), float(sums[2]))


class DirectionalTotals(NamedTuple):
    p_forward: float
    p_backward: float
    p_loss: float
    residual_excited: float


@dataclass(frozen=True)
class EmissionTrajectory:
    times: np.ndarray
    states: tuple[EmitterDensityMatrix, ...]
    final_totals: DirectionalTotals


def channel_flux(bundle: CouplingBundle, excited_block: np.ndarray) -> np.ndarray:
    """Instantaneous probability flux (n_ground, 3) out of ``excited_block``
    into each (ground state, channel) pair."""
    n_g = bundle.channels[0].couplings.shape[1]
    flux = np.zeros((n_g, len(CHANNELS)))
    for ch in bundle.channels:
        col = _CHANNEL_INDEX[ch.label]
        C = ch.couplings
        flux[:, col] += ch.rate_scale * np.real(
            np.einsum("xn,xy,yn->n", C, excited_block, C.conj())
        )
    return flux


def _coerce_initial(initial, n_e: int) -> np.ndarray:
    if isinstance(initial, ExcitedSuperposition):
        psi = initial.as_array()
        if psi.size != n_e:
            raise NonPhysicalStateError(
                f"initial superposition has {psi.size} amplitudes for {n_e} excited states"
            )
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > INITIAL_NORM_TOL:
            raise NonPhysicalStateError(
                f"initial superposition norm {norm!r} differs from 1 beyond {INITIAL_NORM_TOL}"
            )
        return np.outer(psi, psi.conj())
    rho = np.asarray(initial, dtype=complex)
    if rho.shape != (n_e, n_e):
        raise NonPhysicalStateError(
            f"initial density matrix must be {n_e} x {n_e}, got {rho.shape}"
        )
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise NonPhysicalStateError("initial density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > INITIAL_NORM_TOL:
        raise NonPhysicalStateError("initial density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -1e-10:
        raise NonPhysicalStateError("initial density matrix is not positive semidefinite")
    return rho


def default_t_max(bundle: CouplingBundle, lifetimes: float = DEFAULT_LIFETIMES) -> float:
    """``lifetimes`` over the smallest nonzero total decay rate."""
    rates = bundle.total_decay_rates()
    positive = rates[rates > 1e-12]
    if positive.size == 0:
        return float(lifetimes)
    return float(lifetimes / np.min(positive))


def evolve(
    model: EmitterModel,
    env: WaveguideEnv,
    loss: LossModel,
    initial,
    t_max: float | None = None,
    *,
    times: Sequence[float] | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    output_points: int = 201,
) -> EmissionTrajectory:
    """Time-integrate the emission of an initially excited emitter.

    ``initial`` is an :class:`ExcitedSuperposition` or an excited-block
    density matrix. Output states are stored at ``times`` (must start at 0)
    or at ``output_points`` uniform samples of ``[0, t_max]``; ``t_max``
    defaults to 20 lifetimes of the slowest decaying excited state.

    Raises :class:`ToleranceNotMetError` on step-size underflow and
    :class:`NonPhysicalStateError` when the total trace drifts beyond ten
    times the integration tolerance.
    """
    validate(model)
    n_e = model.n_excited
    n_g = model.n_ground
    rho0 = _coerce_initial(initial, n_e)

    E_int = float(np.mean(model.excited_energies))
    bundle = coupling_bundle(model, env, loss, E_int)
    K = bundle.damping_rate_matrix()
    H_coh = np.diag(bundle.excited_energies).astype(complex) - bundle.coherent_shift
    hbar = env.hbar

    if times is None:
        horizon = default_t_max(bundle) if t_max is None else float(t_max)
        if horizon <= 0:
            raise ValueError(f"t_max must be positive, got {horizon}")
        t_grid = np.linspace(0.0, horizon, int(output_points))
    else:
        t_grid = np.asarray(times, dtype=float)
        if t_grid[0] != 0.0:
            raise ValueError("output times must start at 0")

    n_rho = n_e * n_e
    y0 = np.concatenate([rho0.ravel(), np.zeros(n_g * len(CHANNELS), dtype=complex)])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        rho = y[:n_rho].reshape(n_e, n_e)
        drho = (-1j / hbar) * (H_coh @ rho - rho @ H_coh) - 0.5 * (K @ rho + rho @ K)
        flux = channel_flux(bundle, rho)
        return np.concatenate([drho.ravel(), flux.ravel().astype(complex)])

    drift_tol = 10.0 * (rtol + atol)

    def trace_guard(t: float, y: np.ndarray) -> None:
        if not np.all(np.isfinite(y.view(float))):
            raise NonPhysicalStateError(f"non-finite state at t = {t:.6g}")
        total = np.trace(y[:n_rho].reshape(n_e, n_e)).real + np.sum(y[n_rho:].real)
        if abs(total - 1.0) > drift_tol:
            raise NonPhysicalStateError(
                f"total trace drifted to {total!r} at t = {t:.6g} "
                f"(allowed deviation {drift_tol:.3e})"
            )

    ys = integrate_adaptive(
        rhs, t_grid, y0, rtol=rtol, atol=atol, step_callback=trace_guard
    )

    states = []
    for row in ys:
        rho = row[:n_rho].reshape(n_e, n_e).copy()
        probs = row[n_rho:].real.reshape(n_g, len(CHANNELS)).copy()
        rho.setflags(write=False)
        probs.setflags(write=False)
        states.append(EmitterDensityMatrix(excited_block=rho, ground_mode_probs=probs))

    last = states[-1]
    p_f, p_b, p_loss = last.channel_totals()
    totals = DirectionalTotals(
        p_forward=p_f,
        p_backward=p_b,
        p_loss=p_loss,
        residual_excited=float(np.trace(last.excited_block).real),
    )
    t_grid = np.asarray(t_grid, dtype=float)
    t_grid.setflags(write=False)
    return EmissionTrajectory(times=t_grid, states=tuple(states), final_totals=totals)


def directional_totals(trajectory: EmissionTrajectory) -> tuple[float, float, float]:
    """Final (P_forward, P_backward, P_loss) photon probabilities."""
    if not trajectory.states:
        raise ValueError("trajectory has no states")
    ft = trajectory.final_totals
    return (ft.p_forward, ft.p_backward, ft.p_loss)


def outcome_distance(traj_a: EmissionTrajectory, traj_b: EmissionTrajectory) -> float:
    """Total-variation distance between the final (P_f, P_b, P_loss) outcome
    distributions of two runs. Ranges over [0, 1] for fully decayed states."""
    pa = np.array(directional_totals(traj_a))
    pb = np.array(directional_totals(traj_b))
    return float(0.5 * np.sum(np.abs(pa - pb)))
