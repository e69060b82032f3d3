"""Averaged-density-matrix evolution and closed-form transition probabilities.

Every generator in both models is diagonal in the position (x) mass basis,
so each (mu, nu, x, y) entry of the density matrix evolves by a closed
scalar exponential: a phase -i(m_mu - m_nu) plus a nonnegative damping
rate.  The exact evolvers and the step-wise numeric evolver are therefore
independent routes to the same answer, and both serve as oracles for the
Monte Carlo unravelings.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core import (IDX_H, IDX_L, DensityBlocks, InvariantViolationError,
                   ParameterError, flavor_to_mass)
from .models import QMUPL, smearing_self_convolution

RECORD_COLUMNS = ("time", "p_same", "p_other", "stderr_same", "stderr_other", "source")


@dataclass(frozen=True)
class TransitionRecord:
    """Time series of transition probabilities with Monte Carlo error bars.

    stderr arrays are zero for exact / master-equation sources.
    """

    times: np.ndarray
    p_same: np.ndarray
    p_other: np.ndarray
    stderr_same: np.ndarray
    stderr_other: np.ndarray
    source: str

    def __post_init__(self):
        for name in ("times", "p_same", "p_other", "stderr_same", "stderr_other"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def validate(self, tol=1e-9):
        total = self.p_same + self.p_other
        err = 3.0 * np.hypot(self.stderr_same, self.stderr_other) + tol
        if np.any(np.abs(total - 1.0) > err):
            raise InvariantViolationError(
                "p_same + p_other deviates from 1 by up to %g"
                % float(np.max(np.abs(total - 1.0))))
        return self

    def with_decay(self, width):
        """Apply a phenomenological decay factor exp(-width * t) to both columns.

        After this the probabilities no longer sum to 1: the complement is
        the decayed fraction.
        """
        f = np.exp(-width * self.times)
        return replace(self, p_same=self.p_same * f, p_other=self.p_other * f,
                       stderr_same=self.stderr_same * f,
                       stderr_other=self.stderr_other * f,
                       source=self.source + "+decay")


def exact_record(times, p_same, p_other, source):
    z = np.zeros_like(np.asarray(times, dtype=float))
    return TransitionRecord(times=times, p_same=p_same, p_other=p_other,
                            stderr_same=z, stderr_other=z, source=source)


@dataclass(frozen=True)
class SuperoperatorKernel:
    """Left/right channel weights generating the interaction-picture map.

    weights : (n_channels, n_points, 2) diagonal values of each channel.
    coupling : effective coupling (model coupling times channel measure).
    """

    weights: np.ndarray
    coupling: float
    hamiltonian: np.ndarray
    grid: object

    @classmethod
    def from_model(cls, model):
        return cls(weights=model.channels, coupling=model.effective_coupling,
                   hamiltonian=model.hamiltonian, grid=model.grid)


def decoherence_rates(model):
    """Damping rate of each density entry, shape (2, 2, n, n).

    rate[mu, nu, x, y] = (coupling/2) * sum_i (w_i(x,mu) - w_i(y,nu))^2
    with the channel quadrature measure folded into the coupling.
    """
    w = model.channels
    s2 = model.channel_square_sum()                       # (n, 2)
    cross = np.einsum("ixm,iyn->mnxy", w, w, optimize=True)
    rate = (s2.T[:, None, :, None] + s2.T[None, :, None, :] - 2.0 * cross)
    return 0.5 * model.effective_coupling * rate


def _phase_rates(hamiltonian):
    """-i (m_mu - m_nu) for each block, shape (2, 2)."""
    h = np.asarray(hamiltonian, dtype=float)
    return -1j * (h[:, None] - h[None, :])


def evolve_me_numeric(rho0, model, t, dt, validate=True):
    """Step-wise master-equation evolution of DensityBlocks.

    Each entry is multiplied per step by exp(dt * (phase - rate)); the
    per-entry generator is exact, so dt controls only the step count.
    Trace and Hermiticity are preserved exactly.
    """
    if dt <= 0 or t < 0:
        raise ParameterError("need t >= 0 and dt > 0 (t=%g, dt=%g)" % (t, dt))
    if validate:
        rho0.validate(tol=1e-8)
    n_steps = int(round(t / dt))
    if abs(n_steps * dt - t) > 1e-9 * max(t, dt):
        raise ParameterError("t=%g is not an integer number of steps dt=%g" % (t, dt))
    gen = (_phase_rates(model.hamiltonian)[:, :, None, None]
           - decoherence_rates(model))
    step = np.exp(gen * dt)
    blocks = np.array(rho0.blocks)
    for _ in range(n_steps):
        blocks *= step
    return DensityBlocks(blocks, rho0.grid)


def evolve_me_qmupl_exact(rho0, params, t):
    """Closed-form QMUPL evolution:

    rho^{mu nu}(x,y,t) = exp[-i(m_mu - m_nu) t
                             - lambda |m_mu x - m_nu y|^2 t / (2 m0^2)] rho0.
    """
    x = rho0.grid.points
    m = np.array([params.mH, params.mL])
    mx = m[:, None, None, None] * x[None, None, :, None]
    my = m[None, :, None, None] * x[None, None, None, :]
    rate = params.lam * (mx - my) ** 2 / (2.0 * params.m0 ** 2)
    phase = _phase_rates(m)[:, :, None, None]
    return DensityBlocks(rho0.blocks * np.exp((phase - rate) * t), rho0.grid)


def evolve_me_csl_exact(rho0, params, t):
    """Closed-form CSL evolution with the continuum smearing convolution.

    Entry rate: (gamma / 2 m0^2) [(m_mu^2 + m_nu^2) g*g(0)
                                  - 2 m_mu m_nu g*g(x - y)].
    """
    x = rho0.grid.points
    m = np.array([params.mH, params.mL])
    gg0 = smearing_self_convolution(params, 0.0)
    gg = smearing_self_convolution(params, x[:, None] - x[None, :])
    msq = m[:, None] ** 2 + m[None, :] ** 2              # (2, 2)
    mprod = m[:, None] * m[None, :]
    rate = (params.gamma / (2.0 * params.m0 ** 2)
            * (msq[:, :, None, None] * gg0 - 2.0 * mprod[:, :, None, None] * gg))
    phase = _phase_rates(m)[:, :, None, None]
    return DensityBlocks(rho0.blocks * np.exp((phase - rate) * t), rho0.grid)


def qmupl_flavor_probabilities(params, t):
    """Exact particle / anti-particle probabilities from an initial M0.

    1/2 +- cos(dm t) / (2 (1 + lam alpha dm^2 t / (2 m0^2))^(dim/2)).
    The damping is algebraic; the exponent is dim/2 per spatial dimension.
    """
    t = np.asarray(t, dtype=float)
    damp = (1.0 + params.lam * params.alpha * params.dm ** 2 * t
            / (2.0 * params.m0 ** 2)) ** (-params.dim / 2.0)
    osc = np.cos(params.dm * t) * damp / 2.0
    return 0.5 + osc, 0.5 - osc


def csl_flavor_probabilities(params, t):
    """Exact CSL probabilities: exponentially damped oscillation.

    1/2 +- cos(dm t)/2 * exp[-gamma dm^2 g*g(0) t / (2 m0^2)] with
    g*g(0) = (4 pi rC^2)^(-dim/2).  Independent of the spatial profile.
    """
    t = np.asarray(t, dtype=float)
    gg0 = (4.0 * np.pi * params.rC ** 2) ** (-params.dim / 2.0)
    rate = params.gamma * params.dm ** 2 * gg0 / (2.0 * params.m0 ** 2)
    osc = np.cos(params.dm * t) * np.exp(-rate * t) / 2.0
    return 0.5 + osc, 0.5 - osc


def flavor_record(params, times, model_label=QMUPL):
    """TransitionRecord of the closed-form probabilities."""
    times = np.asarray(times, dtype=float)
    if model_label == QMUPL:
        p_same, p_other = qmupl_flavor_probabilities(params, times)
    else:
        p_same, p_other = csl_flavor_probabilities(params, times)
    return exact_record(times, p_same, p_other, source="exact-closed-form")


def mass_transition_probabilities(model_label=None):
    """Mass-eigenstate transitions are trivial for both models."""
    return {("H", "H"): 1.0, ("H", "L"): 0.0, ("L", "L"): 1.0, ("L", "H"): 0.0}


def transition_probability(rho, out, validate=True):
    """<phi_out| rho |phi_out> for a flavor or mass label.

    Flavor outputs reduce to 1/2 int dx [rho^HH + rho^LL +- rho^HL +- rho^LH](x,x);
    mass outputs are the corresponding diagonal-block trace.
    """
    if validate:
        rho.validate(tol=1e-8)
    dx = rho.grid.spacing
    diag = np.einsum("mnxx->mn", rho.blocks) * dx        # (2, 2)
    v = flavor_to_mass(out)
    c = np.array([v.cH, v.cL])
    val = np.real(np.conj(c) @ diag @ c)
    return float(val)


def interference_integral(rho):
    """int dx rho^{HL}(x, x), the complex oscillation amplitude."""
    return complex(np.sum(np.diagonal(rho.blocks[IDX_H, IDX_L])) * rho.grid.spacing)


def me_flavor_probabilities(model, rho0, times, dt, dim=1):
    """Grid master-equation flavor probabilities at the sample times.

    The grid is 1-D; higher dimensions factorize, so the dim-d damping
    envelope is the 1-D envelope raised to the d-th power while the phase
    is unchanged: p_same = 1/2 + Re(z) * (2|z|)^(d-1) with
    z = int dx rho^HL(x,x).
    """
    rho0.validate(tol=1e-8)
    times, amplitudes = _interference_series(model, rho0, times, dt)
    z_re = amplitudes.real
    env = 2.0 * np.abs(amplitudes)
    p_same = 0.5 + z_re * env ** (dim - 1)
    return exact_record(times, p_same, 1.0 - p_same, source="me-numeric")


def me_envelope(model, rho0, times, dt):
    """1-D grid-ME oscillation envelope 2 |int dx rho^HL(x,x)| at each time."""
    _, amplitudes = _interference_series(model, rho0, times, dt)
    return 2.0 * np.abs(amplitudes)


def _interference_series(model, rho0, times, dt):
    """Cumulative stepping of the numeric ME; times snap to multiples of dt."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ParameterError("times must be nonnegative")
    steps = np.round(times / dt).astype(int)
    if np.any(np.abs(steps * dt - times) > 1e-9 * max(dt, float(np.max(times, initial=dt)))):
        raise ParameterError("every sample time must be an integer multiple of dt")
    order = np.argsort(steps)
    gen = (_phase_rates(model.hamiltonian)[:, :, None, None]
           - decoherence_rates(model))
    step = np.exp(gen * dt)
    blocks = np.array(rho0.blocks)
    dx = rho0.grid.spacing
    amplitudes = np.empty(times.shape, dtype=complex)
    done = 0
    for idx in order:
        for _ in range(steps[idx] - done):
            blocks *= step
        done = steps[idx]
        amplitudes[idx] = np.sum(np.diagonal(blocks[IDX_H, IDX_L])) * dx
    return times, amplitudes


def dyson_expand(kernel, rho0, t, order):
    """Order-k truncation of the time-ordered interaction-picture expansion.

    The channel operators commute with the Hamiltonian, so the interaction
    picture leaves them time independent and the time ordering is trivial:
    the doubled-space generator acts entrywise as -rate, and the truncation
    is sum_{n<=k} (-rate * t)^n / n! followed by the free phase.
    """
    if order not in (0, 1, 2):
        raise ParameterError("unsupported expansion order %r (need 0, 1 or 2)" % (order,))
    w = kernel.weights
    # left-right combination  A^L A^R - (A^L A^L + A^R A^R)/2  acting entrywise:
    # the left factor takes the row value w(i,x,mu), the right the column value
    cross = np.einsum("ixm,iyn->mnxy", w, w, optimize=True)
    s2 = np.sum(w ** 2, axis=0).T                        # (2, n)
    gen = cross - 0.5 * (s2[:, None, :, None] + s2[None, :, None, :])
    st = kernel.coupling * gen * t                       # (2, 2, n, n), <= 0
    series = np.ones_like(st)
    term = np.ones_like(st)
    for n in range(1, order + 1):
        term = term * st / n
        series = series + term
    phase = np.exp(_phase_rates(kernel.hamiltonian)[:, :, None, None] * t)
    return DensityBlocks(rho0.blocks * series * phase, rho0.grid)
