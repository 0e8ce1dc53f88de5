"""Jost solutions of −f″ + V f = k² f by inward integration.

The Jost solutions f±(x,k) ~ e^{±ikx} (x → ±∞) are computed through the
slowly varying factors h±(x,k) = e^{∓ikx} f±(x,k), which satisfy

    h″ ± 2ik h′ = V h,     h±(±∞) = 1,  h′±(±∞) = 0.

Working with h removes the free oscillation e^{±ikx} from the state, so the
integrator only has to track the potential-induced structure (plus the
neutrally stable e^{∓2ikx} homogeneous mode, which sets the step size at
large |k|).  Integration starts at a cutoff X∞ where the tail mass
η±(X∞) = ±∫ |V| is below a tolerance and proceeds inward; the k grid is
batched into bands of comparable |k| so that one vectorised solver call
serves many wavenumbers without the largest k forcing tiny steps on all of
them.

k = 0 is always solved as the genuine real ODE h″ = V h (no limit is taken),
and purely imaginary k = iκ reduce to the real equations h″ = V h ± 2κ h′
used for bound-state searches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import CrossCheckError, CutoffError, ResonanceError
from .potentials import Potential, cutoff_for_eta, eta

__all__ = [
    "JostField",
    "IntegrationReport",
    "ZeroEnergyData",
    "ZeroEnergyState",
    "compute_h",
    "compute_h_bound",
    "jost_at_zero",
    "zero_energy_scan",
    "zero_energy_state",
    "RESONANCE_EPS",
]

RESONANCE_EPS = 1e-6  # |W(0)| below this multiple of the natural scale => resonant

_BAND_EDGES = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0)


@dataclass(frozen=True)
class IntegrationReport:
    cutoff: float
    eta_at_cutoff: float
    rtol: float
    atol: float
    bands: tuple[tuple[float, float, int], ...]  # (|k| low, |k| high, nfev)


@dataclass(frozen=True)
class JostField:
    """h±(x,k) and ∂ₓh±(x,k) tabulated on an (x, k) grid for one side."""

    side: int
    x_grid: np.ndarray
    k_grid: np.ndarray
    h: np.ndarray
    h_prime: np.ndarray
    report: IntegrationReport

    def x_index(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.x_grid - x)))
        if abs(self.x_grid[i] - x) > 1e-9:
            raise KeyError(f"x={x} not on the field grid")
        return i

    def at_x(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        """(h(x,·), ∂ₓh(x,·)) along the k grid."""
        i = self.x_index(x)
        return self.h[i], self.h_prime[i]

    def f_at_x(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        """Jost solution f(x,·) and ∂ₓf(x,·) at one grid point."""
        h, hp = self.at_x(x)
        phase = np.exp(self.side * 1j * self.k_grid * x)
        f = phase * h
        fp = phase * (self.side * 1j * self.k_grid * h + hp)
        return f, fp


def _rhs_factory(pot: Potential, ks: np.ndarray, side: int):
    m = ks.size
    twoik = side * 2j * np.asarray(ks, dtype=complex)

    def rhs(x, z):
        h = z[:m]
        hp = z[m:]
        v = float(pot(x))
        return np.concatenate([hp, v * h - twoik * hp])

    return rhs


def _integrate_batch(pot, x_targets, ks, side, rtol, atol, x_start):
    """March the h-ODE from x_start through x_targets (given in integration
    order), splitting at potential breakpoints.  Returns (h, hp, nfev) with
    arrays of shape (len(x_targets), len(ks))."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    m = ks.size
    rhs = _rhs_factory(pot, ks, side)
    x_end = float(x_targets[-1])
    x_start = float(x_start)
    inward = x_end < x_start  # side +
    bps = [b for b in pot.breakpoints if min(x_start, x_end) < b < max(x_start, x_end)]
    bps.sort(reverse=inward)
    edges = [float(x_start)] + bps + [x_end]

    y = np.concatenate([np.ones(m, dtype=complex), np.zeros(m, dtype=complex)])
    out_h = np.empty((len(x_targets), m), dtype=complex)
    out_hp = np.empty_like(out_h)
    pos = 0
    nfev = 0
    for a, b in zip(edges[:-1], edges[1:]):
        take = []
        while pos + len(take) < len(x_targets):
            t = x_targets[pos + len(take)]
            if (inward and t >= b - 1e-14) or (not inward and t <= b + 1e-14):
                take.append(float(t))
            else:
                break
        if abs(b - a) < 1e-15:  # degenerate segment (start on the grid edge)
            for j in range(len(take)):
                out_h[pos + j] = y[:m]
                out_hp[pos + j] = y[m:]
            pos += len(take)
            continue
        t_eval = list(take)
        if not t_eval or abs(t_eval[-1] - b) > 1e-14:
            t_eval.append(b)
        sol = solve_ivp(
            rhs,
            (a, b),
            y,
            method="DOP853",
            t_eval=np.asarray(t_eval),
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise CrossCheckError(f"ODE integration failed on [{a}, {b}]: {sol.message}")
        nfev += sol.nfev
        for j in range(len(take)):
            out_h[pos + j] = sol.y[:m, j]
            out_hp[pos + j] = sol.y[m:, j]
        pos += len(take)
        y = sol.y[:, -1].copy()
    return out_h, out_hp, nfev


def _band_split(kabs: np.ndarray):
    bands = []
    lo = -1.0  # include 0 in the first band
    for hi in _BAND_EDGES:
        sel = np.where((kabs > lo) & (kabs <= hi))[0]
        if sel.size:
            bands.append((max(lo, 0.0), hi, sel))
        lo = hi
    sel = np.where(kabs > lo)[0]
    if sel.size:
        bands.append((lo, float(kabs.max()), sel))
    return bands


def compute_h(
    pot: Potential,
    x_grid,
    k_grid,
    side: int,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    cutoff_tol: float = 1e-10,
    x_inf: float | None = None,
    fold_conjugate: bool = True,
) -> JostField:
    """Tabulate h±(x,k), ∂ₓh±(x,k) on x_grid × k_grid.

    Parameters
    ----------
    side : +1 for h₊ (integrated inward from +X∞), -1 for h₋.
    cutoff_tol : required bound on η±(X∞) when X∞ is chosen automatically.
    x_inf : override the integration start; it must still satisfy the tail
        bound η±(x_inf) <= cutoff_tol or CutoffError is raised.
    fold_conjugate : compute only k >= 0 and fill h(x,−k) = conj h(x,k)
        (exact for real potentials).  Disable to make the conjugation
        symmetry an honest solver check.
    """
    if side not in (+1, -1):
        raise ValueError("side must be +1 or -1")
    x_grid = np.unique(np.asarray(x_grid, dtype=float))
    k_grid = np.asarray(k_grid, dtype=float)
    if x_grid.size == 0 or k_grid.size == 0:
        raise ValueError("empty grids")

    edge = x_grid[-1] if side > 0 else -x_grid[0]
    if x_inf is None:
        x_inf = max(cutoff_for_eta(pot, cutoff_tol, side), edge)
    else:
        if x_inf < edge:
            raise CutoffError("x_inf lies inside the requested x grid")
        if pot.tail.eta_tail(x_inf) > cutoff_tol:
            raise CutoffError(
                f"η tail at x_inf={x_inf:g} is {pot.tail.eta_tail(x_inf):.2e} > {cutoff_tol:g}"
            )
    start = side * x_inf

    if fold_conjugate:
        base = np.unique(np.abs(k_grid))
    else:
        base = np.unique(k_grid)

    targets = x_grid[::-1] if side > 0 else x_grid
    H = np.empty((x_grid.size, base.size), dtype=complex)
    HP = np.empty_like(H)
    band_info = []
    for lo, hi, sel in _band_split(np.abs(base)):
        h, hp, nfev = _integrate_batch(pot, targets, base[sel], side, rtol, atol, start)
        H[:, sel] = h
        HP[:, sel] = hp
        band_info.append((float(lo), float(hi), int(nfev)))
    if side > 0:
        H = H[::-1]
        HP = HP[::-1]

    # scatter back onto the requested k grid
    idx = np.searchsorted(base, np.abs(k_grid) if fold_conjugate else k_grid)
    h_full = H[:, idx]
    hp_full = HP[:, idx]
    if fold_conjugate:
        neg = k_grid < 0
        h_full[:, neg] = np.conj(h_full[:, neg])
        hp_full[:, neg] = np.conj(hp_full[:, neg])

    report = IntegrationReport(
        cutoff=float(x_inf),
        eta_at_cutoff=float(pot.tail.eta_tail(x_inf)),
        rtol=rtol,
        atol=atol,
        bands=tuple(band_info),
    )
    return JostField(side, x_grid, k_grid, h_full, hp_full, report)


def compute_h_bound(pot, x_grid, kappas, side, *, rtol=1e-10, atol=1e-12, cutoff_tol=1e-10):
    """h±(x, iκ) for real κ > 0 (real-valued ODE); returns (h, h') real arrays."""
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    x_grid = np.unique(np.asarray(x_grid, dtype=float))
    edge = x_grid[-1] if side > 0 else -x_grid[0]
    x_inf = max(cutoff_for_eta(pot, cutoff_tol, side), edge)
    targets = x_grid[::-1] if side > 0 else x_grid
    h, hp, _ = _integrate_batch(pot, targets, 1j * kappas, side, rtol, atol, side * x_inf)
    if side > 0:
        h, hp = h[::-1], hp[::-1]
    return h.real.copy(), hp.real.copy()


def jost_at_zero(pot, x_grid, side, *, rtol=1e-10, atol=1e-12, cutoff_tol=1e-10):
    """h±(x,0), ∂ₓh±(x,0) as real arrays (the k=0 equation h″ = V h)."""
    x_grid = np.unique(np.asarray(x_grid, dtype=float))
    edge = x_grid[-1] if side > 0 else -x_grid[0]
    x_inf = max(cutoff_for_eta(pot, cutoff_tol, side), edge)
    targets = x_grid[::-1] if side > 0 else x_grid
    h, hp, _ = _integrate_batch(pot, targets, [0.0], side, rtol, atol, side * x_inf)
    if side > 0:
        h, hp = h[::-1], hp[::-1]
    return h[:, 0].real.copy(), hp[:, 0].real.copy()


# ---------------------------------------------------------------------------
# zero energy


@dataclass(frozen=True)
class ZeroEnergyData:
    """Both zero-energy Jost solutions on a shared fine grid, with the
    Wronskian W(0), its natural comparison scale, and the proportionality
    ratio γ fitted over |x| <= 2."""

    x_grid: np.ndarray
    h_plus: np.ndarray
    hp_plus: np.ndarray
    h_minus: np.ndarray
    hp_minus: np.ndarray
    w0: float
    scale: float
    gamma: float
    gamma_residual: float

    @property
    def resonant(self) -> bool:
        # scale floored so V ≡ 0 (every term identically zero) counts
        return abs(self.w0) < RESONANCE_EPS * max(self.scale, 1e-6)


@dataclass(frozen=True)
class ZeroEnergyState:
    """Normalised bounded zero-energy solution f₀ (resonant case).

    f₀ = c₊ f₊(·,0) = c₋ f₋(·,0) with c₋ = γ c₊ and c₊ = sqrt(2/(1+γ²)) > 0,
    which realises lim(|f₀(x)|² + |f₀(−x)|²) = 2.
    """

    x_grid: np.ndarray
    f0: np.ndarray
    gamma: float
    c_plus: float
    c_minus: float
    normalization_residual: float
    gamma_residual: float
    ode_residual: float


def zero_energy_scan(
    pot: Potential,
    *,
    dx: float = 0.01,
    half_width: float | None = None,
    cutoff_tol: float = 1e-10,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> ZeroEnergyData:
    """Solve both k = 0 problems on a symmetric fine grid."""
    if half_width is None:
        half_width = max(
            cutoff_for_eta(pot, cutoff_tol, +1), cutoff_for_eta(pot, cutoff_tol, -1), 6.0
        )
    n = int(round(2 * half_width / dx))
    xg = np.linspace(-half_width, half_width, n + 1)
    hp_, hpp = jost_at_zero(pot, xg, +1, rtol=rtol, atol=atol, cutoff_tol=cutoff_tol)
    hm_, hmp = jost_at_zero(pot, xg, -1, rtol=rtol, atol=atol, cutoff_tol=cutoff_tol)
    i0 = int(np.argmin(np.abs(xg)))
    w0 = hm_[i0] * hpp[i0] - hmp[i0] * hp_[i0]
    scale = (
        abs(hm_[i0] * hpp[i0])
        + abs(hmp[i0] * hp_[i0])
        + eta(pot, 0.0, +1)
        + eta(pot, 0.0, -1)
    )
    win = np.abs(xg) <= 2.0
    denom = float(np.sum(hm_[win] ** 2))
    gamma = float(np.sum(hp_[win] * hm_[win]) / denom)
    gmax = float(np.max(np.abs(hp_[win])))
    gamma_residual = float(np.max(np.abs(hp_[win] - gamma * hm_[win])) / max(gmax, 1e-30))
    return ZeroEnergyData(xg, hp_, hpp, hm_, hmp, float(w0), float(scale), gamma, gamma_residual)


def zero_energy_state(
    pot: Potential,
    zed: ZeroEnergyData | None = None,
    **scan_kwargs,
) -> ZeroEnergyState:
    """Normalised zero-energy resonance function f₀ (raises if non-resonant)."""
    if zed is None:
        zed = zero_energy_scan(pot, **scan_kwargs)
    if not zed.resonant:
        raise ResonanceError(
            f"{pot.label}: W(0) = {zed.w0:.3e} exceeds the resonance threshold "
            f"{RESONANCE_EPS * zed.scale:.3e}"
        )
    gamma = zed.gamma
    c_plus = float(np.sqrt(2.0 / (1.0 + gamma**2)))
    c_minus = gamma * c_plus
    f0 = c_plus * zed.h_plus  # f = h at k = 0
    norm_res = abs(f0[-1] ** 2 + f0[0] ** 2 - 2.0)
    ode_res = max(
        _volterra_residual(pot, zed.x_grid, zed.h_plus, +1),
        _volterra_residual(pot, zed.x_grid, zed.h_minus, -1),
    )
    return ZeroEnergyState(
        x_grid=zed.x_grid,
        f0=f0,
        gamma=gamma,
        c_plus=c_plus,
        c_minus=c_minus,
        normalization_residual=float(norm_res),
        gamma_residual=zed.gamma_residual,
        ode_residual=float(ode_res),
    )


def _volterra_residual(pot, xg, h0, side, probes=(-2.0, 0.0, 2.0)) -> float:
    """Independent check that h(·,0) satisfies its Volterra equation
    h(x) = 1 ± ∫_x^{±∞} (s−x) V(s) h(s) ds, by Simpson quadrature on the
    scan grid (the ODE solver never sees this form)."""
    v = pot(xg)
    worst = 0.0
    for x0 in probes:
        i = int(np.argmin(np.abs(xg - x0)))
        if side > 0:
            s = xg[i:]
            integ = simpson((s - xg[i]) * v[i:] * h0[i:], x=s)
        else:
            s = xg[: i + 1]
            integ = simpson((xg[i] - s) * v[: i + 1] * h0[: i + 1], x=s)
        worst = max(worst, abs(h0[i] - 1.0 - integ))
    return worst
