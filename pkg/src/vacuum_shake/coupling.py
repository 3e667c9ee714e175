"""Atom-field coupling models g_k(t) and their co-rotating counterparts eta_k(t).

Four coupling kinds are supported:

* ``STATIC_3D`` -- atom at rest in free space, ``g = chi_k (dhat . eps)``.
* ``OSCILLATING_3D`` -- atom on the prescribed trajectory
  ``r_A(t) = r_m cos(omega_m t) rhat_m`` in free space.  The coupling carries
  the translation phase ``exp(i k . r_A)`` and the velocity-dependent
  magnetic (Roentgen) correction ``beta(t) . [eps (dhat.khat) - khat
  (dhat.eps)]``.  In the long-wavelength regime the expansion
  ``exp(i k . r_A) ~ 1 + i k . r_A`` turns the co-rotating coupling into a
  carrier plus two sidebands at ``+-omega_m`` with real amplitudes
  ``eta0`` and ``eta_plus``/``eta_minus``.
* ``WAVEGUIDE_1D`` -- atom at rest at x = 0 in a single-polarization
  waveguide, ``eta_k = [2 omega_e/(omega_e+omega_k)] sqrt(omega_k/(2 A L)) d``
  (units with epsilon_0 = hbar = 1).
* ``OSCILLATING_1D`` -- the waveguide coupling with the same prescribed
  harmonic motion along the guide axis; sidebands follow from the
  ``exp(i k x_A(t))`` phase alone (scalar polarization, no transverse
  magnetic term).

Units: hbar = epsilon_0 = 1, frequencies in units of the transition
frequency omega_e unless configured otherwise, c explicit.  The per-mode
normalization ``chi_k = sqrt(omega_k) * chi_scale`` absorbs the dipole matrix
element and quantization volume; ``chi_scale`` is most conveniently set by
targeting a spontaneous decay rate (see the ``*_from_gamma`` constructors).

All evaluators are pure functions of (profile, mode, time); profiles are
immutable and safe to share.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .modes import Mode, ModeGrid

__all__ = [
    "CouplingKind",
    "CouplingProfile",
    "EtaComponents",
    "eval_g",
    "eta_components_3d",
    "eta_components_1d",
    "eta_waveguide",
    "eta_of_t",
]


class CouplingKind(enum.Enum):
    STATIC_3D = "Static"
    OSCILLATING_3D = "OscillatingPosition3D"
    WAVEGUIDE_1D = "Waveguide1D"
    OSCILLATING_1D = "OscillatingPosition1D"


@dataclass(frozen=True)
class EtaComponents:
    """Carrier and sideband amplitudes of the co-rotating coupling (all real)."""

    eta0: float
    eta_plus: float
    eta_minus: float


def _unit(v, name):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ConfigError(f"{name} must be a nonzero vector")
    return v / n


@dataclass(frozen=True)
class CouplingProfile:
    """Immutable description of one coupling scenario.

    ``chi_scale`` sets chi_k = sqrt(omega_k) * chi_scale.  For oscillating
    kinds the trajectory is r_m cos(omega_m t) along ``rhat_m`` (a signed
    scalar axis in 1D); ``k_m = omega_m / c``.
    """

    kind: CouplingKind
    omega_e: float
    chi_scale: float
    c: float = 1.0
    dipole_direction: Optional[np.ndarray] = None  # unit 3-vector, 3D kinds
    r_m: float = 0.0
    omega_m: float = 0.0
    rhat_m: Optional[np.ndarray] = None  # unit 3-vector, OSCILLATING_3D
    km_rm_guard: float = 0.1

    def __post_init__(self):
        if self.omega_e <= 0:
            raise ConfigError("omega_e must be positive")
        if self.chi_scale < 0:
            raise ConfigError("chi_scale must be >= 0")
        if self.kind in (CouplingKind.STATIC_3D, CouplingKind.OSCILLATING_3D):
            if self.dipole_direction is None:
                raise ConfigError("3D profiles need a dipole direction")
            object.__setattr__(self, "dipole_direction",
                               _unit(self.dipole_direction, "dipole_direction"))
        if self.kind is CouplingKind.OSCILLATING_3D:
            if self.rhat_m is None:
                raise ConfigError("oscillating 3D profile needs rhat_m")
            object.__setattr__(self, "rhat_m", _unit(self.rhat_m, "rhat_m"))
        if self.kind in (CouplingKind.OSCILLATING_3D, CouplingKind.OSCILLATING_1D):
            if self.r_m < 0 or self.omega_m <= 0:
                raise ConfigError("oscillating profiles need r_m >= 0 and omega_m > 0")
            km = self.omega_m / self.c
            if km * self.r_m > self.km_rm_guard:
                raise ConfigError(
                    f"k_m*r_m = {km * self.r_m:.3g} exceeds the long-wavelength "
                    f"guard {self.km_rm_guard}"
                )
            beta_max = self.r_m * self.omega_m / self.c
            if beta_max >= 1.0:
                raise ConfigError(f"beta_max = {beta_max:.3g} is not non-relativistic")

    @property
    def k_m(self) -> float:
        return self.omega_m / self.c

    @property
    def is_1d(self) -> bool:
        return self.kind in (CouplingKind.WAVEGUIDE_1D, CouplingKind.OSCILLATING_1D)

    def chi(self, omega):
        return np.sqrt(np.asarray(omega, dtype=float)) * self.chi_scale

    # -- normalization helpers ------------------------------------------------

    @staticmethod
    def static_3d(omega_e, dipole_direction, *, gamma, V, c=1.0):
        """Static 3D profile normalized so the free-space decay rate is ``gamma``."""
        scale = np.sqrt(3.0 * np.pi * c**3 * gamma / (2.0 * V * omega_e**3))
        return CouplingProfile(
            kind=CouplingKind.STATIC_3D, omega_e=omega_e, chi_scale=scale,
            c=c, dipole_direction=dipole_direction,
        )

    @staticmethod
    def oscillating_3d(omega_e, dipole_direction, rhat_m, r_m, omega_m, *,
                       gamma, V, c=1.0, km_rm_guard=0.1):
        scale = np.sqrt(3.0 * np.pi * c**3 * gamma / (2.0 * V * omega_e**3))
        return CouplingProfile(
            kind=CouplingKind.OSCILLATING_3D, omega_e=omega_e, chi_scale=scale,
            c=c, dipole_direction=dipole_direction, rhat_m=rhat_m,
            r_m=r_m, omega_m=omega_m, km_rm_guard=km_rm_guard,
        )

    @staticmethod
    def waveguide_1d(omega_e, *, gamma, A, L, c=1.0):
        """Waveguide profile normalized so the total (two-direction) decay rate
        at resonance is ``gamma``;  gamma = 2 L eta(omega_e)^2 / c."""
        scale = np.sqrt(c * gamma / (2.0 * L * omega_e))
        return CouplingProfile(
            kind=CouplingKind.WAVEGUIDE_1D, omega_e=omega_e, chi_scale=scale, c=c,
        )

    @staticmethod
    def waveguide_1d_from_dipole(omega_e, d, *, A, L, c=1.0):
        return CouplingProfile(
            kind=CouplingKind.WAVEGUIDE_1D, omega_e=omega_e,
            chi_scale=d / np.sqrt(2.0 * A * L), c=c,
        )

    @staticmethod
    def oscillating_1d(omega_e, r_m, omega_m, *, gamma, A, L, c=1.0, km_rm_guard=0.1):
        scale = np.sqrt(c * gamma / (2.0 * L * omega_e))
        return CouplingProfile(
            kind=CouplingKind.OSCILLATING_1D, omega_e=omega_e, chi_scale=scale,
            c=c, r_m=r_m, omega_m=omega_m, km_rm_guard=km_rm_guard,
        )


def _require_mode_match(profile: CouplingProfile, mode: Mode):
    mode_is_1d = mode.polarization is None
    if profile.is_1d != mode_is_1d:
        raise ConfigError(
            f"profile kind {profile.kind.value} is incompatible with a "
            f"{'1D' if mode_is_1d else '3D'} mode"
        )


def _bracket_dot_rm(profile: CouplingProfile, khat, eps):
    """rhat_m . [eps (dhat.khat) - khat (dhat.eps)] -- the magnetic term geometry."""
    dhat = profile.dipole_direction
    rm = profile.rhat_m
    return (rm @ eps) * (dhat @ khat) - (rm @ khat) * (dhat @ eps)


def eval_g(profile: CouplingProfile, mode: Mode, t: float, *,
           exact_phase: bool = False) -> complex:
    """Coupling amplitude g_k(t) for one mode.

    For oscillating kinds the default applies the long-wavelength expansion
    ``exp(i k . r_A) ~ 1 + i k . r_A`` (the regime in which the sideband
    decomposition is exact); ``exact_phase=True`` evaluates the unexpanded
    exponential so the size of the neglected O((k r_m)^2) terms can be
    measured.
    """
    _require_mode_match(profile, mode)
    if profile.kind is CouplingKind.STATIC_3D:
        return complex(profile.chi(mode.omega) * (profile.dipole_direction @ mode.polarization))
    if profile.kind is CouplingKind.WAVEGUIDE_1D:
        return complex(profile.chi(mode.omega))

    if profile.kind is CouplingKind.OSCILLATING_1D:
        k_signed = float(mode.wavevector[0])
        phase_arg = k_signed * profile.r_m * np.cos(profile.omega_m * t)
        phase = np.exp(1j * phase_arg) if exact_phase else (1.0 + 1j * phase_arg)
        return complex(profile.chi(mode.omega) * phase)

    # OSCILLATING_3D
    khat = mode.khat
    eps = mode.polarization
    dhat = profile.dipole_direction
    k = np.linalg.norm(mode.wavevector)
    phase_arg = k * (khat @ profile.rhat_m) * profile.r_m * np.cos(profile.omega_m * t)
    beta = -profile.r_m * profile.k_m * np.sin(profile.omega_m * t)
    d_eps = dhat @ eps
    magnetic = _bracket_dot_rm(profile, khat, eps)
    if exact_phase:
        val = np.exp(1j * phase_arg) * (d_eps + beta * magnetic)
    else:
        # strictly first order in r_m (phase-expansion cross terms dropped),
        # so the carrier-plus-sideband decomposition is exact
        val = d_eps + 1j * phase_arg * d_eps + beta * magnetic
    return complex(profile.chi(mode.omega) * val)


def dg_dt(profile: CouplingProfile, mode: Mode, t: float) -> complex:
    """Analytic time derivative of the (expanded) coupling; zero for static kinds."""
    _require_mode_match(profile, mode)
    if profile.kind in (CouplingKind.STATIC_3D, CouplingKind.WAVEGUIDE_1D):
        return 0.0 + 0.0j
    wm = profile.omega_m
    if profile.kind is CouplingKind.OSCILLATING_1D:
        k_signed = float(mode.wavevector[0])
        return complex(
            profile.chi(mode.omega) * (-1j) * k_signed * profile.r_m * wm * np.sin(wm * t)
        )
    khat = mode.khat
    eps = mode.polarization
    dhat = profile.dipole_direction
    k = np.linalg.norm(mode.wavevector)
    dphase = -1j * k * (khat @ profile.rhat_m) * profile.r_m * wm * np.sin(wm * t)
    dbeta = -profile.r_m * profile.k_m * wm * np.cos(wm * t)
    return complex(
        profile.chi(mode.omega)
        * (dphase * (dhat @ eps) + dbeta * _bracket_dot_rm(profile, khat, eps))
    )


def g_fourier_components(profile: CouplingProfile, mode: Mode):
    """Decompose the (expanded) coupling as g(t) = g0 + g+ e^{i w_m t} + g- e^{-i w_m t}.

    Static kinds have vanishing sidebands.  This is the input to the exact
    periodic (steady-state) solution of the counter-rotating elimination
    condition, which remains valid for drive frequencies comparable to the
    transition frequency where the adiabatic form does not.
    """
    _require_mode_match(profile, mode)
    if profile.kind is CouplingKind.STATIC_3D:
        g0 = profile.chi(mode.omega) * (profile.dipole_direction @ mode.polarization)
        return complex(g0), 0.0j, 0.0j
    if profile.kind is CouplingKind.WAVEGUIDE_1D:
        return complex(profile.chi(mode.omega)), 0.0j, 0.0j
    chi = profile.chi(mode.omega)
    if profile.kind is CouplingKind.OSCILLATING_1D:
        k_signed = float(mode.wavevector[0])
        side = 0.5j * k_signed * profile.r_m * chi
        return complex(chi), complex(side), complex(side)
    khat = mode.khat
    eps = mode.polarization
    dhat = profile.dipole_direction
    d_eps = dhat @ eps
    doppler = (mode.omega / profile.omega_m) * (khat @ profile.rhat_m) * d_eps
    magnetic = _bracket_dot_rm(profile, khat, eps)
    km_rm = profile.k_m * profile.r_m
    g0 = chi * d_eps
    gp = 0.5j * km_rm * chi * (doppler + magnetic)
    gm = 0.5j * km_rm * chi * (doppler - magnetic)
    return complex(g0), complex(gp), complex(gm)


def _eta_prefactor(profile: CouplingProfile, omega):
    """chi_k / (1 + omega_k/omega_e), the adiabatic reduction factor."""
    omega = np.asarray(omega, dtype=float)
    return profile.chi(omega) / (1.0 + omega / profile.omega_e)


def eta_components_arrays_3d(profile: CouplingProfile, omega, khat, eps):
    """Vectorized (eta0, eta_plus, eta_minus) over arrays of nodes.

    ``khat`` and ``eps`` have shape (n, 3); ``omega`` shape (n,).  Used by
    the rate quadrature at radii that are not grid nodes.
    """
    if profile.kind is not CouplingKind.OSCILLATING_3D:
        raise ConfigError("sideband components are defined for the oscillating 3D kind")
    dhat = profile.dipole_direction
    rm = profile.rhat_m
    pref = _eta_prefactor(profile, omega)
    d_eps = eps @ dhat
    d_khat = khat @ dhat
    rm_eps = eps @ rm
    rm_khat = khat @ rm
    k_over_km = np.asarray(omega) / profile.omega_m  # |k|/k_m with shared c
    doppler = k_over_km * rm_khat * d_eps
    magnetic = rm_eps * d_khat - rm_khat * d_eps
    eta0 = pref * 2.0 * d_eps
    eta_p = pref * (doppler + magnetic)
    eta_m = pref * (doppler - magnetic)
    return eta0, eta_p, eta_m


def eta_components_3d(profile: CouplingProfile, mode: Mode) -> EtaComponents:
    """Carrier and sideband amplitudes for one free-space mode."""
    _require_mode_match(profile, mode)
    e0, ep, em = eta_components_arrays_3d(
        profile,
        np.array([mode.omega]),
        mode.khat[None, :],
        mode.polarization[None, :],
    )
    return EtaComponents(float(e0[0]), float(ep[0]), float(em[0]))


def eta_components_arrays_1d(profile: CouplingProfile, omega, sign):
    """Vectorized (eta0, eta_plus, eta_minus) for signed-direction 1D modes.

    The oscillating-waveguide sidebands come from the translation phase only:
    eta_pm = (k_signed / 2 k_m) * eta0 with k_signed = sign * omega / c.
    """
    if profile.kind is not CouplingKind.OSCILLATING_1D:
        raise ConfigError("1D sideband components need the oscillating 1D kind")
    omega = np.asarray(omega, dtype=float)
    eta0 = 2.0 * _eta_prefactor(profile, omega)
    k_signed = np.asarray(sign, dtype=float) * omega / profile.c
    eta_pm = 0.5 * (k_signed / profile.k_m) * eta0
    return eta0, eta_pm, eta_pm.copy()


def eta_components_1d(profile: CouplingProfile, mode: Mode) -> EtaComponents:
    _require_mode_match(profile, mode)
    e0, ep, em = eta_components_arrays_1d(
        profile, np.array([mode.omega]), np.array([mode.direction_sign])
    )
    return EtaComponents(float(e0[0]), float(ep[0]), float(em[0]))


def eta_waveguide(mode: Mode, d: float, A: float, L: float, omega_e: float) -> float:
    """Static waveguide co-rotating coupling
    eta_k = [2 omega_e/(omega_e+omega_k)] sqrt(omega_k/(2 A L)) d  (epsilon_0 = hbar = 1)."""
    if mode.polarization is not None:
        raise ConfigError("eta_waveguide expects a 1D mode")
    return float(
        2.0 * omega_e / (omega_e + mode.omega) * np.sqrt(mode.omega / (2.0 * A * L)) * d
    )


def eta_of_t(profile: CouplingProfile, mode: Mode, t: float) -> complex:
    """Co-rotating coupling eta_k(t).

    Equals the carrier-plus-sideband form
    eta0 + i k_m r_m (exp(+i omega_m t) eta_plus + exp(-i omega_m t) eta_minus)
    for oscillating kinds and is constant otherwise.  Identically equal to
    2 omega_e * xi_adiabatic(t) with the expanded coupling phase.
    """
    _require_mode_match(profile, mode)
    if profile.kind is CouplingKind.STATIC_3D:
        return complex(
            2.0 * _eta_prefactor(profile, mode.omega)
            * (profile.dipole_direction @ mode.polarization)
        )
    if profile.kind is CouplingKind.WAVEGUIDE_1D:
        return complex(2.0 * _eta_prefactor(profile, mode.omega))
    if profile.kind is CouplingKind.OSCILLATING_1D:
        comp = eta_components_1d(profile, mode)
    else:
        comp = eta_components_3d(profile, mode)
    km_rm = profile.k_m * profile.r_m
    osc = np.exp(1j * profile.omega_m * t) * comp.eta_plus \
        + np.exp(-1j * profile.omega_m * t) * comp.eta_minus
    return complex(comp.eta0 + 1j * km_rm * osc)
