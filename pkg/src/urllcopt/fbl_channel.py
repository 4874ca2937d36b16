"""Finite-blocklength rate, gain thresholds and Rayleigh-fading statistics.

Everything uses the unit-dispersion normal approximation: the achievable
rate over ``tau * B`` channel uses is ``tau*B/ln2 * (ln(1+snr) - z/sqrt(tau*B))``
with ``z`` the Q-inverse of the block error probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import kernel

LN2 = math.log(2.0)

# rational approximation of the standard normal quantile (lower tail)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_INV_SQRT_2PI = 0.3989422804014327

# decoding error below which the integrand of the exact model is dropped
_EXACT_TAIL = 1e-16
_Z_TAIL = 8.222082216130435  # Q(_Z_TAIL) = 1e-16


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class LinkParams:
    """Static parameters of one radio link (linear SI units)."""

    large_scale_gain: float
    max_tx_power: float
    noise_density: float
    snr_loss_factor: float = 1.0
    antennas: int = 8
    packet_bits: float = 160.0
    frame_duration: float = 1e-4

    def __post_init__(self) -> None:
        if not self.large_scale_gain > 0:
            raise DomainError("large-scale gain must be positive")
        if not self.max_tx_power > 0:
            raise DomainError("transmit power must be positive")
        if not self.noise_density > 0:
            raise DomainError("noise density must be positive")
        if not self.snr_loss_factor >= 1:
            raise DomainError("SNR loss factor must be >= 1")
        if int(self.antennas) != self.antennas or self.antennas < 1:
            raise DomainError("antenna count must be a positive integer")
        if self.antennas > kernel.MAX_ANTENNAS:
            raise DomainError(f"at most {kernel.MAX_ANTENNAS} antennas supported")
        if not self.packet_bits >= 1:
            raise DomainError("packet size must be at least one bit")
        if not self.frame_duration > 0:
            raise DomainError("frame duration must be positive")

    @property
    def noise_to_signal(self) -> float:
        """phi*N0/(alpha*P), the per-Hz inverse SNR at full power."""
        return self.snr_loss_factor * self.noise_density / (self.large_scale_gain * self.max_tx_power)


@dataclass(frozen=True)
class GainThreshold:
    g_th: float
    e_th: float

    def __post_init__(self) -> None:
        if not self.g_th >= 0:
            raise DomainError("gain threshold must be non-negative")
        if not 0 < self.e_th < 0.5:
            raise DomainError("error threshold must lie in (0, 0.5)")


def q_function(x: float) -> float:
    """Upper tail of the standard normal distribution."""
    return kernel.q_function(float(x))


def _normal_quantile(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def q_inverse(p: float) -> float:
    """Inverse of :func:`q_function` on (0, 0.5)."""
    p = float(p)
    if not 0.0 < p < 0.5:
        raise DomainError(f"q_inverse needs 0 < p < 0.5, got {p!r}")
    z = -_normal_quantile(p)
    # one Newton step on Q(z) = p; dQ/dz = -pdf(z)
    z += (q_function(z) - p) / (_INV_SQRT_2PI * math.exp(-0.5 * z * z))
    return z


def achievable_rate(link: LinkParams, bandwidth: float, diversity: int, tx_duration: float,
                    gain: float, error: float) -> float:
    """Bits per frame carried by one subchannel; negative means infeasible."""
    if not bandwidth > 0 or diversity < 1 or not tx_duration > 0 or gain < 0:
        raise DomainError("invalid rate arguments")
    z = q_inverse(error)
    snr = gain / (link.noise_to_signal * bandwidth * diversity)
    blk = tx_duration * bandwidth
    return link.frame_duration * bandwidth / LN2 * (math.log1p(snr) - z / math.sqrt(blk))


def ul_prefactor(link: LinkParams) -> float:
    """Per-subchannel threshold prefactor of the uplink, before the ``N*B`` factor."""
    return link.noise_to_signal


def dl_prefactor(link: LinkParams, delay_frames: int, service_rate: int) -> float:
    """Downlink prefactor: transmit power is shared by every subchannel and antenna in use."""
    return link.noise_to_signal * delay_frames * service_rate * link.antennas


def ul_gain_threshold(link: LinkParams, bandwidth: float, diversity: int, delay: float,
                      e_th: float) -> float:
    """Smallest fading gain that decodes a packet with error ``e_th`` on the uplink.

    ``delay`` is the uplink delay in seconds; two frames carry control signalling.
    """
    tau = delay - 2.0 * link.frame_duration
    if not tau > 1e-12 * link.frame_duration:
        raise DomainError("uplink delay must exceed two frames")
    if not bandwidth > 0 or diversity < 1:
        raise DomainError("bandwidth and diversity must be positive")
    z = q_inverse(e_th)
    return kernel.gain_threshold(ul_prefactor(link) * diversity, tau, float(link.packet_bits),
                                 float(bandwidth), z)


def dl_gain_threshold(link: LinkParams, bandwidth: float, diversity: int, delay: float,
                      service_rate: int, e_th: float) -> float:
    """Downlink counterpart of :func:`ul_gain_threshold` for the worst-placed user."""
    frames = delay / link.frame_duration
    if frames < 1.0 - 1e-9:
        raise DomainError("downlink delay must be at least one frame")
    if int(service_rate) != service_rate or service_rate < 1:
        raise DomainError("service rate must be a positive integer")
    if not bandwidth > 0 or diversity < 1:
        raise DomainError("bandwidth and diversity must be positive")
    z = q_inverse(e_th)
    k = link.noise_to_signal * frames * service_rate * link.antennas * diversity
    return kernel.gain_threshold(k, delay, float(link.packet_bits), float(bandwidth), z)


def erlang_gain_cdf(antennas: int, x: float) -> float:
    """CDF of the channel gain summed over ``antennas`` Rayleigh branches."""
    if int(antennas) != antennas or antennas < 1:
        raise DomainError("antenna count must be a positive integer")
    if antennas > kernel.MAX_ANTENNAS:
        raise DomainError(f"at most {kernel.MAX_ANTENNAS} antennas supported")
    if x < 0:
        raise DomainError("gain must be non-negative")
    return kernel.erlang_cdf(int(antennas), float(x))


def bounded_loss_probability(diversity: int, cdf_at_threshold: float, e_th: float) -> float:
    """Loss upper bound ``(F + e)^N`` with the base clamped to [0, 1]."""
    if diversity < 1:
        raise DomainError("diversity must be >= 1")
    base = min(max(cdf_at_threshold + e_th, 0.0), 1.0)
    return base ** diversity


def exact_loss_probability(link: LinkParams, bandwidth: float, diversity: int, tx_duration: float,
                           power_share: float = 1.0) -> float:
    """Loss with the decoding error averaged over the fading distribution.

    The per-subchannel SNR is ``alpha*P*g / (phi*N0*B*N*power_share)``;
    ``power_share`` is 1 on the uplink and counts the extra power split on
    the downlink. The inner integral stops where the decoding error drops
    below 1e-16 and adds that bound times the remaining Erlang mass.
    """
    from scipy import integrate

    if not bandwidth > 0 or diversity < 1 or not tx_duration > 0:
        raise DomainError("invalid exact-loss arguments")
    blk = tx_duration * bandwidth
    sq = math.sqrt(blk)
    shift = link.packet_bits * LN2 / blk
    rho = 1.0 / (link.noise_to_signal * bandwidth * diversity * power_share)
    nt = int(link.antennas)
    if math.isinf(rho):
        return 0.0
    u_up = shift + _Z_TAIL / sq
    if u_up > 700.0:
        # decoding never reliable at this blocklength
        return 1.0
    x0 = math.expm1(shift) / rho
    x_up = math.expm1(u_up) / rho
    # beyond x_mass the Erlang tail is below ~1e-19 and is bounded instead
    x_mass = nt - 1.0 + 12.0 * math.sqrt(nt) + 45.0
    x_end = min(x_up, x_mass)
    lgam = math.lgamma(nt)

    def integrand(x: float) -> float:
        if x <= 0.0:
            e = q_function(-sq * shift)
            return e if nt == 1 else 0.0
        e = q_function(sq * (math.log1p(rho * x) - shift))
        return e * math.exp((nt - 1) * math.log(x) - x - lgam)

    width = (1.0 + rho * x0) / (rho * sq)
    pts = {x0 + k * width for k in (-4, -2, -1, 0, 1, 2, 4)}
    pts.add(float(nt - 1))
    pts = sorted(p for p in pts if 0.0 < p < x_end)
    val, err = integrate.quad(integrand, 0.0, x_end, points=pts or None, epsabs=1e-15,
                              epsrel=1e-13, limit=1000)
    if err > 1e-12:
        raise IntegrationError(f"inner integral error estimate {err:.3g} exceeds 1e-12")
    if x_end < x_up:
        tail = 1.0 - kernel.erlang_cdf(nt, x_end)
    else:
        tail = _EXACT_TAIL * (1.0 - kernel.erlang_cdf(nt, x_up))
    inner = min(val + tail, 1.0)
    return inner ** diversity
