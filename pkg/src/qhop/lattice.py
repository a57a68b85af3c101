"""Periodic cubic lattice geometry, wave fields, and standard initial states.

Sites are indexed row-major (C order) over integer coordinates, so flat
index <-> coordinate maps are reproducible bit-for-bit. All inner products
carry the lattice measure a^d, which makes norms independent of the spacing
across convergence sweeps. hbar = 1 throughout.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

OffsetLike = tuple[int, ...]
SiteLike = tuple[int, ...]


class Lattice:
    """Finite periodic cubic lattice: dimension d in {1,2,3}, extents L_i >= 2,
    spacing a > 0. Immutable after construction."""

    def __init__(self, dim: int, extents: tuple[int, ...], spacing: float):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        extents = tuple(int(L) for L in extents)
        if len(extents) != dim:
            raise ValueError(f"extents {extents} do not match dim {dim}")
        if any(L < 2 for L in extents):
            raise ValueError(f"each extent must be >= 2, got {extents}")
        if not spacing > 0:
            raise ValueError(f"spacing must be positive, got {spacing}")
        self.dim = dim
        self.extents = extents
        self.spacing = float(spacing)
        self.volume = int(np.prod(extents))
        # coords[i] is the coordinate vector of flat site i (row-major order)
        self._coords = np.indices(extents).reshape(dim, -1).T.astype(np.int64)
        self._shift_cache: dict[OffsetLike, np.ndarray] = {}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Lattice)
            and self.dim == other.dim
            and self.extents == other.extents
            and self.spacing == other.spacing
        )

    def __hash__(self):
        return hash((self.dim, self.extents, self.spacing))

    def __repr__(self):
        return f"Lattice(dim={self.dim}, extents={self.extents}, spacing={self.spacing})"

    @property
    def coords(self) -> np.ndarray:
        """Integer site coordinates, shape (V, d)."""
        return self._coords

    @property
    def positions(self) -> np.ndarray:
        """Physical positions x = a * n_site, shape (V, d)."""
        return self._coords * self.spacing

    def site_index(self, site: SiteLike) -> int:
        site = tuple(int(c) for c in site)
        if len(site) != self.dim:
            raise ValueError(f"site {site} does not match dim {self.dim}")
        return int(np.ravel_multi_index(site, self.extents))

    def site_coords(self, index: int) -> SiteLike:
        return tuple(int(c) for c in np.unravel_index(index, self.extents))

    def shift_indices(self, offset: OffsetLike) -> np.ndarray:
        """Flat index of wrap(site + offset) for every site.

        For an array f over sites, f[shift_indices(o)] evaluates x -> f(x + a*o).
        """
        offset = tuple(int(c) for c in offset)
        if len(offset) != self.dim:
            raise ValueError(f"offset {offset} does not match dim {self.dim}")
        cached = self._shift_cache.get(offset)
        if cached is None:
            shifted = (self._coords + np.asarray(offset)) % np.asarray(self.extents)
            cached = np.ravel_multi_index(shifted.T, self.extents)
            self._shift_cache[offset] = cached
        return cached


def wrap_site(site: SiteLike, offset: OffsetLike, lat: Lattice) -> SiteLike:
    """Componentwise (s_i + o_i) mod L_i, returned as the canonical representative."""
    if len(site) != lat.dim or len(offset) != lat.dim:
        raise ValueError("site/offset dimension mismatch")
    return tuple((int(s) + int(o)) % L for s, o, L in zip(site, offset, lat.extents))


def offset_norm_sup(offset: OffsetLike) -> int:
    return max(abs(int(c)) for c in offset) if offset else 0


@dataclass
class WaveField:
    """Complex amplitudes, one per site, in flat site order."""

    lattice: Lattice
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.shape != (self.lattice.volume,):
            raise ValueError(
                f"amplitude array has shape {self.data.shape}, "
                f"expected ({self.lattice.volume},)"
            )

    def copy(self) -> "WaveField":
        return WaveField(self.lattice, self.data.copy())


def _check_same_lattice(phi: WaveField, psi: WaveField):
    if phi.lattice != psi.lattice:
        raise ValueError("wave fields live on different lattices")


def inner_product(phi: WaveField, psi: WaveField) -> complex:
    """a^d * sum_x conj(phi(x)) psi(x)."""
    _check_same_lattice(phi, psi)
    measure = phi.lattice.spacing ** phi.lattice.dim
    return complex(measure * np.vdot(phi.data, psi.data))


def norm(psi: WaveField) -> float:
    return float(np.sqrt(inner_product(psi, psi).real))


def normalized(psi: WaveField) -> WaveField:
    n = norm(psi)
    if n == 0.0:
        raise ValueError("cannot normalize the zero field")
    return WaveField(psi.lattice, psi.data / n)


def plane_wave(mode: tuple[int, ...] | int, lat: Lattice) -> WaveField:
    """Unit-norm plane wave with k_i = 2*pi*mode_i / (L_i * a), mode_i in [0, L_i)."""
    if isinstance(mode, int):
        mode = (mode,)
    mode = tuple(int(m) for m in mode)
    if len(mode) != lat.dim:
        raise ValueError(f"mode {mode} does not match dim {lat.dim}")
    for m, L in zip(mode, lat.extents):
        if not 0 <= m < L:
            raise ValueError(f"mode component {m} outside [0, {L})")
    k = 2.0 * np.pi * np.asarray(mode) / (np.asarray(lat.extents) * lat.spacing)
    phase = lat.positions @ k
    amp = np.exp(1j * phase) / np.sqrt(lat.volume * lat.spacing**lat.dim)
    return WaveField(lat, amp)


def gaussian_packet(
    center: tuple[float, ...] | float,
    k0: tuple[float, ...] | float,
    sigma: float,
    lat: Lattice,
    tail_tol: float = 1e-10,
) -> WaveField:
    """Normalized Gaussian packet exp(-(x-c)^2/(4 sigma^2) + i k0.(x-c)).

    Requires sigma >= 2a (resolvable) and relative amplitude below tail_tol on
    the wrap seam, so the single-image construction is valid on the torus.
    """
    if isinstance(center, (int, float)):
        center = (float(center),)
    if isinstance(k0, (int, float)):
        k0 = (float(k0),)
    center = np.asarray(center, dtype=float)
    k0 = np.asarray(k0, dtype=float)
    if center.shape != (lat.dim,) or k0.shape != (lat.dim,):
        raise ValueError("center/k0 dimension mismatch")
    if sigma < 2.0 * lat.spacing:
        raise ValueError(
            f"sigma={sigma} not resolvable on spacing a={lat.spacing} (need sigma >= 2a)"
        )
    dx = lat.positions - center
    amp = np.exp(-np.sum(dx**2, axis=1) / (4.0 * sigma**2) + 1j * (dx @ k0))
    peak = np.max(np.abs(amp))
    seam = np.zeros(lat.volume, dtype=bool)
    for axis, L in enumerate(lat.extents):
        seam |= lat.coords[:, axis] == 0
        seam |= lat.coords[:, axis] == L - 1
    seam_amp = float(np.max(np.abs(amp[seam])) / peak)
    if seam_amp > tail_tol:
        raise ValueError(
            f"packet truncated by the periodic boundary: relative seam amplitude "
            f"{seam_amp:.3e} exceeds {tail_tol:.1e}"
        )
    return normalized(WaveField(lat, amp))


def random_state(lat: Lattice, seed: int) -> WaveField:
    """Normalized state with i.i.d. complex Gaussian amplitudes (deterministic in seed)."""
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal(lat.volume) + 1j * rng.standard_normal(lat.volume)
    return normalized(WaveField(lat, amp))


def position_mean(psi: WaveField) -> np.ndarray:
    """<x> per axis under the lattice measure (meaningful away from the seam)."""
    w = np.abs(psi.data) ** 2 * psi.lattice.spacing ** psi.lattice.dim
    return psi.lattice.positions.T @ w


def position_variance(psi: WaveField) -> float:
    """Total variance sum_i <(x_i - <x_i>)^2>."""
    w = np.abs(psi.data) ** 2 * psi.lattice.spacing ** psi.lattice.dim
    mean = psi.lattice.positions.T @ w
    d2 = np.sum((psi.lattice.positions - mean) ** 2, axis=1)
    return float(d2 @ w)


def wavefield_to_csv(psi: WaveField) -> str:
    """Snapshot CSV: header `site_index,coord_0..coord_{d-1},re,im`, flat site order."""
    lat = psi.lattice
    buf = io.StringIO()
    coord_cols = ",".join(f"coord_{i}" for i in range(lat.dim))
    buf.write(f"site_index,{coord_cols},re,im\n")
    for i in range(lat.volume):
        coords = ",".join(str(c) for c in lat.coords[i])
        buf.write(f"{i},{coords},{psi.data[i].real!r},{psi.data[i].imag!r}\n")
    return buf.getvalue()


def wavefield_from_csv(text: str, lat: Lattice) -> WaveField:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split(",")
    expected = ["site_index"] + [f"coord_{i}" for i in range(lat.dim)] + ["re", "im"]
    if header != expected:
        raise ValueError(f"unexpected snapshot header {header!r}")
    if len(lines) - 1 != lat.volume:
        raise ValueError(
            f"snapshot has {len(lines) - 1} rows, lattice has {lat.volume} sites"
        )
    data = np.zeros(lat.volume, dtype=np.complex128)
    for ln in lines[1:]:
        parts = ln.split(",")
        idx = int(parts[0])
        data[idx] = float(parts[-2]) + 1j * float(parts[-1])
    return WaveField(lat, data)
