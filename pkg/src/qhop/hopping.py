"""Hopping amplitudes: homogeneous kernels, link inhomogeneities, assembled models.

The generator of motion is a set of complex hopping rates kappa(x, n) from
site x + a*n into site x. Probability conservation ties each rate to its
reversed partner,

    kappa(x - a*n, n) = -conj(kappa(x, -n)),

which is exactly Hermiticity of the assembled generator. A free particle has
translation- and cube-symmetric rates kappa(n): even in n, purely imaginary,
with an isotropic second moment sum_n kappa(n) n_i n_j = (i / (m a^2)) d_ij
that defines the particle mass m. Inhomogeneities are carried by a complex
link field Z(x, n) through kappa(x, n) = kappa(n) exp(i a Z(x, n)); Z is
stored directly, so no phase unwrapping ever happens. The on-site channel
kappa(x, 0) is stored as an assembled per-site amplitude (purely imaginary
for valid models).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, OffsetLike, offset_norm_sup

DEFAULT_STRUCTURAL_TOL = 1e-12
DEFAULT_ASSEMBLED_TOL = 1e-14


def negate(offset: OffsetLike) -> OffsetLike:
    return tuple(-int(c) for c in offset)


def is_canonical_offset(offset: OffsetLike) -> bool:
    """True when the first nonzero component is positive (canonical half-space)."""
    for c in offset:
        if c != 0:
            return c > 0
    return False


class HomogeneousKernel:
    """Translation-invariant hopping rates kappa(n) on symmetric finite support."""

    def __init__(self, amplitudes: dict[OffsetLike, complex], spacing: float, dim: int):
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        self.spacing = float(spacing)
        self.dim = int(dim)
        self.amplitudes: dict[OffsetLike, complex] = {}
        for off, val in amplitudes.items():
            off = tuple(int(c) for c in off)
            if len(off) != dim:
                raise ValueError(f"offset {off} does not match dim {dim}")
            self.amplitudes[off] = complex(val)
        zero = (0,) * dim
        self.onsite = self.amplitudes.pop(zero, 0.0 + 0.0j)
        for off in self.amplitudes:
            if negate(off) not in self.amplitudes:
                raise ValueError(f"support not negation-symmetric: missing {negate(off)}")

    @property
    def support(self) -> list[OffsetLike]:
        """Nonzero offsets, sorted for reproducible iteration order."""
        return sorted(self.amplitudes)

    @property
    def truncation_radius(self) -> int:
        return max((offset_norm_sup(o) for o in self.amplitudes), default=0)

    def amplitude(self, offset: OffsetLike) -> complex:
        offset = tuple(int(c) for c in offset)
        if all(c == 0 for c in offset):
            return self.onsite
        return self.amplitudes.get(offset, 0.0 + 0.0j)

    def second_moment(self) -> np.ndarray:
        """M_ij = sum_n kappa(n) n_i n_j over the finite support (complex d x d)."""
        M = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for off, val in self.amplitudes.items():
            n = np.asarray(off, dtype=float)
            M += val * np.outer(n, n)
        return M

    def renormalized_onsite(self) -> complex:
        """On-site value -sum_{n != 0} kappa(n), which puts E(0) = 0."""
        return -sum(self.amplitudes.values())


@dataclass
class SymmetryReport:
    """Residuals of the free-kernel structure checks; passes iff all <= tol."""

    symmetry_residual: float
    symmetry_offset: OffsetLike | None
    real_part_residual: float
    real_part_offset: OffsetLike | None
    moment_offdiag_residual: float
    moment_anisotropy_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.symmetry_residual <= self.tol
            and self.real_part_residual <= self.tol
            and self.moment_offdiag_residual <= self.tol
            and self.moment_anisotropy_residual <= self.tol
        )

    def failures(self) -> list[str]:
        out = []
        if self.symmetry_residual > self.tol:
            out.append(
                f"kappa(n) != kappa(-n): residual {self.symmetry_residual:.3e} "
                f"at offset {self.symmetry_offset}"
            )
        if self.real_part_residual > self.tol:
            out.append(
                f"kappa(n) not purely imaginary: residual {self.real_part_residual:.3e} "
                f"at offset {self.real_part_offset}"
            )
        if self.moment_offdiag_residual > self.tol:
            out.append(
                f"second moment not diagonal: max off-diagonal "
                f"{self.moment_offdiag_residual:.3e}"
            )
        if self.moment_anisotropy_residual > self.tol:
            out.append(
                f"second moment anisotropic: max |M_ii - M_jj| "
                f"{self.moment_anisotropy_residual:.3e}"
            )
        return out


def validate_kernel_symmetry(
    kernel: HomogeneousKernel, tol: float = DEFAULT_STRUCTURAL_TOL
) -> SymmetryReport:
    """Check evenness, pure imaginarity, and the isotropic second moment."""
    if not kernel.amplitudes:
        raise ValueError("kernel has empty support")
    sym_res, sym_off = 0.0, None
    re_res, re_off = 0.0, None
    for off, val in kernel.amplitudes.items():
        d_sym = abs(val - kernel.amplitudes[negate(off)])
        if d_sym > sym_res:
            sym_res, sym_off = d_sym, off
        d_re = abs(val.real)
        if d_re > re_res:
            re_res, re_off = d_re, off
    M = kernel.second_moment()
    offdiag = 0.0
    aniso = 0.0
    for i in range(kernel.dim):
        for j in range(kernel.dim):
            if i != j:
                offdiag = max(offdiag, abs(M[i, j]))
            else:
                aniso = max(aniso, abs(M[i, i] - M[0, 0]))
    return SymmetryReport(sym_res, sym_off, re_res, re_off, offdiag, aniso, tol)


def mass_of_kernel(kernel: HomogeneousKernel, tol: float = DEFAULT_STRUCTURAL_TOL) -> float:
    """Mass m defined by sum_n kappa(n) n_i n_j = (i/(m a^2)) d_ij; m > 0 enforced."""
    report = validate_kernel_symmetry(kernel, tol)
    if not report.passed:
        raise ValueError(
            "kernel fails symmetry validation: " + "; ".join(report.failures())
        )
    moment = kernel.second_moment()[0, 0].imag
    if moment <= 0.0:
        raise ValueError(
            f"second moment has non-positive imaginary part {moment:.3e}; "
            "only the positive-mass convention is supported"
        )
    return 1.0 / (kernel.spacing**2 * moment)


def nearest_neighbor_kernel(
    m: float, a: float, d: int, renormalize_onsite: bool = True
) -> HomogeneousKernel:
    """Range-1 axis kernel kappa(+-e_i) = i/(2 m a^2).

    With renormalize_onsite, kappa(0) = -i d/(m a^2) so the free dispersion
    vanishes at k = 0.
    """
    if not m > 0 or not a > 0:
        raise ValueError("m and a must be positive")
    amps: dict[OffsetLike, complex] = {}
    hop = 1j / (2.0 * m * a**2)
    for axis in range(d):
        e = tuple(1 if i == axis else 0 for i in range(d))
        amps[e] = hop
        amps[negate(e)] = hop
    kernel = HomogeneousKernel(amps, a, d)
    if renormalize_onsite:
        kernel.onsite = kernel.renormalized_onsite()
    return kernel


def fourth_order_kernel(
    m: float, a: float, d: int, renormalize_onsite: bool = True
) -> HomogeneousKernel:
    """Range-2 axis kernel from the 4th-order second-difference stencil.

    Weights (4/3, -1/12)/a^2 scaled by i/(2m) keep the mass moment exactly
    i/(m a^2) while cancelling the k^4 term of the free dispersion.
    """
    if not m > 0 or not a > 0:
        raise ValueError("m and a must be positive")
    amps: dict[OffsetLike, complex] = {}
    w1 = 1j * 2.0 / (3.0 * m * a**2)
    w2 = -1j / (24.0 * m * a**2)
    for axis in range(d):
        e1 = tuple(1 if i == axis else 0 for i in range(d))
        e2 = tuple(2 if i == axis else 0 for i in range(d))
        amps[e1] = w1
        amps[negate(e1)] = w1
        amps[e2] = w2
        amps[negate(e2)] = w2
    kernel = HomogeneousKernel(amps, a, d)
    if renormalize_onsite:
        kernel.onsite = kernel.renormalized_onsite()
    return kernel


class InhomogeneityField:
    """Complex link field Z(x, n) stored densely per offset (zero where absent)."""

    def __init__(self, lattice: Lattice, values: dict[OffsetLike, np.ndarray] | None = None):
        self.lattice = lattice
        self.values: dict[OffsetLike, np.ndarray] = {}
        if values:
            for off, arr in values.items():
                self.set_offset(off, arr)

    def set_offset(self, offset: OffsetLike, arr: np.ndarray):
        offset = tuple(int(c) for c in offset)
        if len(offset) != self.lattice.dim:
            raise ValueError(f"offset {offset} does not match dim {self.lattice.dim}")
        if all(c == 0 for c in offset):
            raise ValueError("the on-site channel is carried by HoppingModel.onsite, not Z")
        arr = np.asarray(arr, dtype=np.complex128)
        if arr.shape != (self.lattice.volume,):
            raise ValueError(f"Z array for {offset} has shape {arr.shape}")
        self.values[offset] = arr

    @property
    def offsets(self) -> list[OffsetLike]:
        return sorted(self.values)

    def array(self, offset: OffsetLike) -> np.ndarray:
        """Z(., offset) over all sites; zeros when the offset carries no data."""
        offset = tuple(int(c) for c in offset)
        arr = self.values.get(offset)
        if arr is None:
            return np.zeros(self.lattice.volume, dtype=np.complex128)
        return arr

    def value(self, site: tuple[int, ...], offset: OffsetLike) -> complex:
        return complex(self.array(offset)[self.lattice.site_index(site)])

    def is_empty(self) -> bool:
        return all(not np.any(arr) for arr in self.values.values())

    def copy(self) -> "InhomogeneityField":
        return InhomogeneityField(
            self.lattice, {o: arr.copy() for o, arr in self.values.items()}
        )


def canonical_completion(
    half: InhomogeneityField, lat: Lattice, kernel: HomogeneousKernel
) -> InhomogeneityField:
    """Extend Z given on canonical offsets to the full support via
    Z(x, -n) = -conj(Z(x - a n, n)), which enforces probability conservation
    for an even, purely imaginary kernel."""
    full = InhomogeneityField(lat)
    for off in half.offsets:
        if not is_canonical_offset(off):
            raise ValueError(f"offset {off} is not in the canonical half-space")
        if off not in kernel.amplitudes:
            raise ValueError(f"offset {off} is outside the kernel support")
        arr = half.array(off)
        full.set_offset(off, arr.copy())
        # Z(x, -n) = -conj(Z(x - a n, n)): gather Z(., n) at the site x - a n
        shifted = arr[lat.shift_indices(negate(off))]
        full.set_offset(negate(off), -np.conj(shifted))
    return full


class HoppingModel:
    """Assembled hopping data kappa(x, n) = kappa(n) exp(i a Z(x, n)) plus the
    per-site on-site channel kappa(x, 0)."""

    def __init__(
        self,
        lattice: Lattice,
        kernel: HomogeneousKernel,
        zfield: InhomogeneityField | None = None,
        onsite: np.ndarray | None = None,
    ):
        if kernel.dim != lattice.dim:
            raise ValueError("kernel/lattice dimension mismatch")
        if kernel.spacing != lattice.spacing:
            raise ValueError("kernel/lattice spacing mismatch")
        self.lattice = lattice
        self.kernel = kernel
        self.zfield = zfield if zfield is not None else InhomogeneityField(lattice)
        if self.zfield.lattice != lattice:
            raise ValueError("zfield lattice mismatch")
        for off in self.zfield.offsets:
            if off not in kernel.amplitudes:
                raise ValueError(f"zfield offset {off} outside kernel support")
        if onsite is None:
            onsite = np.full(lattice.volume, kernel.onsite, dtype=np.complex128)
        onsite = np.asarray(onsite, dtype=np.complex128)
        if onsite.shape != (lattice.volume,):
            raise ValueError(f"onsite array has shape {onsite.shape}")
        self.onsite = onsite

    @property
    def support(self) -> list[OffsetLike]:
        return self.kernel.support

    def amplitude_array(self, offset: OffsetLike) -> np.ndarray:
        """kappa(x, offset) over all sites (on-site channel for offset 0)."""
        offset = tuple(int(c) for c in offset)
        if all(c == 0 for c in offset):
            return self.onsite
        base = self.kernel.amplitudes.get(offset)
        if base is None:
            return np.zeros(self.lattice.volume, dtype=np.complex128)
        if offset in self.zfield.values:
            return base * np.exp(1j * self.lattice.spacing * self.zfield.values[offset])
        return np.full(self.lattice.volume, base, dtype=np.complex128)

    def copy(self) -> "HoppingModel":
        kernel = HomogeneousKernel(
            dict(self.kernel.amplitudes), self.kernel.spacing, self.kernel.dim
        )
        kernel.onsite = self.kernel.onsite
        return HoppingModel(self.lattice, kernel, self.zfield.copy(), self.onsite.copy())


def amplitude_at(model: HoppingModel, site: tuple[int, ...], offset: OffsetLike) -> complex:
    """kappa(n) exp(i a Z(x, n)) for n != 0; on-site value for n = 0; 0 off support."""
    return complex(model.amplitude_array(offset)[model.lattice.site_index(site)])


def validate_unitarity(model: HoppingModel) -> float:
    """Max violation of kappa(x - a n, n) = -conj(kappa(x, -n)) over all sites
    and supported offsets (including n = 0). Zero means the generator built from
    this model is exactly Hermitian."""
    lat = model.lattice
    worst = float(np.max(np.abs(2.0 * model.onsite.real), initial=0.0))
    for off in model.support:
        fwd = model.amplitude_array(off)
        rev = model.amplitude_array(negate(off))
        # kappa(x - a n, n) over x is the forward array gathered at x - a n
        fwd_at_prev = fwd[lat.shift_indices(negate(off))]
        violation = np.max(np.abs(fwd_at_prev + np.conj(rev)))
        worst = max(worst, float(violation))
    return worst


# --- model file format ----------------------------------------------------
#
# JSON with fields: dim, extents, spacing, kernel: [{offset, re, im}],
# zfield: [{site, offset, re, im}], onsite: [{site, im}]. Floats are written
# with repr (shortest round-trip), so the file reloads bit-exactly. An
# optional "provenance" block is preserved but ignored by the loader.


def model_to_dict(model: HoppingModel) -> dict:
    lat = model.lattice
    kernel_rows = [
        {"offset": list(off), "re": val.real, "im": val.imag}
        for off, val in sorted(model.kernel.amplitudes.items())
    ]
    if model.kernel.onsite != 0:
        kernel_rows.append(
            {
                "offset": [0] * lat.dim,
                "re": model.kernel.onsite.real,
                "im": model.kernel.onsite.imag,
            }
        )
    zrows = []
    for off in model.zfield.offsets:
        arr = model.zfield.values[off]
        for idx in np.nonzero(arr)[0]:
            zrows.append(
                {
                    "site": [int(c) for c in lat.coords[idx]],
                    "offset": list(off),
                    "re": arr[idx].real,
                    "im": arr[idx].imag,
                }
            )
    onsite_rows = []
    default = model.kernel.onsite
    for idx in range(lat.volume):
        if model.onsite[idx] != default:
            onsite_rows.append(
                {"site": [int(c) for c in lat.coords[idx]], "im": model.onsite[idx].imag}
            )
    return {
        "dim": lat.dim,
        "extents": list(lat.extents),
        "spacing": lat.spacing,
        "kernel": kernel_rows,
        "zfield": zrows,
        "onsite": onsite_rows,
    }


def model_from_dict(doc: dict) -> HoppingModel:
    try:
        dim = int(doc["dim"])
        extents = tuple(int(L) for L in doc["extents"])
        spacing = float(doc["spacing"])
        lat = Lattice(dim, extents, spacing)
        amps: dict[OffsetLike, complex] = {}
        for row in doc["kernel"]:
            amps[tuple(int(c) for c in row["offset"])] = complex(
                float(row["re"]), float(row["im"])
            )
        kernel = HomogeneousKernel(amps, spacing, dim)
        zfield = InhomogeneityField(lat)
        buffers: dict[OffsetLike, np.ndarray] = {}
        for row in doc.get("zfield", []):
            off = tuple(int(c) for c in row["offset"])
            if off not in buffers:
                buffers[off] = np.zeros(lat.volume, dtype=np.complex128)
            idx = lat.site_index(tuple(int(c) for c in row["site"]))
            buffers[off][idx] = complex(float(row["re"]), float(row["im"]))
        for off, arr in buffers.items():
            zfield.set_offset(off, arr)
        onsite = np.full(lat.volume, kernel.onsite, dtype=np.complex128)
        for row in doc.get("onsite", []):
            idx = lat.site_index(tuple(int(c) for c in row["site"]))
            onsite[idx] = 1j * float(row["im"])
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed model document: {exc}") from exc
    return HoppingModel(lat, kernel, zfield, onsite)


def save_model(model: HoppingModel, path: str, provenance: dict | None = None):
    doc = model_to_dict(model)
    if provenance is not None:
        doc["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> HoppingModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("model file must contain a JSON object")
    return model_from_dict(doc)
