"""Paraxial eye model built from ray transfer matrices.

Every optical element is a 2x2 matrix acting on a ray vector
(height above the optical axis, angle with the axis). The eye is the
product of alternating propagation and refraction elements: a thin
target-refraction element in front of the eye, the two cornea surfaces,
the aqueous chamber, the equi-biconvex implant, and the posterior
chamber up to the retina. A parallel input ray focuses on the retina
exactly when the top-left entry of the system matrix vanishes, which
makes that entry (and its square) a differentiable residual usable both
for root solving and as a training loss.

All lengths are meters, all powers diopters (1/m). Flat surfaces are
represented by an infinite-radius sentinel so determinant identities
hold exactly. The arithmetic is generic: any operand that supports
+, -, *, / and exposes ``.value`` / ``.sqrt()`` (such as autodiff
nodes) can flow through the same code paths as plain floats.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import AnatomyError, DomainError, GeometryError, ValidationError

#: Sentinel radius for a flat (powerless) surface.
FLAT = math.inf


def _val(x) -> float:
    """Numeric value of a float or an autodiff node."""
    return x.value if hasattr(x, "value") else float(x)


def _sqrt(x):
    return x.sqrt() if hasattr(x, "sqrt") else math.sqrt(x)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EyeBiometry:
    """Postoperative geometry of one eye, all lengths in meters.

    Attributes
    ----------
    al : axial length, cornea front to retina
    cct : central cornea thickness
    acd_iol : postoperative anterior chamber depth (cornea to implant)
    k_max, k_min : maximum / minimum cornea curvature radius
    """

    al: float
    cct: float
    acd_iol: float
    k_max: float
    k_min: float

    def __post_init__(self):
        for name in ("al", "cct", "acd_iol", "k_max", "k_min"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
        if self.k_max < self.k_min:
            raise ValidationError(
                f"k_max ({self.k_max}) must be >= k_min ({self.k_min})")
        if self.al <= self.cct + self.acd_iol:
            raise ValidationError(
                "axial length leaves no room behind the implant: "
                f"al={self.al} <= cct+acd_iol={self.cct + self.acd_iol}")

    @property
    def k_mean(self) -> float:
        """Mean cornea curvature radius (averaged on radii, not diopters)."""
        return 0.5 * (self.k_max + self.k_min)


@dataclass(frozen=True)
class EyeCase:
    """One eye plus its target refraction and optional surgical ground truth."""

    biometry: EyeBiometry
    ref_target: float
    id: str = ""
    inserted_power: Optional[float] = None
    postop_refraction: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.ref_target) and abs(self.ref_target) <= 10.0):
            raise ValidationError(
                f"ref_target must be finite with |value| <= 10 D, got {self.ref_target!r}")
        if self.inserted_power is not None:
            if not (math.isfinite(self.inserted_power)
                    and -5.0 <= self.inserted_power <= 40.0):
                raise ValidationError(
                    f"inserted_power must lie in [-5, 40] D, got {self.inserted_power!r}")
        if self.postop_refraction is not None and not math.isfinite(self.postop_refraction):
            raise ValidationError("postop_refraction must be finite")


@dataclass(frozen=True)
class OpticalConstants:
    """Refractive indices and fixed geometry of the eye model.

    ``gullstrand`` is the standard ratio between posterior and anterior
    cornea surface radii. ``d`` is the vertex distance of the thin
    target-refraction element in front of the cornea. ``ref_sign`` sets
    the sign convention of that element's power entry: the matrix is
    [[1, 0], [ref_sign * ref_target, 1]], and the default -1.0 makes a
    myopic target demand a stronger implant.
    """

    n_v: float = 1.336
    n_c: float = 1.376
    n_l: float = 1.46
    gullstrand: float = 6.8 / 7.7
    d: float = 0.012
    ref_sign: float = -1.0

    def __post_init__(self):
        for name in ("n_v", "n_c", "n_l"):
            if getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must exceed 1")
        if not 0.0 < self.gullstrand < 1.0:
            raise ValidationError("gullstrand ratio must lie in (0, 1)")
        if self.d < 0.0:
            raise ValidationError("vertex distance d must be >= 0")
        if self.ref_sign not in (-1.0, 1.0):
            raise ValidationError("ref_sign must be -1.0 or +1.0")


#: Lens thickness modes.
CONSTANT_THICKNESS = "constant_thickness"
BICONVEX_SAG = "biconvex_sag"


@dataclass(frozen=True)
class LensModel:
    """Implant material and thickness geometry.

    ``constant_thickness`` uses ``lt_const`` for every radius. The
    ``biconvex_sag`` mode models an equi-biconvex optic of semi-aperture
    ``semi_aperture``: thickness is the edge thickness plus twice the
    spherical sagitta of one surface, defined only for radii larger than
    the semi-aperture.
    """

    n_l: float = 1.46
    mode: str = CONSTANT_THICKNESS
    lt_const: float = 0.001
    edge_thickness: float = 0.0002
    semi_aperture: float = 0.003

    def __post_init__(self):
        if self.mode not in (CONSTANT_THICKNESS, BICONVEX_SAG):
            raise ValidationError(f"unknown lens mode {self.mode!r}")
        if self.n_l <= 1.0:
            raise ValidationError("n_l must exceed 1")
        for name in ("lt_const", "edge_thickness", "semi_aperture"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be > 0")


@dataclass(frozen=True)
class RayMatrix:
    """2x2 ray transfer matrix.

    ``m01`` carries meters, ``m10`` carries 1/meters; the diagonal is
    dimensionless. Entries may be floats or autodiff nodes.
    """

    m00: Any
    m01: Any
    m10: Any
    m11: Any

    def __matmul__(self, other: "RayMatrix") -> "RayMatrix":
        return RayMatrix(
            self.m00 * other.m00 + self.m01 * other.m10,
            self.m00 * other.m01 + self.m01 * other.m11,
            self.m10 * other.m00 + self.m11 * other.m10,
            self.m10 * other.m01 + self.m11 * other.m11,
        )

    def det(self):
        return self.m00 * self.m11 - self.m01 * self.m10

    @staticmethod
    def identity() -> "RayMatrix":
        return RayMatrix(1.0, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# element matrices
# ---------------------------------------------------------------------------

def propagation_matrix(x) -> RayMatrix:
    """Propagation over a distance ``x`` inside one medium: [[1, x], [0, 1]]."""
    v = _val(x)
    if not (math.isfinite(v) and v >= 0.0):
        raise DomainError(f"propagation distance must be finite and >= 0, got {v!r}")
    return RayMatrix(1.0, x, 0.0, 1.0)


def refraction_matrix(n1, n2, r) -> RayMatrix:
    """Refraction at a spherical surface between indices ``n1`` and ``n2``.

    Returns [[1, 0], [(n1 - n2) / (n2 * r), n1 / n2]]. A flat surface is
    requested with the ``FLAT`` (infinite radius) sentinel and yields an
    exactly zero power entry. ``r = 0`` is a singular surface.
    """
    if _val(n1) <= 0.0 or _val(n2) <= 0.0:
        raise DomainError("refractive indices must be positive")
    rv = _val(r)
    if rv == 0.0:
        raise DomainError("singular surface: curvature radius must not be 0")
    if math.isnan(rv):
        raise DomainError("curvature radius must not be NaN")
    if math.isinf(rv):
        return RayMatrix(1.0, 0.0, 0.0, n1 / n2)
    return RayMatrix(1.0, 0.0, (n1 - n2) / (n2 * r), n1 / n2)


def target_refraction_matrix(ref_t, consts: OpticalConstants = OpticalConstants()) -> RayMatrix:
    """Thin element modelling the desired postoperative refraction."""
    if not math.isfinite(_val(ref_t)):
        raise DomainError("target refraction must be finite")
    return RayMatrix(1.0, 0.0, consts.ref_sign * ref_t, 1.0)


# ---------------------------------------------------------------------------
# lens geometry and the full system
# ---------------------------------------------------------------------------

def lens_thickness(r, lens: LensModel):
    """Implant center thickness as a function of surface curvature radius.

    The sagitta is evaluated as ``2 a^2 / (r + sqrt(r^2 - a^2))``, which
    is algebraically identical to ``2 (r - sqrt(r^2 - a^2))`` but stays
    accurate for radii much larger than the semi-aperture ``a``.
    """
    rv = _val(r)
    if lens.mode == CONSTANT_THICKNESS:
        return lens.lt_const
    if math.isinf(rv):
        return lens.edge_thickness
    if not rv > lens.semi_aperture:
        raise GeometryError(
            f"radius {rv!r} must exceed the lens semi-aperture {lens.semi_aperture}")
    a2 = lens.semi_aperture * lens.semi_aperture
    return lens.edge_thickness + 2.0 * a2 / (r + _sqrt(r * r - a2))


def system_matrix_parts(r, al, cct, acd_iol, k, ref_t,
                        consts: OpticalConstants = OpticalConstants(),
                        lens: LensModel = LensModel()) -> RayMatrix:
    """System matrix from individual scalar inputs (floats or autodiff nodes).

    ``k`` is the mean cornea curvature radius. The product runs, applied
    right to left onto the incoming ray: target element, vertex gap,
    anterior cornea, cornea body, posterior cornea, anterior chamber,
    implant front, implant body, implant back, posterior chamber.
    """
    lt = lens_thickness(r, lens)
    pcd_iol = al - cct - acd_iol - lt
    if _val(pcd_iol) <= 0.0:
        raise AnatomyError(
            f"posterior chamber depth must be positive, got {_val(pcd_iol)!r}")
    n_v, n_c, n_l = consts.n_v, consts.n_c, consts.n_l
    m = propagation_matrix(pcd_iol)
    m = m @ refraction_matrix(n_l, n_v, -r)
    m = m @ propagation_matrix(lt)
    m = m @ refraction_matrix(n_v, n_l, r)
    m = m @ propagation_matrix(acd_iol)
    m = m @ refraction_matrix(n_c, n_v, consts.gullstrand * k)
    m = m @ propagation_matrix(cct)
    m = m @ refraction_matrix(1.0, n_c, k)
    m = m @ propagation_matrix(consts.d)
    m = m @ target_refraction_matrix(ref_t, consts)
    return m


def system_matrix(r, eye: EyeBiometry, ref_t,
                  consts: OpticalConstants = OpticalConstants(),
                  lens: LensModel = LensModel()) -> RayMatrix:
    """System matrix of the full eye for implant curvature radius ``r``."""
    return system_matrix_parts(r, eye.al, eye.cct, eye.acd_iol, eye.k_mean,
                               ref_t, consts, lens)


def m00(r, eye: EyeBiometry, ref_t,
        consts: OpticalConstants = OpticalConstants(),
        lens: LensModel = LensModel()):
    """Top-left entry of the system matrix.

    Zero exactly when a parallel input ray crosses the axis at the
    retina, i.e. when ``r`` solves the eye for the given target.
    """
    return system_matrix(r, eye, ref_t, consts, lens).m00


def physical_loss(r, eye: EyeBiometry, ref_t,
                  consts: OpticalConstants = OpticalConstants(),
                  lens: LensModel = LensModel()):
    """Squared focusing residual ``m00(r)^2``; nonnegative, zero at a solution."""
    h = m00(r, eye, ref_t, consts, lens)
    return h * h


def thick_lens_power(r, lens: LensModel = LensModel(),
                     consts: OpticalConstants = OpticalConstants()):
    """Implant power from its curvature radius via the thick lens formula.

    ``P(r) = (n_l - n_v) * (2/r - (n_l - n_v) * LT(r) / (n_l * r^2))``
    for an equi-biconvex optic immersed in aqueous/vitreous.
    """
    rv = _val(r)
    if math.isinf(rv):
        return 0.0
    lt = lens_thickness(r, lens)
    dn = lens.n_l - consts.n_v
    return dn * (2.0 / r - dn * lt / (lens.n_l * (r * r)))
