"""Invertible linear transforms along modes 3..d and their energy constant.

The default transform is the unnormalized DFT applied along every mode
beyond the first two (forward has no scaling, the inverse carries the
1/N factor per mode), for which the energy constant phi equals
I3 * ... * Id.  Explicit matrix transforms are supported but restricted
to scaled-unitary matrices so that phi is well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ImaginaryResidueError
from .tensor import mode_product

__all__ = ["Transform", "real_part", "real_if_close", "mirror_slice"]

_RCOND_MIN = 1e-10
_SCALE_TOL = 1e-8


def real_part(x: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Drop the imaginary part after checking it is negligible.

    The check is relative in the Frobenius norm; failure signals an
    inconsistent input (for a DFT-domain tensor: broken conjugate
    symmetry) rather than roundoff.
    """
    if not np.iscomplexobj(x):
        return np.asarray(x, dtype=np.float64)
    total = np.linalg.norm(np.ravel(x))
    residue = np.linalg.norm(np.ravel(x.imag))
    if residue > rel_tol * total:
        raise ImaginaryResidueError(
            f"imaginary residue {residue:.3e} exceeds {rel_tol:g} * {total:.3e}"
        )
    return np.ascontiguousarray(x.real)


def real_if_close(x: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Like :func:`real_part` but returns *x* unchanged when it is genuinely complex."""
    try:
        return real_part(x, rel_tol)
    except ImaginaryResidueError:
        return x


@dataclass(frozen=True)
class Transform:
    """The invertible linear transform L applied along modes 3..d.

    Attributes:
        kind: "dft" or "explicit".
        trailing: sizes (I3, ..., Id) the transform acts on.
        matrices: one matrix per trailing mode ("explicit" only).
        phi: energy constant relating original- and transform-domain
            squared Frobenius norms.
        real_safe: True when L maps real tensors to transforms whose
            round trips (and products of transforms of real tensors)
            are real again.
    """

    kind: str
    trailing: tuple
    phi: float
    real_safe: bool
    matrices: tuple = ()
    _inverses: tuple = field(default=(), repr=False)

    @classmethod
    def dft(cls, trailing) -> "Transform":
        """Unnormalized DFT along each trailing mode; phi = prod(trailing)."""
        trailing = tuple(int(n) for n in trailing)
        if len(trailing) < 1 or any(n < 1 for n in trailing):
            raise ValueError(f"invalid trailing shape {trailing}")
        return cls(kind="dft", trailing=trailing,
                   phi=float(np.prod(trailing)), real_safe=True)

    @classmethod
    def explicit(cls, matrices) -> "Transform":
        """Transform given by one invertible matrix per trailing mode.

        Each matrix must be square, numerically invertible (reciprocal
        condition number above 1e-10) and unitary up to a positive
        scale c (U^H U = c I); the product of the scales is phi.
        """
        mats = tuple(np.asarray(m, dtype=np.complex128) for m in matrices)
        if not mats:
            raise ValueError("explicit transform needs at least one matrix")
        phi = 1.0
        inverses = []
        for m in mats:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"transform matrix must be square, got {m.shape}")
            n = m.shape[0]
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[0] == 0 or sv[-1] / sv[0] < _RCOND_MIN:
                raise ValueError(
                    f"transform matrix is numerically singular "
                    f"(rcond {0.0 if sv[0] == 0 else sv[-1] / sv[0]:.2e})"
                )
            gram = m.conj().T @ m
            c = float(np.trace(gram).real) / n
            if c <= 0 or np.linalg.norm(gram - c * np.eye(n)) > _SCALE_TOL * c * np.sqrt(n):
                raise ValueError(
                    "transform matrix is not unitary up to scale; "
                    "the energy constant phi would be undefined"
                )
            phi *= c
            inverses.append(np.linalg.inv(m))
        real_safe = all(np.linalg.norm(m.imag) == 0.0 for m in mats)
        return cls(kind="explicit", trailing=tuple(m.shape[0] for m in mats),
                   phi=phi, real_safe=real_safe, matrices=mats,
                   _inverses=tuple(inverses))

    def _check_shape(self, x: np.ndarray) -> None:
        if x.ndim != 2 + len(self.trailing) or x.shape[2:] != self.trailing:
            raise ValueError(
                f"tensor shape {x.shape} does not match transform trailing "
                f"shape {self.trailing}"
            )

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Apply L along modes 3..d; the result is complex128."""
        self._check_shape(x)
        if self.kind == "dft":
            return np.fft.fftn(x, axes=tuple(range(2, x.ndim)))
        out = np.asarray(x, dtype=np.complex128)
        for i, m in enumerate(self.matrices):
            out = mode_product(out, m, 2 + i)
        return out

    def inverse(self, xbar: np.ndarray, assert_real: bool = False,
                rel_tol: float = 1e-8) -> np.ndarray:
        """Apply L^-1 along modes d..3.

        With ``assert_real`` the imaginary residue is checked against
        *rel_tol* (relative Frobenius) and dropped; a residue above the
        threshold raises :class:`ImaginaryResidueError`.
        """
        self._check_shape(xbar)
        if self.kind == "dft":
            out = np.fft.ifftn(xbar, axes=tuple(range(2, xbar.ndim)))
        else:
            out = np.asarray(xbar, dtype=np.complex128)
            for i in range(len(self.matrices) - 1, -1, -1):
                out = mode_product(out, self._inverses[i], 2 + i)
        if assert_real:
            return real_part(out, rel_tol)
        return out


def mirror_slice(index, trailing) -> tuple:
    """Trailing index whose DFT slice is the conjugate of the given one.

    Per mode, index 0 maps to itself and i > 0 maps to I - i.
    """
    return tuple((n - i) % n for i, n in zip(index, trailing))
