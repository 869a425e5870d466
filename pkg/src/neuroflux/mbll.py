"""Modified Beer-Lambert conversion of optical density to hemoglobin.

Per sample and channel the two-wavelength system

    dOD(l) / (d * DPF(l)) = eps_HbO(l) * dHbO + eps_HbR(l) * dHbR

is solved exactly. Extinction coefficients are decadic, in 1/(mM cm), so the
optical densities must be decadic as well (``-log10(I / I0)``) and the result
is in mM.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import TimeSeries, _frozen
from .errors import LengthMismatch, SingularExtinction

DET_TOL = 1e-6


@dataclass(frozen=True)
class OpticalConfig:
    """Optical constants for one source-detector geometry.

    Attributes
    ----------
    wavelengths : tuple of float
        ``(l1, l2)`` in nm.
    extinction : ndarray, shape (2, 2)
        ``extinction[wavelength, species]`` with species order ``(HbO, HbR)``.
    dpf : tuple of float
        Differential pathlength factor at each wavelength.
    separation : float
        Source-detector distance in cm.
    """

    wavelengths: tuple
    extinction: np.ndarray
    dpf: tuple
    separation: float

    def __post_init__(self):
        eps = np.asarray(self.extinction, dtype=float)
        if eps.shape != (2, 2):
            raise SingularExtinction(f"extinction must be 2x2, got {eps.shape}")
        object.__setattr__(self, "extinction", _frozen(eps))
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))
        dpf = np.broadcast_to(np.asarray(self.dpf, dtype=float), (2,))
        object.__setattr__(self, "dpf", tuple(float(v) for v in dpf))
        object.__setattr__(self, "separation", float(self.separation))

    def validate(self):
        if not abs(np.linalg.det(self.extinction)) > DET_TOL:
            raise SingularExtinction(
                f"|det(extinction)| = {abs(np.linalg.det(self.extinction)):.3g} <= {DET_TOL}")
        if not self.separation > 0:
            raise ValueError(f"separation must be positive, got {self.separation}")
        if not all(v > 0 for v in self.dpf):
            raise ValueError(f"DPF must be positive, got {self.dpf}")
        return self

    @property
    def system(self):
        """Matrix ``M`` with ``dOD = M @ [dHbO, dHbR]``."""
        path = self.separation * np.asarray(self.dpf)
        return self.extinction * path[:, None]

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["wavelengths"]), np.asarray(d["extinction"]), tuple(d["dpf"]),
                   float(d["separation"]))

    def to_dict(self):
        return {"wavelengths": list(self.wavelengths), "extinction": self.extinction.tolist(),
                "dpf": list(self.dpf), "separation": self.separation}

    @classmethod
    def default(cls):
        """Literature constants for 760/850 nm, DPF 6, 3 cm separation."""
        from importlib import resources
        text = resources.files("neuroflux").joinpath("data/optical_defaults.json").read_text()
        return cls.from_dict(json.loads(text))


def intensity_to_od(intensity, baseline=None):
    """Decadic optical density change relative to `baseline` (default: mean)."""
    arr = np.asarray(intensity, dtype=float)
    ref = arr.mean(axis=-1, keepdims=True) if baseline is None else baseline
    return -np.log10(arr / ref)


def od_to_hemoglobin(od1, od2, cfg):
    """Convert optical density changes at two wavelengths to dHbO, dHbR.

    Parameters
    ----------
    od1, od2 : TimeSeries or array_like
        Optical density change at ``cfg.wavelengths[0]`` and ``[1]``. Arrays of
        any (equal) shape are converted elementwise.
    cfg : OpticalConfig

    Returns
    -------
    hbo, hbr
        Same type as the inputs, in mM.
    """
    cfg.validate()
    ts = isinstance(od1, TimeSeries)
    if ts != isinstance(od2, TimeSeries):
        raise LengthMismatch("both wavelengths must be given as the same type")
    if ts:
        if len(od1) != len(od2) or od1.fs != od2.fs:
            raise LengthMismatch("wavelength series differ in length or sampling rate")
        a, b = np.asarray(od1.samples), np.asarray(od2.samples)
    else:
        a, b = np.asarray(od1, dtype=float), np.asarray(od2, dtype=float)
        if a.shape != b.shape:
            raise LengthMismatch(f"shapes {a.shape} and {b.shape} differ")
    rhs = np.stack([a.reshape(-1), b.reshape(-1)])
    conc = np.linalg.solve(cfg.system, rhs)
    hbo, hbr = conc[0].reshape(a.shape), conc[1].reshape(a.shape)
    if ts:
        return TimeSeries(hbo, od1.fs, "mM"), TimeSeries(hbr, od1.fs, "mM")
    return hbo, hbr


def hemoglobin_to_od(hbo, hbr, cfg):
    """Forward model: optical density changes produced by dHbO, dHbR."""
    m = cfg.system
    hbo, hbr = np.asarray(hbo, dtype=float), np.asarray(hbr, dtype=float)
    return m[0, 0] * hbo + m[0, 1] * hbr, m[1, 0] * hbo + m[1, 1] * hbr
