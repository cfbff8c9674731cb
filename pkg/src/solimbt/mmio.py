"""Model bundles on disk: Matrix Market matrices plus a JSON header.

A bundle directory holds ``M.mtx``, ``E.mtx``, ``K.mtx`` (coordinate format,
usually sparse), ``B.mtx``, ``Cp.mtx``, ``Cv.mtx`` (array format) and
``system.json`` with ``{n, m, p, name}``.  Values are written with 17
significant digits so a write/read cycle reproduces every float bit-exactly.
"""

import json
import os

import numpy as np
import scipy.io
import scipy.sparse

from .errors import DimensionMismatch, IoError
from .system import make_second_order

_SPARSE = ("M", "E", "K")
_DENSE = ("B", "Cp", "Cv")


def save_bundle(directory, sys, name="model"):
    """Write a second-order system as a model bundle.

    Deterministic: identical systems produce identical bytes.
    """
    try:
        os.makedirs(directory, exist_ok=True)
        for key, A in (("M", sys.M), ("E", sys.E), ("K", sys.K)):
            scipy.io.mmwrite(os.path.join(directory, key + ".mtx"),
                             scipy.sparse.coo_matrix(A), precision=17)
        for key, A in (("B", sys.B_u), ("Cp", sys.C_p), ("Cv", sys.C_v)):
            scipy.io.mmwrite(os.path.join(directory, key + ".mtx"),
                             np.asarray(A), precision=17)
        header = {"m": sys.m, "n": sys.n, "name": name, "p": sys.p}
        with open(os.path.join(directory, "system.json"), "w") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write bundle to {directory}: {exc}") from exc


def load_bundle(directory):
    """Read a model bundle back; returns ``(system, name)``.

    Raises
    ------
    IoError
        On missing or unreadable files.
    DimensionMismatch
        If the matrices disagree with the JSON header.
    """
    try:
        with open(os.path.join(directory, "system.json")) as fh:
            header = json.load(fh)
        mats = {}
        for key in _SPARSE + _DENSE:
            A = scipy.io.mmread(os.path.join(directory, key + ".mtx"))
            if scipy.sparse.issparse(A):
                A = A.toarray()
            mats[key] = np.asarray(A, dtype=float)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read bundle from {directory}: {exc}") from exc
    sys = make_second_order(mats["M"], mats["E"], mats["K"],
                            mats["B"], mats["Cp"], mats["Cv"])
    for key, val in (("n", sys.n), ("m", sys.m), ("p", sys.p)):
        if header.get(key) != val:
            raise DimensionMismatch(
                f"bundle header {key}={header.get(key)} but matrices give {val}")
    return sys, header.get("name", "model")
