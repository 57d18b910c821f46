"""Bivariate response data with named covariates and design-matrix builders."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def _is_categorical(col: np.ndarray) -> bool:
    return col.dtype.kind in "OUS"


class Dataset:
    """Positive bivariate responses plus named numeric or categorical covariates.

    Parameters
    ----------
    y : array_like, shape (n, 2), or None
        Strictly positive responses. ``None`` gives a covariate-only table
        for prediction.
    covariates : dict, optional
        Column name to 1-D array. Arrays of strings or objects are treated as
        categorical and dummy coded against their first-observed level.
    """

    def __init__(self, y, covariates=None):
        covariates = dict(covariates or {})
        if y is None:
            if not covariates:
                raise DataError("a dataset without responses needs covariates")
            n = len(next(iter(covariates.values())))
        else:
            y = np.asarray(y, dtype=float)
            if y.ndim != 2 or y.shape[1] != 2:
                raise DataError("responses must have shape (n, 2)")
            n = y.shape[0]
            if not np.all(np.isfinite(y)):
                raise DataError("responses must be finite")
            bad = np.flatnonzero(np.any(y <= 0, axis=1))
            if bad.size:
                raise DataError(f"non-positive response in row {int(bad[0]) + 1}")
        if n < 1:
            raise DataError("dataset is empty")
        self.y = y
        self._n = n
        self.columns = {}
        for name, col in covariates.items():
            if name in ("y1", "y2"):
                raise DataError(f"covariate name {name!r} clashes with a response")
            col = np.asarray(col)
            if col.shape != (n,):
                raise DataError(f"covariate {name!r} has the wrong length")
            if not _is_categorical(col):
                col = col.astype(float)
                if not np.all(np.isfinite(col)):
                    raise DataError(f"covariate {name!r} has non-finite values")
            else:
                col = col.astype(str)
            self.columns[name] = col

    @property
    def n(self) -> int:
        return self._n

    @property
    def has_responses(self) -> bool:
        return self.y is not None

    @property
    def y1(self):
        return self.y[:, 0]

    @property
    def y2(self):
        return self.y[:, 1]

    @property
    def names(self):
        return list(self.columns)

    def is_categorical(self, name: str) -> bool:
        return _is_categorical(self.columns[name])

    def levels(self, name: str):
        return list(dict.fromkeys(self.columns[name].tolist()))

    def encodings(self, names):
        """Level lists of the categorical columns among ``names``."""
        self._require(names)
        return {nm: self.levels(nm) for nm in names if self.is_categorical(nm)}

    def _require(self, names):
        for nm in names:
            if nm not in self.columns:
                raise DataError(f"unknown covariate column {nm!r}")

    def design(self, names, encodings=None):
        """Design matrix with a leading intercept column.

        Returns ``(X, column_labels)``. A categorical column with ``L`` levels
        contributes ``L - 1`` indicator columns; ``encodings`` fixes the level
        lists (for prediction on new data).
        """
        names = list(names)
        self._require(names)
        enc = dict(self.encodings(names))
        if encodings:
            enc.update({k: v for k, v in encodings.items() if k in enc})
        cols = [np.ones(self.n)]
        labels = ["(intercept)"]
        for nm in names:
            col = self.columns[nm]
            if nm in enc:
                levels = list(enc[nm])
                unseen = set(col.tolist()) - set(levels)
                if unseen:
                    raise DataError(f"column {nm!r} has unseen level {sorted(unseen)[0]!r}")
                for lev in levels[1:]:
                    cols.append((col == lev).astype(float))
                    labels.append(f"{nm}={lev}")
            else:
                cols.append(col)
                labels.append(nm)
        return np.column_stack(cols), labels

    def subset(self, idx):
        idx = np.asarray(idx)
        y = None if self.y is None else self.y[idx]
        return Dataset(y, {k: v[idx] for k, v in self.columns.items()})

    def __eq__(self, other):
        if not isinstance(other, Dataset) or self.names != other.names:
            return False
        if (self.y is None) != (other.y is None):
            return False
        same_y = self.y is None or np.array_equal(self.y, other.y)
        return same_y and all(
            np.array_equal(self.columns[k], other.columns[k]) for k in self.columns
        )

    def __repr__(self):
        return f"Dataset(n={self.n}, covariates={self.names})"
