"""
Data Service
Unit-level tables: the Dataset type and CSV ingestion
"""

import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.utils.errors import DataError, ValidationError
from src.utils.validation import ensure_valid, validate_path, validate_permutation

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcome Y, treatment A and covariates L (n x p, p may be 0) for n units"""

    y: np.ndarray
    a: np.ndarray
    L: np.ndarray
    covariate_names: Tuple[str, ...] = ()
    outcome_name: str = "Y"
    treatment_name: str = "A"

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        a = np.array(self.a, dtype=float).ravel()
        L = np.array(self.L, dtype=float)
        if L.ndim == 1:
            L = L.reshape(-1, 1) if L.size else np.zeros((y.shape[0], 0))
        if y.shape[0] != a.shape[0] or L.shape[0] != y.shape[0]:
            raise ValidationError(
                f"dataset dimensions disagree: Y {y.shape[0]}, A {a.shape[0]}, L {L.shape[0]} rows"
            )
        names = tuple(self.covariate_names) or tuple(f"L{j + 1}" for j in range(L.shape[1]))
        if len(names) != L.shape[1]:
            raise ValidationError(f"{len(names)} covariate names for {L.shape[1]} covariate columns")
        for array in (y, a, L):
            array.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def permute(self, perm: Sequence[int]) -> "Dataset":
        """Unit perm[i] of the result is unit i of this dataset."""
        ensure_valid(validate_permutation(perm, self.n))
        inverse = np.argsort(np.asarray(perm, dtype=int))
        return Dataset(
            y=self.y[inverse],
            a=self.a[inverse],
            L=self.L[inverse],
            covariate_names=self.covariate_names,
            outcome_name=self.outcome_name,
            treatment_name=self.treatment_name,
        )


class DataService:
    """Service for reading unit tables"""

    def read_table(self, path: str, allow_empty: bool = False) -> pd.DataFrame:
        """Read a headed CSV as strings so bad cells can be reported by line"""
        ensure_valid(validate_path(path, must_exist=True, must_be_file=True), DataError)
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        except pd.errors.EmptyDataError:
            if allow_empty:
                return pd.DataFrame()
            raise DataError(f"{path} is empty")
        except (pd.errors.ParserError, UnicodeDecodeError) as exc:
            raise DataError(f"could not parse {path}: {exc}")
        frame.columns = [str(c).strip() for c in frame.columns]
        logger.debug(f"Read {len(frame)} rows x {len(frame.columns)} columns from {path}")
        return frame

    @staticmethod
    def numeric_column(frame: pd.DataFrame, column: str, path: str = "data") -> np.ndarray:
        """
        Convert one column to floats
        
        Raises:
            DataError naming the first offending file line (header is line 1)
        """
        if column not in frame.columns:
            raise DataError(f"{path}: missing column {column!r} (have: {', '.join(frame.columns)})")
        raw = frame[column].astype(str).str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            position = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataError(
                f"{path}: column {column!r} value {raw.iloc[position]!r} is not a finite number",
                line=position + 2,
            )
        return values.to_numpy(dtype=float)

    def load_dataset(
        self,
        path: str,
        outcome: str,
        treatment: str,
        covariates: Sequence[str],
        degree_column: Optional[str] = None,
    ) -> Tuple[Dataset, Optional[np.ndarray]]:
        """
        Load a unit table
        
        Args:
            path: CSV with a header row and one row per unit
            outcome: Outcome column name
            treatment: Treatment column name
            covariates: Covariate column names (may be empty)
            degree_column: Optional observed weighted-degree column
            
        Returns:
            Tuple of (dataset, degrees or None)
        """
        frame = self.read_table(path)
        if frame.empty:
            raise DataError(f"{path} has a header but no rows")
        name = os.path.basename(path)
        y = self.numeric_column(frame, outcome, name)
        a = self.numeric_column(frame, treatment, name)
        columns: List[np.ndarray] = [self.numeric_column(frame, c, name) for c in covariates]
        L = np.column_stack(columns) if columns else np.zeros((len(frame), 0))
        degrees = None
        if degree_column:
            degrees = self.numeric_column(frame, degree_column, name)
        dataset = Dataset(
            y=y,
            a=a,
            L=L,
            covariate_names=tuple(covariates),
            outcome_name=outcome,
            treatment_name=treatment,
        )
        logger.info(f"Loaded {dataset.n} units with {len(covariates)} covariates from {name}")
        return dataset, degrees
